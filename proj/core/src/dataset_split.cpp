#include <algorithm>
#include <numeric>
#include <random>
#include <unordered_map>

#include "relkit/data_model.hpp"
#include "relkit/error.hpp"

namespace relkit {
namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

// Returns, for each weight, whether it goes to the first side. The first side's
// total is the reachable subset sum closest to (and not above) half the total.
std::vector<bool> balance_by_subset_sum(const std::vector<std::size_t>& weights) {
  const std::size_t total = std::accumulate(weights.begin(), weights.end(), std::size_t{0});
  const std::size_t half = total / 2;
  const std::size_t n = weights.size();
  std::vector<bool> first(n, false);

  // Exact DP when affordable, largest-first greedy otherwise.
  if (static_cast<double>(n) * static_cast<double>(half + 1) > 4.0e8) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weights[a] > weights[b]; });
    std::size_t sa = 0, sb = 0;
    for (auto i : order) {
      if (sa <= sb) {
        first[i] = true;
        sa += weights[i];
      } else {
        sb += weights[i];
      }
    }
    if (sa > sb) first.flip();
    return first;
  }

  std::vector<std::vector<bool>> reach(n + 1, std::vector<bool>(half + 1, false));
  reach[0][0] = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prev = reach[i];
    auto& cur = reach[i + 1];
    cur = prev;
    for (std::size_t s = weights[i]; s <= half; ++s) {
      if (prev[s - weights[i]]) cur[s] = true;
    }
  }
  std::size_t s = half;
  while (!reach[n][s]) --s;
  for (std::size_t i = n; i-- > 0;) {
    if (reach[i][s]) continue;
    first[i] = true;
    s -= weights[i];
  }
  return first;
}

}  // namespace

std::pair<Dataset, Dataset> split_validation_test(const Dataset& test_portion, std::uint64_t seed) {
  // Index pairs that carry at least one record.
  std::vector<std::string> pair_ids;
  std::unordered_map<std::string, std::size_t> pair_index;
  std::vector<std::size_t> evals;
  for (const auto& r : test_portion.records) {
    auto [it, fresh] = pair_index.emplace(r.pair_id, pair_ids.size());
    if (fresh) {
      pair_ids.push_back(r.pair_id);
      evals.push_back(0);
    }
    ++evals[it->second];
  }
  if (pair_ids.size() < 2) throw DataError("split needs at least two rated pairs");

  DisjointSets sets(pair_ids.size());
  std::unordered_map<std::string, std::size_t> by_audio, by_text;
  for (std::size_t i = 0; i < pair_ids.size(); ++i) {
    const auto& p = test_portion.pair(pair_ids[i]);
    if (auto [it, fresh] = by_audio.emplace(p.audio_ref, i); !fresh) sets.unite(i, it->second);
    if (auto [it, fresh] = by_text.emplace(p.text, i); !fresh) sets.unite(i, it->second);
  }

  std::map<std::size_t, std::size_t> root_to_component;
  std::vector<std::size_t> component_of(pair_ids.size());
  std::vector<std::size_t> weights;
  for (std::size_t i = 0; i < pair_ids.size(); ++i) {
    auto root = sets.find(i);
    auto [it, fresh] = root_to_component.emplace(root, weights.size());
    if (fresh) weights.push_back(0);
    component_of[i] = it->second;
    weights[it->second] += evals[i];
  }
  if (weights.size() < 2) {
    throw DataError("cannot split: all pairs share audio or text in a single connected component");
  }

  // Seeded Fisher-Yates over component order; the DP prefers later components
  // when several partitions are equally balanced.
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng() % (i + 1)]);
  }
  std::vector<std::size_t> shuffled(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) shuffled[i] = weights[order[i]];
  auto first_shuffled = balance_by_subset_sum(shuffled);
  std::vector<bool> in_validation(weights.size());
  for (std::size_t i = 0; i < order.size(); ++i) in_validation[order[i]] = first_shuffled[i];

  std::unordered_map<std::string_view, bool> pair_to_validation;
  for (std::size_t i = 0; i < pair_ids.size(); ++i)
    pair_to_validation.emplace(pair_ids[i], in_validation[component_of[i]]);

  auto validation = filter_records(test_portion, [&](const EvaluationRecord& r) {
    return pair_to_validation.at(r.pair_id);
  });
  auto test = filter_records(test_portion, [&](const EvaluationRecord& r) {
    return !pair_to_validation.at(r.pair_id);
  });
  return {std::move(validation), std::move(test)};
}

}  // namespace relkit
