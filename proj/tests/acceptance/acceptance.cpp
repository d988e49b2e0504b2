// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any fails.
#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "CLI11.hpp"
#include "counts_dataset.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "relkit/art_anova.hpp"
#include "relkit/data_model.hpp"
#include "relkit/error.hpp"
#include "relkit/eval_metrics.hpp"
#include "relkit/fixture.hpp"
#include "relkit/predictor/losses.hpp"
#include "relkit/rng.hpp"
#include "relkit/screening.hpp"
#include "relkit/special_functions.hpp"
#include "relkit/stats.hpp"

namespace fs = std::filesystem;
using namespace relkit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---- rank metrics --------------------------------------------------------

std::vector<double> naive_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

std::optional<double> naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> naive_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  double c = 0, d = 0, tx = 0, ty = 0, n0 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      ++n0;
      const double s = (x[i] - x[j]) * (y[i] - y[j]);
      tx += x[i] == x[j];
      ty += y[i] == y[j];
      c += s > 0;
      d += s < 0;
    }
  }
  if (n0 == tx || n0 == ty) return std::nullopt;
  return (c - d) / std::sqrt((n0 - tx) * (n0 - ty));
}

bool agree(const std::optional<double>& a, const std::optional<double>& b, double tol, double& worst) {
  if (a.has_value() != b.has_value()) return false;
  if (a) worst = std::max(worst, std::fabs(*a - *b));
  return !a || std::fabs(*a - *b) <= tol;
}

Outcome rank_metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  rng::Engine e(101);
  double worst = 0.0;
  int mismatches = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 2 + rng::below(e, 11);
    const bool ties = rep % 2 == 0;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = ties ? static_cast<double>(rng::below(e, 4)) : rng::normal(e);
      y[i] = ties ? static_cast<double>(rng::below(e, 4)) : x[i] + rng::normal(e);
    }
    const auto lcc = pearson(x, y);
    const auto srcc = spearman(x, y);
    const auto ktau = kendall_tau_b(x, y);
    if (!agree(lcc, naive_pearson(x, y), 1e-10, worst)) ++mismatches;
    if (!agree(srcc, naive_pearson(naive_ranks(x), naive_ranks(y)), 1e-10, worst)) ++mismatches;
    if (!agree(ktau, naive_tau_b(x, y), 1e-10, worst)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt("1000 cases, %d mismatches, max |diff| %.2e, %.2f s", mismatches, worst, secs)};
}

// ---- Mann-Whitney --------------------------------------------------------

double brute_u(const Sample& a, const Sample& b) {
  double u = 0.0;
  for (double x : a) {
    for (double y : b) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

Outcome mann_whitney_exactness() {
  // U against pair counting on tied and tie-free samples of every size pair.
  rng::Engine e(202);
  int u_mismatch = 0;
  for (std::size_t na = 1; na <= 7; ++na) {
    for (std::size_t nb = 1; nb <= 7; ++nb) {
      for (int rep = 0; rep < 40; ++rep) {
        Sample a(na), b(nb);
        const bool ties = rep % 2 == 0;
        for (auto& v : a) v = ties ? static_cast<double>(rng::below(e, 4)) : rng::normal(e);
        for (auto& v : b) v = ties ? static_cast<double>(rng::below(e, 4)) : rng::normal(e);
        try {
          if (mann_whitney_u(a, b).statistic != brute_u(a, b)) ++u_mismatch;
        } catch (const NumericError&) {
          // every value identical: no test defined
        }
      }
    }
  }

  // p against the exact permutation p over every tie-free configuration.
  double worst = 0.0;
  std::size_t worst_a = 0, worst_b = 0;
  std::vector<std::string> failing;
  for (std::size_t na = 1; na <= 7; ++na) {
    for (std::size_t nb = na; nb <= 7; ++nb) {
      const std::size_t n = na + nb;
      std::vector<bool> pick(n, false);
      std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(na), true);
      std::vector<std::pair<Sample, Sample>> configs;
      std::vector<double> us;
      do {
        Sample a, b;
        for (std::size_t i = 0; i < n; ++i) (pick[i] ? a : b).push_back(static_cast<double>(i + 1));
        us.push_back(brute_u(a, b));
        configs.emplace_back(std::move(a), std::move(b));
      } while (std::prev_permutation(pick.begin(), pick.end()));
      const double center = static_cast<double>(na * nb) / 2.0;
      double size_worst = 0.0;
      for (std::size_t c = 0; c < configs.size(); ++c) {
        const double dev = std::fabs(us[c] - center);
        const auto extreme = std::count_if(us.begin(), us.end(),
                                           [&](double u) { return std::fabs(u - center) >= dev - 1e-12; });
        const double exact = static_cast<double>(extreme) / static_cast<double>(us.size());
        const double gap = std::fabs(mann_whitney_u(configs[c].first, configs[c].second).p_value - exact);
        size_worst = std::max(size_worst, gap);
      }
      if (size_worst > 0.03) failing.push_back(fmt("%zux%zu:%.3f", na, nb, size_worst));
      if (size_worst > worst) worst = size_worst, worst_a = na, worst_b = nb;
    }
  }
  std::string list;
  for (const auto& f : failing) list += (list.empty() ? "" : " ") + f;
  return {u_mismatch == 0 && failing.empty(),
          fmt("U mismatches %d; p gap max %.4f at %zux%zu; %zu of 28 size pairs exceed 0.03", u_mismatch, worst,
              worst_a, worst_b, failing.size()) +
              (failing.empty() ? "" : " [" + list + "]")};
}

Outcome kruskal_wallis_golden() {
  const auto r = kruskal_wallis({{1, 2}, {3, 4}, {5, 6}});
  // Sum of R^2 / n is 89.5, so H = 12 / 42 * 89.5 - 21 = 32 / 7.
  const double h = 12.0 / 42.0 * 89.5 - 21.0;
  return {std::fabs(r.statistic - h) <= 1e-9 && std::fabs(r.statistic - 4.5714) < 5e-5,
          fmt("H = %.12f (hand value %.12f)", r.statistic, h)};
}

Outcome steel_dwass_reduction() {
  rng::Engine e(303);
  double worst_z = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    Sample a(3 + rng::below(e, 10)), b(3 + rng::below(e, 10));
    for (auto& v : a) v = std::round(2.0 * rng::normal(e));
    for (auto& v : b) v = std::round(2.0 * rng::normal(e) + 1.0);
    const auto sd = steel_dwass({a, b});
    const auto mw = mann_whitney_u(a, b);
    worst_z = std::max(worst_z, std::fabs(sd.at(0).statistic - *mw.z));
  }
  double worst_tail = 0.0;
  for (double q = 0.0; q <= 8.0; q += 0.05) {
    const double tail = special::studentized_range_sf(q, 2);
    worst_tail = std::max(worst_tail, std::fabs(tail - 2.0 * special::normal_sf(q / std::sqrt(2.0))));
  }
  return {worst_z <= 1e-9 && worst_tail <= 1e-6,
          fmt("max |t - z| %.2e over 200 pairs; max tail gap %.2e over q in [0, 8]", worst_z, worst_tail)};
}

Outcome art_properties() {
  TwoWayDesign d;
  d.levels_a = 3;
  d.levels_b = 2;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int k = 0; k < 20; ++k) {
        d.a.push_back(a);
        d.b.push_back(b);
      }
    }
  }
  double worst_f = 0.0, worst_sum = 0.0;
  int detected = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    rng::Engine e(seed);
    std::vector<double> y(d.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng::normal(e) + 0.8 * d.a[i] - 1.2 * d.b[i] + (d.a[i] == 1 && d.b[i] == 0 ? 1.5 : 0.0);
    }
    for (auto effect : {ArtEffect::kA, ArtEffect::kB, ArtEffect::kInteraction}) {
      const auto aligned = align_responses(y, d, effect);
      double s = 0.0;
      for (double v : aligned) s += v;
      worst_sum = std::max(worst_sum, std::fabs(s));
      const auto t = factorial_anova(aligned, d);
      for (auto other : {ArtEffect::kA, ArtEffect::kB, ArtEffect::kInteraction}) {
        if (other != effect) worst_f = std::max(worst_f, t.get(other).statistic);
      }
    }
    // Planted B main effect only.
    std::vector<double> planted(d.size());
    for (std::size_t i = 0; i < planted.size(); ++i) planted[i] = rng::normal(e) + (d.b[i] == 1 ? 1.0 : 0.0);
    if (art_anova_2x(planted, d).effect_b.p_value < 0.01) ++detected;
  }
  return {worst_f <= 1e-8 && worst_sum <= 1e-8 && detected >= 95,
          fmt("max non-target F %.2e, max |sum| %.2e, planted effect detected in %d/100", worst_f, worst_sum,
              detected)};
}

Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto c = test_support::random_grad_case(1000 + seed, 3 + seed % 2);
    test_support::straddle_kinks(c);
    const auto r = test_support::check_gradients(c, 1e-4);
    if (r.worst_relative_error > worst) {
      worst = r.worst_relative_error;
      where = fmt("config %llu, %s", static_cast<unsigned long long>(seed), r.worst_tensor.c_str());
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 60.0, fmt("20 configs, max relative error %.2e (%s), %.1f s", worst, where.c_str(), secs)};
}

Outcome cbl_values() {
  using predictor::cbl_weight;
  bool monotone = true;
  for (std::size_t n = 1; n < 1000; ++n) monotone = monotone && cbl_weight(n + 1, 0.99) < cbl_weight(n, 0.99);
  const double e100 = cbl_weight(100, 0.99);
  return {cbl_weight(1, 0.99) == 1.0 && std::fabs(e100 - 0.015774) <= 1e-6 && monotone,
          fmt("E(1) = %.17g, E(100) = %.9f, strictly decreasing to n = 1000: %s", cbl_weight(1, 0.99), e100,
              monotone ? "yes" : "no")};
}

// Recomputes each retained listener's statistics from the unscreened records.
Outcome screening_thresholds(const Dataset& fixture) {
  std::string detail;
  bool ok = true;
  auto audit_anchor = [&](const Dataset& raw, const ScreeningResult& r, double threshold, const char* name) {
    int violations = 0;
    for (const auto& [id, l] : r.kept.listeners) {
      const auto m = anchor_mean(raw, MetricKind::kRel, id);
      if (m && *m >= threshold) ++violations;
    }
    ok = ok && violations == 0;
    detail += fmt("%s: %zu kept, %d anchor violations; ", name, r.kept.listeners.size(), violations);
  };
  const Dataset rel = restrict_to_metric(fixture, MetricKind::kRel);
  const auto policy = ScreeningPolicy::analysis();
  const auto analysis = screen(rel, MetricKind::kRel, policy);
  audit_anchor(rel, analysis, policy.anchor_mean_exclude_at, "analysis");
  int low_original = 0;
  for (const auto& [id, l] : analysis.kept.listeners) {
    const auto m = original_mean(rel, MetricKind::kRel, id);
    if (m && *m <= *policy.original_mean_exclude_at_or_below) ++low_original;
  }
  std::size_t stage12 = 0, entropy = 0;
  for (const auto& x : analysis.excluded) {
    if (x.reason == ExclusionReason::kLowEntropy) ++entropy;
    else ++stage12;
  }
  const std::size_t survivors = rel.listeners.size() - stage12;
  const auto expected = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(survivors) + 1e-9));
  ok = ok && low_original == 0 && entropy == expected;
  detail += fmt("original-mean violations %d; entropy removals %zu (floor(0.05 x %zu) = %zu); ", low_original, entropy,
                survivors, expected);
  for (auto split : {Split::kTrain, Split::kTest}) {
    const Dataset part = restrict_to_split(rel, split);
    const auto p = split == Split::kTrain ? ScreeningPolicy::train() : ScreeningPolicy::test();
    audit_anchor(part, screen(part, MetricKind::kRel, p), p.anchor_mean_exclude_at,
                 split == Split::kTrain ? "train" : "test");
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = cli + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct RunAllOutputs {
  bool ok = false;
  double seconds = 0.0;
  std::string error;
};

RunAllOutputs run_all_cli(const std::string& cli, const fs::path& source, const fs::path& fixture,
                          const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string args = "run-all --data " + (fixture / "dataset").string() + " --features-dir " +
                           (fixture / "features").string() + " --clap-audio-dir " + (fixture / "clap/audio").string() +
                           " --clap-text-dir " + (fixture / "clap/text").string() + " --model-config " +
                           (source / "configs/fixture/model.conf").string() + " --train-config " +
                           (source / "configs/fixture/train.conf").string() + " --seed 7 --out " + out.string();
  RunAllOutputs r;
  const int code = run_cli(cli, args, out.string() + ".log");
  r.seconds = seconds_since(t0);
  r.ok = code == 0;
  if (!r.ok) r.error = fmt("run-all exited %d: ", code) + slurp(out.string() + ".log");
  return r;
}

Outcome learnability(const fs::path& bundle, const RunAllOutputs& run) {
  if (!run.ok) return {false, run.error};
  const auto model = nlohmann::json::parse(slurp(bundle / "report.json"));
  const auto clap = nlohmann::json::parse(slurp(bundle / "clap_report.json"));
  const auto& m = model["metrics"];
  const auto& c = clap["metrics"];
  if (m["srcc"].is_null() || c["srcc"].is_null()) return {false, "undefined SRCC"};
  const double srcc = m["srcc"];
  const double base = c["srcc"];
  return {srcc >= 0.8 && srcc >= base + 0.05 && run.seconds <= 600.0,
          fmt("held-out SRCC %.4f over %d pairs, cosine baseline %.4f, run-all %.1f s", srcc, m["n"].get<int>(), base,
              run.seconds)};
}

Outcome determinism(const fs::path& a, const fs::path& b, const RunAllOutputs& ra, const RunAllOutputs& rb) {
  if (!ra.ok || !rb.ok) return {false, ra.ok ? rb.error : ra.error};
  std::vector<std::string> differing;
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(entry.path(), a);
    if (slurp(entry.path()) != slurp(b / rel)) differing.push_back(rel.string());
  }
  const bool key_files = slurp(a / "report.json") == slurp(b / "report.json") &&
                         slurp(a / "checkpoint.rkpt") == slurp(b / "checkpoint.rkpt");
  std::string list;
  for (const auto& d : differing) list += " " + d;
  return {key_files && differing.empty(),
          fmt("%zu bundle files compared, %zu differ", files, differing.size()) + list};
}

Outcome dataset_statistics(const fs::path& source, const fs::path& work) {
  const auto counts = nlohmann::json::parse(slurp(source / "tests/acceptance/data/published_counts.json"));
  using test_support::dataset_from_counts;
  using test_support::numbered_ids;
  auto summary_of = [](const nlohmann::json& j) {
    return StatsSummary{j["evaluations"], j["pairs"], j["duration_s"].get<double>(), j["listeners"]};
  };

  Dataset all;
  for (const auto& cell : counts["cells"]) {
    const auto metric = parse_metric(cell["metric"].get<std::string>());
    const auto split = parse_split(cell["split"].get<std::string>());
    if (metric == MetricKind::kRel && split == Split::kTest) continue;  // built from its partition below
    const std::string prefix = cell["metric"].get<std::string>() + "_" + cell["split"].get<std::string>();
    const auto s = summary_of(cell);
    all = merge(all, dataset_from_counts(prefix, metric, split, s.evaluations, s.pairs,
                                         static_cast<std::size_t>(s.duration_s), numbered_ids(prefix, 0, s.listeners)));
  }

  // The test portion is the union of the validation and test subsets; they
  // share listeners but no pairs.
  const auto& part = counts["rel_test_partition"];
  const auto val = summary_of(part["validation"]);
  const auto tst = summary_of(part["test"]);
  StatsSummary rel_test;
  for (const auto& cell : counts["cells"]) {
    if (cell["metric"] == "REL" && cell["split"] == "test") rel_test = summary_of(cell);
  }
  const std::size_t shared = val.listeners + tst.listeners - rel_test.listeners;
  auto val_ids = numbered_ids("REL_test", 0, val.listeners);
  auto tst_ids = numbered_ids("REL_test", 0, shared);
  const auto extra = numbered_ids("REL_test", val.listeners, tst.listeners - shared);
  tst_ids.insert(tst_ids.end(), extra.begin(), extra.end());
  const Dataset validation = dataset_from_counts("REL_val", MetricKind::kRel, Split::kTest, val.evaluations, val.pairs,
                                                 static_cast<std::size_t>(val.duration_s), val_ids);
  const Dataset test = dataset_from_counts("REL_tst", MetricKind::kRel, Split::kTest, tst.evaluations, tst.pairs,
                                           static_cast<std::size_t>(tst.duration_s), tst_ids);
  all = merge(all, merge(validation, test));

  // Round trip through the on-disk format before counting.
  save_dataset(all, work / "counts/all");
  save_dataset(validation, work / "counts/validation");
  save_dataset(test, work / "counts/test");
  const Dataset loaded = load_dataset(work / "counts/all");
  validate(loaded);

  int mismatches = 0;
  std::string detail;
  for (const auto& cell : counts["cells"]) {
    const auto metric = parse_metric(cell["metric"].get<std::string>());
    const auto split = parse_split(cell["split"].get<std::string>());
    const auto got = dataset_stats(loaded, metric, split);
    if (!(got == summary_of(cell))) {
      ++mismatches;
      detail += fmt(" %s/%s differs", cell["metric"].get<std::string>().c_str(), cell["split"].get<std::string>().c_str());
    }
  }
  const auto got_val = dataset_stats(load_dataset(work / "counts/validation"), MetricKind::kRel);
  const auto got_tst = dataset_stats(load_dataset(work / "counts/test"), MetricKind::kRel);
  if (!(got_val == val)) ++mismatches, detail += " validation differs";
  if (!(got_tst == tst)) ++mismatches, detail += " test differs";
  const auto rel_train = dataset_stats(loaded, MetricKind::kRel, Split::kTrain);
  return {mismatches == 0,
          fmt("REL train %zu/%zu/%.0f s/%zu; validation %zu/%zu; test %zu/%zu; %d mismatches", rel_train.evaluations,
              rel_train.pairs, rel_train.duration_s, rel_train.listeners, got_val.evaluations, got_val.pairs,
              got_tst.evaluations, got_tst.pairs, mismatches) +
              detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string work = "acceptance_work";
  std::string cli = RELKIT_CLI;
  std::string source = RELKIT_SOURCE_DIR;
  app.add_option("--work-dir", work, "Scratch directory (recreated)")->capture_default_str();
  app.add_option("--cli", cli, "relkit executable")->capture_default_str();
  app.add_option("--source-dir", source, "Source tree with configs/ and tests/")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const fs::path wd = fs::absolute(work);
  fs::remove_all(wd);
  fs::create_directories(wd);

  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };

  report("rank-metric-oracle", rank_metric_oracle);
  report("mann-whitney-exactness", mann_whitney_exactness);
  report("kruskal-wallis-golden", kruskal_wallis_golden);
  report("steel-dwass-reduction", steel_dwass_reduction);
  report("art-anova-properties", art_properties);
  report("gradient-check", gradient_check);
  report("cbl-values", cbl_values);

  const fs::path fixture = wd / "fixture";
  Fixture fx;
  try {
    fx = write_fixture(FixtureSpec{}, fixture);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fixture generation failed: %s\n", e.what());
  }
  report("screening-thresholds", [&] { return screening_thresholds(fx.dataset); });

  RunAllOutputs run_a, run_b;
  report("learnability", [&] {
    run_a = run_all_cli(cli, source, fixture, wd / "bundle_a");
    return learnability(wd / "bundle_a", run_a);
  });
  report("run-all-determinism", [&] {
    run_b = run_all_cli(cli, source, fixture, wd / "bundle_b");
    return determinism(wd / "bundle_a", wd / "bundle_b", run_a, run_b);
  });
  report("dataset-statistics", [&] { return dataset_statistics(source, wd); });

  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
