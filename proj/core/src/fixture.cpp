#include "relkit/fixture.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include "json.hpp"
#include <set>

#include "relkit/error.hpp"
#include "relkit/feature_io.hpp"
#include "relkit/kv_config.hpp"
#include "relkit/rng.hpp"
#include "relkit/text_metrics.hpp"

namespace relkit {
namespace {

struct LabelPhrase {
  const char* label;
  const char* phrase;
};

// Three event labels per top category, each with a caption phrase.
const std::array<std::array<LabelPhrase, 3>, kNumTopCategories> kVocabulary = {{
    {{{"laughter", "people laugh"}, {"footsteps", "footsteps echo"}, {"clapping", "a crowd claps"}}},
    {{{"dog bark", "a dog barks"}, {"bird chirp", "birds chirp"}, {"cat meow", "a cat meows"}}},
    {{{"rain", "rain falls steadily"}, {"wind", "wind blows"}, {"thunder", "thunder rumbles"}}},
    {{{"piano", "a piano plays softly"}, {"guitar", "someone strums a guitar"}, {"drum", "a drum beats"}}},
    {{{"car engine", "a car engine idles"}, {"door slam", "a door slams"}, {"bell", "a bell rings"}}},
    {{{"thump", "something thumps"}, {"hiss", "a hiss is heard"}, {"click", "a device clicks"}}},
    {{{"static", "static crackles"}, {"hum", "a low hum continues"}, {"echo", "sounds echo in a hall"}}},
    {{{"man speaking", "a man speaks"}, {"woman speaking", "a woman talks"}, {"child talking", "a child chatters"}}},
}};

constexpr std::array<const char*, 4> kTemporalJoins = {", then ", " followed by ", " before ", " after "};
constexpr std::array<const char*, 3> kPlainJoins = {" and ", " while ", " as "};
constexpr std::array<const char*, 8> kPlaces = {
    " in a park", " indoors", " near a busy road", " in the distance",
    " at night",  " in a small room", " outside", " nearby",
};
constexpr std::array<Origin, 4> kSynthetic = {Origin::kAudioLdm, Origin::kAudioLdm2, Origin::kTango,
                                              Origin::kTango2};

struct Caption {
  std::string text;
  std::vector<std::string> labels;
  CategorySet categories;
};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

Caption make_caption(rng::Engine& e, double temporal_rate) {
  Caption c;
  const double u = rng::uniform01(e);
  const std::size_t n_cats = u < 0.6 ? 1 : (u < 0.9 ? 2 : 3);
  std::vector<std::size_t> cats(kNumTopCategories);
  for (std::size_t i = 0; i < cats.size(); ++i) cats[i] = i;
  rng::shuffle(cats, e);
  cats.resize(n_cats);
  std::sort(cats.begin(), cats.end());

  std::vector<LabelPhrase> events;
  for (const auto cat : cats) {
    c.categories.insert(kAllTopCategories[cat]);
    events.push_back(kVocabulary[cat][rng::below(e, 3)]);
  }
  // A few extra labels from the same categories.
  const std::size_t extra = rng::below(e, 3);
  for (std::size_t k = 0; k < extra; ++k) {
    const auto cat = cats[rng::below(e, cats.size())];
    const auto& cand = kVocabulary[cat][rng::below(e, 3)];
    if (std::none_of(events.begin(), events.end(),
                     [&](const LabelPhrase& p) { return std::string_view(p.label) == cand.label; }))
      events.push_back(cand);
  }
  rng::shuffle(events, e);
  for (const auto& ev : events) c.labels.emplace_back(ev.label);

  const bool temporal = events.size() >= 2 && rng::uniform01(e) < temporal_rate;
  std::string text = events[0].phrase;
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (i == 1 && temporal) {
      text += kTemporalJoins[rng::below(e, kTemporalJoins.size())];
    } else if (rng::uniform01(e) < 0.3) {
      text += ". " + capitalize(events[i].phrase);
      continue;
    } else {
      text += kPlainJoins[rng::below(e, kPlainJoins.size())];
    }
    text += events[i].phrase;
  }
  if (rng::uniform01(e) < 0.5) text += kPlaces[rng::below(e, kPlaces.size())];
  c.text = capitalize(text) + ".";
  return c;
}

Caption unique_caption(rng::Engine& e, double temporal_rate, std::set<std::string>& used) {
  for (int attempt = 0;; ++attempt) {
    Caption c = make_caption(e, temporal_rate);
    if (attempt > 200) {
      c.text.pop_back();
      c.text += ", recording " + std::to_string(used.size()) + ".";
    }
    if (used.insert(c.text).second) return c;
  }
}

int rate(double mean, double bias, double noise_sd, rng::Engine& e) {
  const double v = std::round(mean + bias + noise_sd * rng::normal(e));
  return static_cast<int>(std::clamp(v, 0.0, 10.0));
}

std::string pad(std::size_t i, std::size_t width = 4) {
  std::string s = std::to_string(i);
  return std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

std::vector<std::size_t> choose(std::size_t n, std::size_t k, rng::Engine& e) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng::below(e, n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct PairLatent {
  double quality = 0.0;  // true REL mean / 10
  std::size_t frames = 0;
};

}  // namespace

FixtureSpec FixtureSpec::small() {
  FixtureSpec s;
  s.num_texts = 40;
  s.num_listeners = 24;
  s.anchor_failing_listeners = 2;
  s.harsh_listeners = 1;
  s.flat_listeners = 1;
  s.anchors_per_split = 4;
  s.anchors_per_listener = 2;
  s.ratings_per_pair = 4;
  return s;
}

void FixtureSpec::validate() const {
  if (num_texts < 4) throw UsageError("fixture needs at least 4 texts");
  if (synthetic_per_text < 1 || synthetic_per_text > kSynthetic.size())
    throw UsageError("synthetic_per_text must be in 1..4");
  if (anchor_failing_listeners + harsh_listeners + flat_listeners >= num_listeners)
    throw UsageError("fixture needs some ordinary listeners");
  if (ratings_per_pair < 1 || ratings_per_pair > num_listeners)
    throw UsageError("ratings_per_pair must be in 1..num_listeners");
  if (quality_ratings_per_pair > num_listeners) throw UsageError("quality_ratings_per_pair too large");
  if (anchors_per_listener > anchors_per_split) throw UsageError("anchors_per_listener exceeds anchors_per_split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw UsageError("test_fraction must lie in (0, 1)");
  if (audio_dim == 0 || text_dim < kNumTopCategories + 2 || clap_dim < 2)
    throw UsageError("fixture feature dims too small (text_dim >= 10)");
  if (frame_counts.empty() || std::find(frame_counts.begin(), frame_counts.end(), 0) != frame_counts.end())
    throw UsageError("frame counts must be >= 1");
}

FixtureSpec parse_fixture_spec(const std::string& text, std::uint64_t seed) {
  FixtureSpec s;
  std::size_t pos = 0;
  bool first = true;
  while (pos <= text.size()) {
    auto end = text.find(',', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    if (first && (item == "small" || item == "default")) {
      if (item == "small") s = FixtureSpec::small();
      first = false;
      continue;
    }
    first = false;
    const auto [k, v] = parse_assignment(item);
    if (k == "num_texts") s.num_texts = kv_uint(k, v);
    else if (k == "synthetic_per_text") s.synthetic_per_text = kv_uint(k, v);
    else if (k == "anchors_per_split") s.anchors_per_split = kv_uint(k, v);
    else if (k == "anchors_per_listener") s.anchors_per_listener = kv_uint(k, v);
    else if (k == "num_listeners") s.num_listeners = kv_uint(k, v);
    else if (k == "anchor_failing_listeners") s.anchor_failing_listeners = kv_uint(k, v);
    else if (k == "harsh_listeners") s.harsh_listeners = kv_uint(k, v);
    else if (k == "flat_listeners") s.flat_listeners = kv_uint(k, v);
    else if (k == "ratings_per_pair") s.ratings_per_pair = kv_uint(k, v);
    else if (k == "quality_ratings_per_pair") s.quality_ratings_per_pair = kv_uint(k, v);
    else if (k == "test_fraction") s.test_fraction = kv_double(k, v);
    else if (k == "listener_bias_sd") s.listener_bias_sd = kv_double(k, v);
    else if (k == "noise_sd") s.noise_sd = kv_double(k, v);
    else if (k == "animal_synthetic_shift") s.animal_synthetic_shift = kv_double(k, v);
    else if (k == "temporal_synthetic_shift") s.temporal_synthetic_shift = kv_double(k, v);
    else if (k == "features_carry_signal") s.features_carry_signal = kv_uint(k, v) != 0;
    else if (k == "clap_noise_sd") s.clap_noise_sd = kv_double(k, v);
    else if (k == "audio_dim") s.audio_dim = kv_uint(k, v);
    else if (k == "text_dim") s.text_dim = kv_uint(k, v);
    else if (k == "clap_dim") s.clap_dim = kv_uint(k, v);
    else if (k == "seed") seed = kv_uint(k, v);
    else throw UsageError("unknown fixture key '" + k + "'");
  }
  s.seed = seed;
  s.validate();
  return s;
}

namespace {

struct Generated {
  Fixture fixture;
  std::map<std::string, PairLatent> latent;
};

Generated generate(const FixtureSpec& spec) {
  spec.validate();
  rng::Engine e(spec.seed);
  Generated g;
  Dataset& d = g.fixture.dataset;

  // Listener roles: the first ids are ordinary, planted roles follow in a
  // seeded shuffle so they are not simply the last ids.
  enum class Role { kOrdinary, kAnchorFailing, kHarsh, kFlat };
  std::vector<Role> roles(spec.num_listeners, Role::kOrdinary);
  {
    std::size_t i = 0;
    for (std::size_t k = 0; k < spec.anchor_failing_listeners; ++k) roles[i++] = Role::kAnchorFailing;
    for (std::size_t k = 0; k < spec.harsh_listeners; ++k) roles[i++] = Role::kHarsh;
    for (std::size_t k = 0; k < spec.flat_listeners; ++k) roles[i++] = Role::kFlat;
    rng::shuffle(roles, e);
  }
  std::vector<std::string> listener_ids;
  std::vector<double> bias(spec.num_listeners);
  for (std::size_t i = 0; i < spec.num_listeners; ++i) {
    const std::string id = "L" + pad(i + 1, 3);
    listener_ids.push_back(id);
    ListenerProfile p(id);
    for (std::size_t q = 0; q < kNumQuestions; ++q) {
      const auto& opts = question_options(q);
      if (rng::uniform01(e) < 0.05) continue;  // unanswered
      p.answers[q] = std::string(opts[rng::below(e, opts.size())]);
    }
    d.listeners.emplace(id, std::move(p));
    bias[i] = spec.listener_bias_sd * rng::normal(e);
    switch (roles[i]) {
      case Role::kAnchorFailing: g.fixture.planted.anchor_failing.push_back(id); break;
      case Role::kHarsh: g.fixture.planted.harsh.push_back(id); bias[i] = -4.0; break;
      case Role::kFlat: g.fixture.planted.flat.push_back(id); break;
      case Role::kOrdinary: break;
    }
  }

  auto score_for = [&](std::size_t li, double mean) {
    if (roles[li] == Role::kFlat) return 7;
    return rate(mean, bias[li], spec.noise_sd, e);
  };

  std::set<std::string> used_text;
  const auto n_test = static_cast<std::size_t>(std::round(spec.test_fraction * static_cast<double>(spec.num_texts)));
  const auto test_texts = choose(spec.num_texts, std::max<std::size_t>(2, n_test), e);
  std::vector<bool> is_test(spec.num_texts, false);
  for (auto i : test_texts) is_test[i] = true;

  for (std::size_t ti = 0; ti < spec.num_texts; ++ti) {
    const Caption cap = unique_caption(e, 0.35, used_text);
    const bool temporal = has_temporal_preposition(cap.text);
    const bool animal = cap.categories.contains(TopCategory::kAnimal);
    const Split split = is_test[ti] ? Split::kTest : Split::kTrain;

    std::vector<Origin> origins = {Origin::kOriginal};
    {
      auto syn = std::vector<Origin>(kSynthetic.begin(), kSynthetic.end());
      rng::shuffle(syn, e);
      origins.insert(origins.end(), syn.begin(), syn.begin() + static_cast<std::ptrdiff_t>(spec.synthetic_per_text));
    }
    for (const auto origin : origins) {
      AudioTextPair p;
      p.pair_id = "P" + pad(ti + 1) + "_" + std::string(to_string(origin));
      p.text = cap.text;
      p.audio_ref = std::string(to_string(origin)) + "/" + pad(ti + 1) + ".wav";
      p.origin = origin;
      p.event_labels = cap.labels;
      p.top_categories = cap.categories;
      const auto frames = spec.frame_counts[rng::below(e, spec.frame_counts.size())];
      p.duration_s = static_cast<double>(frames);

      double mean = origin == Origin::kOriginal ? rng::uniform(e, 7.2, 9.5) : rng::uniform(e, 1.0, 9.0);
      if (p.is_synthetic() && animal) mean += spec.animal_synthetic_shift;
      if (p.is_synthetic() && temporal) mean += spec.temporal_synthetic_shift;
      mean = std::clamp(mean, 0.0, 10.0);
      g.latent[p.pair_id] = {mean / 10.0, frames};
      g.fixture.true_mean[p.pair_id] = mean;

      for (auto li : choose(spec.num_listeners, spec.ratings_per_pair, e)) {
        d.records.push_back({listener_ids[li], p.pair_id, MetricKind::kRel, score_for(li, mean), split});
      }
      const double quality = p.is_synthetic() ? rng::uniform(e, 3.0, 8.0) : rng::uniform(e, 6.5, 9.5);
      for (const auto metric : {MetricKind::kIs, MetricKind::kOs}) {
        for (auto li : choose(spec.num_listeners, spec.quality_ratings_per_pair, e)) {
          d.records.push_back({listener_ids[li], p.pair_id, metric, rate(quality, 0.0, spec.noise_sd, e), split});
        }
      }
      d.pairs.emplace(p.pair_id, std::move(p));
    }
  }

  // Anchors: mismatched original audio; each split has its own set.
  for (const auto split : {Split::kTrain, Split::kTest}) {
    std::vector<std::string> ids;
    for (std::size_t k = 0; k < spec.anchors_per_split; ++k) {
      const Caption cap = unique_caption(e, 0.35, used_text);
      AudioTextPair p;
      p.pair_id = "A" + std::string(split == Split::kTrain ? "tr" : "te") + pad(k + 1, 3);
      p.text = cap.text;
      p.audio_ref = "anchor/" + p.pair_id + ".wav";
      p.origin = Origin::kOriginal;
      p.event_labels = cap.labels;
      p.top_categories = cap.categories;
      p.is_anchor = true;
      const auto frames = spec.frame_counts[rng::below(e, spec.frame_counts.size())];
      p.duration_s = static_cast<double>(frames);
      g.latent[p.pair_id] = {0.0, frames};
      g.fixture.true_mean[p.pair_id] = 0.0;
      ids.push_back(p.pair_id);
      d.pairs.emplace(p.pair_id, std::move(p));
    }
    for (std::size_t li = 0; li < spec.num_listeners; ++li) {
      for (auto ai : choose(ids.size(), spec.anchors_per_listener, e)) {
        int s = rng::uniform01(e) < 0.85 ? 0 : 1;
        if (roles[li] == Role::kAnchorFailing) s = 4 + static_cast<int>(rng::below(e, 4));
        d.records.push_back({listener_ids[li], ids[ai], MetricKind::kRel, s, split});
      }
    }
  }
  validate(d);
  return g;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

}  // namespace

Fixture generate_fixture(const FixtureSpec& spec) { return generate(spec).fixture; }

Fixture write_fixture(const FixtureSpec& spec, const std::filesystem::path& root) {
  Generated g = generate(spec);
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const auto* sub : {"dataset", "features/audio", "features/text", "clap/audio", "clap/text"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw DataError("output directory not writable: " + (root / sub).string() + ": " + ec.message());
  }
  save_dataset(g.fixture.dataset, root / "dataset");

  // Features come from their own stream so the dataset is unaffected by
  // feature settings.
  rng::Engine e(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  const auto f_dim = spec.audio_dim;
  const auto d_dim = spec.text_dim;
  const auto e_dim = spec.clap_dim;
  for (const auto& [id, latent] : g.latent) {
    const auto& pair = g.fixture.dataset.pairs.at(id);
    const double decoy = rng::uniform01(e);
    const double q = spec.features_carry_signal ? latent.quality : decoy;

    std::vector<float> audio(f_dim * latent.frames);
    for (std::size_t r = 0; r < f_dim; ++r) {
      for (std::size_t t = 0; t < latent.frames; ++t) {
        double v = 0.5 * rng::normal(e);
        if (r < 4) v = (1.0 + 0.25 * static_cast<double>(r)) * (2.0 * q - 1.0) + 0.05 * rng::normal(e);
        else if (r == 4) v = (pair.is_synthetic() ? 1.0 : -1.0) + 0.1 * rng::normal(e);
        audio[r * latent.frames + t] = static_cast<float>(v);
      }
    }
    write_feature(feature_path(root / "features/audio", id),
                  FeatureTensor::matrix(static_cast<std::uint32_t>(f_dim),
                                        static_cast<std::uint32_t>(latent.frames), std::move(audio)));

    const auto tf = compute_text_features(pair.text);
    std::vector<float> text(d_dim);
    for (std::size_t k = 0; k < d_dim; ++k) text[k] = static_cast<float>(0.3 * rng::normal(e));
    for (std::size_t c = 0; c < kNumTopCategories; ++c) {
      if (pair.top_categories.contains(kAllTopCategories[c])) text[c] = 1.0f;
    }
    text[kNumTopCategories] = tf.has_temporal_preposition ? 1.0f : 0.0f;
    text[kNumTopCategories + 1] = static_cast<float>(static_cast<double>(tf.word_count) / 20.0);
    write_feature(feature_path(root / "features/text", id), FeatureTensor::vector(std::move(text)));

    // Embedding pair with cosine similarity exactly c.
    const double qc = spec.features_carry_signal ? latent.quality : rng::uniform01(e);
    const double c = std::clamp(0.15 + 0.5 * qc + spec.clap_noise_sd * rng::normal(e), -0.9, 0.95);
    Eigen::VectorXd tv(static_cast<Eigen::Index>(e_dim));
    Eigen::VectorXd uv(static_cast<Eigen::Index>(e_dim));
    for (Eigen::Index k = 0; k < tv.size(); ++k) tv(k) = rng::normal(e);
    for (Eigen::Index k = 0; k < uv.size(); ++k) uv(k) = rng::normal(e);
    tv.normalize();
    uv -= uv.dot(tv) * tv;
    uv.normalize();
    const Eigen::VectorXd av = c * tv + std::sqrt(1.0 - c * c) * uv;
    std::vector<float> a_emb(e_dim);
    std::vector<float> t_emb(e_dim);
    for (std::size_t k = 0; k < e_dim; ++k) {
      a_emb[k] = static_cast<float>(av(static_cast<Eigen::Index>(k)));
      t_emb[k] = static_cast<float>(tv(static_cast<Eigen::Index>(k)));
    }
    write_feature(feature_path(root / "clap/audio", id), FeatureTensor::vector(std::move(a_emb)));
    write_feature(feature_path(root / "clap/text", id), FeatureTensor::vector(std::move(t_emb)));
  }

  nlohmann::json m;
  m["schema_version"] = 1;
  m["seed"] = spec.seed;
  m["spec"] = {
      {"num_texts", spec.num_texts},
      {"synthetic_per_text", spec.synthetic_per_text},
      {"anchors_per_split", spec.anchors_per_split},
      {"num_listeners", spec.num_listeners},
      {"ratings_per_pair", spec.ratings_per_pair},
      {"test_fraction", spec.test_fraction},
      {"listener_bias_sd", spec.listener_bias_sd},
      {"noise_sd", spec.noise_sd},
      {"features_carry_signal", spec.features_carry_signal},
      {"clap_noise_sd", spec.clap_noise_sd},
  };
  m["planted_effects"] = nlohmann::json::array({
      {{"factor", "category:Animal"}, {"applies_to", "synthetic"}, {"shift", spec.animal_synthetic_shift}},
      {{"factor", "temporal_preposition"}, {"applies_to", "synthetic"}, {"shift", spec.temporal_synthetic_shift}},
  });
  m["planted_listeners"] = {
      {"anchor_failing", g.fixture.planted.anchor_failing},
      {"harsh", g.fixture.planted.harsh},
      {"flat", g.fixture.planted.flat},
  };
  m["features"] = {
      {"audio_dir", "features/audio"}, {"text_dir", "features/text"},
      {"F", f_dim}, {"D", d_dim}, {"frame_counts", spec.frame_counts},
  };
  m["clap"] = {{"audio_dir", "clap/audio"}, {"text_dir", "clap/text"}, {"E", e_dim}};
  m["dataset_dir"] = "dataset";
  write_json(root / "manifest.json", m);
  return std::move(g.fixture);
}

}  // namespace relkit
