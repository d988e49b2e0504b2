#include "relkit/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include "json.hpp"
#include <thread>

#include "relkit/clap_baseline.hpp"
#include "relkit/error.hpp"
#include "relkit/predictor/checkpoint.hpp"

namespace relkit {

using nlohmann::json;

std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("RELATE_KIT_THREADS")) {
    try {
      const auto cap = kv_uint("RELATE_KIT_THREADS", env);
      if (cap == 0) throw UsageError("RELATE_KIT_THREADS must be >= 1");
      n = static_cast<std::size_t>(cap);
    } catch (const UsageError&) {
      throw UsageError("RELATE_KIT_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
  }
  return n;
}

ScreeningResult screen_split(const Dataset& d, Split split, const ScreeningPolicy& policy) {
  return screen(restrict_to_metric(restrict_to_split(d, split), MetricKind::kRel), MetricKind::kRel, policy);
}

TrainingData prepare_training_data(const Dataset& d, std::uint64_t seed) {
  TrainingData t;
  t.train_screen = screen_split(d, Split::kTrain, ScreeningPolicy::train());
  t.test_screen = screen_split(d, Split::kTest, ScreeningPolicy::test());
  t.train = t.train_screen.kept;
  auto [val, test] = split_validation_test(t.test_screen.kept, seed);
  t.validation = std::move(val);
  t.test = std::move(test);
  return t;
}

std::vector<FactorOutcome> run_factor_analyses(const Dataset& d, const TextFeatureMap& text,
                                               const std::vector<FactorSpec>& specs, double alpha,
                                               std::size_t threads) {
  std::vector<FactorOutcome> out(specs.size());
  std::vector<std::exception_ptr> failures(specs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      out[i].factor = specs[i].name();
      try {
        out[i].report = factor_analysis(d, text, specs[i], alpha);
      } catch (const DataError& e) {
        out[i].skipped_reason = e.what();
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, specs.size()));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < n; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  return out;
}

EvaluationReport evaluate_predictions(const std::map<std::string, double>& predictions,
                                      const Dataset& truth) {
  EvaluationReport r;
  std::vector<double> pred;
  std::vector<double> gold;
  std::vector<CategorySet> cats;
  for (const auto& [id, mean] : mean_score_per_pair(truth, MetricKind::kRel)) {
    const auto it = predictions.find(id);
    if (it == predictions.end()) {
      r.missing.push_back(id);
      continue;
    }
    pred.push_back(it->second);
    gold.push_back(normalize_score(mean));
    cats.push_back(truth.pair(id).top_categories);
  }
  r.metrics = evaluate(pred, gold);
  r.per_category = per_category_srcc(pred, gold, cats);
  return r;
}

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const TestResult& t) {
  json j = {
      {"method", to_string(t.method)}, {"statistic", t.statistic}, {"p_value", t.p_value},
      {"groups", t.group_labels},      {"n_per_group", t.n_per_group},
  };
  if (t.z) j["z"] = *t.z;
  if (t.df1 != 0.0) j["df1"] = t.df1;
  if (t.df2 != 0.0) j["df2"] = t.df2;
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

json to_json(const BoxplotSummary& b) {
  return {{"n", b.n},
          {"median", b.median},
          {"q1", b.q1},
          {"q3", b.q3},
          {"whisker_low", b.whisker_low},
          {"whisker_high", b.whisker_high},
          {"outliers", b.outliers}};
}

json to_json(const MetricReport& m) {
  return {{"n", m.n}, {"mse", m.mse}, {"lcc", opt(m.lcc)}, {"srcc", opt(m.srcc)}, {"ktau", opt(m.ktau)}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << j.dump(2) << "\n";
  if (!f) throw DataError("write failed: " + path.string());
}

}  // namespace

void write_screening_report(const std::filesystem::path& path,
                            const std::map<std::string, const ScreeningResult*>& results) {
  json j = {{"schema_version", kReportSchemaVersion}};
  for (const auto& [name, r] : results) {
    json ex = json::array();
    for (const auto& e : r->excluded)
      ex.push_back({{"listener_id", e.listener_id}, {"reason", to_string(e.reason)}, {"value", e.value}});
    j["screens"][name] = {{"kept_listeners", r->kept.listeners.size()},
                          {"kept_records", r->kept.records.size()},
                          {"excluded", ex}};
  }
  write_json(path, j);
}

void write_exclusions(const std::filesystem::path& path, const ScreeningResult& result) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& e : result.excluded)
    f << json{{"listener_id", e.listener_id}, {"reason", to_string(e.reason)}, {"value", e.value}}.dump() << "\n";
}

void write_text_features(const std::filesystem::path& path, const TextFeatureMap& features) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& [id, t] : features) {
    f << json{{"pair_id", id},
              {"word_count", t.word_count},
              {"temporal", t.has_temporal_preposition},
              {"flesch", t.flesch_reading_ease},
              {"sentence_count", t.sentence_count},
              {"syllable_count", t.syllable_count}}
             .dump()
      << "\n";
  }
}

void write_factor_reports(const std::filesystem::path& report_path,
                          const std::filesystem::path& boxplot_path,
                          const std::vector<FactorOutcome>& outcomes) {
  json report = {{"schema_version", kReportSchemaVersion}, {"factors", json::array()}};
  json boxes = {{"schema_version", kReportSchemaVersion}, {"factors", json::array()}};
  for (const auto& o : outcomes) {
    if (!o.report) {
      report["factors"].push_back({{"factor", o.factor}, {"skipped", o.skipped_reason}});
      continue;
    }
    const auto& r = *o.report;
    json sd = json::array();
    for (const auto& t : r.steel_dwass) sd.push_back(to_json(t));
    report["factors"].push_back({
        {"factor", r.factor},
        {"group", r.group},
        {"alpha", r.alpha},
        {"levels", r.levels},
        {"among_items", to_json(r.among_items)},
        {"among_items_significant", r.among_items_significant},
        {"art",
         {{"level", to_json(r.art.effect_a)},
          {"origin", to_json(r.art.effect_b)},
          {"interaction", to_json(r.art.interaction)}}},
        {"interaction_significant", r.interaction_significant},
        {"steel_dwass", sd},
    });
    json levels = json::array();
    for (const auto& b : r.boxplots) {
      levels.push_back({{"level", b.level},
                        {"all", to_json(b.all)},
                        {"original", b.original ? to_json(*b.original) : json(nullptr)},
                        {"synthetic", b.synthetic ? to_json(*b.synthetic) : json(nullptr)}});
    }
    boxes["factors"].push_back({{"factor", r.factor}, {"levels", levels}});
  }
  write_json(report_path, report);
  write_json(boxplot_path, boxes);
}

void write_predictions(const std::filesystem::path& path, const std::map<std::string, double>& scores) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& [id, s] : scores) f << json{{"pair_id", id}, {"score", s}}.dump() << "\n";
}

std::map<std::string, double> read_predictions(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read " + path.string());
  std::map<std::string, double> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(f, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = path.string() + ":" + std::to_string(n);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw DataError(where + ": malformed line");
    }
    if (!j.is_object() || !j.contains("pair_id") || !j["pair_id"].is_string() || !j.contains("score") ||
        !j["score"].is_number())
      throw DataError(where + ": expected {\"pair_id\": string, \"score\": number}");
    if (!out.emplace(j["pair_id"].get<std::string>(), j["score"].get<double>()).second)
      throw DataError(where + ": duplicate pair_id");
  }
  return out;
}

void write_evaluation_report(const std::filesystem::path& path, const EvaluationReport& report,
                             const std::string& source) {
  json cats = json::object();
  for (const auto& [c, v] : report.per_category) cats[std::string(to_string(c))] = opt(v);
  write_json(path, {{"schema_version", kReportSchemaVersion},
                    {"source", source},
                    {"scale", "normalized"},
                    {"metrics", to_json(report.metrics)},
                    {"per_category_srcc", cats},
                    {"missing", report.missing}});
}

void write_train_history(const std::filesystem::path& path, const predictor::TrainResult& result) {
  json h = json::array();
  for (const auto& p : result.history) {
    h.push_back({{"optimizer_step", p.optimizer_step},
                 {"micro_step", p.micro_step},
                 {"lr", p.lr},
                 {"train_loss", p.train_loss},
                 {"val_srcc", opt(p.val_srcc)}});
  }
  write_json(path, {{"schema_version", kReportSchemaVersion},
                    {"best_step", result.best_step},
                    {"best_val_srcc", opt(result.best_srcc)},
                    {"single_item_batches", result.single_item_batches},
                    {"history", h}});
}

void write_dataset_summary(const std::filesystem::path& path, const Dataset& d) {
  json j = {{"schema_version", kReportSchemaVersion}};
  for (const auto m : {MetricKind::kRel, MetricKind::kIs, MetricKind::kOs}) {
    for (const auto s : {Split::kTrain, Split::kTest}) {
      const auto st = dataset_stats(d, m, s);
      j["stats"][std::string(to_string(m))][std::string(to_string(s))] = {
          {"evaluations", st.evaluations},
          {"pairs", st.pairs},
          {"duration_s", st.duration_s},
          {"listeners", st.listeners}};
    }
  }
  write_json(path, j);
}

predictor::ModelConfig resolve_model_config(const std::optional<std::filesystem::path>& file,
                                            const KeyValues& overrides, std::uint64_t seed) {
  predictor::ModelConfig cfg;
  cfg.seed = seed;
  if (file) cfg = predictor::apply_model_config(cfg, read_kv_file(*file));
  return predictor::apply_model_config(cfg, overrides);
}

predictor::TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& file,
                                            const KeyValues& overrides) {
  predictor::TrainConfig cfg;
  if (file) cfg = predictor::apply_train_config(cfg, read_kv_file(*file));
  cfg = predictor::apply_train_config(cfg, overrides);
  cfg.validate();
  return cfg;
}

namespace {

template <typename F>
auto stage(const std::string& name, const std::function<void(const std::string&)>& log, F&& f) {
  if (log) log(name);
  try {
    return f();
  } catch (const UsageError& e) {
    throw UsageError("stage " + name + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage " + name + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage " + name + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    throw DataError("stage " + name + ": " + e.what());
  }
}

std::vector<std::string> pair_ids(const Dataset& d) {
  std::vector<std::string> ids;
  for (const auto& [id, p] : d.pairs) ids.push_back(id);
  return ids;
}

}  // namespace

RunSummary run_all(const PipelineConfig& cfg, const std::function<void(const std::string&)>& log) {
  namespace fs = std::filesystem;
  RunSummary summary;
  const fs::path out = cfg.out_dir;

  const Dataset data = stage("ingest", log, [&] {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    Dataset d = load_dataset(cfg.dataset_root);
    validate(d);
    write_dataset_summary(out / "dataset_summary.json", d);
    return d;
  });

  struct Screened {
    ScreeningResult analysis;
    TrainingData training;
  };
  const Screened screened = stage("screen", log, [&] {
    Screened s;
    s.analysis = screen(restrict_to_metric(data, cfg.analysis_metric), cfg.analysis_metric,
                        policy_by_name(cfg.analysis_policy));
    s.training = prepare_training_data(data, cfg.seed);
    write_screening_report(out / "screening.json", {{"analysis", &s.analysis},
                                                    {"train", &s.training.train_screen},
                                                    {"test", &s.training.test_screen}});
    save_dataset(s.analysis.kept, out / "screened");
    write_exclusions(out / "screened/exclusions.jsonl", s.analysis);
    save_dataset(s.training.train, out / "train");
    save_dataset(s.training.validation, out / "validation");
    save_dataset(s.training.test, out / "test");
    return s;
  });

  const TextFeatureMap text = stage("textfeat", log, [&] {
    auto t = compute_text_feature_map(screened.analysis.kept);
    write_text_features(out / "text_features.jsonl", t);
    return t;
  });

  stage("analyze", log, [&] {
    std::vector<FactorSpec> specs;
    if (cfg.factors.empty()) {
      specs = all_factor_specs(cfg.bins);
    } else {
      for (const auto& f : cfg.factors) specs.push_back(parse_factor(f, cfg.bins));
    }
    fs::create_directories(out / "analysis");
    const auto outcomes = run_factor_analyses(screened.analysis.kept, text, specs, cfg.alpha, worker_threads());
    write_factor_reports(out / "analysis/factor_report.json", out / "analysis/boxplots.json", outcomes);
    return 0;
  });

  const auto& td = screened.training;
  const predictor::TrainResult trained = stage("train", log, [&] {
    if (cfg.features_dir.empty() || !fs::is_directory(cfg.features_dir))
      throw DataError("features directory not found: '" + cfg.features_dir.string() + "'");
    const auto model_cfg = resolve_model_config(cfg.model_config, cfg.model_overrides, cfg.seed);
    const auto train_cfg = resolve_train_config(cfg.train_config, cfg.train_overrides);
    std::vector<std::string> ids = pair_ids(td.train);
    for (const auto& id : pair_ids(td.validation)) ids.push_back(id);
    const auto features = predictor::load_features(cfg.features_dir, ids);
    auto r = predictor::train(td.train, td.validation, features, model_cfg, train_cfg);
    predictor::save_checkpoint(out / "checkpoint.rkpt", r.config, r.best);
    write_train_history(out / "history.json", r);
    return r;
  });
  summary.best_step = trained.best_step;

  const auto predictions = stage("predict", log, [&] {
    const auto ids = pair_ids(td.test);
    const auto features = predictor::load_features(cfg.features_dir, ids);
    auto p = predictor::predict_all(trained.best, features, ids);
    write_predictions(out / "predictions.jsonl", p);
    return p;
  });

  summary.model = stage("evaluate", log, [&] {
    auto r = evaluate_predictions(predictions, td.test);
    write_evaluation_report(out / "report.json", r, "predictor");
    return r;
  });

  if (cfg.clap_audio_dir && cfg.clap_text_dir) {
    summary.clap = stage("clapscore", log, [&] {
      const auto ids = pair_ids(td.test);
      const auto emb = load_embeddings(*cfg.clap_audio_dir, *cfg.clap_text_dir, ids);
      std::map<std::string, double> scores;
      for (const auto& [id, e] : emb) scores[id] = clap_score(e.audio, e.text);
      write_predictions(out / "clap_predictions.jsonl", scores);
      auto r = evaluate_predictions(scores, td.test);
      write_evaluation_report(out / "clap_report.json", r, "clap");
      return r;
    });
  }
  return summary;
}

}  // namespace relkit
