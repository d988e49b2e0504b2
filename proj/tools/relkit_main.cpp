// relkit: command-line front end for the rating toolkit.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "relkit/clap_baseline.hpp"
#include "relkit/error.hpp"
#include "relkit/fixture.hpp"
#include "relkit/kv_config.hpp"
#include "relkit/pipeline.hpp"
#include "relkit/predictor/checkpoint.hpp"

namespace fs = std::filesystem;
using namespace relkit;

namespace {

const std::set<std::string> kModelKeys = {"F", "D", "C", "H", "H2", "num_listeners", "seed"};

void split_overrides(const std::vector<std::string>& sets, KeyValues& model, KeyValues& train) {
  for (const auto& s : sets) {
    auto [k, v] = parse_assignment(s);
    (kModelKeys.contains(k) ? model : train)[k] = v;
  }
}

std::vector<std::string> non_anchor_pairs(const Dataset& d) {
  std::vector<std::string> ids;
  for (const auto& [id, p] : d.pairs) {
    if (!p.is_anchor) ids.push_back(id);
  }
  return ids;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

fs::path resolve_from(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  return p.is_absolute() ? p : base / p;
}

// Keys of a run-all config file; paths are relative to the file.
void apply_run_config(const fs::path& file, PipelineConfig& cfg) {
  const auto kv = read_kv_file(file);
  const fs::path base = file.parent_path();
  for (const auto& [k, v] : kv) {
    if (k == "data") cfg.dataset_root = resolve_from(base, v);
    else if (k == "features_dir") cfg.features_dir = resolve_from(base, v);
    else if (k == "out") cfg.out_dir = resolve_from(base, v);
    else if (k == "clap_audio_dir") cfg.clap_audio_dir = resolve_from(base, v);
    else if (k == "clap_text_dir") cfg.clap_text_dir = resolve_from(base, v);
    else if (k == "model_config") cfg.model_config = resolve_from(base, v);
    else if (k == "train_config") cfg.train_config = resolve_from(base, v);
    else if (k == "policy") cfg.analysis_policy = v;
    else if (k == "seed") cfg.seed = kv_uint(k, v);
    else if (k == "alpha") cfg.alpha = kv_double(k, v);
    else if (k == "bins") cfg.bins = kv_uint(k, v);
    else if (k == "factors") {
      cfg.factors.clear();
      if (v != "all") {
        std::stringstream ss(v);
        for (std::string f; std::getline(ss, f, ',');) cfg.factors.push_back(f);
      }
    } else {
      throw UsageError(file.string() + ": unknown key '" + k + "'");
    }
  }
}

std::vector<std::string> parse_factor_list(const std::string& v) {
  std::vector<std::string> out;
  if (v == "all") return out;
  std::stringstream ss(v);
  for (std::string f; std::getline(ss, f, ',');) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relkit: screening, factor analysis and relevance-score prediction for text-audio rating studies"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "relkit 0.1.0");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write per-split statistics");
  fs::path ingest_data, ingest_out;
  ingest->add_option("--data", ingest_data, "Dataset directory (pairs/listeners/evaluations .jsonl)")->required();
  ingest->add_option("--out", ingest_out, "Summary JSON path (default: stdout)");

  // screen
  auto* scr = app.add_subcommand("screen", "Exclude unreliable listeners");
  fs::path scr_data, scr_out;
  std::string scr_policy = "analysis", scr_metric = "REL", scr_split;
  scr->add_option("--data", scr_data, "Dataset directory")->required();
  scr->add_option("--policy", scr_policy, "train | test | analysis")->capture_default_str();
  scr->add_option("--metric", scr_metric, "REL | IS | OS")->capture_default_str();
  scr->add_option("--split", scr_split, "Restrict to train or test records first");
  scr->add_option("--out", scr_out, "Output directory for the kept dataset and screening.json")->required();

  // textfeat
  auto* tf = app.add_subcommand("textfeat", "Compute caption features");
  fs::path tf_data, tf_out;
  tf->add_option("--data", tf_data, "Dataset directory")->required();
  tf->add_option("--out", tf_out, "text_features.jsonl path")->required();

  // analyze
  auto* an = app.add_subcommand("analyze", "Factor analysis of REL scores");
  fs::path an_data, an_out;
  std::string an_factors = "all";
  double an_alpha = 0.05;
  std::size_t an_bins = 3;
  an->add_option("--data", an_data, "Screened dataset directory")->required();
  an->add_option("--factors", an_factors, "all, or a comma-separated list of factor names")->capture_default_str();
  an->add_option("--alpha", an_alpha, "Significance level")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  an->add_option("--bins", an_bins, "Quantile bins for word count and Flesch")->capture_default_str()->check(CLI::Range(2, 20));
  an->add_option("--out", an_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the REL predictor");
  fs::path tr_data, tr_val, tr_features, tr_out;
  std::optional<fs::path> tr_model_cfg, tr_train_cfg;
  std::vector<std::string> tr_sets;
  std::uint64_t tr_seed = 42;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--validation", tr_val,
                 "Validation dataset; when omitted, the test split of --data is screened and split");
  tr->add_option("--features-dir", tr_features, "Directory with audio/ and text/ RFB1 files")->required();
  tr->add_option("--model-config", tr_model_cfg, "Model config (key = value)");
  tr->add_option("--train-config", tr_train_cfg, "Training config (key = value)");
  tr->add_option("--set", tr_sets, "Override a config key, key=value (repeatable)");
  tr->add_option("--seed", tr_seed, "Model and split seed")->capture_default_str();
  tr->add_option("--out", tr_out, "Checkpoint path")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "Predict average-listener REL scores");
  fs::path pr_ckpt, pr_features, pr_data, pr_out;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint file")->required();
  pr->add_option("--features-dir", pr_features, "Directory with audio/ and text/ RFB1 files")->required();
  pr->add_option("--data", pr_data, "Dataset whose non-anchor pairs are scored")->required();
  pr->add_option("--out", pr_out, "predictions.jsonl path")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions against per-pair mean REL");
  fs::path ev_pred, ev_data, ev_out;
  ev->add_option("--predictions", ev_pred, "predictions.jsonl")->required();
  ev->add_option("--data", ev_data, "Dataset with the reference ratings")->required();
  ev->add_option("--out", ev_out, "report.json path")->required();

  // clapscore
  auto* cs = app.add_subcommand("clapscore", "Cosine-similarity baseline from embedding files");
  fs::path cs_audio, cs_text, cs_data, cs_out;
  cs->add_option("--audio-emb-dir", cs_audio, "Audio embeddings (<pair_id>.rfb)")->required();
  cs->add_option("--text-emb-dir", cs_text, "Text embeddings (<pair_id>.rfb)")->required();
  cs->add_option("--data", cs_data, "Dataset whose non-anchor pairs are scored")->required();
  cs->add_option("--out", cs_out, "predictions.jsonl path")->required();

  // fixture
  auto* fx = app.add_subcommand("fixture", "Write a synthetic dataset with features");
  fs::path fx_out;
  std::uint64_t fx_seed = 7;
  std::string fx_spec = "default";
  fx->add_option("--out", fx_out, "Output directory")->required();
  fx->add_option("--seed", fx_seed, "Seed")->capture_default_str();
  fx->add_option("--spec", fx_spec, "small | default, then optional key=value items, comma-separated")
      ->capture_default_str();

  // run-all
  auto* ra = app.add_subcommand("run-all", "Run every stage and write one bundle directory");
  PipelineConfig rc;
  std::optional<fs::path> ra_config;
  std::optional<fs::path> ra_data, ra_features, ra_out, ra_clap_audio, ra_clap_text, ra_model_cfg, ra_train_cfg;
  std::optional<std::uint64_t> ra_seed;
  std::optional<std::string> ra_policy, ra_factors;
  std::vector<std::string> ra_sets;
  ra->add_option("--config", ra_config, "Run config (key = value); flags below override it");
  ra->add_option("--data", ra_data, "Dataset directory");
  ra->add_option("--features-dir", ra_features, "Directory with audio/ and text/ RFB1 files");
  ra->add_option("--out", ra_out, "Bundle directory");
  ra->add_option("--clap-audio-dir", ra_clap_audio, "Audio embeddings for the baseline");
  ra->add_option("--clap-text-dir", ra_clap_text, "Text embeddings for the baseline");
  ra->add_option("--model-config", ra_model_cfg, "Model config (key = value)");
  ra->add_option("--train-config", ra_train_cfg, "Training config (key = value)");
  ra->add_option("--set", ra_sets, "Override a model/training key, key=value (repeatable)");
  ra->add_option("--seed", ra_seed, "Seed for every stochastic stage");
  ra->add_option("--policy", ra_policy, "Screening policy for the analysis");
  ra->add_option("--factors", ra_factors, "all, or a comma-separated list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ingest) {
      const Dataset d = load_dataset(ingest_data);
      validate(d);
      if (ingest_out.empty()) {
        const auto tmp = fs::temp_directory_path() / "relkit_ingest_summary.json";
        write_dataset_summary(tmp, d);
        std::ifstream f(tmp);
        std::cout << f.rdbuf();
        fs::remove(tmp);
      } else {
        ensure_parent(ingest_out);
        write_dataset_summary(ingest_out, d);
      }
    } else if (*scr) {
      Dataset d = load_dataset(scr_data);
      validate(d);
      if (!scr_split.empty()) d = restrict_to_split(d, parse_split(scr_split));
      const auto metric = parse_metric(scr_metric);
      const auto r = screen(restrict_to_metric(d, metric), metric, policy_by_name(scr_policy));
      fs::create_directories(scr_out);
      save_dataset(r.kept, scr_out);
      write_exclusions(scr_out / "exclusions.jsonl", r);
      std::cerr << "kept " << r.kept.listeners.size() << " listeners, excluded " << r.excluded.size() << "\n";
    } else if (*tf) {
      const Dataset d = load_dataset(tf_data);
      ensure_parent(tf_out);
      write_text_features(tf_out, compute_text_feature_map(d));
    } else if (*an) {
      const Dataset d = load_dataset(an_data);
      validate(d);
      std::vector<FactorSpec> specs;
      const auto names = parse_factor_list(an_factors);
      if (names.empty()) specs = all_factor_specs(an_bins);
      for (const auto& n : names) specs.push_back(parse_factor(n, an_bins));
      const auto outcomes =
          run_factor_analyses(d, compute_text_feature_map(d), specs, an_alpha, worker_threads());
      fs::create_directories(an_out);
      write_factor_reports(an_out / "factor_report.json", an_out / "boxplots.json", outcomes);
    } else if (*tr) {
      KeyValues model_kv, train_kv;
      split_overrides(tr_sets, model_kv, train_kv);
      const auto model_cfg = resolve_model_config(tr_model_cfg, model_kv, tr_seed);
      const auto train_cfg = resolve_train_config(tr_train_cfg, train_kv);
      const Dataset d = load_dataset(tr_data);
      validate(d);
      Dataset train_set, val_set;
      if (tr_val.empty()) {
        auto td = prepare_training_data(d, tr_seed);
        train_set = std::move(td.train);
        val_set = std::move(td.validation);
      } else {
        train_set = d;
        val_set = load_dataset(tr_val);
        validate(val_set);
      }
      auto ids = non_anchor_pairs(restrict_to_metric(train_set, MetricKind::kRel));
      for (const auto& id : non_anchor_pairs(restrict_to_metric(val_set, MetricKind::kRel))) ids.push_back(id);
      const auto features = predictor::load_features(tr_features, ids);
      const auto r = predictor::train(train_set, val_set, features, model_cfg, train_cfg);
      ensure_parent(tr_out);
      predictor::save_checkpoint(tr_out, r.config, r.best);
      write_train_history(fs::path(tr_out).replace_extension(".history.json"), r);
      std::cerr << "best validation SRCC "
                << (r.best_srcc ? std::to_string(*r.best_srcc) : std::string("undefined")) << " at step "
                << r.best_step << "\n";
    } else if (*pr) {
      const auto ck = predictor::load_checkpoint(pr_ckpt);
      const Dataset d = load_dataset(pr_data);
      const auto ids = non_anchor_pairs(d);
      const auto features = predictor::load_features(pr_features, ids);
      ensure_parent(pr_out);
      write_predictions(pr_out, predictor::predict_all(ck.params, features, ids));
    } else if (*ev) {
      const Dataset d = load_dataset(ev_data);
      const auto r = evaluate_predictions(read_predictions(ev_pred), restrict_to_metric(d, MetricKind::kRel));
      ensure_parent(ev_out);
      write_evaluation_report(ev_out, r, ev_pred.filename().string());
    } else if (*cs) {
      const Dataset d = load_dataset(cs_data);
      const auto ids = non_anchor_pairs(d);
      const auto emb = load_embeddings(cs_audio, cs_text, ids);
      std::map<std::string, double> scores;
      for (const auto& [id, e] : emb) scores[id] = clap_score(e.audio, e.text);
      if (emb.size() < ids.size())
        std::cerr << "warning: " << ids.size() - emb.size() << " pairs without embeddings skipped\n";
      ensure_parent(cs_out);
      write_predictions(cs_out, scores);
    } else if (*fx) {
      const auto spec = parse_fixture_spec(fx_spec, fx_seed);
      write_fixture(spec, fx_out);
    } else if (*ra) {
      if (ra_config) apply_run_config(*ra_config, rc);
      if (ra_data) rc.dataset_root = *ra_data;
      if (ra_features) rc.features_dir = *ra_features;
      if (ra_out) rc.out_dir = *ra_out;
      if (ra_clap_audio) rc.clap_audio_dir = *ra_clap_audio;
      if (ra_clap_text) rc.clap_text_dir = *ra_clap_text;
      if (ra_model_cfg) rc.model_config = *ra_model_cfg;
      if (ra_train_cfg) rc.train_config = *ra_train_cfg;
      if (ra_seed) rc.seed = *ra_seed;
      if (ra_policy) rc.analysis_policy = *ra_policy;
      if (ra_factors) rc.factors = parse_factor_list(*ra_factors);
      split_overrides(ra_sets, rc.model_overrides, rc.train_overrides);
      if (rc.dataset_root.empty() || rc.out_dir.empty())
        throw UsageError("run-all needs --data and --out (or a --config providing them)");
      const auto s = run_all(rc, [](const std::string& st) { std::cerr << "[run-all] " << st << "\n"; });
      const auto show = [](const std::optional<double>& v) { return v ? std::to_string(*v) : std::string("undefined"); };
      std::cerr << "test SRCC " << show(s.model.metrics.srcc);
      if (s.clap) std::cerr << ", baseline SRCC " << show(s.clap->metrics.srcc);
      std::cerr << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
