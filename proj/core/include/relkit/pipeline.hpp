#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relkit/data_model.hpp"
#include "relkit/eval_metrics.hpp"
#include "relkit/factor_analysis.hpp"
#include "relkit/kv_config.hpp"
#include "relkit/predictor/trainer.hpp"
#include "relkit/screening.hpp"

namespace relkit {

inline constexpr int kReportSchemaVersion = 1;

// Worker cap from RELATE_KIT_THREADS, else the hardware concurrency.
std::size_t worker_threads();

// REL records of one split, screened with `policy`.
ScreeningResult screen_split(const Dataset& d, Split split, const ScreeningPolicy& policy);

struct TrainingData {
  ScreeningResult train_screen;  // train split, train policy
  ScreeningResult test_screen;   // test split, test policy
  Dataset train;
  Dataset validation;
  Dataset test;
};

TrainingData prepare_training_data(const Dataset& d, std::uint64_t seed);

struct FactorOutcome {
  std::string factor;
  std::optional<FactorReport> report;
  std::string skipped_reason;  // set when the factor could not be tested
};

// Runs each factor on its own worker, up to `threads` at a time. Results
// keep the order of `specs`.
std::vector<FactorOutcome> run_factor_analyses(const Dataset& d, const TextFeatureMap& text,
                                               const std::vector<FactorSpec>& specs, double alpha,
                                               std::size_t threads);

struct EvaluationReport {
  MetricReport metrics;
  std::map<TopCategory, std::optional<double>> per_category;
  std::vector<std::string> missing;  // pairs with truth but no prediction
};

// Compares normalized predictions with the normalized per-pair REL means
// of `truth`.
EvaluationReport evaluate_predictions(const std::map<std::string, double>& predictions,
                                      const Dataset& truth);

// --- report files ---
void write_screening_report(const std::filesystem::path& path,
                            const std::map<std::string, const ScreeningResult*>& results);
// One {"listener_id", "reason", "value"} line per excluded listener.
void write_exclusions(const std::filesystem::path& path, const ScreeningResult& result);
void write_text_features(const std::filesystem::path& path, const TextFeatureMap& features);
void write_factor_reports(const std::filesystem::path& report_path,
                          const std::filesystem::path& boxplot_path,
                          const std::vector<FactorOutcome>& outcomes);
// One {"pair_id", "score"} line per pair; score on the normalized scale.
void write_predictions(const std::filesystem::path& path, const std::map<std::string, double>& scores);
std::map<std::string, double> read_predictions(const std::filesystem::path& path);
void write_evaluation_report(const std::filesystem::path& path, const EvaluationReport& report,
                             const std::string& source);
void write_train_history(const std::filesystem::path& path, const predictor::TrainResult& result);
void write_dataset_summary(const std::filesystem::path& path, const Dataset& d);

struct PipelineConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path features_dir;
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> clap_audio_dir;
  std::optional<std::filesystem::path> clap_text_dir;
  std::string analysis_policy = "analysis";
  MetricKind analysis_metric = MetricKind::kRel;
  std::uint64_t seed = 7;
  std::optional<std::filesystem::path> model_config;
  std::optional<std::filesystem::path> train_config;
  KeyValues model_overrides;
  KeyValues train_overrides;
  std::vector<std::string> factors;  // empty = all
  double alpha = 0.05;
  std::size_t bins = 3;
};

struct RunSummary {
  EvaluationReport model;
  std::optional<EvaluationReport> clap;
  std::size_t best_step = 0;
};

// ingest -> screen -> textfeat -> analyze -> train -> predict -> evaluate
// -> clapscore (when embedding dirs are set). Errors are rethrown with the
// failing stage's name and their original exit category.
RunSummary run_all(const PipelineConfig& cfg,
                   const std::function<void(const std::string&)>& log = {});

// Resolves model/train configs: defaults, then files, then overrides.
predictor::ModelConfig resolve_model_config(const std::optional<std::filesystem::path>& file,
                                            const KeyValues& overrides, std::uint64_t seed);
predictor::TrainConfig resolve_train_config(const std::optional<std::filesystem::path>& file,
                                            const KeyValues& overrides);

}  // namespace relkit
