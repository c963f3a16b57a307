#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auscult/dataset.hpp"
#include "auscult/emd.hpp"
#include "auscult/eval.hpp"
#include "auscult/features.hpp"
#include "auscult/models.hpp"

namespace auscult {

struct PipelineConfig {
    double working_rate_hz = 4000.0;
    WindowPlan window;
    BiosignalConfig biosignal;
    std::string registry_version = "v1";
    std::vector<std::string> tasks; // empty = all
    std::uint64_t seed = 0;
    std::string cache_dir = ".auscult-cache";
    int jobs = 1;
    std::optional<ModelKind> model_override;
    ForestConfig forest;
    GbmConfig gbm;
};

PipelineConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const PipelineConfig& cfg);

// FNV-1a content hashing for cache keys and provenance chains.
std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 0);
std::string hash_hex(std::uint64_t h);
std::string hash_file(const std::filesystem::path& path);
std::string hash_string(const std::string& s);

// Hash of the configuration fields the feature stage depends on.
std::string feature_config_hash(const PipelineConfig& cfg);
std::string eval_config_hash(const PipelineConfig& cfg, const std::string& task);

// atomic write: temp file + rename
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Working-rate preprocessing: anti-aliased resample to cfg.working_rate_hz.
Signal preprocess_recording(const Signal& audio, const PipelineConfig& cfg);

// Feature rows for a whole dataset plus the per-row subject metadata needed
// to bind task targets later. Rows are ordered by patient, recording, window.
struct FeatureTable {
    FeatureMatrix matrix; // targets empty until bind_task
    std::vector<Diagnosis> diagnosis;
    std::vector<std::optional<double>> age;
    std::vector<std::optional<Sex>> sex;
    std::vector<std::optional<double>> bmi;

    std::string registry_version;
    std::string config_hash;
    std::string upstream_hash;
    std::uint64_t seed = 0;

    std::size_t cache_hits = 0;
    std::size_t cache_misses = 0;
};

FeatureTable extract_dataset_features(const Dataset& ds, const PipelineConfig& cfg);

void save_feature_table(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_feature_table(const std::filesystem::path& path);

// Rows eligible for the task, with targets attached.
FeatureMatrix bind_task(const FeatureTable& table, const TaskSpec& task);

TaskSpec make_task(const std::string& name);

// LOSO evaluation with a cache keyed on (features, task, eval config).
EvalReport evaluate_task(const FeatureTable& table, const TaskSpec& task,
                         const PipelineConfig& cfg, bool* cache_hit = nullptr);

// Train on all eligible rows and package with scaler + imputation means.
ModelBundle train_task(const FeatureTable& table, const TaskSpec& task,
                       const PipelineConfig& cfg);

// Report serialization (JSON for machines, rendered text with reference
// deltas for humans) plus per-class ROC point files and a fold log.
std::string report_to_json(const EvalReport& report, const FeatureTable& table,
                           const PipelineConfig& cfg);
EvalReport report_from_json(const std::string& text);
std::string render_report_text(const EvalReport& report);
void write_report_files(const std::filesystem::path& dir, const EvalReport& report,
                        const FeatureTable& table, const PipelineConfig& cfg);

// Combined metrics table across every report.json under a directory.
std::string render_combined(const std::filesystem::path& reports_dir);

// Reference results on the ICBHI benchmark, used for delta reporting.
struct ReferenceMetrics {
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    double mae = 0.0;
    double mae_sd = 0.0;
    double r2 = 0.0;
    double rmse = 0.0;
};
const ReferenceMetrics* reference_metrics_for(TaskKind kind);

// Debug export of the six biosignals (and optionally raw IMFs / PSDs) as
// float32 WAV bundles, one directory per recording.
void export_biosignals(const Dataset& ds, const PipelineConfig& cfg,
                       const std::filesystem::path& out_dir, bool dump_imfs,
                       bool dump_psd);

} // namespace auscult
