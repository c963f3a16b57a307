#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "auscult/features.hpp"

namespace auscult {

// Rows of window features with per-row group (patient) and target. Targets
// are class labels stored as doubles for classification tasks.
struct FeatureMatrix {
    std::vector<std::string> feature_names;
    std::vector<int> group_ids;
    std::vector<std::string> recording_ids;
    std::vector<int> window_indices;
    std::vector<std::vector<FeatureValue>> rows;
    std::vector<double> targets;

    std::size_t arity() const { return feature_names.size(); }
    std::size_t n_rows() const { return rows.size(); }
};

// Per-column mean over present entries; NaN for all-absent columns.
std::vector<double> column_valid_means(const FeatureMatrix& m);

// Forward-fill within each recording's window sequence; leading gaps take the
// column mean; all-absent columns become zero (with a warning).
FeatureMatrix impute_missing(const FeatureMatrix& m,
                             std::vector<std::string>* warnings = nullptr);

// Same, but leading gaps take externally supplied means (e.g. training-fold
// means applied to a test fold).
FeatureMatrix impute_missing(const FeatureMatrix& m,
                             const std::vector<double>& fallback_means,
                             std::vector<std::string>* warnings = nullptr);

// Winsorize to mean +/- 5 std then z-score; statistics come from the fit
// matrix only. Constant columns pass through unchanged.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> stddev; // 0 marks a pass-through column

    FeatureMatrix apply(const FeatureMatrix& m) const;
};

Scaler fit_scaler(const FeatureMatrix& train);
std::pair<Scaler, FeatureMatrix> clip_and_standardize(const FeatureMatrix& train,
                                                      const FeatureMatrix& apply_to);

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> leaf; // class distribution, or one regression value
};

struct Tree {
    std::vector<TreeNode> nodes; // node 0 is the root
};

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 0;          // 0 = unlimited
    int per_split_features = 0; // 0 = round(sqrt(arity))
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::vector<Tree> trees;
    int n_classes = 0;
    std::size_t arity = 0;
    ForestConfig config;
    // training metadata, not serialized: bootstrap membership per tree
    std::vector<std::vector<std::uint8_t>> in_bag;
};

struct GbmConfig {
    int n_stages = 100;
    double learning_rate = 0.3;
    int max_depth = 6;
    double min_child_weight = 1.0;
    double l2_reg = 1.0;
    std::uint64_t seed = 0;
};

enum class GbmLoss { logistic, softmax, squared };

struct GbmModel {
    std::vector<std::vector<Tree>> stages; // one tree per class per stage
    std::vector<double> base_scores;
    GbmLoss loss = GbmLoss::logistic;
    int n_classes = 0;
    std::size_t arity = 0;
    GbmConfig config;
};

ForestModel train_random_forest(const FeatureMatrix& m, const ForestConfig& cfg);
GbmModel train_gbm_classifier(const FeatureMatrix& m, const GbmConfig& cfg);
GbmModel train_gbm_regressor(const FeatureMatrix& m, const GbmConfig& cfg);

// Per-stage training loss, recorded during gradient boosting (exposed for
// the monotone-loss property check).
const std::vector<double>& last_gbm_training_loss();

using Rows = std::vector<std::vector<double>>;

// Imputed + standardized matrix as dense rows; throws on absent entries.
Rows to_dense_rows(const FeatureMatrix& m);

std::vector<std::vector<double>> predict_proba(const ForestModel& model, const Rows& rows);
std::vector<std::vector<double>> predict_proba(const GbmModel& model, const Rows& rows);
std::vector<double> predict_regression(const GbmModel& model, const Rows& rows);

// A trained model with everything inference needs: scaler, imputation means,
// registry version and task identity. Serialized as self-describing JSON;
// reloaded bundles predict bit-identically.
struct ModelBundle {
    std::string kind; // "forest" | "gbm_classifier" | "gbm_regressor"
    std::optional<ForestModel> forest;
    std::optional<GbmModel> gbm;
    Scaler scaler;
    std::vector<double> impute_means;
    std::string registry_version;
    std::string task;
    std::uint64_t seed = 0;
    std::string provenance; // upstream artifact hash chain
};

void save_model(std::ostream& out, const ModelBundle& bundle);
ModelBundle load_model(std::istream& in);

} // namespace auscult
