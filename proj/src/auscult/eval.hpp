#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "auscult/dataset.hpp"
#include "auscult/models.hpp"

namespace auscult {

struct LosoFold {
    int test_patient = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
};

// One fold per distinct patient, ordered by patient id.
std::vector<LosoFold> loso_splits(const FeatureMatrix& m);

// Subject-level decision: argmax of the mean window probability vector,
// ties resolved to the lowest class index.
std::pair<int, std::vector<double>> aggregate_subject(
    const std::vector<std::vector<double>>& window_probs);

struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<long long> counts; // row = truth, column = prediction

    explicit ConfusionMatrix(int k = 0)
        : n_classes(k), counts(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0) {}

    long long& at(int truth, int predicted) {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_classes) +
                      static_cast<std::size_t>(predicted)];
    }
    long long at(int truth, int predicted) const {
        return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_classes) +
                      static_cast<std::size_t>(predicted)];
    }
    long long total() const;
};

double balanced_accuracy(const ConfusionMatrix& c,
                         std::vector<std::string>* warnings = nullptr);

enum class F1Averaging { positive_class, macro };

double f1_score(const ConfusionMatrix& c, F1Averaging averaging,
                std::vector<std::string>* warnings = nullptr);

// Exact Mann-Whitney AUC (tie-aware) of binary labels against scores.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// (fpr, tpr) pairs from a threshold sweep over the distinct scores.
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels);

struct RegressionMetrics {
    double mae = 0.0;
    double mae_sd = 0.0;
    double rmse = 0.0;
    std::optional<double> r2;
};

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& truths);

enum class ModelKind { forest, gbm };

const char* model_kind_name(ModelKind kind);
ModelKind default_model_for(TaskKind kind);

struct EvalConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    std::optional<ModelKind> model_override;
    std::optional<F1Averaging> f1_override;
    ForestConfig forest;
    GbmConfig gbm;
};

struct FoldOutcome {
    int patient = 0;
    std::uint64_t seed = 0;
    double truth = 0.0;
    int predicted_class = -1;
    double predicted_value = 0.0;
    std::vector<double> mean_probs;
    std::size_t n_windows = 0;
};

struct EvalReport {
    TaskSpec task;
    bool regression = false;
    int n_classes = 0;
    ConfusionMatrix confusion;        // subject level
    ConfusionMatrix window_confusion; // window level
    std::vector<std::pair<double, double>> subject_pairs; // regression (pred, truth)
    std::vector<std::pair<double, double>> window_pairs;
    std::map<std::string, double> metrics;
    // window-level ROC points, one curve per class (one-vs-rest)
    std::vector<std::vector<std::pair<double, double>>> roc;
    std::vector<FoldOutcome> folds;
    std::vector<std::string> warnings;
};

// Full LOSO protocol: per fold impute -> fit scaler on the training side ->
// train -> predict test windows -> aggregate per subject. Window-level ROC
// accumulates across folds. Fold seeds are seed + fold index.
EvalReport run_task(const FeatureMatrix& m, const TaskSpec& task, const EvalConfig& cfg);

} // namespace auscult
