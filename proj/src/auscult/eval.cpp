#include "auscult/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "auscult/parallel.hpp"

namespace auscult {

std::vector<LosoFold> loso_splits(const FeatureMatrix& m) {
    if (m.group_ids.size() != m.n_rows())
        raise(Errc::internal_error, "rows without group ids");
    std::set<int> patients(m.group_ids.begin(), m.group_ids.end());
    if (patients.size() < 2)
        raise(Errc::single_patient, "LOSO needs at least 2 patients");

    std::vector<LosoFold> folds;
    folds.reserve(patients.size());
    for (int patient : patients) {
        LosoFold fold;
        fold.test_patient = patient;
        for (std::size_t r = 0; r < m.n_rows(); ++r)
            (m.group_ids[r] == patient ? fold.test_rows : fold.train_rows).push_back(r);
        folds.push_back(std::move(fold));
    }
    return folds;
}

std::pair<int, std::vector<double>> aggregate_subject(
    const std::vector<std::vector<double>>& window_probs) {
    if (window_probs.empty())
        raise(Errc::internal_error, "no window predictions to aggregate");
    std::vector<double> mean(window_probs[0].size(), 0.0);
    for (const auto& p : window_probs)
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
    for (double& v : mean) v /= static_cast<double>(window_probs.size());
    int best = 0;
    for (std::size_t c = 1; c < mean.size(); ++c)
        if (mean[c] > mean[best]) best = static_cast<int>(c);
    return {best, std::move(mean)};
}

long long ConfusionMatrix::total() const {
    long long acc = 0;
    for (long long c : counts) acc += c;
    return acc;
}

double balanced_accuracy(const ConfusionMatrix& c, std::vector<std::string>* warnings) {
    double acc = 0.0;
    int used = 0;
    for (int t = 0; t < c.n_classes; ++t) {
        long long row_total = 0;
        for (int p = 0; p < c.n_classes; ++p) row_total += c.at(t, p);
        if (row_total == 0) {
            if (warnings)
                warnings->push_back("class " + std::to_string(t) +
                                    " has no true instances; excluded from balanced accuracy");
            continue;
        }
        acc += static_cast<double>(c.at(t, t)) / static_cast<double>(row_total);
        ++used;
    }
    if (used == 0) raise(Errc::empty_class, "no class has true instances");
    return acc / static_cast<double>(used);
}

namespace {

double f1_for_class(const ConfusionMatrix& c, int k, bool* undefined) {
    long long tp = c.at(k, k), fp = 0, fn = 0;
    for (int t = 0; t < c.n_classes; ++t)
        if (t != k) fp += c.at(t, k);
    for (int p = 0; p < c.n_classes; ++p)
        if (p != k) fn += c.at(k, p);
    const double denom = static_cast<double>(2 * tp + fp + fn);
    if (denom == 0.0) {
        *undefined = true;
        return 0.0;
    }
    *undefined = false;
    return 2.0 * static_cast<double>(tp) / denom;
}

} // namespace

double f1_score(const ConfusionMatrix& c, F1Averaging averaging,
                std::vector<std::string>* warnings) {
    if (averaging == F1Averaging::positive_class) {
        if (c.n_classes != 2)
            raise(Errc::task_error, "positive-class F1 needs a binary matrix");
        bool undefined = false;
        const double f1 = f1_for_class(c, 1, &undefined);
        if (undefined && warnings)
            warnings->push_back("F1 undefined (no true or predicted positives); reported as 0");
        return f1;
    }
    double acc = 0.0;
    int used = 0;
    for (int k = 0; k < c.n_classes; ++k) {
        long long truth = 0, predicted = 0;
        for (int i = 0; i < c.n_classes; ++i) {
            truth += c.at(k, i);
            predicted += c.at(i, k);
        }
        if (truth == 0 && predicted == 0) continue; // absent class, skipped
        bool undefined = false;
        const double f1 = f1_for_class(c, k, &undefined);
        if (undefined && warnings)
            warnings->push_back("F1 for class " + std::to_string(k) +
                                " undefined; reported as 0");
        acc += f1;
        ++used;
    }
    if (used == 0) raise(Errc::empty_class, "no class observed");
    return acc / static_cast<double>(used);
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty())
        raise(Errc::internal_error, "scores and labels must align");
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        raise(Errc::one_class_only, "both labels must be present");

    // average ranks over ties, then the Mann-Whitney statistic
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    double pos_rank_sum = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r)
        if (labels[r]) pos_rank_sum += rank[r];
    const double u = pos_rank_sum - static_cast<double>(n_pos) *
                                        (static_cast<double>(n_pos) + 1.0) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels) {
    std::size_t n_pos = 0;
    for (int l : labels) n_pos += l ? 1 : 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        raise(Errc::one_class_only, "both labels must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    std::vector<std::pair<double, double>> points{{0.0, 0.0}};
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k)
            (labels[order[k]] ? tp : fp) += 1;
        points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos));
        i = j + 1;
    }
    return points;
}

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& truths) {
    if (preds.size() != truths.size() || preds.empty())
        raise(Errc::internal_error, "prediction and truth lengths differ");
    RegressionMetrics out;
    const std::size_t n = preds.size();
    std::vector<double> abs_err(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = preds[i] - truths[i];
        abs_err[i] = std::abs(e);
        sq += e * e;
    }
    out.mae = signal_mean(abs_err);
    out.mae_sd = std::sqrt(signal_variance(abs_err));
    out.rmse = std::sqrt(sq / static_cast<double>(n));

    const double truth_mean = signal_mean(truths);
    double ss_tot = 0.0;
    for (double t : truths) ss_tot += (t - truth_mean) * (t - truth_mean);
    if (ss_tot > 0.0) out.r2 = 1.0 - sq / ss_tot;
    return out;
}

const char* model_kind_name(ModelKind kind) {
    return kind == ModelKind::forest ? "forest" : "gbm";
}

ModelKind default_model_for(TaskKind kind) {
    switch (kind) {
    case TaskKind::binary_healthy:
    case TaskKind::six_class:
    case TaskKind::four_class:
        return ModelKind::forest;
    default:
        return ModelKind::gbm;
    }
}

namespace {

FeatureMatrix subset(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
    FeatureMatrix out;
    out.feature_names = m.feature_names;
    out.rows.reserve(rows.size());
    for (std::size_t r : rows) {
        out.rows.push_back(m.rows[r]);
        out.group_ids.push_back(m.group_ids[r]);
        if (!m.recording_ids.empty()) out.recording_ids.push_back(m.recording_ids[r]);
        if (!m.window_indices.empty()) out.window_indices.push_back(m.window_indices[r]);
        if (!m.targets.empty()) out.targets.push_back(m.targets[r]);
    }
    return out;
}

struct FoldResult {
    FoldOutcome outcome;
    // window-level accumulation
    std::vector<int> window_truth;
    std::vector<int> window_pred;
    std::vector<std::vector<double>> window_probs;
    std::vector<double> window_reg_pred;
    std::vector<double> window_reg_truth;
};

} // namespace

EvalReport run_task(const FeatureMatrix& m, const TaskSpec& task, const EvalConfig& cfg) {
    if (m.targets.size() != m.n_rows())
        raise(Errc::task_error, "matrix has no task targets attached");

    EvalReport report;
    report.task = task;
    report.regression = task_is_regression(task.kind);

    int n_classes = 0;
    if (!report.regression) {
        for (double t : m.targets)
            n_classes = std::max(n_classes, static_cast<int>(t) + 1);
        report.n_classes = n_classes;
    }

    const std::vector<LosoFold> folds = loso_splits(m);
    std::vector<FoldResult> results(folds.size());

    const ModelKind kind =
        cfg.model_override ? *cfg.model_override : default_model_for(task.kind);

    parallel_for(folds.size(), cfg.jobs, [&](std::size_t fi) {
        const LosoFold& fold = folds[fi];
        FoldResult& res = results[fi];
        const std::uint64_t fold_seed = cfg.seed + fi;
        try {
            FeatureMatrix train = subset(m, fold.train_rows);
            FeatureMatrix test = subset(m, fold.test_rows);

            const std::vector<double> train_means = column_valid_means(train);
            train = impute_missing(train);
            test = impute_missing(test, train_means);
            const Scaler scaler = fit_scaler(train);
            train = scaler.apply(train);
            test = scaler.apply(test);

            res.outcome.patient = fold.test_patient;
            res.outcome.seed = fold_seed;
            res.outcome.truth = test.targets.front();
            res.outcome.n_windows = test.n_rows();
            const Rows test_rows = to_dense_rows(test);

            if (report.regression) {
                GbmConfig gc = cfg.gbm;
                gc.seed = fold_seed;
                const GbmModel model = train_gbm_regressor(train, gc);
                const std::vector<double> preds = predict_regression(model, test_rows);
                res.window_reg_pred = preds;
                res.window_reg_truth = test.targets;
                res.outcome.predicted_value = signal_mean(preds);
            } else {
                std::vector<std::vector<double>> probs;
                if (kind == ModelKind::forest) {
                    ForestConfig fc = cfg.forest;
                    fc.seed = fold_seed;
                    probs = predict_proba(train_random_forest(train, fc), test_rows);
                } else {
                    GbmConfig gc = cfg.gbm;
                    gc.seed = fold_seed;
                    probs = predict_proba(train_gbm_classifier(train, gc), test_rows);
                }
                // trained on the fold's classes; pad columns if a class is
                // absent from this training fold
                for (auto& p : probs)
                    if (static_cast<int>(p.size()) < n_classes)
                        p.resize(static_cast<std::size_t>(n_classes), 0.0);
                res.window_probs = probs;
                res.window_truth.assign(test.n_rows(), static_cast<int>(test.targets.front()));
                res.window_pred.resize(test.n_rows());
                for (std::size_t r = 0; r < probs.size(); ++r) {
                    int best = 0;
                    for (std::size_t c = 1; c < probs[r].size(); ++c)
                        if (probs[r][c] > probs[r][static_cast<std::size_t>(best)])
                            best = static_cast<int>(c);
                    res.window_pred[r] = best;
                }
                const auto [cls, mean] = aggregate_subject(probs);
                res.outcome.predicted_class = cls;
                res.outcome.mean_probs = mean;
            }
        } catch (const Error& e) {
            throw Error(e.code(), "fold for patient " + std::to_string(fold.test_patient) +
                                      ": " + e.what());
        }
    });

    // deterministic reduction in fold order
    report.confusion = ConfusionMatrix(n_classes);
    report.window_confusion = ConfusionMatrix(n_classes);
    std::vector<std::vector<double>> all_window_probs;
    std::vector<int> all_window_truth;
    std::vector<double> subject_preds, subject_truths, window_preds, window_truths;

    for (const FoldResult& res : results) {
        report.folds.push_back(res.outcome);
        if (report.regression) {
            subject_preds.push_back(res.outcome.predicted_value);
            subject_truths.push_back(res.outcome.truth);
            report.subject_pairs.emplace_back(res.outcome.predicted_value, res.outcome.truth);
            for (std::size_t i = 0; i < res.window_reg_pred.size(); ++i) {
                window_preds.push_back(res.window_reg_pred[i]);
                window_truths.push_back(res.window_reg_truth[i]);
                report.window_pairs.emplace_back(res.window_reg_pred[i],
                                                 res.window_reg_truth[i]);
            }
        } else {
            report.confusion.at(static_cast<int>(res.outcome.truth),
                                res.outcome.predicted_class) += 1;
            for (std::size_t i = 0; i < res.window_truth.size(); ++i) {
                report.window_confusion.at(res.window_truth[i], res.window_pred[i]) += 1;
                all_window_probs.push_back(res.window_probs[i]);
                all_window_truth.push_back(res.window_truth[i]);
            }
        }
    }

    if (report.regression) {
        const RegressionMetrics sm = regression_metrics(subject_preds, subject_truths);
        report.metrics["mae"] = sm.mae;
        report.metrics["mae_sd"] = sm.mae_sd;
        report.metrics["rmse"] = sm.rmse;
        if (sm.r2) report.metrics["r2"] = *sm.r2;
        const RegressionMetrics wm = regression_metrics(window_preds, window_truths);
        report.metrics["mae_window"] = wm.mae;
        report.metrics["rmse_window"] = wm.rmse;
        if (wm.r2) report.metrics["r2_window"] = *wm.r2;
    } else {
        report.metrics["balanced_accuracy"] =
            balanced_accuracy(report.confusion, &report.warnings);
        const F1Averaging avg = cfg.f1_override
                                    ? *cfg.f1_override
                                    : (n_classes == 2 ? F1Averaging::positive_class
                                                      : F1Averaging::macro);
        report.metrics["f1"] = f1_score(report.confusion, avg, &report.warnings);
        report.metrics["balanced_accuracy_window"] =
            balanced_accuracy(report.window_confusion, &report.warnings);
        report.metrics["f1_window"] =
            f1_score(report.window_confusion, avg, &report.warnings);

        // window-level one-vs-rest ROC, macro AUC across classes
        double auc_acc = 0.0;
        int auc_used = 0;
        report.roc.resize(static_cast<std::size_t>(n_classes));
        for (int c = 0; c < n_classes; ++c) {
            std::vector<double> scores(all_window_probs.size());
            std::vector<int> labels(all_window_probs.size());
            for (std::size_t i = 0; i < all_window_probs.size(); ++i) {
                scores[i] = all_window_probs[i][static_cast<std::size_t>(c)];
                labels[i] = all_window_truth[i] == c ? 1 : 0;
            }
            try {
                auc_acc += roc_auc(scores, labels);
                ++auc_used;
                report.roc[static_cast<std::size_t>(c)] = roc_points(scores, labels);
            } catch (const Error&) {
                report.warnings.push_back("ROC undefined for class " + std::to_string(c));
            }
        }
        if (auc_used > 0)
            report.metrics["roc_auc_window"] = auc_acc / static_cast<double>(auc_used);
    }
    return report;
}

} // namespace auscult
