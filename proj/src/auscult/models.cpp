#include "auscult/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "auscult/rng.hpp"

namespace auscult {

namespace {

using json = nlohmann::json;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct DenseData {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values; // column-major

    double at(std::size_t r, std::size_t c) const { return values[c * n_rows + r]; }
};

DenseData make_dense(const FeatureMatrix& m) {
    DenseData d;
    d.n_rows = m.n_rows();
    d.n_cols = m.arity();
    d.values.resize(d.n_rows * d.n_cols);
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        if (m.rows[r].size() != d.n_cols)
            raise(Errc::arity_mismatch, "row arity differs from feature names");
        for (std::size_t c = 0; c < d.n_cols; ++c) {
            const FeatureValue& v = m.rows[r][c];
            if (!v)
                raise(Errc::internal_error,
                      "absent value reached training; run impute_missing first");
            d.values[c * d.n_rows + r] = *v;
        }
    }
    return d;
}

std::vector<std::vector<std::uint32_t>> presort_columns(const DenseData& X) {
    std::vector<std::vector<std::uint32_t>> sorted(X.n_cols);
    for (std::size_t c = 0; c < X.n_cols; ++c) {
        auto& order = sorted[c];
        order.resize(X.n_rows);
        std::iota(order.begin(), order.end(), 0u);
        const double* col = X.values.data() + c * X.n_rows;
        std::stable_sort(order.begin(), order.end(),
                         [col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }
    return sorted;
}

// Gini impurity reduction over weighted class counts.
struct GiniPolicy {
    int n_classes;
    const std::vector<int>* labels;

    int stat_len() const { return n_classes; }

    void add(double* stats, std::uint32_t row, double weight) const {
        stats[(*labels)[row]] += weight;
    }

    static double impurity(const double* stats, int k, double total) {
        double acc = 1.0;
        for (int i = 0; i < k; ++i) {
            const double p = stats[i] / total;
            acc -= p * p;
        }
        return acc;
    }

    double gain(const double* parent, const double* left) const {
        double wp = 0.0, wl = 0.0;
        for (int i = 0; i < n_classes; ++i) {
            wp += parent[i];
            wl += left[i];
        }
        const double wr = wp - wl;
        if (wl <= 0.0 || wr <= 0.0) return -1.0;
        double right[64];
        std::vector<double> right_heap;
        double* r = right;
        if (n_classes > 64) {
            right_heap.resize(static_cast<std::size_t>(n_classes));
            r = right_heap.data();
        }
        for (int i = 0; i < n_classes; ++i) r[i] = parent[i] - left[i];
        return impurity(parent, n_classes, wp) -
               (wl / wp) * impurity(left, n_classes, wl) -
               (wr / wp) * impurity(r, n_classes, wr);
    }

    bool splittable(const double* stats, std::size_t rows) const {
        if (rows < 2) return false;
        double total = 0.0, top = 0.0;
        for (int i = 0; i < n_classes; ++i) {
            total += stats[i];
            top = std::max(top, stats[i]);
        }
        return top < total; // impure
    }

    std::vector<double> leaf(const double* stats) const {
        double total = 0.0;
        for (int i = 0; i < n_classes; ++i) total += stats[i];
        std::vector<double> out(static_cast<std::size_t>(n_classes), 0.0);
        if (total > 0.0)
            for (int i = 0; i < n_classes; ++i) out[static_cast<std::size_t>(i)] = stats[i] / total;
        return out;
    }
};

// Second-order gain with L2-regularized leaf weights.
struct GradPolicy {
    const std::vector<double>* grad;
    const std::vector<double>* hess;
    double l2_reg;
    double min_child_weight;

    int stat_len() const { return 2; }

    void add(double* stats, std::uint32_t row, double weight) const {
        stats[0] += weight * (*grad)[row];
        stats[1] += weight * (*hess)[row];
    }

    double gain(const double* parent, const double* left) const {
        const double gl = left[0], hl = left[1];
        const double gr = parent[0] - gl, hr = parent[1] - hl;
        if (hl < min_child_weight || hr < min_child_weight) return -1.0;
        const auto score = [this](double g, double h) { return g * g / (h + l2_reg); };
        return 0.5 * (score(gl, hl) + score(gr, hr) - score(parent[0], parent[1]));
    }

    bool splittable(const double* stats, std::size_t rows) const {
        return rows >= 2 && stats[1] >= 2.0 * min_child_weight;
    }

    std::vector<double> leaf(const double* stats) const {
        return {-stats[0] / (stats[1] + l2_reg)};
    }
};

// Depth-wise grower over globally presorted columns. Candidate thresholds
// are midpoints between consecutive distinct values; ties in gain keep the
// lowest feature index and threshold.
template <class Policy>
Tree grow_tree(const DenseData& X, const std::vector<std::vector<std::uint32_t>>& sorted,
               const std::vector<double>& weight, const Policy& policy, Rng& rng,
               int max_depth, int per_split) {
    const std::size_t n = X.n_rows;
    const std::size_t n_features = X.n_cols;
    const int stat_len = policy.stat_len();
    const bool all_features =
        per_split <= 0 || per_split >= static_cast<int>(n_features);

    Tree tree;
    tree.nodes.emplace_back();

    struct NodeRt {
        std::vector<double> stats;
        std::size_t rows = 0;
        int depth = 0;
    };
    std::vector<NodeRt> rt(1);
    rt[0].stats.assign(static_cast<std::size_t>(stat_len), 0.0);

    std::vector<std::int32_t> node_of(n, -1);
    for (std::size_t r = 0; r < n; ++r) {
        if (weight[r] <= 0.0) continue;
        node_of[r] = 0;
        policy.add(rt[0].stats.data(), static_cast<std::uint32_t>(r), weight[r]);
        ++rt[0].rows;
    }

    struct Best {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };
    struct Scratch {
        std::size_t left_rows = 0;
        double prev = 0.0;
        bool has_prev = false;
    };

    std::vector<std::int32_t> active{0};
    std::vector<std::size_t> feat_scratch(n_features);

    while (!active.empty()) {
        std::vector<std::int32_t> splitting;
        for (std::int32_t nd : active) {
            const bool depth_ok = max_depth <= 0 || rt[static_cast<std::size_t>(nd)].depth < max_depth;
            if (depth_ok && policy.splittable(rt[static_cast<std::size_t>(nd)].stats.data(),
                                              rt[static_cast<std::size_t>(nd)].rows))
                splitting.push_back(nd);
        }

        std::vector<std::int32_t> local(tree.nodes.size(), -1);
        for (std::size_t i = 0; i < splitting.size(); ++i)
            local[static_cast<std::size_t>(splitting[i])] = static_cast<std::int32_t>(i);
        const std::size_t n_splitting = splitting.size();

        std::vector<Best> best(n_splitting);
        std::vector<std::uint8_t> uses;
        if (n_splitting > 0 && !all_features) {
            uses.assign(n_splitting * n_features, 0);
            for (std::size_t i = 0; i < n_splitting; ++i) {
                std::iota(feat_scratch.begin(), feat_scratch.end(), std::size_t{0});
                for (int j = 0; j < per_split; ++j) {
                    const std::size_t pick =
                        static_cast<std::size_t>(j) +
                        static_cast<std::size_t>(rng.below(n_features - static_cast<std::size_t>(j)));
                    std::swap(feat_scratch[static_cast<std::size_t>(j)], feat_scratch[pick]);
                    uses[i * n_features + feat_scratch[static_cast<std::size_t>(j)]] = 1;
                }
            }
        }

        if (n_splitting > 0) {
            std::vector<Scratch> scratch(n_splitting);
            std::vector<double> left_stats(n_splitting * static_cast<std::size_t>(stat_len));
            for (std::size_t f = 0; f < n_features; ++f) {
                bool any = all_features;
                if (!all_features)
                    for (std::size_t i = 0; i < n_splitting && !any; ++i)
                        any = uses[i * n_features + f] != 0;
                if (!any) continue;

                for (std::size_t i = 0; i < n_splitting; ++i) {
                    if (!all_features && !uses[i * n_features + f]) continue;
                    scratch[i] = Scratch{};
                    std::fill_n(left_stats.begin() +
                                    static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(stat_len)),
                                stat_len, 0.0);
                }

                const double* col = X.values.data() + f * n;
                for (const std::uint32_t r : sorted[f]) {
                    const std::int32_t nd = node_of[r];
                    if (nd < 0) continue;
                    const std::int32_t li = local[static_cast<std::size_t>(nd)];
                    if (li < 0) continue;
                    const std::size_t lu = static_cast<std::size_t>(li);
                    if (!all_features && !uses[lu * n_features + f]) continue;

                    const double v = col[r];
                    Scratch& sc = scratch[lu];
                    double* ls = left_stats.data() + lu * static_cast<std::size_t>(stat_len);
                    const NodeRt& node = rt[static_cast<std::size_t>(nd)];
                    if (sc.has_prev && v > sc.prev && sc.left_rows >= 1 &&
                        node.rows - sc.left_rows >= 1) {
                        const double g = policy.gain(node.stats.data(), ls);
                        if (g > best[lu].gain + 1e-12) {
                            double thr = sc.prev + 0.5 * (v - sc.prev);
                            if (!(thr < v)) thr = sc.prev; // adjacent floats
                            best[lu] = {g, static_cast<int>(f), thr};
                        }
                    }
                    policy.add(ls, r, weight[r]);
                    ++sc.left_rows;
                    sc.prev = v;
                    sc.has_prev = true;
                }
            }
        }

        std::vector<std::int32_t> next_active;
        for (std::int32_t nd : active) {
            const std::int32_t li = local[static_cast<std::size_t>(nd)];
            const bool split = li >= 0 && best[static_cast<std::size_t>(li)].feature >= 0;
            if (split) {
                const Best& b = best[static_cast<std::size_t>(li)];
                const std::int32_t lchild = static_cast<std::int32_t>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                rt.emplace_back();
                rt.emplace_back();
                for (int c = 0; c < 2; ++c) {
                    NodeRt& child = rt[rt.size() - 2 + static_cast<std::size_t>(c)];
                    child.stats.assign(static_cast<std::size_t>(stat_len), 0.0);
                    child.depth = rt[static_cast<std::size_t>(nd)].depth + 1;
                }
                TreeNode& parent = tree.nodes[static_cast<std::size_t>(nd)];
                parent.feature = b.feature;
                parent.threshold = b.threshold;
                parent.left = lchild;
                parent.right = lchild + 1;
                next_active.push_back(lchild);
                next_active.push_back(lchild + 1);
            } else {
                tree.nodes[static_cast<std::size_t>(nd)].leaf =
                    policy.leaf(rt[static_cast<std::size_t>(nd)].stats.data());
            }
        }

        for (std::size_t r = 0; r < n; ++r) {
            const std::int32_t nd = node_of[r];
            if (nd < 0) continue;
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(nd)];
            if (node.feature < 0) {
                node_of[r] = -1;
                continue;
            }
            const std::int32_t child =
                X.at(r, static_cast<std::size_t>(node.feature)) <= node.threshold
                    ? node.left
                    : node.right;
            node_of[r] = child;
            policy.add(rt[static_cast<std::size_t>(child)].stats.data(),
                       static_cast<std::uint32_t>(r), weight[r]);
            ++rt[static_cast<std::size_t>(child)].rows;
        }

        active = std::move(next_active);
    }
    return tree;
}

const double* tree_leaf(const Tree& tree, const std::vector<double>& row) {
    const TreeNode* node = &tree.nodes[0];
    while (node->feature >= 0) {
        const int next = row[static_cast<std::size_t>(node->feature)] <= node->threshold
                             ? node->left
                             : node->right;
        node = &tree.nodes[static_cast<std::size_t>(next)];
    }
    return node->leaf.data();
}

const double* tree_leaf_dense(const Tree& tree, const DenseData& X, std::size_t r) {
    const TreeNode* node = &tree.nodes[0];
    while (node->feature >= 0) {
        const int next = X.at(r, static_cast<std::size_t>(node->feature)) <= node->threshold
                             ? node->left
                             : node->right;
        node = &tree.nodes[static_cast<std::size_t>(next)];
    }
    return node->leaf.data();
}

std::vector<int> classification_labels(const FeatureMatrix& m, int* n_classes) {
    std::vector<int> labels(m.n_rows());
    int max_label = -1;
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        const double t = m.targets[r];
        if (!std::isfinite(t) || t < 0.0 || t != std::floor(t))
            raise(Errc::non_finite_target, "classification targets must be dense 0..K-1");
        labels[r] = static_cast<int>(t);
        max_label = std::max(max_label, labels[r]);
    }
    std::vector<bool> present(static_cast<std::size_t>(max_label) + 1, false);
    for (int l : labels) present[static_cast<std::size_t>(l)] = true;
    int distinct = 0;
    for (bool p : present) distinct += p ? 1 : 0;
    if (distinct < 2)
        raise(Errc::single_class_training, "training rows contain a single class");
    *n_classes = max_label + 1;
    return labels;
}

void check_trainable(const FeatureMatrix& m) {
    if (m.n_rows() < 10)
        raise(Errc::too_few_rows, "need at least 10 rows, got " + std::to_string(m.n_rows()));
    if (m.targets.size() != m.n_rows())
        raise(Errc::non_finite_target, "targets missing for some rows");
}

thread_local std::vector<double> g_last_gbm_loss;

} // namespace

std::vector<double> column_valid_means(const FeatureMatrix& m) {
    std::vector<double> means(m.arity(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t c = 0; c < m.arity(); ++c) {
        double acc = 0.0;
        std::size_t count = 0;
        for (const auto& row : m.rows)
            if (row[c]) {
                acc += *row[c];
                ++count;
            }
        if (count > 0) means[c] = acc / static_cast<double>(count);
    }
    return means;
}

namespace {

FeatureMatrix impute_with_means(const FeatureMatrix& m, const std::vector<double>& means,
                                std::vector<std::string>* warnings) {
    FeatureMatrix out = m;
    for (std::size_t c = 0; c < out.arity(); ++c) {
        const bool dead_column = !std::isfinite(means[c]);
        if (dead_column && warnings)
            warnings->push_back("feature '" + out.feature_names[c] +
                                "' has no valid values; imputing zeros");
        const double fallback = dead_column ? 0.0 : means[c];
        std::string current_recording;
        FeatureValue previous;
        for (std::size_t r = 0; r < out.n_rows(); ++r) {
            if (out.recording_ids.size() == out.n_rows() &&
                out.recording_ids[r] != current_recording) {
                current_recording = out.recording_ids[r];
                previous.reset();
            }
            FeatureValue& v = out.rows[r][c];
            if (!v) v = previous ? previous : FeatureValue{fallback};
            previous = v;
        }
    }
    return out;
}

} // namespace

FeatureMatrix impute_missing(const FeatureMatrix& m, std::vector<std::string>* warnings) {
    return impute_with_means(m, column_valid_means(m), warnings);
}

FeatureMatrix impute_missing(const FeatureMatrix& m, const std::vector<double>& fallback_means,
                             std::vector<std::string>* warnings) {
    if (fallback_means.size() != m.arity())
        raise(Errc::arity_mismatch, "fallback mean count differs from arity");
    return impute_with_means(m, fallback_means, warnings);
}

Scaler fit_scaler(const FeatureMatrix& train) {
    Scaler s;
    s.mean.resize(train.arity());
    s.stddev.resize(train.arity());
    for (std::size_t c = 0; c < train.arity(); ++c) {
        double acc = 0.0;
        for (const auto& row : train.rows) {
            if (!row[c]) raise(Errc::internal_error, "scaler fit requires imputed input");
            acc += *row[c];
        }
        const double mean = train.n_rows() ? acc / static_cast<double>(train.n_rows()) : 0.0;
        double var = 0.0;
        for (const auto& row : train.rows) var += (*row[c] - mean) * (*row[c] - mean);
        var = train.n_rows() ? var / static_cast<double>(train.n_rows()) : 0.0;
        s.mean[c] = mean;
        s.stddev[c] = std::sqrt(var);
    }
    return s;
}

FeatureMatrix Scaler::apply(const FeatureMatrix& m) const {
    if (mean.size() != m.arity()) raise(Errc::arity_mismatch, "scaler arity differs");
    FeatureMatrix out = m;
    for (std::size_t c = 0; c < out.arity(); ++c) {
        if (stddev[c] <= 0.0) continue; // constant column passes through
        const double lo = mean[c] - 5.0 * stddev[c];
        const double hi = mean[c] + 5.0 * stddev[c];
        for (auto& row : out.rows) {
            if (!row[c]) raise(Errc::internal_error, "scaler input must be imputed");
            const double clipped = std::clamp(*row[c], lo, hi);
            row[c] = (clipped - mean[c]) / stddev[c];
        }
    }
    return out;
}

std::pair<Scaler, FeatureMatrix> clip_and_standardize(const FeatureMatrix& train,
                                                      const FeatureMatrix& apply_to) {
    Scaler s = fit_scaler(train);
    FeatureMatrix transformed = s.apply(apply_to);
    return {std::move(s), std::move(transformed)};
}

ForestModel train_random_forest(const FeatureMatrix& m, const ForestConfig& cfg) {
    check_trainable(m);
    int n_classes = 0;
    const std::vector<int> labels = classification_labels(m, &n_classes);
    const DenseData dense = make_dense(m);
    const auto sorted = presort_columns(dense);

    const int per_split =
        cfg.per_split_features > 0
            ? cfg.per_split_features
            : std::max(1, static_cast<int>(std::llround(std::sqrt(
                              static_cast<double>(dense.n_cols)))));

    ForestModel model;
    model.n_classes = n_classes;
    model.arity = dense.n_cols;
    model.config = cfg;
    model.trees.reserve(static_cast<std::size_t>(cfg.n_trees));
    model.in_bag.reserve(static_cast<std::size_t>(cfg.n_trees));

    const GiniPolicy policy{n_classes, &labels};
    std::vector<double> weights(dense.n_rows);
    for (int t = 0; t < cfg.n_trees; ++t) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
        std::vector<std::uint8_t> bag(dense.n_rows, 0);
        if (cfg.bootstrap) {
            std::fill(weights.begin(), weights.end(), 0.0);
            for (std::size_t d = 0; d < dense.n_rows; ++d)
                weights[static_cast<std::size_t>(rng.below(dense.n_rows))] += 1.0;
            for (std::size_t r = 0; r < dense.n_rows; ++r) bag[r] = weights[r] > 0.0;
        } else {
            std::fill(weights.begin(), weights.end(), 1.0);
            std::fill(bag.begin(), bag.end(), 1);
        }
        model.trees.push_back(
            grow_tree(dense, sorted, weights, policy, rng, cfg.max_depth, per_split));
        model.in_bag.push_back(std::move(bag));
    }
    return model;
}

namespace {

GbmModel train_gbm(const FeatureMatrix& m, const GbmConfig& cfg, GbmLoss loss) {
    check_trainable(m);

    GbmModel model;
    model.loss = loss;
    model.config = cfg;

    std::vector<int> labels;
    if (loss == GbmLoss::squared) {
        for (double t : m.targets)
            if (!std::isfinite(t))
                raise(Errc::non_finite_target, "regression targets must be finite");
        model.n_classes = 1;
    } else {
        labels = classification_labels(m, &model.n_classes);
        if (loss == GbmLoss::logistic && model.n_classes != 2)
            raise(Errc::single_class_training, "logistic loss needs exactly 2 classes");
    }

    const DenseData dense = make_dense(m);
    const auto sorted = presort_columns(dense);
    model.arity = dense.n_cols;
    const std::size_t n = dense.n_rows;

    // score columns: 1 for logistic/squared, K for softmax
    const int k = loss == GbmLoss::softmax ? model.n_classes : 1;

    model.base_scores.assign(static_cast<std::size_t>(k), 0.0);
    if (loss == GbmLoss::squared) {
        model.base_scores[0] = signal_mean(m.targets);
    } else if (loss == GbmLoss::logistic) {
        double pos = 0.0;
        for (int l : labels) pos += l;
        const double p = std::clamp(pos / static_cast<double>(n), 1e-12, 1.0 - 1e-12);
        model.base_scores[0] = std::log(p / (1.0 - p));
    } else {
        std::vector<double> prior(static_cast<std::size_t>(k), 0.0);
        for (int l : labels) prior[static_cast<std::size_t>(l)] += 1.0;
        for (int c = 0; c < k; ++c)
            model.base_scores[static_cast<std::size_t>(c)] = std::log(
                std::max(prior[static_cast<std::size_t>(c)] / static_cast<double>(n), 1e-12));
    }

    std::vector<std::vector<double>> scores(
        static_cast<std::size_t>(k), std::vector<double>(n, 0.0));
    for (int c = 0; c < k; ++c)
        std::fill(scores[static_cast<std::size_t>(c)].begin(),
                  scores[static_cast<std::size_t>(c)].end(),
                  model.base_scores[static_cast<std::size_t>(c)]);

    const auto training_loss = [&]() {
        double acc = 0.0;
        if (loss == GbmLoss::squared) {
            for (std::size_t r = 0; r < n; ++r) {
                const double e = scores[0][r] - m.targets[r];
                acc += e * e;
            }
        } else if (loss == GbmLoss::logistic) {
            for (std::size_t r = 0; r < n; ++r) {
                const double p =
                    std::clamp(1.0 / (1.0 + std::exp(-scores[0][r])), 1e-15, 1.0 - 1e-15);
                acc -= labels[r] ? std::log(p) : std::log(1.0 - p);
            }
        } else {
            for (std::size_t r = 0; r < n; ++r) {
                double mx = scores[0][r], denom = 0.0;
                for (int c = 1; c < k; ++c)
                    mx = std::max(mx, scores[static_cast<std::size_t>(c)][r]);
                for (int c = 0; c < k; ++c)
                    denom += std::exp(scores[static_cast<std::size_t>(c)][r] - mx);
                const double logp =
                    scores[static_cast<std::size_t>(labels[r])][r] - mx - std::log(denom);
                acc -= logp;
            }
        }
        return acc / static_cast<double>(n);
    };

    g_last_gbm_loss.clear();
    g_last_gbm_loss.push_back(training_loss());

    const std::vector<double> weights(n, 1.0);
    std::vector<double> grad(n), hess(n);
    std::vector<double> prob(static_cast<std::size_t>(k));
    const GradPolicy policy{&grad, &hess, cfg.l2_reg, cfg.min_child_weight};

    model.stages.reserve(static_cast<std::size_t>(cfg.n_stages));
    for (int stage = 0; stage < cfg.n_stages; ++stage) {
        std::vector<Tree> stage_trees;
        stage_trees.reserve(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            for (std::size_t r = 0; r < n; ++r) {
                if (loss == GbmLoss::squared) {
                    grad[r] = scores[0][r] - m.targets[r];
                    hess[r] = 1.0;
                } else if (loss == GbmLoss::logistic) {
                    const double p = 1.0 / (1.0 + std::exp(-scores[0][r]));
                    grad[r] = p - static_cast<double>(labels[r]);
                    hess[r] = std::max(p * (1.0 - p), 1e-16);
                } else {
                    double mx = scores[0][r];
                    for (int cc = 1; cc < k; ++cc)
                        mx = std::max(mx, scores[static_cast<std::size_t>(cc)][r]);
                    double denom = 0.0;
                    for (int cc = 0; cc < k; ++cc) {
                        prob[static_cast<std::size_t>(cc)] =
                            std::exp(scores[static_cast<std::size_t>(cc)][r] - mx);
                        denom += prob[static_cast<std::size_t>(cc)];
                    }
                    const double p = prob[static_cast<std::size_t>(c)] / denom;
                    grad[r] = p - (labels[r] == c ? 1.0 : 0.0);
                    hess[r] = std::max(p * (1.0 - p), 1e-16);
                }
            }
            Rng rng(mix_seed(cfg.seed,
                             static_cast<std::uint64_t>(stage) * static_cast<std::uint64_t>(k) +
                                 static_cast<std::uint64_t>(c)));
            Tree tree = grow_tree(dense, sorted, weights, policy, rng, cfg.max_depth, 0);
            for (std::size_t r = 0; r < n; ++r)
                scores[static_cast<std::size_t>(c)][r] +=
                    cfg.learning_rate * tree_leaf_dense(tree, dense, r)[0];
            stage_trees.push_back(std::move(tree));
        }
        model.stages.push_back(std::move(stage_trees));
        g_last_gbm_loss.push_back(training_loss());
    }
    return model;
}

} // namespace

GbmModel train_gbm_classifier(const FeatureMatrix& m, const GbmConfig& cfg) {
    int n_classes = 0;
    classification_labels(m, &n_classes); // validates labels up front
    return train_gbm(m, cfg, n_classes == 2 ? GbmLoss::logistic : GbmLoss::softmax);
}

GbmModel train_gbm_regressor(const FeatureMatrix& m, const GbmConfig& cfg) {
    return train_gbm(m, cfg, GbmLoss::squared);
}

const std::vector<double>& last_gbm_training_loss() { return g_last_gbm_loss; }

Rows to_dense_rows(const FeatureMatrix& m) {
    Rows rows(m.n_rows());
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
        rows[r].resize(m.arity());
        for (std::size_t c = 0; c < m.arity(); ++c) {
            if (!m.rows[r][c])
                raise(Errc::internal_error, "absent value in dense conversion");
            rows[r][c] = *m.rows[r][c];
        }
    }
    return rows;
}

std::vector<std::vector<double>> predict_proba(const ForestModel& model, const Rows& rows) {
    std::vector<std::vector<double>> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != model.arity)
            raise(Errc::arity_mismatch, "prediction row arity differs from training");
        std::vector<double> acc(static_cast<std::size_t>(model.n_classes), 0.0);
        for (const Tree& tree : model.trees) {
            const double* leaf = tree_leaf(tree, rows[r]);
            for (int c = 0; c < model.n_classes; ++c)
                acc[static_cast<std::size_t>(c)] += leaf[c];
        }
        const double inv = 1.0 / static_cast<double>(model.trees.size());
        for (double& v : acc) v *= inv;
        out[r] = std::move(acc);
    }
    return out;
}

std::vector<std::vector<double>> predict_proba(const GbmModel& model, const Rows& rows) {
    if (model.loss == GbmLoss::squared)
        raise(Errc::task_error, "predict_proba on a regression model");
    std::vector<std::vector<double>> out(rows.size());
    const int k = model.loss == GbmLoss::softmax ? model.n_classes : 1;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != model.arity)
            raise(Errc::arity_mismatch, "prediction row arity differs from training");
        std::vector<double> score(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) score[static_cast<std::size_t>(c)] =
            model.base_scores[static_cast<std::size_t>(c)];
        for (const auto& stage : model.stages)
            for (int c = 0; c < k; ++c)
                score[static_cast<std::size_t>(c)] +=
                    model.config.learning_rate *
                    tree_leaf(stage[static_cast<std::size_t>(c)], rows[r])[0];
        if (model.loss == GbmLoss::logistic) {
            const double p = 1.0 / (1.0 + std::exp(-score[0]));
            out[r] = {1.0 - p, p};
        } else {
            double mx = score[0];
            for (double v : score) mx = std::max(mx, v);
            double denom = 0.0;
            std::vector<double> p(static_cast<std::size_t>(k));
            for (int c = 0; c < k; ++c) {
                p[static_cast<std::size_t>(c)] = std::exp(score[static_cast<std::size_t>(c)] - mx);
                denom += p[static_cast<std::size_t>(c)];
            }
            for (double& v : p) v /= denom;
            out[r] = std::move(p);
        }
    }
    return out;
}

std::vector<double> predict_regression(const GbmModel& model, const Rows& rows) {
    if (model.loss != GbmLoss::squared)
        raise(Errc::task_error, "predict_regression on a classification model");
    std::vector<double> out(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != model.arity)
            raise(Errc::arity_mismatch, "prediction row arity differs from training");
        double score = model.base_scores[0];
        for (const auto& stage : model.stages)
            score += model.config.learning_rate * tree_leaf(stage[0], rows[r])[0];
        out[r] = score;
    }
    return out;
}

namespace {

json tree_to_json(const Tree& tree) {
    json j;
    auto& feature = j["feature"] = json::array();
    auto& threshold = j["threshold"] = json::array();
    auto& left = j["left"] = json::array();
    auto& right = j["right"] = json::array();
    auto& leaf = j["leaf"] = json::array();
    for (const TreeNode& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        leaf.push_back(n.leaf);
    }
    return j;
}

Tree tree_from_json(const json& j) {
    Tree tree;
    const auto& feature = j.at("feature");
    const std::size_t n = feature.size();
    tree.nodes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        TreeNode& node = tree.nodes[i];
        node.feature = feature[i].get<int>();
        node.threshold = j.at("threshold")[i].get<double>();
        node.left = j.at("left")[i].get<int>();
        node.right = j.at("right")[i].get<int>();
        node.leaf = j.at("leaf")[i].get<std::vector<double>>();
    }
    return tree;
}

const char* loss_name(GbmLoss loss) {
    switch (loss) {
    case GbmLoss::logistic: return "logistic";
    case GbmLoss::softmax: return "softmax";
    case GbmLoss::squared: return "squared";
    }
    return "?";
}

GbmLoss loss_from_name(const std::string& s) {
    if (s == "logistic") return GbmLoss::logistic;
    if (s == "softmax") return GbmLoss::softmax;
    if (s == "squared") return GbmLoss::squared;
    raise(Errc::config_error, "unknown loss '" + s + "'");
}

} // namespace

void save_model(std::ostream& out, const ModelBundle& bundle) {
    json j;
    j["format"] = "auscult-model";
    j["format_version"] = 1;
    j["kind"] = bundle.kind;
    j["task"] = bundle.task;
    j["registry_version"] = bundle.registry_version;
    j["seed"] = bundle.seed;
    j["provenance"] = bundle.provenance;
    j["scaler"] = {{"mean", bundle.scaler.mean}, {"stddev", bundle.scaler.stddev}};
    j["impute_means"] = bundle.impute_means;
    if (bundle.forest) {
        const ForestModel& f = *bundle.forest;
        json trees = json::array();
        for (const Tree& t : f.trees) trees.push_back(tree_to_json(t));
        j["forest"] = {{"n_classes", f.n_classes},
                       {"arity", f.arity},
                       {"config",
                        {{"n_trees", f.config.n_trees},
                         {"max_depth", f.config.max_depth},
                         {"per_split_features", f.config.per_split_features},
                         {"bootstrap", f.config.bootstrap},
                         {"seed", f.config.seed}}},
                       {"trees", std::move(trees)}};
    }
    if (bundle.gbm) {
        const GbmModel& g = *bundle.gbm;
        json stages = json::array();
        for (const auto& stage : g.stages) {
            json st = json::array();
            for (const Tree& t : stage) st.push_back(tree_to_json(t));
            stages.push_back(std::move(st));
        }
        j["gbm"] = {{"n_classes", g.n_classes},
                    {"arity", g.arity},
                    {"loss", loss_name(g.loss)},
                    {"base_scores", g.base_scores},
                    {"config",
                     {{"n_stages", g.config.n_stages},
                      {"learning_rate", g.config.learning_rate},
                      {"max_depth", g.config.max_depth},
                      {"min_child_weight", g.config.min_child_weight},
                      {"l2_reg", g.config.l2_reg},
                      {"seed", g.config.seed}}},
                    {"stages", std::move(stages)}};
    }
    out << j.dump();
}

ModelBundle load_model(std::istream& in) {
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        raise(Errc::config_error, std::string("cannot parse model file: ") + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "auscult-model")
        raise(Errc::config_error, "not a model file");

    ModelBundle b;
    b.kind = j.value("kind", "");
    b.task = j.value("task", "");
    b.registry_version = j.value("registry_version", "");
    b.seed = j.value("seed", std::uint64_t{0});
    b.provenance = j.value("provenance", "");
    b.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    b.scaler.stddev = j.at("scaler").at("stddev").get<std::vector<double>>();
    b.impute_means = j.at("impute_means").get<std::vector<double>>();
    if (j.contains("forest")) {
        const json& f = j["forest"];
        ForestModel model;
        model.n_classes = f.at("n_classes").get<int>();
        model.arity = f.at("arity").get<std::size_t>();
        const json& cfg = f.at("config");
        model.config.n_trees = cfg.at("n_trees").get<int>();
        model.config.max_depth = cfg.at("max_depth").get<int>();
        model.config.per_split_features = cfg.at("per_split_features").get<int>();
        model.config.bootstrap = cfg.at("bootstrap").get<bool>();
        model.config.seed = cfg.at("seed").get<std::uint64_t>();
        for (const json& t : f.at("trees")) model.trees.push_back(tree_from_json(t));
        b.forest = std::move(model);
    }
    if (j.contains("gbm")) {
        const json& g = j["gbm"];
        GbmModel model;
        model.n_classes = g.at("n_classes").get<int>();
        model.arity = g.at("arity").get<std::size_t>();
        model.loss = loss_from_name(g.at("loss").get<std::string>());
        model.base_scores = g.at("base_scores").get<std::vector<double>>();
        const json& cfg = g.at("config");
        model.config.n_stages = cfg.at("n_stages").get<int>();
        model.config.learning_rate = cfg.at("learning_rate").get<double>();
        model.config.max_depth = cfg.at("max_depth").get<int>();
        model.config.min_child_weight = cfg.at("min_child_weight").get<double>();
        model.config.l2_reg = cfg.at("l2_reg").get<double>();
        model.config.seed = cfg.at("seed").get<std::uint64_t>();
        for (const json& st : g.at("stages")) {
            std::vector<Tree> stage;
            for (const json& t : st) stage.push_back(tree_from_json(t));
            model.stages.push_back(std::move(stage));
        }
        b.gbm = std::move(model);
    }
    return b;
}

} // namespace auscult
