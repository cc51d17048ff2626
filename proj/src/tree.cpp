#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mtsk/classify.hpp"
#include "mtsk/rng.hpp"

namespace mtsk::cls {

namespace {

double gini(long pos, long total) {
    if (total == 0) return 0.0;
    const double p = static_cast<double>(pos) / static_cast<double>(total);
    return 2.0 * p * (1.0 - p);
}

struct TreeBuilder {
    const Matrix& X;
    const std::vector<int>& y;
    int max_depth;   // 0 = unlimited
    int min_leaf;
    int mtry;        // 0 = all features
    Rng* rng;        // feature sampling for forests
    std::vector<TreeNode> nodes;

    int build(std::vector<int>& idx, int depth) {
        long pos = 0;
        for (int i : idx) pos += y[static_cast<std::size_t>(i)];
        const long total = static_cast<long>(idx.size());

        TreeNode node;
        node.pos_frac = static_cast<double>(pos) / static_cast<double>(total);
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back(node);

        const bool pure = pos == 0 || pos == total;
        const bool depth_capped = max_depth > 0 && depth >= max_depth;
        if (pure || depth_capped || total < 2 * min_leaf) return node_id;

        // candidate features: all, or an mtry-sized sample per node
        std::vector<int> features;
        const int p = static_cast<int>(X.cols());
        if (mtry > 0 && mtry < p) {
            features = rng->sample_indices(static_cast<std::size_t>(p),
                                           static_cast<std::size_t>(mtry));
        } else {
            features.resize(static_cast<std::size_t>(p));
            std::iota(features.begin(), features.end(), 0);
        }

        const double parent = gini(pos, total);
        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;

        std::vector<std::pair<double, int>> sorted(idx.size());
        for (int f : features) {
            for (std::size_t i = 0; i < idx.size(); ++i)
                sorted[i] = {X(idx[i], f), y[static_cast<std::size_t>(idx[i])]};
            std::sort(sorted.begin(), sorted.end());
            long left_pos = 0;
            for (long split = 1; split < total; ++split) {
                left_pos += sorted[static_cast<std::size_t>(split - 1)].second;
                if (sorted[static_cast<std::size_t>(split - 1)].first ==
                    sorted[static_cast<std::size_t>(split)].first)
                    continue;  // threshold must separate distinct values
                if (split < min_leaf || total - split < min_leaf) continue;
                const double wl = static_cast<double>(split) / static_cast<double>(total);
                const double impurity = wl * gini(left_pos, split) +
                                        (1.0 - wl) * gini(pos - left_pos, total - split);
                const double gain = parent - impurity;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (sorted[static_cast<std::size_t>(split - 1)].first +
                                            sorted[static_cast<std::size_t>(split)].first);
                }
            }
        }
        if (best_feature < 0) return node_id;

        std::vector<int> left, right;
        for (int i : idx)
            (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
        if (left.empty() || right.empty()) return node_id;

        nodes[static_cast<std::size_t>(node_id)].feature = best_feature;
        nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int l = build(left, depth + 1);
        nodes[static_cast<std::size_t>(node_id)].left = l;
        const int r = build(right, depth + 1);
        nodes[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }
};

DecisionTreeModel build_tree(const Matrix& X, const std::vector<int>& y, std::vector<int> idx,
                             int max_depth, int min_leaf, int mtry, Rng* rng) {
    TreeBuilder b{X, y, max_depth, min_leaf, mtry, rng, {}};
    b.build(idx, 0);
    DecisionTreeModel m;
    m.nodes = std::move(b.nodes);
    return m;
}

}  // namespace

double DecisionTreeModel::predict_one(const Eigen::Ref<const Vector>& x) const {
    int cur = 0;
    for (;;) {
        const TreeNode& node = nodes[static_cast<std::size_t>(cur)];
        if (node.feature < 0) return node.pos_frac;
        cur = x(node.feature) <= node.threshold ? node.left : node.right;
    }
}

Prediction DecisionTreeModel::predict(const Matrix& X) const {
    Prediction p;
    p.scores.resize(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) p.scores(i) = predict_one(X.row(i).transpose());
    p.labels.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        p.labels[static_cast<std::size_t>(i)] = p.scores(i) >= 0.5 ? 1 : 0;
    return p;
}

Prediction RandomForestModel::predict(const Matrix& X) const {
    Prediction p;
    p.scores = Vector::Zero(X.rows());
    for (const auto& tree : trees)
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            p.scores(i) += tree.predict_one(X.row(i).transpose()) >= 0.5 ? 1.0 : 0.0;
    p.scores /= static_cast<double>(trees.size());
    p.labels.resize(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        p.labels[static_cast<std::size_t>(i)] = p.scores(i) >= 0.5 ? 1 : 0;
    return p;
}

std::unique_ptr<Model> fit_tree_or_forest(const ClassifierSpec& spec, const Matrix& X,
                                          const std::vector<int>& y, std::uint64_t seed) {
    const auto& h = spec.hyper;
    const int max_depth = h.value("max_depth", 0);
    const int min_leaf = h.value("min_leaf", 1);
    if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
    const int n = static_cast<int>(X.rows());

    if (spec.kind == ClassifierKind::decision_tree) {
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        auto m = std::make_unique<DecisionTreeModel>();
        *m = build_tree(X, y, std::move(idx), max_depth, min_leaf, 0, nullptr);
        return m;
    }

    const int n_trees = h.value("trees", 50);
    if (n_trees < 1) throw std::invalid_argument("trees must be >= 1");
    const int mtry = std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(X.cols())))));
    auto m = std::make_unique<RandomForestModel>();
    m->trees.reserve(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(mix_seed(seed, 0xf05e57, static_cast<std::uint64_t>(t)));
        std::vector<int> boot(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            boot[static_cast<std::size_t>(i)] = static_cast<int>(rng.index(static_cast<std::size_t>(n)));
        std::sort(boot.begin(), boot.end());
        m->trees.push_back(build_tree(X, y, std::move(boot), max_depth, min_leaf, mtry, &rng));
    }
    return m;
}

}  // namespace mtsk::cls
