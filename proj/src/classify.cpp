#include "facerec/classify.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "facerec/error.hpp"
#include "facerec/parallel.hpp"

namespace facerec {

namespace {

// n * Gini impurity = n - sum(c^2) / n.
double scaled_gini(std::span<const std::size_t> counts, std::size_t n) {
    if (n == 0) return 0.0;
    double sq = 0.0;
    for (std::size_t c : counts) sq += static_cast<double>(c) * static_cast<double>(c);
    return static_cast<double>(n) - sq / static_cast<double>(n);
}

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  ///< summed scaled Gini of the children
};

class TreeBuilder {
public:
    TreeBuilder(const FeatureMatrix& data, std::span<const int> labels, std::size_t n_classes,
                const TreeParams& params, Rng& rng)
        : data_(data), labels_(labels), n_classes_(n_classes), params_(params), rng_(rng) {
        mtry_ = params.mtry == 0
                    ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.cols()))))
                    : params.mtry;
        mtry_ = std::clamp<std::size_t>(mtry_, 1, std::max<std::size_t>(1, data.cols()));
        feature_order_.resize(data.cols());
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        grow(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    std::uint32_t grow(std::vector<std::size_t> samples, std::size_t depth) {
        const auto index = static_cast<std::uint32_t>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        std::vector<std::size_t> counts(n_classes_, 0);
        for (std::size_t s : samples) ++counts[static_cast<std::size_t>(labels_[s])];
        const std::size_t n = samples.size();
        const bool pure = std::count(counts.begin(), counts.end(), n) == 1;
        const bool depth_limited = params_.max_depth != 0 && depth >= params_.max_depth;

        Split split;
        if (!pure && !depth_limited && n >= std::max<std::size_t>(2, params_.min_samples_split)) {
            split = find_split(samples, counts);
        }
        if (split.feature < 0) {
            auto& node = tree_.nodes[index];
            node.probabilities.resize(n_classes_);
            for (std::size_t c = 0; c < n_classes_; ++c) {
                node.probabilities[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
            }
            return index;
        }
        assert(split.score <= scaled_gini(counts, n) + 1e-9 * static_cast<double>(n));

        std::vector<std::size_t> left, right;
        for (std::size_t s : samples) {
            (data_.at(s, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right)
                .push_back(s);
        }
        samples.clear();
        samples.shrink_to_fit();
        tree_.nodes[index].feature = split.feature;
        tree_.nodes[index].threshold = split.threshold;
        const std::uint32_t l = grow(std::move(left), depth + 1);
        tree_.nodes[index].left = l;
        const std::uint32_t r = grow(std::move(right), depth + 1);
        tree_.nodes[index].right = r;
        return index;
    }

    Split find_split(const std::vector<std::size_t>& samples, const std::vector<std::size_t>& counts) {
        const std::size_t dim = data_.cols();
        std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
        Split best;
        best.score = std::numeric_limits<double>::infinity();
        for (std::size_t drawn = 0; drawn < dim; ++drawn) {
            if (drawn >= mtry_ && best.feature >= 0) break;
            const std::size_t pick = drawn + rng_.index(dim - drawn);
            std::swap(feature_order_[drawn], feature_order_[pick]);
            evaluate_feature(feature_order_[drawn], samples, counts, best);
        }
        return best;
    }

    void evaluate_feature(std::size_t feature, const std::vector<std::size_t>& samples,
                          const std::vector<std::size_t>& counts, Split& best) {
        const std::size_t n = samples.size();
        column_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            column_[i] = {data_.at(samples[i], feature), labels_[samples[i]]};
        }
        std::sort(column_.begin(), column_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (column_.front().first == column_.back().first) return;

        left_counts_.assign(n_classes_, 0);
        right_counts_ = counts;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto label = static_cast<std::size_t>(column_[i].second);
            ++left_counts_[label];
            --right_counts_[label];
            const double lo = column_[i].first;
            const double hi = column_[i + 1].first;
            if (!(lo < hi)) continue;
            const double score = scaled_gini(left_counts_, i + 1) + scaled_gini(right_counts_, n - i - 1);
            if (score < best.score) {
                double threshold = lo + (hi - lo) / 2.0;
                if (!(threshold < hi)) threshold = lo;
                best = {static_cast<int>(feature), threshold, score};
            }
        }
    }

    const FeatureMatrix& data_;
    std::span<const int> labels_;
    std::size_t n_classes_;
    TreeParams params_;
    Rng& rng_;
    std::size_t mtry_ = 1;
    DecisionTree tree_;
    std::vector<std::size_t> feature_order_;
    std::vector<std::pair<double, int>> column_;
    std::vector<std::size_t> left_counts_;
    std::vector<std::size_t> right_counts_;
};

void check_training_input(const FeatureMatrix& data, std::span<const int> labels,
                          std::size_t n_classes) {
    if (data.rows() == 0) throw ParameterError("training: empty data");
    if (data.cols() == 0) throw ParameterError("training: zero-dimensional samples");
    if (labels.size() != data.rows()) {
        throw ParameterError("training: " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(data.rows()) + " rows");
    }
    if (n_classes == 0) throw ParameterError("training: n_classes must be >= 1");
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= n_classes) {
            throw ParameterError("training: label " + std::to_string(l) + " outside [0, " +
                                 std::to_string(n_classes) + ")");
        }
    }
}

}  // namespace

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

FeatureMatrix FeatureMatrix::from_rows(std::span<const std::vector<double>> rows) {
    if (rows.empty()) return {};
    FeatureMatrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw ParameterError("FeatureMatrix: ragged rows");
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
    FeatureMatrix m(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), m.row(i).begin());
    }
    return m;
}

const std::vector<double>& DecisionTree::leaf_probabilities(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
        const auto& node = nodes[i];
        i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes[i].probabilities;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[nodes[i].left] = d[i] + 1;
            d[nodes[i].right] = d[i] + 1;
        }
    }
    return deepest;
}

DecisionTree train_tree(const FeatureMatrix& data, std::span<const int> labels,
                        std::size_t n_classes, const TreeParams& params, Rng& rng,
                        std::span<const std::size_t> sample_indices) {
    check_training_input(data, labels, n_classes);
    std::vector<std::size_t> samples;
    if (sample_indices.empty()) {
        samples.resize(data.rows());
        std::iota(samples.begin(), samples.end(), std::size_t{0});
    } else {
        samples.assign(sample_indices.begin(), sample_indices.end());
        for (std::size_t s : samples) {
            if (s >= data.rows()) throw ParameterError("train_tree: sample index out of range");
        }
    }
    return TreeBuilder(data, labels, n_classes, params, rng).build(std::move(samples));
}

Forest train_forest(const FeatureMatrix& data, std::span<const int> labels, std::size_t n_classes,
                    const ForestParams& params) {
    check_training_input(data, labels, n_classes);
    if (params.n_trees == 0) throw ParameterError("train_forest: n_trees must be >= 1");
    if (params.mtry > data.cols()) {
        throw ParameterError("train_forest: mtry exceeds feature dimension");
    }

    Forest forest;
    forest.n_classes = n_classes;
    forest.dim = data.cols();
    forest.params = params;
    forest.trees.resize(params.n_trees);
    forest.tree_seeds.resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) {
        forest.tree_seeds[t] = derive_seed(params.seed, t);
    }

    parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
        Rng rng(forest.tree_seeds[t]);
        std::vector<std::size_t> samples;
        if (params.bootstrap) {
            samples.resize(data.rows());
            for (auto& s : samples) s = rng.index(data.rows());
        }
        forest.trees[t] = train_tree(data, labels, n_classes, params.tree_params(), rng, samples);
    });
    return forest;
}

std::vector<double> predict_proba(const Forest& forest, std::span<const double> x) {
    if (x.size() != forest.dim) {
        throw ParameterError("predict: sample has dimension " + std::to_string(x.size()) +
                             ", forest expects " + std::to_string(forest.dim));
    }
    std::vector<double> mean(forest.n_classes, 0.0);
    for (const auto& tree : forest.trees) {
        const auto& p = tree.leaf_probabilities(x);
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
    }
    for (double& v : mean) v /= static_cast<double>(forest.trees.size());
    return mean;
}

int predict(const Forest& forest, std::span<const double> x) {
    const auto p = predict_proba(forest, x);
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<int> predict_batch(const Forest& forest, const FeatureMatrix& data, unsigned threads) {
    std::vector<int> out(data.rows());
    parallel_for(data.rows(), threads, [&](std::size_t i) { out[i] = predict(forest, data.row(i)); });
    return out;
}

int knn_classify(const FeatureMatrix& train, std::span<const int> labels, const KnnParams& params,
                 std::span<const double> x) {
    if (train.rows() == 0) throw ParameterError("knn_classify: empty training set");
    if (labels.size() != train.rows()) throw ParameterError("knn_classify: label count mismatch");
    if (params.k == 0 || params.k > train.rows()) {
        throw ParameterError("knn_classify: k must be in [1, training size]");
    }
    if (x.size() != train.cols()) throw ParameterError("knn_classify: dimension mismatch");

    std::vector<std::pair<double, std::size_t>> dist(train.rows());
    for (std::size_t i = 0; i < train.rows(); ++i) {
        const auto row = train.row(i);
        double d = 0.0;
        for (std::size_t j = 0; j < row.size(); ++j) d += (row[j] - x[j]) * (row[j] - x[j]);
        dist[i] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(params.k), dist.end());

    const int max_label = *std::max_element(labels.begin(), labels.end());
    std::vector<std::size_t> votes(static_cast<std::size_t>(max_label) + 1, 0);
    for (std::size_t i = 0; i < params.k; ++i) ++votes[static_cast<std::size_t>(labels[dist[i].second])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

void write_forest(std::ostream& out, const Forest& forest) {
    using namespace binary;
    put_magic(out, "FRFS");
    put_u32(out, 1);
    put_u32(out, static_cast<std::uint32_t>(forest.n_classes));
    put_u32(out, static_cast<std::uint32_t>(forest.dim));
    put_u32(out, static_cast<std::uint32_t>(forest.params.n_trees));
    put_u32(out, static_cast<std::uint32_t>(forest.params.max_depth));
    put_u32(out, static_cast<std::uint32_t>(forest.params.min_samples_split));
    put_u32(out, static_cast<std::uint32_t>(forest.params.mtry));
    put_u8(out, forest.params.bootstrap ? 1 : 0);
    put_u64(out, forest.params.seed);
    for (std::size_t t = 0; t < forest.trees.size(); ++t) {
        put_u64(out, forest.tree_seeds[t]);
        const auto& nodes = forest.trees[t].nodes;
        put_u32(out, static_cast<std::uint32_t>(nodes.size()));
        for (const auto& node : nodes) {
            if (node.is_leaf()) {
                put_u8(out, 0);
                for (double p : node.probabilities) put_f64(out, p);
            } else {
                put_u8(out, 1);
                put_u32(out, static_cast<std::uint32_t>(node.feature));
                put_f64(out, node.threshold);
            }
        }
    }
    if (!out) throw IoError("forest: write failed");
}

namespace {

// Rebuilds child links from a pre-order record stream.
std::uint32_t link_preorder(std::vector<TreeNode>& nodes, std::uint32_t& cursor) {
    if (cursor >= nodes.size()) throw ParseError("forest: truncated tree");
    const std::uint32_t index = cursor++;
    if (!nodes[index].is_leaf()) {
        nodes[index].left = link_preorder(nodes, cursor);
        nodes[index].right = link_preorder(nodes, cursor);
    }
    return index;
}

}  // namespace

Forest read_forest(std::istream& in) {
    using namespace binary;
    expect_magic(in, "FRFS", "forest");
    const auto version = get_u32(in, "forest version");
    if (version != 1) throw ParseError("forest: unsupported version " + std::to_string(version));
    Forest forest;
    forest.n_classes = get_u32(in, "n_classes");
    forest.dim = get_u32(in, "dim");
    forest.params.n_trees = get_u32(in, "n_trees");
    forest.params.max_depth = get_u32(in, "max_depth");
    forest.params.min_samples_split = get_u32(in, "min_samples_split");
    forest.params.mtry = get_u32(in, "mtry");
    forest.params.bootstrap = get_u8(in, "bootstrap") != 0;
    forest.params.seed = get_u64(in, "seed");
    if (forest.n_classes == 0 || forest.dim == 0 || forest.params.n_trees == 0) {
        throw ParseError("forest: header has zero classes, dimension or trees");
    }

    for (std::size_t t = 0; t < forest.params.n_trees; ++t) {
        forest.tree_seeds.push_back(get_u64(in, "tree seed"));
        const auto count = get_u32(in, "node count");
        if (count == 0) throw ParseError("forest: empty tree");
        DecisionTree tree;
        tree.nodes.resize(count);
        for (auto& node : tree.nodes) {
            const auto kind = get_u8(in, "node kind");
            if (kind == 0) {
                node.probabilities.resize(forest.n_classes);
                for (double& p : node.probabilities) p = get_f64(in, "leaf probability");
            } else if (kind == 1) {
                node.feature = static_cast<int>(get_u32(in, "split feature"));
                if (static_cast<std::size_t>(node.feature) >= forest.dim) {
                    throw ParseError("forest: split feature out of range");
                }
                node.threshold = get_f64(in, "split threshold");
            } else {
                throw ParseError("forest: unknown node kind " + std::to_string(kind));
            }
        }
        std::uint32_t cursor = 0;
        link_preorder(tree.nodes, cursor);
        if (cursor != count) throw ParseError("forest: trailing nodes in tree");
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

}  // namespace facerec
