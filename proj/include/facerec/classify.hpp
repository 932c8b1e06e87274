#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "facerec/random.hpp"

namespace facerec {

/// Dense row-major sample matrix.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols);

    /// Builds from equally sized rows; throws ParameterError on ragged input.
    static FeatureMatrix from_rows(std::span<const std::vector<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<const double> row(std::size_t i) const { return {&data_[i * cols_], cols_}; }
    std::span<double> row(std::size_t i) { return {&data_[i * cols_], cols_}; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    /// Rows picked by index, in the given order.
    FeatureMatrix select(std::span<const std::size_t> indices) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Internal nodes route x[feature] <= threshold to `left`; leaves carry class
/// frequencies summing to 1.
struct TreeNode {
    int feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::vector<double> probabilities;

    bool is_leaf() const { return feature < 0; }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in pre-order; index 0 is the root.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    const std::vector<double>& leaf_probabilities(std::span<const double> x) const;
    std::size_t depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct TreeParams {
    std::size_t max_depth = 0;  ///< 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t mtry = 0;  ///< features tried per split; 0 = ceil(sqrt(dim))
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;
    std::size_t min_samples_split = 2;
    std::size_t mtry = 0;
    bool bootstrap = true;
    std::uint64_t seed = 0;
    unsigned threads = 0;  ///< training workers; 0 = all cores. Not part of the model.

    TreeParams tree_params() const { return {max_depth, min_samples_split, mtry}; }

    friend bool operator==(const ForestParams& a, const ForestParams& b) {
        return a.n_trees == b.n_trees && a.max_depth == b.max_depth &&
               a.min_samples_split == b.min_samples_split && a.mtry == b.mtry &&
               a.bootstrap == b.bootstrap && a.seed == b.seed;
    }
};

struct Forest {
    std::vector<DecisionTree> trees;
    std::vector<std::uint64_t> tree_seeds;
    std::size_t n_classes = 0;
    std::size_t dim = 0;
    ForestParams params;

    friend bool operator==(const Forest&, const Forest&) = default;
};

struct KnnParams {
    std::size_t k = 5;
};

/// Greedy CART on Gini impurity. At each node `mtry` features are drawn
/// without replacement; if none of them separates the node, the remaining
/// features are tried in draw order before giving up. Thresholds are
/// midpoints between consecutive distinct values. Splitting stops on purity,
/// max_depth or min_samples_split. Rows in `sample_indices` may repeat
/// (bootstrap); an empty span means every row once.
DecisionTree train_tree(const FeatureMatrix& data, std::span<const int> labels,
                        std::size_t n_classes, const TreeParams& params, Rng& rng,
                        std::span<const std::size_t> sample_indices = {});

/// Trees are grown independently, each from its own seed derived from
/// params.seed, so the forest does not depend on params.threads.
Forest train_forest(const FeatureMatrix& data, std::span<const int> labels, std::size_t n_classes,
                    const ForestParams& params);

/// Mean of the per-tree leaf distributions.
std::vector<double> predict_proba(const Forest& forest, std::span<const double> x);

/// argmax of predict_proba; ties go to the lowest class index.
int predict(const Forest& forest, std::span<const double> x);

/// Predicts every row on up to `threads` workers.
std::vector<int> predict_batch(const Forest& forest, const FeatureMatrix& data, unsigned threads = 0);

/// Majority label among the k nearest rows (Euclidean). Distance ties go to
/// the lower row index, vote ties to the lower class index.
int knn_classify(const FeatureMatrix& train, std::span<const int> labels, const KnnParams& params,
                 std::span<const double> x);

/// Forest file: "FRFS", u32 version (1), u32 n_classes, u32 dim, params
/// (u32 n_trees, u32 max_depth, u32 min_samples_split, u32 mtry, u8 bootstrap,
/// u64 seed), then per tree: u64 seed, u32 node count, pre-order node
/// records. A record is u8 kind (0 leaf, 1 split); splits carry u32 feature
/// and f64 threshold, leaves n_classes f64 probabilities. Little-endian.
void write_forest(std::ostream& out, const Forest& forest);
Forest read_forest(std::istream& in);

}  // namespace facerec
