#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "facerec/classify.hpp"
#include "facerec/error.hpp"
#include "helpers.hpp"

using namespace facerec;

namespace {

struct Blobs {
    FeatureMatrix x;
    std::vector<int> y;
};

Blobs gaussian_blobs(std::size_t per_class, std::size_t classes, std::size_t dim, double spread, std::uint64_t seed) {
    Rng rng(seed);
    Blobs b{FeatureMatrix(per_class * classes, dim), {}};
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            auto row = b.x.row(c * per_class + i);
            for (std::size_t j = 0; j < dim; ++j) {
                // Box-Muller normal noise around a class-specific corner.
                const double u1 = 1.0 - rng.uniform();
                const double u2 = rng.uniform();
                const double n = std::sqrt(-2 * std::log(u1)) * std::cos(2 * 3.141592653589793 * u2);
                row[j] = ((c >> (j % 3)) & 1 ? 10.0 : 0.0) + (j == 0 ? 10.0 * c : 0.0) + spread * n;
            }
            b.y.push_back(static_cast<int>(c));
        }
    }
    return b;
}

std::string bytes_of(const Forest& f) {
    std::stringstream ss;
    write_forest(ss, f);
    return ss.str();
}

}  // namespace

TEST_SUITE("classify") {

TEST_CASE("single-class data gives one leaf") {
    const auto x = FeatureMatrix::from_rows(std::vector<std::vector<double>>{{1, 2}, {3, 4}, {5, 6}});
    const std::vector<int> y = {2, 2, 2};
    Rng rng(0);
    const auto tree = train_tree(x, y, 3, {}, rng);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].probabilities == std::vector<double>{0, 0, 1});
}

TEST_CASE("two points force one split between them") {
    const auto x = FeatureMatrix::from_rows(std::vector<std::vector<double>>{{0}, {1}});
    const std::vector<int> y = {0, 1};
    Rng rng(0);
    const auto tree = train_tree(x, y, 2, {}, rng);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold > 0.0);
    CHECK(tree.nodes[0].threshold < 1.0);
    CHECK(tree.nodes[tree.nodes[0].left].probabilities == std::vector<double>{1, 0});
    CHECK(tree.nodes[tree.nodes[0].right].probabilities == std::vector<double>{0, 1});
    CHECK(tree.depth() == 1);
}

TEST_CASE("unlimited tree memorizes distinct rows") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng data_rng(seed);
        FeatureMatrix x(120, 16);
        std::vector<int> y;
        for (std::size_t i = 0; i < 120; ++i) {
            for (double& v : x.row(i)) v = std::floor(data_rng.uniform() * 4);  // many ties
            y.push_back(static_cast<int>(data_rng.index(7)));
        }
        Rng rng(seed);
        const auto tree = train_tree(x, y, 7, {}, rng);
        for (std::size_t i = 0; i < 120; ++i) {
            const auto& p = tree.leaf_probabilities(x.row(i));
            const int pred = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
            // Identical rows with different labels cannot be separated.
            bool duplicate_conflict = false;
            for (std::size_t j = 0; j < 120; ++j) {
                if (j != i && y[j] != y[i] && std::equal(x.row(i).begin(), x.row(i).end(), x.row(j).begin())) {
                    duplicate_conflict = true;
                }
            }
            if (!duplicate_conflict) CHECK(pred == y[i]);
        }
    }
}

TEST_CASE("leaf probabilities sum to one and splits are well formed") {
    const auto b = gaussian_blobs(30, 4, 6, 3.0, 2);
    Rng rng(1);
    TreeParams p;
    p.max_depth = 3;
    const auto tree = train_tree(b.x, b.y, 4, p, rng);
    CHECK(tree.depth() <= 3);
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) {
            double s = 0.0;
            for (double v : n.probabilities) s += v;
            CHECK(s == doctest::Approx(1.0));
        } else {
            CHECK(n.left < tree.nodes.size());
            CHECK(n.right < tree.nodes.size());
        }
    }
}

TEST_CASE("training argument checks") {
    Rng rng(0);
    CHECK_THROWS_AS(train_tree(FeatureMatrix(), std::vector<int>{}, 2, {}, rng), ParameterError);
    const auto x = FeatureMatrix::from_rows(std::vector<std::vector<double>>{{1}, {2}});
    CHECK_THROWS_AS(train_tree(x, std::vector<int>{0, 5}, 2, {}, rng), ParameterError);
    CHECK_THROWS_AS(train_tree(x, std::vector<int>{0}, 2, {}, rng), ParameterError);
    ForestParams fp;
    fp.n_trees = 0;
    CHECK_THROWS_AS(train_forest(x, std::vector<int>{0, 1}, 2, fp), ParameterError);
    CHECK_THROWS_AS(FeatureMatrix::from_rows(std::vector<std::vector<double>>{{1, 2}, {3}}), ParameterError);
}

TEST_CASE("one tree without bootstrap equals train_tree") {
    const auto b = gaussian_blobs(20, 3, 5, 4.0, 3);
    ForestParams fp;
    fp.n_trees = 1;
    fp.bootstrap = false;
    fp.seed = 42;
    const auto forest = train_forest(b.x, b.y, 3, fp);
    Rng rng(forest.tree_seeds[0]);
    const auto tree = train_tree(b.x, b.y, 3, fp.tree_params(), rng);
    CHECK(forest.trees[0] == tree);
    const auto probe = gaussian_blobs(10, 3, 5, 6.0, 99);
    for (std::size_t i = 0; i < probe.x.rows(); ++i) {
        const auto& p = tree.leaf_probabilities(probe.x.row(i));
        CHECK(predict(forest, probe.x.row(i)) == static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
}

TEST_CASE("separable blobs are classified perfectly") {
    const auto train = gaussian_blobs(40, 2, 4, 0.5, 5);
    const auto test = gaussian_blobs(40, 2, 4, 0.5, 6);
    ForestParams fp;
    fp.n_trees = 30;
    fp.seed = 1;
    const auto forest = train_forest(train.x, train.y, 2, fp);
    CHECK(predict_batch(forest, test.x, 1) == test.y);
}

TEST_CASE("forest is bit-identical across thread counts") {
    const auto b = gaussian_blobs(50, 5, 12, 5.0, 7);
    ForestParams fp;
    fp.n_trees = 24;
    fp.seed = 11;
    fp.threads = 1;
    const auto one = train_forest(b.x, b.y, 5, fp);
    fp.threads = 8;
    const auto eight = train_forest(b.x, b.y, 5, fp);
    CHECK(one == eight);
    CHECK(bytes_of(one) == bytes_of(eight));
    CHECK(predict_batch(one, b.x, 1) == predict_batch(one, b.x, 4));
}

TEST_CASE("forest predict equals averaged per-tree votes") {
    const auto b = gaussian_blobs(30, 4, 8, 6.0, 9);
    ForestParams fp;
    fp.n_trees = 15;
    fp.seed = 3;
    const auto forest = train_forest(b.x, b.y, 4, fp);
    const auto probe = gaussian_blobs(15, 4, 8, 8.0, 10);
    for (std::size_t i = 0; i < probe.x.rows(); ++i) {
        std::vector<double> mean(4, 0.0);
        for (const auto& t : forest.trees) {
            const auto& p = t.leaf_probabilities(probe.x.row(i));
            for (std::size_t c = 0; c < 4; ++c) mean[c] += p[c];
        }
        for (double& v : mean) v /= static_cast<double>(forest.trees.size());
        CHECK(predict_proba(forest, probe.x.row(i)) == mean);
        std::size_t best = 0;
        for (std::size_t c = 1; c < 4; ++c) {
            if (mean[c] > mean[best]) best = c;
        }
        CHECK(predict(forest, probe.x.row(i)) == static_cast<int>(best));
    }
}

TEST_CASE("hand-built forests: constant class and ties") {
    Forest f;
    f.n_classes = 5;
    f.dim = 1;
    DecisionTree leaf3;
    leaf3.nodes.push_back({-1, 0, 0, 0, {0, 0, 0, 1, 0}});
    f.trees = {leaf3, leaf3, leaf3};
    f.tree_seeds = {0, 0, 0};
    const std::vector<double> x = {0.0};
    CHECK(predict(f, x) == 3);

    DecisionTree t1, t4;
    t1.nodes.push_back({-1, 0, 0, 0, {0, 1, 0, 0, 0}});
    t4.nodes.push_back({-1, 0, 0, 0, {0, 0, 0, 0, 1}});
    f.trees = {t4, t1};
    CHECK(predict(f, x) == 1);
    CHECK_THROWS_AS(predict(f, std::vector<double>{0.0, 1.0}), ParameterError);
}

TEST_CASE("forest of copies predicts like its tree") {
    const auto b = gaussian_blobs(25, 3, 6, 5.0, 12);
    Rng rng(5);
    const auto tree = train_tree(b.x, b.y, 3, {}, rng);
    Forest f;
    f.n_classes = 3;
    f.dim = 6;
    f.trees = std::vector<DecisionTree>(7, tree);
    f.tree_seeds = std::vector<std::uint64_t>(7, 0);
    for (std::size_t i = 0; i < b.x.rows(); ++i) {
        const auto& p = tree.leaf_probabilities(b.x.row(i));
        CHECK(predict(f, b.x.row(i)) == static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
    }
}

TEST_CASE("ensemble training accuracy is at least the mean tree accuracy") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto b = gaussian_blobs(30, 4, 10, 8.0, 100 + seed);
        ForestParams fp;
        fp.n_trees = 20;
        fp.seed = seed;
        fp.max_depth = 3;
        const auto forest = train_forest(b.x, b.y, 4, fp);
        const auto pred = predict_batch(forest, b.x, 1);
        double forest_acc = 0.0;
        for (std::size_t i = 0; i < pred.size(); ++i) forest_acc += pred[i] == b.y[i];
        double tree_acc = 0.0;
        for (const auto& t : forest.trees) {
            for (std::size_t i = 0; i < b.x.rows(); ++i) {
                const auto& p = t.leaf_probabilities(b.x.row(i));
                tree_acc += static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()) == b.y[i];
            }
        }
        CHECK(forest_acc / pred.size() >= tree_acc / (forest.trees.size() * b.x.rows()));
    }
}

TEST_CASE("forest file round trip") {
    const auto b = gaussian_blobs(20, 3, 5, 4.0, 13);
    ForestParams fp;
    fp.n_trees = 5;
    fp.seed = 8;
    fp.mtry = 2;
    const auto forest = train_forest(b.x, b.y, 3, fp);
    std::stringstream ss;
    write_forest(ss, forest);
    CHECK(ss.str().substr(0, 4) == "FRFS");
    const auto back = read_forest(ss);
    CHECK(back == forest);
    std::stringstream truncated(bytes_of(forest).substr(0, 60));
    CHECK_THROWS_AS(read_forest(truncated), ParseError);
}

TEST_CASE("kNN examples") {
    const auto x = FeatureMatrix::from_rows(std::vector<std::vector<double>>{{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}});
    const std::vector<int> y = {0, 0, 1, 2, 2};
    CHECK(knn_classify(x, y, {1}, std::vector<double>{0, 1}) == 1);
    CHECK(knn_classify(x, y, {3}, std::vector<double>{0.2, 0.2}) == 0);
    CHECK(knn_classify(x, y, {2}, std::vector<double>{5.5, 5}) == 2);
    const std::vector<int> same(5, 4);
    CHECK(knn_classify(x, same, {3}, std::vector<double>{100, -3}) == 4);
    CHECK_THROWS_AS(knn_classify(FeatureMatrix(), std::vector<int>{}, {1}, std::vector<double>{}), ParameterError);
    CHECK_THROWS_AS(knn_classify(x, y, {6}, std::vector<double>{0, 0}), ParameterError);
}

TEST_CASE("kNN matches an exhaustive scan") {
    Rng rng(14);
    FeatureMatrix x(50, 4);
    std::vector<int> y;
    for (std::size_t i = 0; i < 50; ++i) {
        for (double& v : x.row(i)) v = rng.uniform();
        y.push_back(static_cast<int>(rng.index(4)));
    }
    for (int q = 0; q < 100; ++q) {
        std::vector<double> query(4);
        for (double& v : query) v = rng.uniform();
        for (std::size_t k : {1u, 3u, 5u}) {
            std::vector<std::pair<double, std::size_t>> d;
            for (std::size_t i = 0; i < 50; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < 4; ++j) s += (x.at(i, j) - query[j]) * (x.at(i, j) - query[j]);
                d.push_back({s, i});
            }
            std::sort(d.begin(), d.end());
            std::vector<int> votes(4, 0);
            for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(y[d[i].second])];
            const int expect = static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
            CHECK(knn_classify(x, y, {k}, query) == expect);
        }
    }
}

}
