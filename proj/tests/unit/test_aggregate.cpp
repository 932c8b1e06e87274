#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "facerec/aggregate.hpp"
#include "facerec/error.hpp"
#include "helpers.hpp"

using namespace facerec;

namespace {

Descriptor filled(double v) {
    Descriptor d;
    d.values.fill(v);
    return d;
}

Descriptor random_descriptor(Rng& rng, double scale = 1.0, double offset = 0.0) {
    Descriptor d;
    for (double& v : d.values) v = offset + scale * (rng.uniform() - 0.5);
    return d;
}

double dist2(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kDescriptorSize; ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    return s;
}

Codebook codebook_of(std::vector<Descriptor> c) {
    Codebook cb;
    cb.centroids = std::move(c);
    return cb;
}

double l2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("aggregate") {

TEST_CASE("duplicated distinct points cluster perfectly") {
    Rng rng(1);
    std::vector<Descriptor> points;
    for (int i = 0; i < 5; ++i) points.push_back(random_descriptor(rng, 10.0));
    std::vector<Descriptor> data;
    for (int m = 0; m < 4; ++m) data.insert(data.end(), points.begin(), points.end());
    const auto cb = kmeans_train(data, {5, 100, 3, 1});
    CHECK(cb.inertia == 0.0);
    for (const auto& p : points) {
        bool found = false;
        for (const auto& c : cb.centroids) found = found || c == p;
        CHECK(found);
    }
}

TEST_CASE("two separated blobs recover their means") {
    Rng rng(4);
    std::vector<Descriptor> data;
    Descriptor mean_a = filled(0.0), mean_b = filled(0.0);
    for (int i = 0; i < 60; ++i) {
        auto a = random_descriptor(rng, 0.01, 0.0);
        auto b = random_descriptor(rng, 0.01, 1.0);
        for (std::size_t j = 0; j < kDescriptorSize; ++j) {
            mean_a.values[j] += a.values[j] / 60.0;
            mean_b.values[j] += b.values[j] / 60.0;
        }
        data.push_back(a);
        data.push_back(b);
    }
    const auto cb = kmeans_train(data, {2, 100, 9, 1});
    const auto& c0 = cb.centroids[0];
    const auto& c1 = cb.centroids[1];
    const bool direct = dist2(c0, mean_a) < dist2(c0, mean_b);
    const auto& ca = direct ? c0 : c1;
    const auto& cbb = direct ? c1 : c0;
    for (std::size_t j = 0; j < kDescriptorSize; ++j) {
        CHECK(std::abs(ca.values[j] - mean_a.values[j]) <= 1e-3);
        CHECK(std::abs(cbb.values[j] - mean_b.values[j]) <= 1e-3);
    }
}

TEST_CASE("k-means is deterministic and independent of threads") {
    Rng rng(12);
    std::vector<Descriptor> data;
    for (int i = 0; i < 700; ++i) data.push_back(random_descriptor(rng));
    const auto a = kmeans_train(data, {16, 50, 77, 1});
    const auto b = kmeans_train(data, {16, 50, 77, 1});
    const auto c = kmeans_train(data, {16, 50, 77, 4});
    CHECK(a.centroids == b.centroids);
    CHECK(a.centroids == c.centroids);
    CHECK(a.inertia_trace == c.inertia_trace);
    const auto d = kmeans_train(data, {16, 50, 78, 1});
    CHECK_FALSE(a.centroids == d.centroids);
}

TEST_CASE("inertia never increases") {
    Rng rng(2);
    std::vector<Descriptor> data;
    for (int i = 0; i < 400; ++i) data.push_back(random_descriptor(rng));
    const auto cb = kmeans_train(data, {12, 100, 5, 1});
    REQUIRE(cb.inertia_trace.size() >= 2);
    for (std::size_t i = 1; i < cb.inertia_trace.size(); ++i) {
        CHECK(cb.inertia_trace[i] <= cb.inertia_trace[i - 1] * (1 + 1e-12));
    }
    CHECK(cb.inertia == cb.inertia_trace.back());
    for (std::size_t i = 0; i < cb.k(); ++i) {
        for (std::size_t j = i + 1; j < cb.k(); ++j) CHECK(dist2(cb.centroids[i], cb.centroids[j]) > 1e-18);
    }
}

TEST_CASE("k-means argument checks") {
    std::vector<Descriptor> data(3, filled(0.1));
    CHECK_THROWS_AS(kmeans_train(data, {4, 10, 0, 1}), ParameterError);
    CHECK_THROWS_AS(kmeans_train(data, {0, 10, 0, 1}), ParameterError);
    const auto forced = kmeans_train(data, {2, 10, 0, 1});
    CHECK(forced.k() == 2);
}

TEST_CASE("nearest word examples") {
    const auto cb = codebook_of({filled(0), filled(1), filled(2), filled(3), filled(4), filled(5)});
    CHECK(nearest_word(cb, filled(3)) == 3);
    // Equidistant from words 2 and 5 only.
    auto cb2 = codebook_of({filled(10), filled(10), filled(0), filled(-10), filled(-10), filled(2)});
    CHECK(nearest_word(cb2, filled(1)) == 2);
    CHECK_THROWS_AS(nearest_word(Codebook{}, filled(0)), ParameterError);
}

TEST_CASE("nearest word matches exhaustive search") {
    Rng rng(8);
    std::vector<Descriptor> c;
    for (int i = 0; i < 20; ++i) c.push_back(random_descriptor(rng));
    const auto cb = codebook_of(c);
    for (int q = 0; q < 200; ++q) {
        const auto x = random_descriptor(rng);
        std::size_t best = 0;
        for (std::size_t j = 1; j < c.size(); ++j) {
            if (dist2(c[j], x) < dist2(c[best], x)) best = j;
        }
        CHECK(nearest_word(cb, x) == best);
    }
}

TEST_CASE("bag of words counts") {
    const auto cb = codebook_of({filled(0), filled(1), filled(2), filled(3)});
    const std::vector<Descriptor> d = {filled(0), filled(0), filled(0), filled(2)};
    CHECK(bow_counts(cb, d) == std::vector<double>{3, 0, 1, 0});
    const auto enc = bow_encode(cb, d);
    CHECK(enc[0] == doctest::Approx(3 / std::sqrt(10.0)));
    CHECK(std::abs(l2(enc) - 1.0) <= 1e-12);
    const auto empty = bow_encode(cb, std::vector<Descriptor>{});
    CHECK(empty == std::vector<double>(4, 0.0));
}

TEST_CASE("bag of words counts partition the input") {
    Rng rng(3);
    std::vector<Descriptor> c, d;
    for (int i = 0; i < 9; ++i) c.push_back(random_descriptor(rng));
    for (int i = 0; i < 137; ++i) d.push_back(random_descriptor(rng));
    const auto counts = bow_counts(codebook_of(c), d);
    double total = 0.0;
    for (double v : counts) total += v;
    CHECK(total == 137.0);
}

TEST_CASE("VLAD of descriptors on their centroids is zero") {
    const auto cb = codebook_of({filled(0), filled(1)});
    const auto v = vlad_encode(cb, std::vector<Descriptor>{filled(0), filled(1), filled(1)});
    CHECK(v == std::vector<double>(128, 0.0));
    CHECK(vlad_encode(cb, std::vector<Descriptor>{}) == std::vector<double>(128, 0.0));
}

TEST_CASE("VLAD hand-evaluated two-centroid example") {
    const auto cb = codebook_of({filled(0), filled(1)});
    Descriptor x = filled(0);
    x.values[0] = 0.5;
    const std::vector<Descriptor> d = {x, filled(1)};
    const auto raw = vlad_aggregate(cb, d);
    std::vector<double> expect(128, 0.0);
    expect[0] = 0.5;
    for (std::size_t i = 0; i < 128; ++i) CHECK(std::abs(raw[i] - expect[i]) <= 1e-9);
    const auto v = vlad_encode(cb, d);
    CHECK(std::abs(v[0] - 1.0) <= 1e-9);
    for (std::size_t i = 1; i < 128; ++i) CHECK(std::abs(v[i]) <= 1e-9);
}

TEST_CASE("VLAD of a singleton is its normalized residual") {
    Rng rng(10);
    std::vector<Descriptor> c;
    for (int i = 0; i < 5; ++i) c.push_back(random_descriptor(rng));
    const auto cb = codebook_of(c);
    for (int t = 0; t < 20; ++t) {
        const auto x = random_descriptor(rng);
        const auto w = nearest_word(cb, x);
        std::vector<double> expect(5 * 64, 0.0);
        double n = 0.0;
        for (std::size_t j = 0; j < 64; ++j) {
            expect[w * 64 + j] = x.values[j] - c[w].values[j];
            n += expect[w * 64 + j] * expect[w * 64 + j];
        }
        const auto v = vlad_encode(cb, std::vector<Descriptor>{x});
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(v[i] - expect[i] / std::sqrt(n)) <= 1e-12);
        CHECK(std::abs(l2(v) - 1.0) <= 1e-6);
    }
}

TEST_CASE("encodings ignore descriptor order") {
    Rng rng(20);
    std::vector<Descriptor> c, d;
    for (int i = 0; i < 6; ++i) c.push_back(random_descriptor(rng));
    for (int i = 0; i < 80; ++i) d.push_back(random_descriptor(rng));
    const auto cb = codebook_of(c);
    auto shuffled = d;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.index(i)]);
    CHECK(vlad_encode(cb, d) == vlad_encode(cb, shuffled));
    CHECK(bow_encode(cb, d) == bow_encode(cb, shuffled));
}

TEST_CASE("permuting words permutes the encodings") {
    Rng rng(21);
    std::vector<Descriptor> c, d;
    for (int i = 0; i < 4; ++i) c.push_back(random_descriptor(rng));
    for (int i = 0; i < 50; ++i) d.push_back(random_descriptor(rng));
    const std::vector<std::size_t> perm = {2, 0, 3, 1};
    std::vector<Descriptor> pc(4);
    for (std::size_t i = 0; i < 4; ++i) pc[i] = c[perm[i]];
    const auto a_bow = bow_encode(codebook_of(c), d);
    const auto b_bow = bow_encode(codebook_of(pc), d);
    const auto a_vlad = vlad_encode(codebook_of(c), d);
    const auto b_vlad = vlad_encode(codebook_of(pc), d);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(b_bow[i] == a_bow[perm[i]]);
        for (std::size_t j = 0; j < 64; ++j) CHECK(std::abs(b_vlad[i * 64 + j] - a_vlad[perm[i] * 64 + j]) <= 1e-12);
    }
}

TEST_CASE("codebook file round trip") {
    Rng rng(30);
    std::vector<Descriptor> c;
    for (int i = 0; i < 3; ++i) c.push_back(random_descriptor(rng));
    std::stringstream ss;
    write_codebook(ss, codebook_of(c));
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "FRCB");
    CHECK(bytes.size() == 16 + 3 * 64 * 4);
    const auto back = read_codebook(ss);
    REQUIRE(back.k() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 64; ++j) {
            CHECK(back.centroids[i].values[j] == static_cast<double>(static_cast<float>(c[i].values[j])));
        }
    }
    std::stringstream bad("FRCX");
    CHECK_THROWS_AS(read_codebook(bad), ParseError);
}

}
