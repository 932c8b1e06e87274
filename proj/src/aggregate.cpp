#include "facerec/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "binary_io.hpp"
#include "facerec/error.hpp"
#include "facerec/parallel.hpp"
#include "facerec/random.hpp"

namespace facerec {

namespace {

double squared_distance(const Descriptor& a, const Descriptor& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < kDescriptorSize; ++i) {
        const double diff = a.values[i] - b.values[i];
        d += diff * diff;
    }
    return d;
}

struct Nearest {
    std::size_t index = 0;
    double distance = 0.0;  ///< squared
};

Nearest nearest(std::span<const Descriptor> centroids, const Descriptor& x) {
    Nearest best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < centroids.size(); ++j) {
        const double d = squared_distance(centroids[j], x);
        if (d < best.distance) best = {j, d};
    }
    return best;
}

std::vector<Descriptor> kmeans_plus_plus(std::span<const Descriptor> data, std::size_t k, Rng& rng) {
    std::vector<Descriptor> centroids;
    centroids.reserve(k);
    centroids.push_back(data[rng.index(data.size())]);
    std::vector<double> d2(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) d2[i] = squared_distance(data[i], centroids[0]);

    while (centroids.size() < k) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double running = 0.0;
            pick = data.size();
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (d2[i] == 0.0) continue;
                running += d2[i];
                pick = i;
                if (running > target) break;
            }
        } else {
            // Every point coincides with a chosen centroid; duplicates are forced.
            pick = rng.index(data.size());
        }
        centroids.push_back(data[pick]);
        for (std::size_t i = 0; i < data.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(data[i], centroids.back()));
        }
    }
    return centroids;
}

// Assigns every point; returns the number of changed assignments and the
// inertia summed in index order.
std::pair<std::size_t, double> assign_points(std::span<const Descriptor> data,
                                             std::span<const Descriptor> centroids,
                                             std::vector<std::size_t>& labels,
                                             std::vector<double>& distances, unsigned threads) {
    constexpr std::size_t kBlock = 256;
    const std::size_t blocks = (data.size() + kBlock - 1) / kBlock;
    std::vector<std::size_t> changed(blocks, 0);
    parallel_for(blocks, threads, [&](std::size_t b) {
        const std::size_t end = std::min(data.size(), (b + 1) * kBlock);
        for (std::size_t i = b * kBlock; i < end; ++i) {
            const Nearest n = nearest(centroids, data[i]);
            if (labels[i] != n.index) ++changed[b];
            labels[i] = n.index;
            distances[i] = n.distance;
        }
    });
    return {std::accumulate(changed.begin(), changed.end(), std::size_t{0}),
            std::accumulate(distances.begin(), distances.end(), 0.0)};
}

}  // namespace

Codebook kmeans_train(std::span<const Descriptor> descriptors, const KMeansParams& params) {
    if (params.k == 0) throw ParameterError("kmeans_train: k must be >= 1");
    if (descriptors.size() < params.k) {
        throw ParameterError("kmeans_train: " + std::to_string(descriptors.size()) +
                             " descriptors is fewer than k = " + std::to_string(params.k));
    }
    Rng rng(params.seed);
    Codebook cb;
    cb.centroids = kmeans_plus_plus(descriptors, params.k, rng);

    const std::size_t n = descriptors.size();
    std::vector<std::size_t> labels(n, std::numeric_limits<std::size_t>::max());
    std::vector<double> distances(n, 0.0);
    auto [changed, inertia] = assign_points(descriptors, cb.centroids, labels, distances, params.threads);
    cb.inertia_trace.push_back(inertia);

    while (cb.iterations < params.max_iters) {
        std::vector<Descriptor> sums(params.k);
        std::vector<std::size_t> counts(params.k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sums[labels[i]].values;
            for (std::size_t d = 0; d < kDescriptorSize; ++d) s[d] += descriptors[i].values[d];
            ++counts[labels[i]];
        }
        for (std::size_t j = 0; j < params.k; ++j) {
            if (counts[j] == 0) {
                // Re-seed on the worst-served point, then stop it being chosen twice.
                const auto far = static_cast<std::size_t>(
                    std::max_element(distances.begin(), distances.end()) - distances.begin());
                cb.centroids[j] = descriptors[far];
                distances[far] = 0.0;
                continue;
            }
            for (std::size_t d = 0; d < kDescriptorSize; ++d) {
                cb.centroids[j].values[d] = sums[j].values[d] / static_cast<double>(counts[j]);
            }
        }
        ++cb.iterations;
        std::tie(changed, inertia) =
            assign_points(descriptors, cb.centroids, labels, distances, params.threads);
        cb.inertia_trace.push_back(inertia);
        if (changed == 0) break;
    }
    cb.inertia = inertia;
    return cb;
}

std::size_t nearest_word(const Codebook& codebook, const Descriptor& descriptor) {
    if (codebook.centroids.empty()) throw ParameterError("nearest_word: empty codebook");
    return nearest(codebook.centroids, descriptor).index;
}

std::vector<double> bow_counts(const Codebook& codebook, std::span<const Descriptor> descriptors) {
    std::vector<double> counts(codebook.k(), 0.0);
    for (const auto& d : descriptors) counts[nearest_word(codebook, d)] += 1.0;
    return counts;
}

std::vector<double> bow_encode(const Codebook& codebook, std::span<const Descriptor> descriptors) {
    auto v = bow_counts(codebook, descriptors);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> vlad_aggregate(const Codebook& codebook,
                                   std::span<const Descriptor> descriptors) {
    const std::size_t k = codebook.k();
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < descriptors.size(); ++i) {
        members[nearest_word(codebook, descriptors[i])].push_back(i);
    }
    std::vector<double> v(k * kDescriptorSize, 0.0);
    for (std::size_t word = 0; word < k; ++word) {
        auto& idx = members[word];
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return descriptors[a].values < descriptors[b].values;
        });
        double* block = &v[word * kDescriptorSize];
        const auto& c = codebook.centroids[word].values;
        for (std::size_t i : idx) {
            for (std::size_t d = 0; d < kDescriptorSize; ++d) {
                block[d] += descriptors[i].values[d] - c[d];
            }
        }
    }
    return v;
}

std::vector<double> vlad_encode(const Codebook& codebook, std::span<const Descriptor> descriptors) {
    auto v = vlad_aggregate(codebook, descriptors);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

void write_codebook(std::ostream& out, const Codebook& codebook) {
    binary::put_magic(out, "FRCB");
    binary::put_u32(out, 1);
    binary::put_u32(out, static_cast<std::uint32_t>(codebook.k()));
    binary::put_u32(out, static_cast<std::uint32_t>(kDescriptorSize));
    for (const auto& c : codebook.centroids) {
        for (double v : c.values) binary::put_f32(out, static_cast<float>(v));
    }
    if (!out) throw IoError("codebook: write failed");
}

Codebook read_codebook(std::istream& in) {
    binary::expect_magic(in, "FRCB", "codebook");
    const auto version = binary::get_u32(in, "codebook version");
    if (version != 1) throw ParseError("codebook: unsupported version " + std::to_string(version));
    const auto k = binary::get_u32(in, "codebook k");
    const auto dim = binary::get_u32(in, "codebook dim");
    if (k == 0) throw ParseError("codebook: k must be >= 1");
    if (dim != kDescriptorSize) throw ParseError("codebook: dimension must be 64");
    Codebook cb;
    cb.centroids.resize(k);
    for (auto& c : cb.centroids) {
        for (double& v : c.values) v = binary::get_f32(in, "codebook centroid");
    }
    return cb;
}

}  // namespace facerec
