#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "facerec/features.hpp"

namespace facerec {

/// k visual words over 64-d descriptors.
struct Codebook {
    std::vector<Descriptor> centroids;
    std::size_t iterations = 0;        ///< Lloyd iterations run
    double inertia = 0.0;              ///< final sum of squared distances
    std::vector<double> inertia_trace; ///< inertia after each iteration

    std::size_t k() const { return centroids.size(); }
};

struct KMeansParams {
    std::size_t k = 64;
    std::size_t max_iters = 100;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Lloyd's algorithm with k-means++ seeding. Stops when no assignment
/// changes or after max_iters. A cluster that empties is moved onto the
/// point currently farthest from its centroid. Throws ParameterError when
/// k == 0 or there are fewer descriptors than k.
Codebook kmeans_train(std::span<const Descriptor> descriptors, const KMeansParams& params);

/// Index of the closest centroid (Euclidean); ties go to the lower index.
std::size_t nearest_word(const Codebook& codebook, const Descriptor& descriptor);

/// Number of descriptors assigned to each word.
std::vector<double> bow_counts(const Codebook& codebook, std::span<const Descriptor> descriptors);

/// bow_counts scaled to unit L2 norm; all zeros for empty input.
std::vector<double> bow_encode(const Codebook& codebook, std::span<const Descriptor> descriptors);

/// Per-word sums of residuals (x - c_i), word-major, before normalization.
/// Residuals of each word are summed in lexicographic descriptor order so
/// the result does not depend on input order.
std::vector<double> vlad_aggregate(const Codebook& codebook,
                                   std::span<const Descriptor> descriptors);

/// vlad_aggregate divided by its L2 norm; an all-zero aggregate stays zero.
std::vector<double> vlad_encode(const Codebook& codebook, std::span<const Descriptor> descriptors);

/// Codebook file: "FRCB", u32 version (1), u32 k, u32 dim, then k * dim
/// little-endian float32 centroid values, row-major.
void write_codebook(std::ostream& out, const Codebook& codebook);
Codebook read_codebook(std::istream& in);

}  // namespace facerec
