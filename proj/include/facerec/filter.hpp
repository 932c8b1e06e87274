#pragma once

#include "facerec/imaging.hpp"

namespace facerec {

/// Parameters of the bilateral filter. `radius` of 0 selects
/// ceil(3 * sigma_spatial).
struct BilateralParams {
    double sigma_spatial = 3.0;  ///< pixels
    double sigma_range = 0.1;    ///< intensity units on [0, 1]
    int radius = 0;

    int effective_radius() const;
};

/// Edge-preserving smoothing. Each output pixel is the mean of its
/// (2r+1)^2 neighbourhood (clipped at the borders) weighted by
///   c = exp(-|xi - x|^2 / (2 sigma_spatial^2))   closeness
///   s = exp(-(g(xi) - g(x))^2 / (2 sigma_range^2)) similarity
/// and normalized by n(x) = sum of c * s over the same neighbourhood.
///
/// The normalizer is a plain sum of weights. It is not itself divided by
/// n(x); that self-referential form cannot be evaluated and would not make
/// the output a weighted mean.
///
/// Rows are computed on up to `threads` workers (0 = all cores); the result
/// does not depend on the thread count. Throws ParameterError on
/// non-positive sigmas or a negative radius.
GrayImage bilateral_filter(const GrayImage& img, const BilateralParams& params,
                           unsigned threads = 1);

/// Separable Gaussian blur truncated at ceil(3 sigma), with weights
/// renormalized over the part of the kernel inside the image.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

/// Same, along the x axis only.
GrayImage gaussian_blur_x(const GrayImage& img, double sigma);

}  // namespace facerec
