#include "facerec/filter.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "facerec/error.hpp"
#include "facerec/parallel.hpp"

namespace facerec {

namespace {

std::vector<double> gaussian_taps(double sigma, int radius) {
    std::vector<double> taps(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) {
        taps[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    }
    return taps;
}

// One 1-D pass along x (horizontal = true) or y. Accumulates weighted
// differences from the centre pixel so constant regions stay exact.
GrayImage blur_pass(const GrayImage& img, const std::vector<double>& taps, bool horizontal) {
    const int radius = static_cast<int>(taps.size() / 2);
    const int w = img.width();
    const int h = img.height();
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double centre = img.at(x, y);
            const int pos = horizontal ? x : y;
            const int limit = horizontal ? w : h;
            const int lo = std::max(-radius, -pos);
            const int hi = std::min(radius, limit - 1 - pos);
            double acc = 0.0;
            double norm = 0.0;
            for (int k = lo; k <= hi; ++k) {
                const double v = horizontal ? img.at(x + k, y) : img.at(x, y + k);
                acc += taps[k + radius] * (v - centre);
                norm += taps[k + radius];
            }
            out.at(x, y) = std::clamp(centre + acc / norm, 0.0, 1.0);
        }
    }
    return out;
}

int blur_radius(double sigma) { return std::max(1, static_cast<int>(std::ceil(3.0 * sigma))); }

}  // namespace

int BilateralParams::effective_radius() const {
    return radius > 0 ? radius : std::max(1, static_cast<int>(std::ceil(3.0 * sigma_spatial)));
}

GrayImage bilateral_filter(const GrayImage& img, const BilateralParams& params, unsigned threads) {
    if (img.empty()) throw DimensionError("bilateral_filter: empty image");
    if (!(params.sigma_spatial > 0.0) || !(params.sigma_range > 0.0)) {
        throw ParameterError("bilateral_filter: sigmas must be positive");
    }
    if (params.radius < 0) throw ParameterError("bilateral_filter: radius must be >= 0");

    const int r = params.effective_radius();
    const int side = 2 * r + 1;
    std::vector<double> closeness(static_cast<std::size_t>(side) * side);
    const double spatial_denom = 2.0 * params.sigma_spatial * params.sigma_spatial;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            closeness[(dy + r) * side + (dx + r)] = std::exp(-(dx * dx + dy * dy) / spatial_denom);
        }
    }
    const double range_denom = 2.0 * params.sigma_range * params.sigma_range;

    const int w = img.width();
    const int h = img.height();
    GrayImage out(w, h);
    parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t row) {
        const int y = static_cast<int>(row);
        const int y0 = std::max(0, y - r);
        const int y1 = std::min(h - 1, y + r);
        for (int x = 0; x < w; ++x) {
            const double centre = img.at(x, y);
            const int x0 = std::max(0, x - r);
            const int x1 = std::min(w - 1, x + r);
            double acc = 0.0;
            double norm = 0.0;
            for (int yy = y0; yy <= y1; ++yy) {
                const double* c_row = &closeness[(yy - y + r) * side + r - x];
                for (int xx = x0; xx <= x1; ++xx) {
                    const double diff = img.at(xx, yy) - centre;
                    const double weight = c_row[xx] * std::exp(-(diff * diff) / range_denom);
                    acc += weight * diff;
                    norm += weight;
                }
            }
            // norm >= 1 because the centre contributes c = s = 1.
            out.at(x, y) = std::clamp(centre + acc / norm, 0.0, 1.0);
        }
    });
    return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (img.empty()) throw DimensionError("gaussian_blur: empty image");
    if (!(sigma > 0.0)) throw ParameterError("gaussian_blur: sigma must be positive");
    const auto taps = gaussian_taps(sigma, blur_radius(sigma));
    return blur_pass(blur_pass(img, taps, true), taps, false);
}

GrayImage gaussian_blur_x(const GrayImage& img, double sigma) {
    if (img.empty()) throw DimensionError("gaussian_blur_x: empty image");
    if (!(sigma > 0.0)) throw ParameterError("gaussian_blur_x: sigma must be positive");
    return blur_pass(img, gaussian_taps(sigma, blur_radius(sigma)), true);
}

}  // namespace facerec
