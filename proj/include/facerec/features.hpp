#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "facerec/imaging.hpp"

namespace facerec {

inline constexpr std::size_t kDescriptorSize = 64;

struct Keypoint {
    double x = 0.0;  ///< source-image frame, sub-pixel
    double y = 0.0;
    double scale = 0.0;        ///< pixels; 1.2 for the 9x9 filter
    double orientation = 0.0;  ///< radians in [0, 2*pi)
    double response = 0.0;     ///< Hessian determinant at the extremum
    int laplacian_sign = 1;    ///< sign of the Hessian trace

    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct Descriptor {
    std::array<double, kDescriptorSize> values{};

    friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

/// A described keypoint and the index of the affine view it came from.
struct Feature {
    Keypoint keypoint;
    Descriptor descriptor;
    int view = 0;

    friend bool operator==(const Feature&, const Feature&) = default;
};

/// Box-filter Hessian determinants for one filter size, sampled every
/// `step` pixels. Cell (c, r) sits on pixel (c * step, r * step). Cells
/// where the filter does not fit inside the image hold 0 and are invalid.
struct ResponseLayer {
    int filter_size = 0;
    int step = 1;
    int width = 0;   ///< cells
    int height = 0;  ///< cells
    int image_width = 0;
    int image_height = 0;
    std::vector<double> det;
    std::vector<signed char> laplacian;

    double at(int c, int r) const { return det[static_cast<std::size_t>(r) * width + c]; }
    bool valid(int c, int r) const;
    bool empty() const { return det.empty(); }
};

/// octaves[o][l]: filter sizes 3 * (2^(o+1) * (l+1) + 1), sampling step 2^o.
struct ScaleSpace {
    std::vector<std::vector<ResponseLayer>> octaves;
    int image_width = 0;
    int image_height = 0;
};

struct SurfParams {
    int octaves = 4;
    int levels = 4;
    double threshold = 1e-4;
    std::size_t max_keypoints = 500;  ///< 0 = unlimited
    bool upright = false;             ///< skip orientation assignment
};

/// Filter size of octave `octave`, level `level` in the standard schedule.
int surf_filter_size(int octave, int level);

/// Approximated Hessian determinant Dxx * Dyy - (0.9 * Dxy)^2 with each
/// second derivative a weighted box sum divided by the filter area. Returns
/// an empty layer when the filter is larger than the image. Throws
/// ParameterError for even sizes or sizes below 9.
ResponseLayer hessian_responses(const IntegralImage& ii, int filter_size, int step = 1);

/// Octaves whose largest filter exceeds the smaller image side are dropped
/// with a warning. Throws ParameterError if octaves < 1 or levels < 3.
ScaleSpace build_scale_space(const IntegralImage& ii, int octaves = 4, int levels = 4);

/// Strict 3x3x3 maxima above `threshold`, refined by fitting a quadratic in
/// (x, y, scale); candidates whose offset exceeds 0.5 cells in any
/// coordinate are rejected. Sorted by response, strongest first.
std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, double threshold);

/// Dominant gradient direction around `kp`: Gaussian-weighted Haar responses
/// inside a radius-6s disc, summed over a sliding pi/3 window. 0 for flat
/// patches.
double assign_orientation(const IntegralImage& ii, const Keypoint& kp);

/// 64-d descriptor: 4x4 subregions of a 20s square aligned with the keypoint
/// orientation, each contributing (sum dx, sum dy, sum |dx|, sum |dy|) of
/// Gaussian-weighted Haar responses, then L2-normalized. Samples outside the
/// image contribute 0. Flat patches give the zero vector.
Descriptor compute_descriptor(const IntegralImage& ii, const Keypoint& kp);

/// Detection, capping, orientation and description on one image.
std::vector<Feature> surf_extract(const GrayImage& img, const SurfParams& params);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// 2x3 affine map p -> A p + t.
struct Affine2 {
    double a = 1.0, b = 0.0, tx = 0.0;
    double c = 0.0, d = 1.0, ty = 0.0;

    Point2 apply(Point2 p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }
    Affine2 inverse() const;
};

/// One simulated camera view: rotate by `angle`, then compress x by `tilt`.
struct AffineView {
    double tilt = 1.0;
    double angle = 0.0;
    Affine2 forward;   ///< source frame -> simulated frame
    Affine2 backward;  ///< simulated frame -> source frame
};

struct SimulatedView {
    AffineView view;
    GrayImage image;
};

/// Warps `img` into the view (tilt, angle). The rotated image is blurred
/// along x with sigma 0.8 * sqrt(tilt^2 - 1) before x is subsampled by
/// `tilt`. Pixels mapping outside the source replicate the nearest edge.
/// (1, 0) returns the input unchanged. Throws ParameterError if tilt < 1.
SimulatedView affine_simulate(const GrayImage& img, double tilt, double angle);

struct ViewParams {
    double tilt = 1.0;
    double angle = 0.0;
};

/// Tilts {1, sqrt 2, 2}; angles k * 72deg / t below 180deg; t = 1 uses 0 only.
std::vector<ViewParams> default_view_grid();

/// Builds a grid from a tilt list with the same angle rule.
std::vector<ViewParams> view_grid_for_tilts(std::span<const double> tilts);

/// SURF over every simulated view. Keypoints are mapped back to the source
/// frame, those landing outside it dropped, and views concatenated in grid
/// order; the merged list is then capped by response. The grid must contain
/// the identity view (1, 0). Views run on up to `threads` workers; the result
/// does not depend on the thread count.
std::vector<Feature> asurf_extract(const GrayImage& img, std::span<const ViewParams> grid,
                                   const SurfParams& params, unsigned threads = 1);

/// Flat descriptor dump: u32 count, u32 dim (64), then count * dim
/// little-endian IEEE-754 float32 values.
void write_descriptor_dump(std::ostream& out, std::span<const Descriptor> descriptors);
std::vector<Descriptor> read_descriptor_dump(std::istream& in);

}  // namespace facerec
