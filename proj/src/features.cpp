#include "facerec/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "binary_io.hpp"
#include "facerec/error.hpp"
#include "facerec/filter.hpp"
#include "facerec/log.hpp"
#include "facerec/parallel.hpp"

namespace facerec {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    // fmod can return exactly 2*pi after the correction above.
    return a >= kTwoPi ? 0.0 : a;
}

int round_int(double v) { return static_cast<int>(std::lround(v)); }

// Haar wavelet responses of side `size` (even) centred on pixel (x, y).
// Rectangles are clipped to the image so outside pixels contribute 0.
// Differences of integral lookups carry rounding error proportional to the
// table's magnitude; responses below it are flat-image noise.
double clean_response(const IntegralImage& ii, double r) {
    const double total = ii.at(ii.width() - 1, ii.height() - 1);
    return std::abs(r) <= 1e-13 * std::max(1.0, total) ? 0.0 : r;
}

double haar_x(const IntegralImage& ii, int x, int y, int size) {
    const int half = size / 2;
    return clean_response(ii, ii.clipped_sum(x, y - half, half, size) - ii.clipped_sum(x - half, y - half, half, size));
}

double haar_y(const IntegralImage& ii, int x, int y, int size) {
    const int half = size / 2;
    return clean_response(ii, ii.clipped_sum(x - half, y, size, half) - ii.clipped_sum(x - half, y - half, size, half));
}

// Solves the 3x3 system m * out = rhs by Cramer's rule.
bool solve3(const double m[3][3], const double rhs[3], double out[3]) {
    auto det3 = [](const double a[3][3]) {
        return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
               a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
               a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
    };
    const double det = det3(m);
    if (!std::isfinite(det) || std::abs(det) < 1e-300) return false;
    for (int k = 0; k < 3; ++k) {
        double mk[3][3];
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) mk[i][j] = j == k ? rhs[i] : m[i][j];
        }
        out[k] = det3(mk) / det;
    }
    return true;
}

bool is_local_max(const ResponseLayer& below, const ResponseLayer& mid, const ResponseLayer& above,
                  int c, int r, double v) {
    for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
            if (below.at(c + dc, r + dr) >= v || above.at(c + dc, r + dr) >= v) return false;
            if ((dc != 0 || dr != 0) && mid.at(c + dc, r + dr) >= v) return false;
        }
    }
    return true;
}

// Bilinear sample with coordinates clamped to the image (edge replication).
double sample_clamped(const GrayImage& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, img.width() - 1);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double tx = x - x0;
    const double ty = y - y0;
    const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
    const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
    return std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
}

// Pixel count spanned by [lo, hi] on the integer grid, tolerant of the
// rounding noise left by trigonometric corner maps.
int extent(double lo, double hi) { return static_cast<int>(std::floor(hi - lo + 1e-9)) + 1; }

}  // namespace

bool ResponseLayer::valid(int c, int r) const {
    if (c < 0 || r < 0 || c >= width || r >= height) return false;
    const int b = (filter_size - 1) / 2;
    const int x = c * step;
    const int y = r * step;
    return x - b >= 0 && x + b <= image_width - 1 && y - b >= 0 && y + b <= image_height - 1;
}

int surf_filter_size(int octave, int level) { return 3 * ((2 << octave) * (level + 1) + 1); }

ResponseLayer hessian_responses(const IntegralImage& ii, int filter_size, int step) {
    if (filter_size < 9 || filter_size % 2 == 0) {
        throw ParameterError("hessian_responses: filter size must be odd and >= 9, got " +
                             std::to_string(filter_size));
    }
    if (step < 1) throw ParameterError("hessian_responses: step must be >= 1");
    ResponseLayer layer;
    layer.filter_size = filter_size;
    layer.step = step;
    layer.image_width = ii.width();
    layer.image_height = ii.height();
    if (filter_size > ii.width() || filter_size > ii.height()) return layer;

    layer.width = (ii.width() - 1) / step + 1;
    layer.height = (ii.height() - 1) / step + 1;
    layer.det.assign(static_cast<std::size_t>(layer.width) * layer.height, 0.0);
    layer.laplacian.assign(layer.det.size(), 1);

    const int L = filter_size;
    const int l = L / 3;
    const int b = (L - 1) / 2;
    const double inv_area = 1.0 / (static_cast<double>(L) * L);
    for (int r = 0; r < layer.height; ++r) {
        for (int c = 0; c < layer.width; ++c) {
            if (!layer.valid(c, r)) continue;
            const int x = c * step;
            const int y = r * step;
            const double dxx =
                (ii.sum(x - b, y - l + 1, L, 2 * l - 1) - 3.0 * ii.sum(x - l / 2, y - l + 1, l, 2 * l - 1)) *
                inv_area;
            const double dyy =
                (ii.sum(x - l + 1, y - b, 2 * l - 1, L) - 3.0 * ii.sum(x - l + 1, y - l / 2, 2 * l - 1, l)) *
                inv_area;
            const double dxy = (ii.sum(x + 1, y - l, l, l) + ii.sum(x - l, y + 1, l, l) -
                                ii.sum(x - l, y - l, l, l) - ii.sum(x + 1, y + 1, l, l)) *
                               inv_area;
            const std::size_t idx = static_cast<std::size_t>(r) * layer.width + c;
            layer.det[idx] = dxx * dyy - 0.81 * dxy * dxy;
            layer.laplacian[idx] = dxx + dyy >= 0.0 ? 1 : -1;
        }
    }
    return layer;
}

ScaleSpace build_scale_space(const IntegralImage& ii, int octaves, int levels) {
    if (octaves < 1) throw ParameterError("build_scale_space: octaves must be >= 1");
    if (levels < 3) throw ParameterError("build_scale_space: levels must be >= 3");
    ScaleSpace ss;
    ss.image_width = ii.width();
    ss.image_height = ii.height();
    const int side = std::min(ii.width(), ii.height());
    for (int o = 0; o < octaves; ++o) {
        if (surf_filter_size(o, levels - 1) > side) {
            log_warn("build_scale_space: dropping octaves " + std::to_string(o) + ".." +
                     std::to_string(octaves - 1) + " (filters exceed " + std::to_string(side) +
                     " px)");
            break;
        }
        std::vector<ResponseLayer> layers;
        layers.reserve(levels);
        for (int l = 0; l < levels; ++l) {
            layers.push_back(hessian_responses(ii, surf_filter_size(o, l), 1 << o));
        }
        ss.octaves.push_back(std::move(layers));
    }
    return ss;
}

std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, double threshold) {
    if (threshold < 0.0) throw ParameterError("detect_keypoints: threshold must be >= 0");
    std::vector<Keypoint> out;
    for (const auto& layers : ss.octaves) {
        for (std::size_t m = 1; m + 1 < layers.size(); ++m) {
            const ResponseLayer& below = layers[m - 1];
            const ResponseLayer& mid = layers[m];
            const ResponseLayer& above = layers[m + 1];
            if (above.empty()) continue;
            const double filter_step = mid.filter_size - below.filter_size;
            for (int r = 1; r + 1 < mid.height; ++r) {
                for (int c = 1; c + 1 < mid.width; ++c) {
                    if (!above.valid(c - 1, r - 1) || !above.valid(c + 1, r + 1)) continue;
                    const double v = mid.at(c, r);
                    if (!(v > threshold) || !is_local_max(below, mid, above, c, r, v)) continue;

                    const double grad[3] = {
                        -(mid.at(c + 1, r) - mid.at(c - 1, r)) / 2.0,
                        -(mid.at(c, r + 1) - mid.at(c, r - 1)) / 2.0,
                        -(above.at(c, r) - below.at(c, r)) / 2.0,
                    };
                    const double dxx = mid.at(c + 1, r) + mid.at(c - 1, r) - 2.0 * v;
                    const double dyy = mid.at(c, r + 1) + mid.at(c, r - 1) - 2.0 * v;
                    const double dss = above.at(c, r) + below.at(c, r) - 2.0 * v;
                    const double dxy = (mid.at(c + 1, r + 1) - mid.at(c - 1, r + 1) -
                                        mid.at(c + 1, r - 1) + mid.at(c - 1, r - 1)) / 4.0;
                    const double dxs = (above.at(c + 1, r) - above.at(c - 1, r) -
                                        below.at(c + 1, r) + below.at(c - 1, r)) / 4.0;
                    const double dys = (above.at(c, r + 1) - above.at(c, r - 1) -
                                        below.at(c, r + 1) + below.at(c, r - 1)) / 4.0;
                    const double hessian[3][3] = {{dxx, dxy, dxs}, {dxy, dyy, dys}, {dxs, dys, dss}};
                    double offset[3];
                    if (!solve3(hessian, grad, offset)) continue;
                    if (std::abs(offset[0]) > 0.5 || std::abs(offset[1]) > 0.5 ||
                        std::abs(offset[2]) > 0.5) {
                        continue;
                    }

                    Keypoint kp;
                    kp.x = (c + offset[0]) * mid.step;
                    kp.y = (r + offset[1]) * mid.step;
                    kp.scale = 1.2 / 9.0 * (mid.filter_size + offset[2] * filter_step);
                    kp.response = v;
                    kp.laplacian_sign = mid.laplacian[static_cast<std::size_t>(r) * mid.width + c];
                    out.push_back(kp);
                }
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.scale < b.scale;
    });
    return out;
}

double assign_orientation(const IntegralImage& ii, const Keypoint& kp) {
    if (kp.x < 0 || kp.y < 0 || kp.x > ii.width() - 1 || kp.y > ii.height() - 1) {
        throw BoundsError("assign_orientation: keypoint outside image");
    }
    const double s = kp.scale;
    const int haar_size = std::max(2, 2 * round_int(2.0 * s));

    struct Sample {
        double angle, dx, dy;
    };
    std::vector<Sample> samples;
    samples.reserve(113);
    for (int j = -6; j <= 6; ++j) {
        for (int i = -6; i <= 6; ++i) {
            if (i * i + j * j >= 36) continue;
            const double g = std::exp(-(i * i + j * j) / (2.0 * 2.5 * 2.5));
            const int px = round_int(kp.x + i * s);
            const int py = round_int(kp.y + j * s);
            const double dx = g * haar_x(ii, px, py, haar_size);
            const double dy = g * haar_y(ii, px, py, haar_size);
            if (dx == 0.0 && dy == 0.0) continue;
            samples.push_back({wrap_angle(std::atan2(dy, dx)), dx, dy});
        }
    }
    if (samples.empty()) return 0.0;

    constexpr double window = std::numbers::pi / 3.0;
    constexpr int search_steps = 72;  // 5 degree increments
    double best_norm = 0.0;
    double best = 0.0;
    for (int k = 0; k < search_steps; ++k) {
        const double start = kTwoPi * k / search_steps;
        double sx = 0.0;
        double sy = 0.0;
        for (const auto& smp : samples) {
            const double rel = wrap_angle(smp.angle - start);
            if (rel < window) {
                sx += smp.dx;
                sy += smp.dy;
            }
        }
        const double norm = sx * sx + sy * sy;
        if (norm > best_norm) {
            best_norm = norm;
            best = wrap_angle(std::atan2(sy, sx));
        }
    }
    return best_norm > 0.0 ? best : 0.0;
}

Descriptor compute_descriptor(const IntegralImage& ii, const Keypoint& kp) {
    const double s = kp.scale;
    const int haar_size = std::max(2, 2 * round_int(s));
    const double co = std::cos(kp.orientation);
    const double si = std::sin(kp.orientation);
    const double sigma = 3.3 * s;

    Descriptor desc;
    std::size_t out = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            double sum_dx = 0.0, sum_dy = 0.0, sum_adx = 0.0, sum_ady = 0.0;
            for (int l = 0; l < 5; ++l) {
                for (int k = 0; k < 5; ++k) {
                    // Sample offset in the keypoint frame.
                    const double u = (-10.0 + 5 * sx + k + 0.5) * s;
                    const double v = (-10.0 + 5 * sy + l + 0.5) * s;
                    const int px = round_int(kp.x + co * u - si * v);
                    const int py = round_int(kp.y + si * u + co * v);
                    const double rx = haar_x(ii, px, py, haar_size);
                    const double ry = haar_y(ii, px, py, haar_size);
                    const double g = std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
                    // Rotate the response into the keypoint frame.
                    const double dx = g * (co * rx + si * ry);
                    const double dy = g * (-si * rx + co * ry);
                    sum_dx += dx;
                    sum_dy += dy;
                    sum_adx += std::abs(dx);
                    sum_ady += std::abs(dy);
                }
            }
            desc.values[out++] = sum_dx;
            desc.values[out++] = sum_dy;
            desc.values[out++] = sum_adx;
            desc.values[out++] = sum_ady;
        }
    }
    double norm = 0.0;
    for (double v : desc.values) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (double& v : desc.values) v /= norm;
    }
    return desc;
}

std::vector<Feature> surf_extract(const GrayImage& img, const SurfParams& params) {
    const IntegralImage ii = integral_image(img);
    // Octaves that cannot fit are expected on small crops and tilted views.
    int octaves = params.octaves;
    const int side = std::min(img.width(), img.height());
    while (octaves > 1 && surf_filter_size(octaves - 1, params.levels - 1) > side) --octaves;
    auto keypoints = detect_keypoints(build_scale_space(ii, octaves, params.levels), params.threshold);
    if (params.max_keypoints > 0 && keypoints.size() > params.max_keypoints) {
        keypoints.resize(params.max_keypoints);
    }
    std::vector<Feature> features;
    features.reserve(keypoints.size());
    for (Keypoint kp : keypoints) {
        kp.orientation = params.upright ? 0.0 : assign_orientation(ii, kp);
        features.push_back({kp, compute_descriptor(ii, kp), 0});
    }
    return features;
}

Affine2 Affine2::inverse() const {
    const double det = a * d - b * c;
    if (det == 0.0) throw ParameterError("Affine2::inverse: singular map");
    Affine2 inv;
    inv.a = d / det;
    inv.b = -b / det;
    inv.c = -c / det;
    inv.d = a / det;
    inv.tx = -(inv.a * tx + inv.b * ty);
    inv.ty = -(inv.c * tx + inv.d * ty);
    return inv;
}

SimulatedView affine_simulate(const GrayImage& img, double tilt, double angle) {
    if (!(tilt >= 1.0)) throw ParameterError("affine_simulate: tilt must be >= 1");
    if (img.empty()) throw DimensionError("affine_simulate: empty image");

    const double co = std::cos(angle);
    const double si = std::sin(angle);
    const double w1 = img.width() - 1;
    const double h1 = img.height() - 1;

    // Rotation about the origin, then shift so the rotated corners start at 0.
    const Point2 corners[4] = {{0, 0}, {w1, 0}, {0, h1}, {w1, h1}};
    double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
    for (const auto& p : corners) {
        const double rx = co * p.x - si * p.y;
        const double ry = si * p.x + co * p.y;
        min_x = std::min(min_x, rx);
        max_x = std::max(max_x, rx);
        min_y = std::min(min_y, ry);
        max_y = std::max(max_y, ry);
    }
    const bool rotate = angle != 0.0;
    if (!rotate) {
        min_x = min_y = 0.0;
        max_x = w1;
        max_y = h1;
    }

    AffineView view;
    view.tilt = tilt;
    view.angle = angle;
    view.forward = {co / tilt, -si / tilt, -min_x / tilt, si, co, -min_y};
    if (!rotate) view.forward = {1.0 / tilt, 0.0, 0.0, 0.0, 1.0, 0.0};
    view.backward = view.forward.inverse();

    GrayImage rotated = img;
    if (rotate) {
        const int rw = extent(min_x, max_x);
        const int rh = extent(min_y, max_y);
        rotated = GrayImage(rw, rh);
        for (int v = 0; v < rh; ++v) {
            for (int u = 0; u < rw; ++u) {
                // Inverse rotation of (u + min_x, v + min_y).
                const double qx = u + min_x;
                const double qy = v + min_y;
                rotated.at(u, v) = sample_clamped(img, co * qx + si * qy, -si * qx + co * qy);
            }
        }
    }
    if (tilt == 1.0) return {view, std::move(rotated)};

    const GrayImage blurred = gaussian_blur_x(rotated, 0.8 * std::sqrt(tilt * tilt - 1.0));
    const int out_w = extent(0.0, (max_x - min_x) / tilt);
    GrayImage warped(out_w, rotated.height());
    for (int v = 0; v < warped.height(); ++v) {
        for (int u = 0; u < out_w; ++u) warped.at(u, v) = sample_clamped(blurred, u * tilt, v);
    }
    return {view, std::move(warped)};
}

std::vector<ViewParams> view_grid_for_tilts(std::span<const double> tilts) {
    std::vector<ViewParams> grid;
    for (double t : tilts) {
        if (!(t >= 1.0)) throw ParameterError("view grid: tilts must be >= 1");
        if (t == 1.0) {
            grid.push_back({1.0, 0.0});
            continue;
        }
        const double step = (72.0 / t) * std::numbers::pi / 180.0;
        for (int k = 0; k * step < std::numbers::pi - 1e-12; ++k) grid.push_back({t, k * step});
    }
    return grid;
}

std::vector<ViewParams> default_view_grid() {
    const double tilts[] = {1.0, std::numbers::sqrt2, 2.0};
    return view_grid_for_tilts(tilts);
}

std::vector<Feature> asurf_extract(const GrayImage& img, std::span<const ViewParams> grid,
                                   const SurfParams& params, unsigned threads) {
    if (grid.empty()) throw ParameterError("asurf_extract: view grid is empty");
    const bool has_identity = std::any_of(grid.begin(), grid.end(), [](const ViewParams& v) {
        return v.tilt == 1.0 && v.angle == 0.0;
    });
    if (!has_identity) throw ParameterError("asurf_extract: view grid must include (1, 0)");

    std::vector<std::vector<Feature>> per_view(grid.size());
    parallel_for(grid.size(), threads, [&](std::size_t i) {
        const SimulatedView sim = affine_simulate(img, grid[i].tilt, grid[i].angle);
        auto features = surf_extract(sim.image, params);
        const bool identity = grid[i].tilt == 1.0 && grid[i].angle == 0.0;
        auto& kept = per_view[i];
        for (auto& f : features) {
            if (!identity) {
                const Point2 p = sim.view.backward.apply({f.keypoint.x, f.keypoint.y});
                f.keypoint.x = p.x;
                f.keypoint.y = p.y;
            }
            if (f.keypoint.x < 0.0 || f.keypoint.y < 0.0 || f.keypoint.x > img.width() - 1 ||
                f.keypoint.y > img.height() - 1) {
                continue;
            }
            f.view = static_cast<int>(i);
            kept.push_back(f);
        }
    });

    std::vector<Feature> merged;
    for (auto& v : per_view) merged.insert(merged.end(), v.begin(), v.end());
    std::stable_sort(merged.begin(), merged.end(), [](const Feature& a, const Feature& b) {
        return a.keypoint.response > b.keypoint.response;
    });
    if (params.max_keypoints > 0 && merged.size() > params.max_keypoints) {
        merged.resize(params.max_keypoints);
    }
    return merged;
}

void write_descriptor_dump(std::ostream& out, std::span<const Descriptor> descriptors) {
    binary::put_u32(out, static_cast<std::uint32_t>(descriptors.size()));
    binary::put_u32(out, static_cast<std::uint32_t>(kDescriptorSize));
    for (const auto& d : descriptors) {
        for (double v : d.values) binary::put_f32(out, static_cast<float>(v));
    }
    if (!out) throw IoError("descriptor dump: write failed");
}

std::vector<Descriptor> read_descriptor_dump(std::istream& in) {
    const std::uint32_t count = binary::get_u32(in, "descriptor count");
    const std::uint32_t dim = binary::get_u32(in, "descriptor dimension");
    if (dim != kDescriptorSize) {
        throw ParseError("descriptor dump: dimension " + std::to_string(dim) + ", expected 64");
    }
    std::vector<Descriptor> out(count);
    for (auto& d : out) {
        for (double& v : d.values) v = binary::get_f32(in, "descriptor value");
    }
    return out;
}

}  // namespace facerec
