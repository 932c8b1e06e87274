#include "facerec/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "facerec/error.hpp"

namespace facerec {

namespace {

void check_dimensions(int width, int height, const char* what) {
    if (width < 1 || height < 1) {
        throw DimensionError(std::string(what) + ": dimensions must be positive, got " +
                             std::to_string(width) + "x" + std::to_string(height));
    }
}

template <typename Square>
IntegralImage summed_area(const GrayImage& img, Square square) {
    if (img.empty()) throw DimensionError("integral_image: empty image");
    const int w = img.width();
    const int h = img.height();
    std::vector<double> data(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        double row = 0.0;
        const std::size_t base = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            row += square(img.at(x, y));
            data[base + x] = row + (y > 0 ? data[base - w + x] : 0.0);
        }
    }
    return IntegralImage(w, h, std::move(data));
}

}  // namespace

double iou(const Rect& a, const Rect& b) {
    const int ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
    const int iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
    const double inter = static_cast<double>(ix) * iy;
    const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
    check_dimensions(width, height, "GrayImage");
    if (!(fill >= 0.0 && fill <= 1.0)) throw ParameterError("GrayImage: fill outside [0, 1]");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dimensions(width, height, "GrayImage");
    if (data_.size() != static_cast<std::size_t>(width) * height) {
        throw DimensionError("GrayImage: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(width) + "x" +
                             std::to_string(height));
    }
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ParameterError("GrayImage: intensity " + std::to_string(v) +
                                 " outside [0, 1]");
        }
    }
}

bool GrayImage::contains(const Rect& r) const {
    return r.w >= 1 && r.h >= 1 && r.x >= 0 && r.y >= 0 && r.right() <= width_ &&
           r.bottom() <= height_;
}

IntegralImage::IntegralImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    check_dimensions(width, height, "IntegralImage");
    if (data_.size() != static_cast<std::size_t>(width) * height) {
        throw DimensionError("IntegralImage: data length does not match dimensions");
    }
}

double IntegralImage::clipped_sum(int x, int y, int w, int h) const {
    const int x0 = std::max(x, 0);
    const int y0 = std::max(y, 0);
    const int x1 = std::min(x + w, width_);
    const int y1 = std::min(y + h, height_);
    if (x0 >= x1 || y0 >= y1) return 0.0;
    return sum(x0, y0, x1 - x0, y1 - y0);
}

GrayImage to_grayscale(const RgbImage& rgb) {
    check_dimensions(rgb.width, rgb.height, "to_grayscale");
    const std::size_t n = static_cast<std::size_t>(rgb.width) * rgb.height;
    if (rgb.data.size() != 3 * n) throw DimensionError("to_grayscale: data length mismatch");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double luma =
            0.299 * rgb.data[3 * i] + 0.587 * rgb.data[3 * i + 1] + 0.114 * rgb.data[3 * i + 2];
        // The weights sum to 1 but rounding can step just past the ends.
        out[i] = std::clamp(luma, 0.0, 1.0);
    }
    return GrayImage(rgb.width, rgb.height, std::move(out));
}

IntegralImage integral_image(const GrayImage& img) {
    return summed_area(img, [](double v) { return v; });
}

IntegralImage integral_image_squared(const GrayImage& img) {
    return summed_area(img, [](double v) { return v * v; });
}

double box_sum(const IntegralImage& ii, const Rect& r) {
    if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.right() > ii.width() ||
        r.bottom() > ii.height()) {
        throw BoundsError("box_sum: rect (" + std::to_string(r.x) + ", " + std::to_string(r.y) +
                          ", " + std::to_string(r.w) + ", " + std::to_string(r.h) +
                          ") outside " + std::to_string(ii.width()) + "x" +
                          std::to_string(ii.height()) + " image");
    }
    return ii.sum(r.x, r.y, r.w, r.h);
}

GrayImage resize(const GrayImage& img, int new_width, int new_height) {
    check_dimensions(new_width, new_height, "resize");
    if (img.empty()) throw DimensionError("resize: empty source image");
    if (new_width == img.width() && new_height == img.height()) return img;

    const double sx = static_cast<double>(img.width()) / new_width;
    const double sy = static_cast<double>(img.height()) / new_height;
    const int max_x = img.width() - 1;
    const int max_y = img.height() - 1;

    GrayImage out(new_width, new_height);
    for (int y = 0; y < new_height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, max_y);
        const double ty = fy - y0;
        for (int x = 0; x < new_width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, max_x);
            const double tx = fx - x0;
            const double top = img.at(x0, y0) * (1.0 - tx) + img.at(x1, y0) * tx;
            const double bottom = img.at(x0, y1) * (1.0 - tx) + img.at(x1, y1) * tx;
            out.at(x, y) = std::clamp(top * (1.0 - ty) + bottom * ty, 0.0, 1.0);
        }
    }
    return out;
}

GrayImage crop(const GrayImage& img, const Rect& r) {
    if (!img.contains(r)) throw BoundsError("crop: rect outside image");
    GrayImage out(r.w, r.h);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) out.at(x, y) = img.at(r.x + x, r.y + y);
    }
    return out;
}

}  // namespace facerec
