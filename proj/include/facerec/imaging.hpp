#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace facerec {

/// Axis-aligned pixel rectangle: top-left (x, y), extent (w, h).
struct Rect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    int right() const { return x + w; }
    int bottom() const { return y + h; }
    long long area() const { return static_cast<long long>(w) * h; }

    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Intersection over union; 0 when either rect is empty.
double iou(const Rect& a, const Rect& b);

/// Single-channel raster with intensities in [0, 1], row-major.
class GrayImage {
public:
    GrayImage() = default;
    /// Zero-filled image. Throws DimensionError on a zero dimension.
    GrayImage(int width, int height, double fill = 0.0);
    /// Takes ownership of `data`; validates size and intensity range.
    GrayImage(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return data_.empty(); }

    double at(int x, int y) const { return data_[index(x, y)]; }
    /// Unchecked write access. Callers keep values inside [0, 1].
    double& at(int x, int y) { return data_[index(x, y)]; }

    std::span<const double> pixels() const { return data_; }
    std::span<double> pixels() { return data_; }

    bool contains(const Rect& r) const;

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Interleaved 3-channel raster, channels in [0, 1].
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;  ///< r, g, b per pixel, row-major
};

/// Summed-area table: entry (x, y) holds the sum of all source pixels with
/// x' <= x and y' <= y.
class IntegralImage {
public:
    IntegralImage() = default;
    IntegralImage(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }

    /// ii(x, y); returns 0 when x or y is -1 (zero-padded convention).
    double at(int x, int y) const {
        if (x < 0 || y < 0) return 0.0;
        return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                     static_cast<std::size_t>(x)];
    }

    std::span<const double> values() const { return data_; }

    /// Sum over pixels [x, x+w) x [y, y+h) with no bounds checking.
    double sum(int x, int y, int w, int h) const {
        const int x1 = x + w - 1;
        const int y1 = y + h - 1;
        return at(x1, y1) - at(x - 1, y1) - at(x1, y - 1) + at(x - 1, y - 1);
    }

    /// Sum over the part of [x, x+w) x [y, y+h) that lies inside the image;
    /// 0 when the rectangle misses the image entirely.
    double clipped_sum(int x, int y, int w, int h) const;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
GrayImage to_grayscale(const RgbImage& rgb);

/// Single-pass summed-area table.
IntegralImage integral_image(const GrayImage& img);

/// Summed-area table of squared intensities (for window variance).
IntegralImage integral_image_squared(const GrayImage& img);

/// Exact rectangle sum from four corner lookups. Throws BoundsError when
/// `r` is empty or leaves the image.
double box_sum(const IntegralImage& ii, const Rect& r);

/// Bilinear resampling with pixel-centre alignment. Same-size resizes
/// return a bit-identical copy.
GrayImage resize(const GrayImage& img, int new_width, int new_height);

/// Copies the pixels under `r`. Throws BoundsError if `r` leaves the image.
GrayImage crop(const GrayImage& img, const Rect& r);

}  // namespace facerec
