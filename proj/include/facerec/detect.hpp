#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "facerec/imaging.hpp"

namespace facerec {

struct WeightedRect {
    Rect rect;
    double weight = 0.0;

    friend bool operator==(const WeightedRect&, const WeightedRect&) = default;
};

/// Haar-like feature: weighted sum of 2 or 3 rectangle sums in base-window
/// coordinates.
struct HaarFeature {
    std::vector<WeightedRect> rects;

    friend bool operator==(const HaarFeature&, const HaarFeature&) = default;
};

/// Decision stump over one Haar feature: votes left_value when the
/// normalized feature value is below threshold, right_value otherwise.
struct WeakClassifier {
    HaarFeature feature;
    double threshold = 0.0;
    double left_value = 0.0;
    double right_value = 0.0;

    friend bool operator==(const WeakClassifier&, const WeakClassifier&) = default;
};

struct CascadeStage {
    std::vector<WeakClassifier> classifiers;
    double stage_threshold = 0.0;

    friend bool operator==(const CascadeStage&, const CascadeStage&) = default;
};

struct CascadeModel {
    int base_width = 0;
    int base_height = 0;
    std::vector<CascadeStage> stages;

    friend bool operator==(const CascadeModel&, const CascadeModel&) = default;
};

/// Parses the OpenCV "opencv-cascade-classifier" XML dialect (HAAR feature
/// type, stump trees, upright features only). Throws ParseError naming the
/// offending element on any structural problem.
CascadeModel load_cascade(std::string_view xml);
CascadeModel load_cascade_file(const std::filesystem::path& path);

/// Writes `model` back in the same dialect; load_cascade accepts the output.
std::string serialize_cascade(const CascadeModel& model);

/// A cascade with every rectangle scaled to one window size. Rect weights of
/// the first rectangle are rebalanced so rounded areas keep each feature
/// zero-sum, as the original detector did.
struct ScaledCascade {
    int window_width = 0;
    int window_height = 0;
    /// Window area used to normalize feature sums (1-pixel inset, scaled).
    Rect norm_rect;
    double inv_norm_area = 0.0;
    std::vector<CascadeStage> stages;
};

ScaledCascade scale_cascade(const CascadeModel& model, int window_width, int window_height);

/// Optional instrumentation for evaluate_window.
struct WindowStats {
    std::size_t stages_evaluated = 0;
};

/// Runs the cascade on one window. Feature sums are divided by the inset
/// window area and the window standard deviation; windows with stddev below
/// 1e-6 are rejected outright. Throws BoundsError if `window` leaves the image.
bool evaluate_window(const ScaledCascade& cascade, const IntegralImage& ii,
                     const IntegralImage& ii_sq, const Rect& window,
                     WindowStats* stats = nullptr);

/// Convenience overload that scales the cascade to `window` first.
bool evaluate_window(const CascadeModel& model, const IntegralImage& ii,
                     const IntegralImage& ii_sq, const Rect& window,
                     WindowStats* stats = nullptr);

struct DetectParams {
    double scale_factor = 1.1;
    int min_neighbors = 3;
    int min_size = 0;  ///< minimum window side; 0 means the base window
    /// Neighbour criterion for grouping raw hits.
    double group_iou = 0.3;
    unsigned threads = 1;
};

/// Multi-scale sliding-window scan. Raw hits are grouped by IoU, groups with
/// fewer than min_neighbors members dropped, and each group averaged. Result
/// is sorted by area (descending), then by y and x.
std::vector<Rect> detect_faces(const GrayImage& img, const CascadeModel& model,
                               const DetectParams& params = {});

/// Largest detection, if any.
std::optional<Rect> largest_face(const GrayImage& img, const CascadeModel& model,
                                 const DetectParams& params = {});

/// Scan stride for a window of the given width: max(1, round(0.05 * width)).
int scan_stride(int window_width);

}  // namespace facerec
