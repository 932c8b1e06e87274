#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "facerec/image_io.hpp"
#include "facerec/imaging.hpp"
#include "facerec/random.hpp"

namespace testing {

inline std::filesystem::path test_data(const std::string& rel) {
    return std::filesystem::path(FACEREC_TEST_DATA_DIR) / rel;
}

inline std::filesystem::path cascade_path(const std::string& name = "haarcascade_frontalface_alt.xml") {
    return std::filesystem::path(FACEREC_DATA_DIR) / "cascades" / name;
}

inline facerec::GrayImage random_image(int w, int h, std::uint64_t seed) {
    facerec::Rng rng(seed);
    facerec::GrayImage img(w, h);
    for (double& v : img.pixels()) v = rng.uniform();
    return img;
}

inline facerec::GrayImage blob_image(int w, int h, double cx, double cy, double sigma,
                                     double background = 0.1, double peak = 0.8) {
    facerec::GrayImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            img.at(x, y) = background + peak * std::exp(-r2 / (2.0 * sigma * sigma));
        }
    }
    return img;
}

/// Quarter turn clockwise: source pixel (x, y) lands on (h - 1 - y, x).
inline facerec::GrayImage rotate90(const facerec::GrayImage& in) {
    facerec::GrayImage out(in.height(), in.width());
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) out.at(in.height() - 1 - y, x) = in.at(x, y);
    }
    return out;
}

inline facerec::GrayImage mirror_x(const facerec::GrayImage& in) {
    facerec::GrayImage out(in.width(), in.height());
    for (int y = 0; y < in.height(); ++y) {
        for (int x = 0; x < in.width(); ++x) out.at(in.width() - 1 - x, y) = in.at(x, y);
    }
    return out;
}

/// Pastes `src` into `dst` with its top-left corner at (ox, oy).
inline void paste(facerec::GrayImage& dst, const facerec::GrayImage& src, int ox, int oy) {
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) dst.at(ox + x, oy + y) = src.at(x, y);
    }
}

struct Annotation {
    std::string file;
    facerec::Rect face;
};

inline std::vector<Annotation> face_annotations() {
    std::ifstream in(test_data("faces/annotations.csv"));
    std::vector<Annotation> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        Annotation a;
        std::string field;
        std::getline(ss, a.file, ',');
        std::getline(ss, field, ',');
        a.face.x = std::stoi(field);
        std::getline(ss, field, ',');
        a.face.y = std::stoi(field);
        std::getline(ss, field, ',');
        a.face.w = std::stoi(field);
        std::getline(ss, field, ',');
        a.face.h = std::stoi(field);
        out.push_back(a);
    }
    return out;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace testing
