#include "facerec/detect.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "facerec/error.hpp"
#include "facerec/parallel.hpp"

namespace facerec {

namespace pt = boost::property_tree;

namespace {

// Names the innermost element left open when the XML ends early. Only used
// to produce a readable error after the real parser has rejected the input.
std::string first_unclosed_element(std::string_view xml) {
    std::vector<std::string> open;
    std::size_t pos = 0;
    while ((pos = xml.find('<', pos)) != std::string_view::npos) {
        if (xml.substr(pos, 4) == "<!--") {
            const auto end = xml.find("-->", pos);
            if (end == std::string_view::npos) return "comment";
            pos = end + 3;
            continue;
        }
        const auto end = xml.find('>', pos);
        if (end == std::string_view::npos) {
            break;
        }
        std::string_view tag = xml.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        if (tag.empty() || tag.front() == '?' || tag.front() == '!') continue;
        if (tag.back() == '/') continue;
        if (tag.front() == '/') {
            if (!open.empty()) open.pop_back();
            continue;
        }
        const auto name_end = tag.find_first_of(" \t\r\n");
        open.emplace_back(tag.substr(0, name_end));
    }
    return open.empty() ? std::string("document") : open.back();
}

const pt::ptree& require_child(const pt::ptree& node, const std::string& name,
                               const std::string& where) {
    auto child = node.get_child_optional(name);
    if (!child) throw ParseError("cascade: missing element <" + name + "> in " + where);
    return *child;
}

template <typename T>
T require_value(const pt::ptree& node, const std::string& name, const std::string& where) {
    const auto& child = require_child(node, name, where);
    try {
        return child.get_value<T>();
    } catch (const pt::ptree_bad_data&) {
        throw ParseError("cascade: element <" + name + "> in " + where + " has invalid value '" +
                         child.data() + "'");
    }
}

std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    std::vector<double> out;
    double v;
    while (in >> v) out.push_back(v);
    if (!in.eof()) throw ParseError("cascade: non-numeric token in " + where);
    return out;
}

HaarFeature parse_feature(const pt::ptree& node, int index, int base_w, int base_h) {
    const std::string where = "feature " + std::to_string(index);
    if (node.get<int>("tilted", 0) != 0) {
        throw ParseError("cascade: " + where + " is tilted; only upright features are supported");
    }
    HaarFeature feature;
    for (const auto& [tag, rect_node] : require_child(node, "rects", where)) {
        if (tag != "_") continue;
        const auto v = parse_numbers(rect_node.data(), where + " rect");
        if (v.size() != 5) {
            throw ParseError("cascade: " + where + " rect needs 5 values (x y w h weight)");
        }
        WeightedRect wr{{static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]),
                         static_cast<int>(v[3])},
                        v[4]};
        const Rect& r = wr.rect;
        if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.right() > base_w ||
            r.bottom() > base_h) {
            throw ParseError("cascade: " + where + " rect (" + std::to_string(r.x) + " " +
                             std::to_string(r.y) + " " + std::to_string(r.w) + " " +
                             std::to_string(r.h) + ") outside the " + std::to_string(base_w) +
                             "x" + std::to_string(base_h) + " base window");
        }
        feature.rects.push_back(wr);
    }
    if (feature.rects.size() < 2 || feature.rects.size() > 3) {
        throw ParseError("cascade: " + where + " must have 2 or 3 rects, found " +
                         std::to_string(feature.rects.size()));
    }
    const bool has_pos = std::any_of(feature.rects.begin(), feature.rects.end(),
                                     [](const WeightedRect& r) { return r.weight > 0; });
    const bool has_neg = std::any_of(feature.rects.begin(), feature.rects.end(),
                                     [](const WeightedRect& r) { return r.weight < 0; });
    if (!has_pos || !has_neg) {
        throw ParseError("cascade: " + where + " needs both positive and negative weights");
    }
    return feature;
}

std::string format_double(double v) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    out.precision(17);
    out << v;
    return out.str();
}

// Whole-window pixel offsets for one scaled feature.
Rect offset(const Rect& r, int dx, int dy) { return {r.x + dx, r.y + dy, r.w, r.h}; }

Rect average_group(const std::vector<Rect>& hits, const std::vector<std::size_t>& members,
                   int img_w, int img_h) {
    double sx = 0, sy = 0, sw = 0, sh = 0;
    for (std::size_t i : members) {
        sx += hits[i].x;
        sy += hits[i].y;
        sw += hits[i].w;
        sh += hits[i].h;
    }
    const double n = static_cast<double>(members.size());
    Rect r{static_cast<int>(std::lround(sx / n)), static_cast<int>(std::lround(sy / n)),
           static_cast<int>(std::lround(sw / n)), static_cast<int>(std::lround(sh / n))};
    r.w = std::min(r.w, img_w);
    r.h = std::min(r.h, img_h);
    r.x = std::clamp(r.x, 0, img_w - r.w);
    r.y = std::clamp(r.y, 0, img_h - r.h);
    return r;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

}  // namespace

CascadeModel load_cascade(std::string_view xml) {
    pt::ptree doc;
    try {
        std::istringstream in{std::string(xml)};
        pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
    } catch (const pt::xml_parser_error& e) {
        throw ParseError("cascade: malformed XML (" + e.message() + "); element <" +
                         first_unclosed_element(xml) + "> is incomplete");
    }

    const auto& storage = require_child(doc, "opencv_storage", "document");
    const auto& cascade = require_child(storage, "cascade", "<opencv_storage>");
    const std::string where = "<cascade>";

    const auto feature_type = require_value<std::string>(cascade, "featureType", where);
    if (feature_type != "HAAR") {
        throw ParseError("cascade: unsupported featureType '" + feature_type + "'");
    }
    const auto stage_type = require_value<std::string>(cascade, "stageType", where);
    if (stage_type != "BOOST") {
        throw ParseError("cascade: unsupported stageType '" + stage_type + "'");
    }

    CascadeModel model;
    model.base_width = require_value<int>(cascade, "width", where);
    model.base_height = require_value<int>(cascade, "height", where);
    if (model.base_width < 8 || model.base_height < 8) {
        throw ParseError("cascade: base window must be at least 8x8");
    }
    const int declared_stages = require_value<int>(cascade, "stageNum", where);

    std::vector<HaarFeature> features;
    for (const auto& [tag, node] : require_child(cascade, "features", where)) {
        if (tag != "_") continue;
        features.push_back(parse_feature(node, static_cast<int>(features.size()),
                                         model.base_width, model.base_height));
    }

    for (const auto& [tag, stage_node] : require_child(cascade, "stages", where)) {
        if (tag != "_") continue;
        const std::string stage_where = "stage " + std::to_string(model.stages.size());
        CascadeStage stage;
        stage.stage_threshold = require_value<double>(stage_node, "stageThreshold", stage_where);
        for (const auto& [wtag, weak_node] :
             require_child(stage_node, "weakClassifiers", stage_where)) {
            if (wtag != "_") continue;
            const std::string weak_where =
                stage_where + " classifier " + std::to_string(stage.classifiers.size());
            const auto nodes = parse_numbers(
                require_child(weak_node, "internalNodes", weak_where).data(), weak_where);
            const auto leaves = parse_numbers(
                require_child(weak_node, "leafValues", weak_where).data(), weak_where);
            if (nodes.size() != 4 || leaves.size() != 2) {
                throw ParseError("cascade: " + weak_where +
                                 " is not a decision stump (need 4 node values, 2 leaves)");
            }
            const int left = static_cast<int>(nodes[0]);
            const int right = static_cast<int>(nodes[1]);
            const int feature_index = static_cast<int>(nodes[2]);
            if (left > 0 || right > 0 || -left > 1 || -right > 1) {
                throw ParseError("cascade: " + weak_where + " has non-leaf children");
            }
            if (feature_index < 0 || feature_index >= static_cast<int>(features.size())) {
                throw ParseError("cascade: " + weak_where + " references missing feature " +
                                 std::to_string(feature_index));
            }
            stage.classifiers.push_back({features[feature_index], nodes[3],
                                         leaves[static_cast<std::size_t>(-left)],
                                         leaves[static_cast<std::size_t>(-right)]});
        }
        if (stage.classifiers.empty()) {
            throw ParseError("cascade: " + stage_where + " has no weak classifiers");
        }
        model.stages.push_back(std::move(stage));
    }

    if (model.stages.empty()) throw ParseError("cascade: no stages");
    if (static_cast<int>(model.stages.size()) != declared_stages) {
        throw ParseError("cascade: <stageNum> declares " + std::to_string(declared_stages) +
                         " stages but " + std::to_string(model.stages.size()) + " were found");
    }
    return model;
}

CascadeModel load_cascade_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open cascade " + path.string());
    const std::string xml((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_cascade(xml);
}

std::string serialize_cascade(const CascadeModel& model) {
    std::ostringstream out;
    out.imbue(std::locale::classic());
    std::size_t max_weak = 0;
    for (const auto& s : model.stages) max_weak = std::max(max_weak, s.classifiers.size());

    out << "<?xml version=\"1.0\"?>\n<opencv_storage>\n"
        << "<cascade type_id=\"opencv-cascade-classifier\"><stageType>BOOST</stageType>\n"
        << "  <featureType>HAAR</featureType>\n"
        << "  <height>" << model.base_height << "</height>\n"
        << "  <width>" << model.base_width << "</width>\n"
        << "  <stageParams>\n    <maxWeakCount>" << max_weak << "</maxWeakCount></stageParams>\n"
        << "  <featureParams>\n    <maxCatCount>0</maxCatCount></featureParams>\n"
        << "  <stageNum>" << model.stages.size() << "</stageNum>\n  <stages>\n";
    std::size_t feature_index = 0;
    for (const auto& stage : model.stages) {
        out << "    <_>\n      <maxWeakCount>" << stage.classifiers.size() << "</maxWeakCount>\n"
            << "      <stageThreshold>" << format_double(stage.stage_threshold)
            << "</stageThreshold>\n      <weakClassifiers>\n";
        for (const auto& weak : stage.classifiers) {
            out << "        <_>\n          <internalNodes>\n            0 -1 " << feature_index++
                << " " << format_double(weak.threshold) << "</internalNodes>\n"
                << "          <leafValues>\n            " << format_double(weak.left_value)
                << " " << format_double(weak.right_value) << "</leafValues></_>\n";
        }
        out << "      </weakClassifiers></_>\n";
    }
    out << "  </stages>\n  <features>\n";
    for (const auto& stage : model.stages) {
        for (const auto& weak : stage.classifiers) {
            out << "    <_>\n      <rects>\n";
            for (const auto& wr : weak.feature.rects) {
                out << "        <_>\n          " << wr.rect.x << " " << wr.rect.y << " "
                    << wr.rect.w << " " << wr.rect.h << " " << format_double(wr.weight)
                    << "</_>\n";
            }
            out << "      </rects></_>\n";
        }
    }
    out << "  </features></cascade>\n</opencv_storage>\n";
    return out.str();
}

ScaledCascade scale_cascade(const CascadeModel& model, int window_width, int window_height) {
    if (window_width < 1 || window_height < 1) {
        throw ParameterError("scale_cascade: window must be non-empty");
    }
    ScaledCascade sc;
    sc.window_width = window_width;
    sc.window_height = window_height;
    const double sx = static_cast<double>(window_width) / model.base_width;
    const double sy = static_cast<double>(window_height) / model.base_height;
    auto round_i = [](double v) { return static_cast<int>(std::lround(v)); };

    sc.norm_rect = {round_i(sx), round_i(sy), round_i((model.base_width - 2) * sx),
                    round_i((model.base_height - 2) * sy)};
    sc.norm_rect.w = std::clamp(sc.norm_rect.w, 1, window_width - sc.norm_rect.x);
    sc.norm_rect.h = std::clamp(sc.norm_rect.h, 1, window_height - sc.norm_rect.y);
    sc.inv_norm_area = 1.0 / static_cast<double>(sc.norm_rect.area());

    sc.stages.reserve(model.stages.size());
    for (const auto& stage : model.stages) {
        CascadeStage scaled = stage;
        for (auto& weak : scaled.classifiers) {
            double base_balance = 0.0;
            for (const auto& wr : weak.feature.rects) {
                base_balance += wr.weight * static_cast<double>(wr.rect.area());
            }
            for (auto& wr : weak.feature.rects) {
                Rect& r = wr.rect;
                const Rect base = r;
                r.x = std::min(round_i(base.x * sx), window_width - 1);
                r.y = std::min(round_i(base.y * sy), window_height - 1);
                r.w = std::clamp(round_i(base.w * sx), 1, window_width - r.x);
                r.h = std::clamp(round_i(base.h * sy), 1, window_height - r.y);
            }
            if (std::abs(base_balance) < 1e-9) {
                double rest = 0.0;
                for (std::size_t k = 1; k < weak.feature.rects.size(); ++k) {
                    rest += weak.feature.rects[k].weight *
                            static_cast<double>(weak.feature.rects[k].rect.area());
                }
                weak.feature.rects[0].weight =
                    -rest / static_cast<double>(weak.feature.rects[0].rect.area());
            }
        }
        sc.stages.push_back(std::move(scaled));
    }
    return sc;
}

bool evaluate_window(const ScaledCascade& cascade, const IntegralImage& ii,
                     const IntegralImage& ii_sq, const Rect& window, WindowStats* stats) {
    if (window.w != cascade.window_width || window.h != cascade.window_height) {
        throw ParameterError("evaluate_window: window size does not match the scaled cascade");
    }
    if (window.x < 0 || window.y < 0 || window.right() > ii.width() ||
        window.bottom() > ii.height()) {
        throw BoundsError("evaluate_window: window outside image");
    }

    const Rect nr = offset(cascade.norm_rect, window.x, window.y);
    const double mean = ii.sum(nr.x, nr.y, nr.w, nr.h) * cascade.inv_norm_area;
    const double mean_sq = ii_sq.sum(nr.x, nr.y, nr.w, nr.h) * cascade.inv_norm_area;
    const double stddev = std::sqrt(std::max(0.0, mean_sq - mean * mean));
    if (stddev < 1e-6) return false;
    const double norm = cascade.inv_norm_area / stddev;

    for (const auto& stage : cascade.stages) {
        if (stats) ++stats->stages_evaluated;
        double votes = 0.0;
        for (const auto& weak : stage.classifiers) {
            double value = 0.0;
            for (const auto& wr : weak.feature.rects) {
                value += wr.weight * ii.sum(window.x + wr.rect.x, window.y + wr.rect.y, wr.rect.w,
                                            wr.rect.h);
            }
            votes += value * norm < weak.threshold ? weak.left_value : weak.right_value;
        }
        if (votes < stage.stage_threshold) return false;
    }
    return true;
}

bool evaluate_window(const CascadeModel& model, const IntegralImage& ii,
                     const IntegralImage& ii_sq, const Rect& window, WindowStats* stats) {
    return evaluate_window(scale_cascade(model, window.w, window.h), ii, ii_sq, window, stats);
}

int scan_stride(int window_width) {
    return std::max(1, static_cast<int>(std::lround(0.05 * window_width)));
}

std::vector<Rect> detect_faces(const GrayImage& img, const CascadeModel& model,
                               const DetectParams& params) {
    if (!(params.scale_factor > 1.0)) throw ParameterError("detect_faces: scale_factor must be > 1");
    if (params.min_neighbors < 0) throw ParameterError("detect_faces: min_neighbors must be >= 0");
    if (img.empty() || img.width() < model.base_width || img.height() < model.base_height) {
        return {};
    }

    std::vector<std::pair<int, int>> windows;
    for (double s = 1.0;; s *= params.scale_factor) {
        const int ww = static_cast<int>(std::lround(model.base_width * s));
        const int wh = static_cast<int>(std::lround(model.base_height * s));
        if (ww > img.width() || wh > img.height()) break;
        if (std::min(ww, wh) < params.min_size) continue;
        if (!windows.empty() && windows.back().first == ww) continue;
        windows.emplace_back(ww, wh);
    }

    const IntegralImage ii = integral_image(img);
    const IntegralImage ii_sq = integral_image_squared(img);

    std::vector<std::vector<Rect>> per_scale(windows.size());
    parallel_for(windows.size(), params.threads, [&](std::size_t si) {
        const auto [ww, wh] = windows[si];
        const ScaledCascade sc = scale_cascade(model, ww, wh);
        const int stride = scan_stride(ww);
        for (int y = 0; y + wh <= img.height(); y += stride) {
            for (int x = 0; x + ww <= img.width(); x += stride) {
                const Rect window{x, y, ww, wh};
                if (evaluate_window(sc, ii, ii_sq, window)) per_scale[si].push_back(window);
            }
        }
    });

    std::vector<Rect> hits;
    for (const auto& v : per_scale) hits.insert(hits.end(), v.begin(), v.end());
    if (hits.empty()) return {};

    std::vector<std::size_t> parent(hits.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    for (std::size_t i = 0; i < hits.size(); ++i) {
        for (std::size_t j = i + 1; j < hits.size(); ++j) {
            if (iou(hits[i], hits[j]) >= params.group_iou) {
                parent[find_root(parent, j)] = find_root(parent, i);
            }
        }
    }
    std::vector<std::vector<std::size_t>> groups(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) groups[find_root(parent, i)].push_back(i);

    std::vector<Rect> faces;
    for (const auto& members : groups) {
        if (members.empty()) continue;
        if (static_cast<int>(members.size()) < params.min_neighbors) continue;
        faces.push_back(average_group(hits, members, img.width(), img.height()));
    }
    std::sort(faces.begin(), faces.end(), [](const Rect& a, const Rect& b) {
        if (a.area() != b.area()) return a.area() > b.area();
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    return faces;
}

std::optional<Rect> largest_face(const GrayImage& img, const CascadeModel& model,
                                 const DetectParams& params) {
    auto faces = detect_faces(img, model, params);
    if (faces.empty()) return std::nullopt;
    return faces.front();
}

}  // namespace facerec
