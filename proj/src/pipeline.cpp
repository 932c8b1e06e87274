#include "facerec/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "facerec/error.hpp"
#include "facerec/image_io.hpp"
#include "facerec/log.hpp"
#include "facerec/parallel.hpp"
#include "facerec/random.hpp"

#ifndef FACEREC_DEFAULT_CASCADE
#define FACEREC_DEFAULT_CASCADE "data/cascades/haarcascade_frontalface_alt.xml"
#endif

namespace facerec {

namespace fs = std::filesystem;

namespace {

enum SeedStream : std::uint64_t { kSplitStream = 1, kVocabStream = 2, kForestStream = 3 };

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool accepts_extension(DatasetLayout layout, const fs::path& p) {
    const std::string ext = lower(p.extension().string());
    const bool pnm = ext == ".pgm" || ext == ".pnm" || ext == ".ppm";
    const bool jpeg = ext == ".jpg" || ext == ".jpeg";
    switch (layout) {
        case DatasetLayout::orl: return ext == ".pgm";
        case DatasetLayout::faces95:
        case DatasetLayout::faces96: return jpeg;
        case DatasetLayout::generic: return pnm || jpeg;
    }
    return false;
}

bool looks_like_image(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    if (!in.read(reinterpret_cast<char*>(magic), 2)) return false;
    if (magic[0] == 0xFF && magic[1] == 0xD8) return true;
    return magic[0] == 'P' && (magic[1] == '2' || magic[1] == '3' || magic[1] == '5' || magic[1] == '6');
}

bool is_orl_dir_name(const std::string& name) {
    return name.size() >= 2 && name[0] == 's' &&
           std::all_of(name.begin() + 1, name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParameterError("config: bad value '" + std::string(text) + "' for " + std::string(key));
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    const std::string v = lower(text);
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ParameterError("config: bad boolean '" + std::string(text) + "' for " + std::string(key));
}

std::vector<double> parse_list(std::string_view key, std::string_view text) {
    std::vector<double> out;
    while (!text.empty()) {
        const auto comma = text.find(',');
        out.push_back(parse_number<double>(key, trim(text.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ParameterError("config: empty list for " + std::string(key));
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

DatasetLayout parse_layout(std::string_view name) {
    const std::string n = lower(name);
    if (n == "orl") return DatasetLayout::orl;
    if (n == "faces95") return DatasetLayout::faces95;
    if (n == "faces96") return DatasetLayout::faces96;
    if (n == "generic" || n == "generic-dirs") return DatasetLayout::generic;
    throw ParameterError("unknown dataset layout '" + std::string(name) +
                         "' (expected orl, faces95, faces96 or generic-dirs)");
}

std::string_view layout_name(DatasetLayout layout) {
    switch (layout) {
        case DatasetLayout::orl: return "orl";
        case DatasetLayout::faces95: return "faces95";
        case DatasetLayout::faces96: return "faces96";
        case DatasetLayout::generic: return "generic-dirs";
    }
    return "generic-dirs";
}

std::vector<int> LabeledDataset::labels() const {
    std::vector<int> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.label);
    return out;
}

LabeledDataset load_dataset(const fs::path& root, DatasetLayout layout) {
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw IoError("dataset root " + root.string() + " is not a directory");
    }
    std::vector<fs::path> class_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory() && !name.starts_with('.')) class_dirs.push_back(entry.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (class_dirs.empty()) {
        throw IoError("dataset root " + root.string() + " has no identity directories");
    }

    LabeledDataset ds;
    ds.name = fs::absolute(root).lexically_normal().filename().string();
    if (ds.name.empty()) ds.name = fs::absolute(root).lexically_normal().parent_path().filename().string();
    ds.layout = layout;
    std::vector<std::string> offenders;
    for (const auto& dir : class_dirs) {
        const std::string class_name = dir.filename().string();
        if (layout == DatasetLayout::orl && !is_orl_dir_name(class_name)) {
            offenders.push_back(dir.string() + ": not an ORL s<N> directory");
            continue;
        }
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            if (entry.path().filename().string().starts_with('.')) continue;
            if (accepts_extension(layout, entry.path())) files.push_back(entry.path());
        }
        if (files.empty()) {
            offenders.push_back(dir.string() + ": no images");
            continue;
        }
        std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
            return a.filename().string() < b.filename().string();
        });
        const int label = static_cast<int>(ds.class_names.size());
        ds.class_names.push_back(class_name);
        for (auto& f : files) {
            if (!looks_like_image(f)) {
                offenders.push_back(f.string() + ": unreadable or not a PNM/JPEG file");
                continue;
            }
            ds.items.push_back({std::move(f), label, class_name});
        }
    }
    if (!offenders.empty()) {
        std::string msg = "dataset " + root.string() + " (" + std::string(layout_name(layout)) +
                          "): " + std::to_string(offenders.size()) + " problem(s)";
        for (const auto& o : offenders) msg += "\n  " + o;
        throw IoError(msg);
    }
    return ds;
}

Split train_test_split(std::span<const int> labels, const SplitConfig& cfg,
                       std::span<const std::string> class_names) {
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ParameterError("train_test_split: train fraction must be in (0, 1)");
    }
    if (labels.size() < 2) throw ParameterError("train_test_split: need at least 2 items");

    auto take = [&](std::vector<std::size_t>& members, std::uint64_t seed, Split& out) {
        Rng rng(seed);
        for (std::size_t i = members.size(); i > 1; --i) {
            std::swap(members[i - 1], members[rng.index(i)]);
        }
        const auto n = members.size();
        auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
        n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    };

    Split split;
    if (cfg.stratified) {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
        for (auto& [label, members] : by_class) {
            if (members.size() < 2) {
                const std::string name = label >= 0 && static_cast<std::size_t>(label) < class_names.size()
                                             ? class_names[static_cast<std::size_t>(label)]
                                             : "label " + std::to_string(label);
                throw ParameterError("train_test_split: class '" + name +
                                     "' has 1 item; stratified splitting needs at least 2");
            }
            take(members, derive_seed(cfg.seed, static_cast<std::uint64_t>(label)), split);
        }
    } else {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        take(all, cfg.seed, split);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::string_view aggregator_name(Aggregator a) { return a == Aggregator::bow ? "bow" : "vlad"; }

std::string_view classifier_name(ClassifierKind c) {
    return c == ClassifierKind::forest ? "forest" : "knn";
}

fs::path default_cascade_path() { return FACEREC_DEFAULT_CASCADE; }

std::size_t PipelineConfig::effective_k() const {
    if (k != 0) return k;
    return aggregator == Aggregator::bow ? 128 : 64;
}

std::vector<ViewParams> PipelineConfig::view_grid() const {
    if (!affine) return {ViewParams{1.0, 0.0}};
    return view_grid_for_tilts(tilts);
}

void apply_setting(PipelineConfig& cfg, std::string_view key_in, std::string_view value_in) {
    const std::string key = lower(trim(key_in));
    const std::string_view value = trim(value_in);
    auto num = [&]<typename T>(T& field) { field = parse_number<T>(key, value); };

    if (key == "cascade") cfg.cascade_path = fs::path(std::string(value));
    else if (key == "detect.scale_factor") num(cfg.detect.scale_factor);
    else if (key == "detect.min_neighbors") num(cfg.detect.min_neighbors);
    else if (key == "detect.min_size") num(cfg.detect.min_size);
    else if (key == "bilateral.sigma_spatial") num(cfg.bilateral.sigma_spatial);
    else if (key == "bilateral.sigma_range") num(cfg.bilateral.sigma_range);
    else if (key == "bilateral.radius") num(cfg.bilateral.radius);
    else if (key == "surf.octaves") num(cfg.surf.octaves);
    else if (key == "surf.levels") num(cfg.surf.levels);
    else if (key == "surf.threshold") num(cfg.surf.threshold);
    else if (key == "surf.max_keypoints") num(cfg.surf.max_keypoints);
    else if (key == "surf.upright") cfg.surf.upright = parse_bool(key, value);
    else if (key == "asurf.enabled") cfg.affine = parse_bool(key, value);
    else if (key == "asurf.tilts") cfg.tilts = parse_list(key, value);
    else if (key == "aggregator") {
        const std::string v = lower(value);
        if (v == "bow") cfg.aggregator = Aggregator::bow;
        else if (v == "vlad") cfg.aggregator = Aggregator::vlad;
        else throw ParameterError("config: aggregator must be bow or vlad, got '" + std::string(value) + "'");
    } else if (key == "k") num(cfg.k);
    else if (key == "kmeans.max_iters") num(cfg.kmeans_max_iters);
    else if (key == "classifier") {
        const std::string v = lower(value);
        if (v == "forest") cfg.classifier = ClassifierKind::forest;
        else if (v == "knn") cfg.classifier = ClassifierKind::knn;
        else throw ParameterError("config: classifier must be forest or knn, got '" + std::string(value) + "'");
    } else if (key == "forest.trees") num(cfg.forest.n_trees);
    else if (key == "forest.max_depth") num(cfg.forest.max_depth);
    else if (key == "forest.min_samples_split") num(cfg.forest.min_samples_split);
    else if (key == "forest.mtry") num(cfg.forest.mtry);
    else if (key == "forest.bootstrap") cfg.forest.bootstrap = parse_bool(key, value);
    else if (key == "knn.k") num(cfg.knn.k);
    else if (key == "split.train_fraction") num(cfg.train_fraction);
    else if (key == "split.stratified") cfg.stratified = parse_bool(key, value);
    else if (key == "no_split") cfg.no_split = parse_bool(key, value);
    else if (key == "paper_faithful_vocab") cfg.paper_faithful_vocab = parse_bool(key, value);
    else if (key == "crop_size") num(cfg.crop_size);
    else if (key == "seed") num(cfg.seed);
    else if (key == "threads") num(cfg.threads);
    else throw ParameterError("config: unknown key '" + std::string(key_in) + "'");
}

void apply_config_text(PipelineConfig& cfg, std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParameterError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
}

PipelineConfig load_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    PipelineConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

std::string to_config_text(const PipelineConfig& cfg) {
    std::string tilts;
    for (std::size_t i = 0; i < cfg.tilts.size(); ++i) {
        if (i) tilts += ',';
        tilts += format_number(cfg.tilts[i]);
    }
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    const std::vector<std::pair<std::string, std::string>> kv = {
        {"cascade", cfg.cascade_path.string()},
        {"detect.scale_factor", format_number(cfg.detect.scale_factor)},
        {"detect.min_neighbors", std::to_string(cfg.detect.min_neighbors)},
        {"detect.min_size", std::to_string(cfg.detect.min_size)},
        {"bilateral.sigma_spatial", format_number(cfg.bilateral.sigma_spatial)},
        {"bilateral.sigma_range", format_number(cfg.bilateral.sigma_range)},
        {"bilateral.radius", std::to_string(cfg.bilateral.radius)},
        {"surf.octaves", std::to_string(cfg.surf.octaves)},
        {"surf.levels", std::to_string(cfg.surf.levels)},
        {"surf.threshold", format_number(cfg.surf.threshold)},
        {"surf.max_keypoints", std::to_string(cfg.surf.max_keypoints)},
        {"surf.upright", b(cfg.surf.upright)},
        {"asurf.enabled", b(cfg.affine)},
        {"asurf.tilts", tilts},
        {"aggregator", std::string(aggregator_name(cfg.aggregator))},
        {"k", std::to_string(cfg.k)},
        {"kmeans.max_iters", std::to_string(cfg.kmeans_max_iters)},
        {"classifier", std::string(classifier_name(cfg.classifier))},
        {"forest.trees", std::to_string(cfg.forest.n_trees)},
        {"forest.max_depth", std::to_string(cfg.forest.max_depth)},
        {"forest.min_samples_split", std::to_string(cfg.forest.min_samples_split)},
        {"forest.mtry", std::to_string(cfg.forest.mtry)},
        {"forest.bootstrap", b(cfg.forest.bootstrap)},
        {"knn.k", std::to_string(cfg.knn.k)},
        {"split.train_fraction", format_number(cfg.train_fraction)},
        {"split.stratified", b(cfg.stratified)},
        {"no_split", b(cfg.no_split)},
        {"paper_faithful_vocab", b(cfg.paper_faithful_vocab)},
        {"crop_size", std::to_string(cfg.crop_size)},
        {"seed", std::to_string(cfg.seed)},
        {"threads", std::to_string(cfg.threads)},
    };
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::string config_hash(const PipelineConfig& cfg) {
    PipelineConfig c = cfg;
    c.threads = 0;
    // The cascade is identified by file name so hashes survive relocation.
    c.cascade_path = cfg.cascade_path.filename();
    const std::string text = to_config_text(c);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void validate_config(const PipelineConfig& cfg) {
    std::error_code ec;
    if (!fs::is_regular_file(cfg.cascade_path, ec)) {
        throw IoError("cascade file not found: " + cfg.cascade_path.string());
    }
    if (!(cfg.detect.scale_factor > 1.0)) throw ParameterError("detect.scale_factor must be > 1");
    if (cfg.detect.min_neighbors < 1) throw ParameterError("detect.min_neighbors must be >= 1");
    if (!(cfg.bilateral.sigma_spatial > 0.0) || !(cfg.bilateral.sigma_range > 0.0)) {
        throw ParameterError("bilateral sigmas must be > 0");
    }
    if (cfg.bilateral.radius < 0) throw ParameterError("bilateral.radius must be >= 0");
    if (cfg.surf.octaves < 1 || cfg.surf.levels < 3) {
        throw ParameterError("surf needs octaves >= 1 and levels >= 3");
    }
    if (!(cfg.surf.threshold >= 0.0)) throw ParameterError("surf.threshold must be >= 0");
    for (double t : cfg.tilts) {
        if (!(t >= 1.0)) throw ParameterError("asurf.tilts must all be >= 1");
    }
    if (std::find(cfg.tilts.begin(), cfg.tilts.end(), 1.0) == cfg.tilts.end()) {
        throw ParameterError("asurf.tilts must include 1");
    }
    if (cfg.kmeans_max_iters == 0) throw ParameterError("kmeans.max_iters must be >= 1");
    if (cfg.forest.n_trees == 0) throw ParameterError("forest.trees must be >= 1");
    if (cfg.knn.k == 0) throw ParameterError("knn.k must be >= 1");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw ParameterError("split.train_fraction must be in (0, 1)");
    }
    if (cfg.crop_size < 16) throw ParameterError("crop_size must be >= 16");
}

GrayImage preprocess_face(const GrayImage& img, const CascadeModel& cascade,
                          const PipelineConfig& cfg, bool* face_found) {
    DetectParams dp = cfg.detect;
    dp.threads = 1;
    const auto face = largest_face(img, cascade, dp);
    if (face_found) *face_found = face.has_value();
    const GrayImage region = face ? crop(img, *face) : img;
    const GrayImage sized = resize(region, cfg.crop_size, cfg.crop_size);
    return bilateral_filter(sized, cfg.bilateral, 1);
}

std::vector<Descriptor> extract_image_descriptor_set(const GrayImage& img, const CascadeModel& cascade,
                                                     const PipelineConfig& cfg) {
    bool found = false;
    const GrayImage face = preprocess_face(img, cascade, cfg, &found);
    if (!found) log_debug("no face detected; using the full image");
    const auto grid = cfg.view_grid();
    const auto features = asurf_extract(face, grid, cfg.surf, 1);
    std::vector<Descriptor> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.descriptor);
    return out;
}

std::vector<Descriptor> extract_image_descriptor_set(const fs::path& path, const CascadeModel& cascade,
                                                     const PipelineConfig& cfg) {
    bool found = false;
    const GrayImage face = preprocess_face(load_image(path), cascade, cfg, &found);
    if (!found) log_info("no face detected in " + path.string() + "; using the full image");
    const auto grid = cfg.view_grid();
    const auto features = asurf_extract(face, grid, cfg.surf, 1);
    std::vector<Descriptor> out;
    out.reserve(features.size());
    for (const auto& f : features) out.push_back(f.descriptor);
    return out;
}

DatasetDescriptors extract_dataset_descriptors(const LabeledDataset& dataset, const CascadeModel& cascade,
                                               const PipelineConfig& cfg) {
    DatasetDescriptors out;
    out.sets.resize(dataset.items.size());
    std::vector<std::string> errors(dataset.items.size());
    parallel_for(dataset.items.size(), cfg.threads, [&](std::size_t i) {
        try {
            out.sets[i] = extract_image_descriptor_set(dataset.items[i].path, cascade, cfg);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (out.sets[i]) continue;
        out.skipped.push_back(i);
        log_warn("skipping " + dataset.items[i].path.string() + ": " + errors[i]);
    }
    if (out.skipped.size() * 10 > dataset.items.size()) {
        std::string msg = std::to_string(out.skipped.size()) + " of " +
                          std::to_string(dataset.items.size()) + " images failed (limit 10%):";
        for (std::size_t i : out.skipped) msg += "\n  " + dataset.items[i].path.string() + ": " + errors[i];
        throw Error(msg);
    }
    return out;
}

double get_accuracy(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.empty()) throw ParameterError("get_accuracy: empty label sequence");
    if (truth.size() != predicted.size()) {
        throw ParameterError("get_accuracy: " + std::to_string(truth.size()) + " true labels vs " +
                             std::to_string(predicted.size()) + " predictions");
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::vector<double> encode_descriptors(const Codebook& codebook, std::span<const Descriptor> descriptors,
                                       Aggregator aggregator) {
    return aggregator == Aggregator::bow ? bow_encode(codebook, descriptors)
                                         : vlad_encode(codebook, descriptors);
}

RecognitionRun run_on_descriptors(const LabeledDataset& dataset, const DatasetDescriptors& descriptors,
                                  const PipelineConfig& cfg) {
    if (descriptors.sets.size() != dataset.items.size()) {
        throw ParameterError("run: descriptor sets do not match the dataset");
    }
    RecognitionRun run;
    std::vector<int> labels;
    for (std::size_t i = 0; i < dataset.items.size(); ++i) {
        if (!descriptors.sets[i]) continue;
        run.usable.push_back(i);
        labels.push_back(dataset.items[i].label);
    }
    if (run.usable.empty()) throw ParameterError("run: no usable images");

    if (cfg.no_split) {
        run.split.train.resize(run.usable.size());
        std::iota(run.split.train.begin(), run.split.train.end(), std::size_t{0});
        run.split.test = run.split.train;
    } else {
        const SplitConfig sc{cfg.train_fraction, cfg.stratified, derive_seed(cfg.seed, kSplitStream)};
        run.split = train_test_split(labels, sc, dataset.class_names);
    }

    std::vector<std::size_t> vocab_items = run.split.train;
    if (cfg.paper_faithful_vocab) {
        vocab_items.resize(run.usable.size());
        std::iota(vocab_items.begin(), vocab_items.end(), std::size_t{0});
    }
    std::vector<Descriptor> pool;
    for (std::size_t j : vocab_items) {
        const auto& set = *descriptors.sets[run.usable[j]];
        pool.insert(pool.end(), set.begin(), set.end());
    }
    KMeansParams kp;
    kp.k = cfg.effective_k();
    kp.max_iters = cfg.kmeans_max_iters;
    kp.seed = derive_seed(cfg.seed, kVocabStream);
    kp.threads = cfg.threads;
    log_info("training vocabulary: k = " + std::to_string(kp.k) + " on " + std::to_string(pool.size()) +
             " descriptors");
    run.codebook = kmeans_train(pool, kp);

    std::vector<std::vector<double>> encoded(run.usable.size());
    parallel_for(run.usable.size(), cfg.threads, [&](std::size_t j) {
        encoded[j] = encode_descriptors(run.codebook, *descriptors.sets[run.usable[j]], cfg.aggregator);
    });

    auto gather = [&](const std::vector<std::size_t>& idx) {
        FeatureMatrix m(idx.size(), encoded.front().size());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::copy(encoded[idx[r]].begin(), encoded[idx[r]].end(), m.row(r).begin());
        }
        return m;
    };
    std::vector<int> train_labels, test_labels;
    for (std::size_t j : run.split.train) train_labels.push_back(labels[j]);
    for (std::size_t j : run.split.test) test_labels.push_back(labels[j]);

    const auto train_start = std::chrono::steady_clock::now();
    const FeatureMatrix train_x = gather(run.split.train);
    if (cfg.classifier == ClassifierKind::forest) {
        ForestParams fp = cfg.forest;
        fp.seed = derive_seed(cfg.seed, kForestStream);
        fp.threads = cfg.threads;
        run.forest = train_forest(train_x, train_labels, dataset.n_classes(), fp);
    }
    run.row.train_seconds = seconds_since(train_start);

    const FeatureMatrix test_x = gather(run.split.test);
    const auto test_start = std::chrono::steady_clock::now();
    if (run.forest) {
        run.predicted = predict_batch(*run.forest, test_x, cfg.threads);
    } else {
        KnnParams kn = cfg.knn;
        kn.k = std::min(kn.k, train_x.rows());
        run.predicted.resize(test_x.rows());
        parallel_for(test_x.rows(), cfg.threads, [&](std::size_t r) {
            run.predicted[r] = knn_classify(train_x, train_labels, kn, test_x.row(r));
        });
    }
    run.row.test_seconds = seconds_since(test_start);

    run.truth = test_labels;
    run.row.dataset = dataset.name;
    run.row.aggregator = std::string(aggregator_name(cfg.aggregator));
    run.row.classifier = std::string(classifier_name(cfg.classifier));
    run.row.threads = resolve_threads(cfg.threads);
    run.row.accuracy = get_accuracy(run.truth, run.predicted);
    run.row.config_hash = config_hash(cfg);
    return run;
}

RecognitionRun run_face_recognition(const LabeledDataset& dataset, const PipelineConfig& cfg) {
    validate_config(cfg);
    const CascadeModel cascade = load_cascade_file(cfg.cascade_path);
    const auto descriptors = extract_dataset_descriptors(dataset, cascade, cfg);
    return run_on_descriptors(dataset, descriptors, cfg);
}

}  // namespace facerec
