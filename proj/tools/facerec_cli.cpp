#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "facerec/aggregate.hpp"
#include "facerec/classify.hpp"
#include "facerec/detect.hpp"
#include "facerec/error.hpp"
#include "facerec/features.hpp"
#include "facerec/filter.hpp"
#include "facerec/image_io.hpp"
#include "facerec/log.hpp"
#include "facerec/parallel.hpp"
#include "facerec/pipeline.hpp"

namespace fs = std::filesystem;
using namespace facerec;

namespace {

struct Overrides {
    std::string config_file;
    std::vector<std::string> settings;
    std::map<std::string, std::string> flags;  // config key -> value
    bool upright = false;
    bool paper_faithful_vocab = false;
    bool no_split = false;
    bool plain_surf = false;
    std::string log_level = "info";
};

PipelineConfig build_config(const Overrides& o) {
    PipelineConfig cfg = o.config_file.empty() ? PipelineConfig{} : load_config_file(o.config_file);
    for (const auto& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ParameterError("--set expects key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [key, value] : o.flags) {
        if (!value.empty()) apply_setting(cfg, key, value);
    }
    if (o.upright) cfg.surf.upright = true;
    if (o.paper_faithful_vocab) cfg.paper_faithful_vocab = true;
    if (o.no_split) cfg.no_split = true;
    if (o.plain_surf) cfg.affine = false;
    return cfg;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::vector<double> encode_with(const Codebook& cb, const std::vector<Descriptor>& d, const PipelineConfig& cfg) {
    return encode_descriptors(cb, d, cfg.aggregator);
}

void print_report(const std::vector<EvaluationRow>& rows, const std::string& format, const std::string& out_path) {
    const auto fmt = format == "pretty" ? ReportFormat::pretty : ReportFormat::csv;
    const std::string text = emit_report(rows, fmt);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        auto out = open_out(out_path);
        out << text;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Face recognition pipeline: detection, filtering, ASURF features, BoW/VLAD, forests"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides o;
    app.add_option("--config", o.config_file, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", o.settings, "override one configuration key (key=value)");
    app.add_option("--log-level", o.log_level, "debug, info, warn, error or off");
    const std::vector<std::pair<std::string, std::string>> flag_keys = {
        {"--cascade", "cascade"},
        {"--scale-factor", "detect.scale_factor"},
        {"--min-neighbors", "detect.min_neighbors"},
        {"--bf-sigma-spatial", "bilateral.sigma_spatial"},
        {"--bf-sigma-range", "bilateral.sigma_range"},
        {"--octaves", "surf.octaves"},
        {"--levels", "surf.levels"},
        {"--threshold", "surf.threshold"},
        {"--max-keypoints", "surf.max_keypoints"},
        {"--tilts", "asurf.tilts"},
        {"--aggregator", "aggregator"},
        {"--k", "k"},
        {"--max-iters", "kmeans.max_iters"},
        {"--classifier", "classifier"},
        {"--trees", "forest.trees"},
        {"--max-depth", "forest.max_depth"},
        {"--mtry", "forest.mtry"},
        {"--knn-k", "knn.k"},
        {"--train-fraction", "split.train_fraction"},
        {"--crop-size", "crop_size"},
        {"--seed", "seed"},
        {"--threads", "threads"},
    };
    for (const auto& [flag, key] : flag_keys) {
        app.add_option(flag, o.flags[key], "sets " + key);
    }
    app.add_flag("--upright", o.upright, "skip orientation assignment");
    app.add_flag("--no-affine", o.plain_surf, "plain SURF instead of ASURF");
    app.add_flag("--paper-faithful-vocab", o.paper_faithful_vocab,
                 "train the vocabulary on every image, test split included");
    app.add_flag("--no-split", o.no_split, "train and test on every image");

    std::string image, output, before, codebook_path, model_path, dataset_root, layout = "generic-dirs";
    std::string format = "csv";
    std::vector<std::string> inputs;
    bool raw = false;

    auto* detect = app.add_subcommand("detect", "print face rectangles as x,y,w,h");
    detect->add_option("image", image)->required()->check(CLI::ExistingFile);

    auto* filter = app.add_subcommand("filter", "bilateral filter an image to PGM");
    filter->add_option("image", image)->required()->check(CLI::ExistingFile);
    filter->add_option("-o,--output", output, "filtered PGM")->required();
    filter->add_option("--before", before, "also write the unfiltered input as PGM");

    auto* features = app.add_subcommand("features", "write the descriptor dump of one image");
    features->add_option("image", image)->required()->check(CLI::ExistingFile);
    features->add_option("-o,--output", output, "descriptor dump")->required();
    features->add_flag("--raw", raw, "skip detection, cropping and filtering");

    auto* vocab = app.add_subcommand("vocab", "k-means codebook from descriptor dumps");
    vocab->add_option("dumps", inputs)->required()->check(CLI::ExistingFile);
    vocab->add_option("-o,--output", output, "codebook file")->required();

    auto* encode = app.add_subcommand("encode", "encode descriptor dumps, one CSV line each");
    encode->add_option("dumps", inputs)->required()->check(CLI::ExistingFile);
    encode->add_option("--codebook", codebook_path)->required()->check(CLI::ExistingFile);

    auto* train = app.add_subcommand("train", "train codebook and classifier on a whole dataset");
    train->add_option("--dataset", dataset_root)->required()->check(CLI::ExistingDirectory);
    train->add_option("--layout", layout, "orl, faces95, faces96 or generic-dirs");
    train->add_option("--codebook-out", codebook_path)->required();
    train->add_option("-o,--output", model_path, "forest file")->required();

    auto* predict_cmd = app.add_subcommand("predict", "classify images with a trained model");
    predict_cmd->add_option("images", inputs)->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--codebook", codebook_path)->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);

    auto* evaluate = app.add_subcommand("evaluate", "split, train and score one dataset");
    evaluate->add_option("--dataset", dataset_root)->required()->check(CLI::ExistingDirectory);
    evaluate->add_option("--layout", layout, "orl, faces95, faces96 or generic-dirs");
    evaluate->add_option("--format", format, "csv or pretty")->check(CLI::IsMember({"csv", "pretty"}));
    evaluate->add_option("--out", output, "write the report here instead of stdout");

    auto* report = app.add_subcommand("report", "merge CSV reports");
    report->add_option("reports", inputs)->required()->check(CLI::ExistingFile);
    report->add_option("--format", format, "csv or pretty")->check(CLI::IsMember({"csv", "pretty"}));

    std::string orl, faces95, faces96;
    auto* reproduce = app.add_subcommand("reproduce-tables",
                                         "accuracy and timing matrix for every supplied dataset");
    reproduce->add_option("--orl", orl)->check(CLI::ExistingDirectory);
    reproduce->add_option("--faces95", faces95)->check(CLI::ExistingDirectory);
    reproduce->add_option("--faces96", faces96)->check(CLI::ExistingDirectory);
    reproduce->add_option("--format", format, "csv or pretty")->check(CLI::IsMember({"csv", "pretty"}));
    reproduce->add_option("--out", output, "write the report here instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        const std::map<std::string, LogLevel> levels = {{"debug", LogLevel::debug}, {"info", LogLevel::info},
                                                        {"warn", LogLevel::warn},   {"error", LogLevel::error},
                                                        {"off", LogLevel::off}};
        if (!levels.contains(o.log_level)) throw ParameterError("unknown log level " + o.log_level);
        set_log_level(levels.at(o.log_level));
        const PipelineConfig cfg = build_config(o);

        if (*detect) {
            const auto cascade = load_cascade_file(cfg.cascade_path);
            DetectParams dp = cfg.detect;
            dp.threads = cfg.threads;
            for (const auto& r : detect_faces(load_image(image), cascade, dp)) {
                std::cout << r.x << "," << r.y << "," << r.w << "," << r.h << "\n";
            }
        } else if (*filter) {
            const GrayImage img = load_image(image);
            if (!before.empty()) save_pgm(img, before);
            save_pgm(bilateral_filter(img, cfg.bilateral, cfg.threads), output);
        } else if (*features) {
            std::vector<Descriptor> d;
            if (raw) {
                for (const auto& f : asurf_extract(load_image(image), cfg.view_grid(), cfg.surf, cfg.threads)) {
                    d.push_back(f.descriptor);
                }
            } else {
                d = extract_image_descriptor_set(fs::path(image), load_cascade_file(cfg.cascade_path), cfg);
            }
            auto out = open_out(output);
            write_descriptor_dump(out, d);
            std::cout << d.size() << " descriptors\n";
        } else if (*vocab) {
            std::vector<Descriptor> pool;
            for (const auto& p : inputs) {
                auto in = open_in(p);
                const auto d = read_descriptor_dump(in);
                pool.insert(pool.end(), d.begin(), d.end());
            }
            KMeansParams kp{cfg.effective_k(), cfg.kmeans_max_iters, cfg.seed, cfg.threads};
            const Codebook cb = kmeans_train(pool, kp);
            auto out = open_out(output);
            write_codebook(out, cb);
            std::cout << "k = " << cb.k() << ", " << cb.iterations << " iterations, inertia " << cb.inertia << "\n";
        } else if (*encode) {
            auto cin = open_in(codebook_path);
            const Codebook cb = read_codebook(cin);
            for (const auto& p : inputs) {
                auto in = open_in(p);
                const auto v = encode_with(cb, read_descriptor_dump(in), cfg);
                for (std::size_t i = 0; i < v.size(); ++i) std::cout << (i ? "," : "") << v[i];
                std::cout << "\n";
            }
        } else if (*train) {
            validate_config(cfg);
            const auto ds = load_dataset(dataset_root, parse_layout(layout));
            const auto cascade = load_cascade_file(cfg.cascade_path);
            PipelineConfig all = cfg;
            all.no_split = true;
            const auto run = run_on_descriptors(ds, extract_dataset_descriptors(ds, cascade, all), all);
            {
                auto out = open_out(codebook_path);
                write_codebook(out, run.codebook);
            }
            if (!run.forest) throw ParameterError("train: only the forest classifier produces a model file");
            {
                auto out = open_out(model_path);
                write_forest(out, *run.forest);
            }
            auto names = open_out(model_path + ".classes");
            for (const auto& n : ds.class_names) names << n << "\n";
            std::cout << "trained on " << run.usable.size() << " images, " << ds.n_classes() << " classes\n";
        } else if (*predict_cmd) {
            auto cin = open_in(codebook_path);
            const Codebook cb = read_codebook(cin);
            auto min = open_in(model_path);
            const Forest forest = read_forest(min);
            std::vector<std::string> names;
            if (std::ifstream nf(model_path + ".classes"); nf) {
                for (std::string line; std::getline(nf, line);) names.push_back(line);
            }
            const auto cascade = load_cascade_file(cfg.cascade_path);
            for (const auto& p : inputs) {
                const auto v = encode_with(cb, extract_image_descriptor_set(fs::path(p), cascade, cfg), cfg);
                const int label = predict(forest, v);
                const auto idx = static_cast<std::size_t>(label);
                std::cout << p << "," << (idx < names.size() ? names[idx] : std::to_string(label)) << "\n";
            }
        } else if (*evaluate) {
            const auto ds = load_dataset(dataset_root, parse_layout(layout));
            const auto run = run_face_recognition(ds, cfg);
            print_report({run.row}, format, output);
        } else if (*report) {
            std::vector<EvaluationRow> rows;
            for (const auto& p : inputs) {
                auto in = open_in(p);
                std::stringstream ss;
                ss << in.rdbuf();
                const auto r = parse_report_csv(ss.str());
                rows.insert(rows.end(), r.begin(), r.end());
            }
            print_report(rows, format, "");
        } else if (*reproduce) {
            validate_config(cfg);
            const std::vector<std::pair<std::string, DatasetLayout>> sets = {
                {orl, DatasetLayout::orl}, {faces95, DatasetLayout::faces95}, {faces96, DatasetLayout::faces96}};
            const auto cascade = load_cascade_file(cfg.cascade_path);
            std::vector<EvaluationRow> rows;
            for (const auto& [root, lay] : sets) {
                if (root.empty()) continue;
                const auto ds = load_dataset(root, lay);
                log_info("extracting " + std::to_string(ds.items.size()) + " images from " + root);
                const auto descriptors = extract_dataset_descriptors(ds, cascade, cfg);
                for (const auto agg : {Aggregator::bow, Aggregator::vlad}) {
                    // Single-threaded and all-core forests give the timing comparison.
                    for (const unsigned threads : {1u, resolve_threads(cfg.threads)}) {
                        PipelineConfig c = cfg;
                        c.aggregator = agg;
                        c.classifier = ClassifierKind::forest;
                        c.threads = threads;
                        rows.push_back(run_on_descriptors(ds, descriptors, c).row);
                        if (threads == 1 && resolve_threads(cfg.threads) == 1) break;
                    }
                    PipelineConfig c = cfg;
                    c.aggregator = agg;
                    c.classifier = ClassifierKind::knn;
                    rows.push_back(run_on_descriptors(ds, descriptors, c).row);
                }
            }
            if (rows.empty()) throw ParameterError("reproduce-tables: supply at least one of --orl, --faces95, --faces96");
            print_report(rows, format, output);
        }
    } catch (const std::exception& e) {
        log_error(e.what());
        return 1;
    }
    return 0;
}
