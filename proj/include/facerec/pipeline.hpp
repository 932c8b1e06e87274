#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "facerec/aggregate.hpp"
#include "facerec/classify.hpp"
#include "facerec/detect.hpp"
#include "facerec/features.hpp"
#include "facerec/filter.hpp"
#include "facerec/imaging.hpp"

namespace facerec {

enum class DatasetLayout { orl, faces95, faces96, generic };

DatasetLayout parse_layout(std::string_view name);
std::string_view layout_name(DatasetLayout layout);

struct DatasetItem {
    std::filesystem::path path;
    int label = 0;
    std::string class_name;
};

struct LabeledDataset {
    std::string name;  ///< root directory name
    DatasetLayout layout = DatasetLayout::generic;
    std::vector<std::string> class_names;  ///< indexed by label
    std::vector<DatasetItem> items;

    std::size_t n_classes() const { return class_names.size(); }
    std::vector<int> labels() const;
};

/// One subdirectory per identity, classes numbered in sorted directory-name
/// order, images sorted by file name. ORL expects s<N> directories of PGMs,
/// FACES95/96 directories of JPEGs, generic accepts either. Throws IoError
/// listing every offending file or directory.
LabeledDataset load_dataset(const std::filesystem::path& root, DatasetLayout layout);

struct SplitConfig {
    double train_fraction = 0.7;
    bool stratified = true;
    std::uint64_t seed = 0;
};

struct Split {
    std::vector<std::size_t> train;  ///< ascending
    std::vector<std::size_t> test;   ///< ascending
};

/// Each class (or the whole set) contributes round(fraction * n) training
/// items, clamped so both sides are non-empty. Throws ParameterError naming
/// the class when a stratified class has fewer than 2 items.
Split train_test_split(std::span<const int> labels, const SplitConfig& cfg,
                       std::span<const std::string> class_names = {});

enum class Aggregator { bow, vlad };
enum class ClassifierKind { forest, knn };

std::string_view aggregator_name(Aggregator a);
std::string_view classifier_name(ClassifierKind c);

/// Cascade bundled with the library.
std::filesystem::path default_cascade_path();

struct PipelineConfig {
    std::filesystem::path cascade_path = default_cascade_path();
    DetectParams detect;
    BilateralParams bilateral;
    SurfParams surf;
    bool affine = true;  ///< ASURF view simulation; false = plain SURF
    std::vector<double> tilts = {1.0, 1.4142135623730951, 2.0};
    Aggregator aggregator = Aggregator::vlad;
    std::size_t k = 0;  ///< 0 = 128 for bow, 64 for vlad
    std::size_t kmeans_max_iters = 100;
    ClassifierKind classifier = ClassifierKind::forest;
    ForestParams forest;
    KnnParams knn;
    double train_fraction = 0.7;
    bool stratified = true;
    bool no_split = false;              ///< train and test on every image
    bool paper_faithful_vocab = false;  ///< vocabulary from all images, test included
    int crop_size = 128;
    std::uint64_t seed = 0;
    unsigned threads = 0;  ///< 0 = all cores

    std::size_t effective_k() const;
    std::vector<ViewParams> view_grid() const;
};

/// Sets one key (the same names to_config_text writes). Throws ParameterError
/// on an unknown key or unparsable value.
void apply_setting(PipelineConfig& cfg, std::string_view key, std::string_view value);

/// Applies "key = value" lines; '#' starts a comment.
void apply_config_text(PipelineConfig& cfg, std::string_view text);
PipelineConfig load_config_file(const std::filesystem::path& path);

/// Every key in a fixed order, one per line.
std::string to_config_text(const PipelineConfig& cfg);

/// FNV-1a 64 of to_config_text without the threads line, as 16 hex digits.
std::string config_hash(const PipelineConfig& cfg);

/// Throws ParameterError or IoError on an invalid configuration.
void validate_config(const PipelineConfig& cfg);

/// Largest detected face (or the whole frame when none is found), cropped,
/// resized to crop_size square and bilateral filtered.
GrayImage preprocess_face(const GrayImage& img, const CascadeModel& cascade,
                          const PipelineConfig& cfg, bool* face_found = nullptr);

std::vector<Descriptor> extract_image_descriptor_set(const GrayImage& img,
                                                     const CascadeModel& cascade,
                                                     const PipelineConfig& cfg);
std::vector<Descriptor> extract_image_descriptor_set(const std::filesystem::path& path,
                                                     const CascadeModel& cascade,
                                                     const PipelineConfig& cfg);

struct DatasetDescriptors {
    /// Per item; empty optional for images that could not be read.
    std::vector<std::optional<std::vector<Descriptor>>> sets;
    std::vector<std::size_t> skipped;
};

/// Extracts every image in parallel. Throws Error when more than 10% of the
/// images fail.
DatasetDescriptors extract_dataset_descriptors(const LabeledDataset& dataset,
                                               const CascadeModel& cascade,
                                               const PipelineConfig& cfg);

double get_accuracy(std::span<const int> truth, std::span<const int> predicted);

struct EvaluationRow {
    std::string dataset;
    std::string aggregator;
    std::string classifier;
    unsigned threads = 1;
    double accuracy = 0.0;
    double train_seconds = 0.0;
    double test_seconds = 0.0;
    std::string config_hash;

    friend bool operator==(const EvaluationRow&, const EvaluationRow&) = default;
};

struct RecognitionRun {
    EvaluationRow row;
    Split split;  ///< indices into the usable (non-skipped) items
    std::vector<std::size_t> usable;  ///< dataset item index of each usable item
    Codebook codebook;
    std::optional<Forest> forest;
    std::vector<int> truth;
    std::vector<int> predicted;
};

/// Split, vocabulary, encoding, timed training and timed prediction on
/// already extracted descriptors. Seeds for the split, k-means and the forest
/// all derive from cfg.seed.
RecognitionRun run_on_descriptors(const LabeledDataset& dataset, const DatasetDescriptors& descriptors,
                                  const PipelineConfig& cfg);

/// Extraction followed by run_on_descriptors.
RecognitionRun run_face_recognition(const LabeledDataset& dataset, const PipelineConfig& cfg);

/// Encodes one descriptor set with the configured aggregator.
std::vector<double> encode_descriptors(const Codebook& codebook, std::span<const Descriptor> descriptors,
                                       Aggregator aggregator);

enum class ReportFormat { csv, pretty };

/// CSV header: dataset,aggregator,classifier,threads,accuracy_pct,train_s,test_s,config_hash.
/// Throws ParameterError on an empty row list.
std::string emit_report(std::span<const EvaluationRow> rows, ReportFormat format);

/// Reads emit_report CSV back; accuracy is accuracy_pct / 100.
std::vector<EvaluationRow> parse_report_csv(std::string_view csv);

}  // namespace facerec
