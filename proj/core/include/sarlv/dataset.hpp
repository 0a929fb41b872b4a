#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sarlv/classes.hpp"
#include "sarlv/image.hpp"
#include "sarlv/synth.hpp"

namespace sarlv {

struct Sample {
    GrayImage image;
    std::string class_name;
    std::string caption;
    std::vector<VqaPair> qa_pairs;
    int depression_deg = 17;
    std::string collection;
    std::string split;  // "train" (17 degrees) or "test" (15 degrees)
    std::string path;   // source image, relative to its manifest
};

struct ManifestEntry {
    std::string path;
    std::string class_name;
    int depression_deg = 17;
    std::string collection;
    std::string split;
};

void save_manifest(const std::filesystem::path& file, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& file);

struct DatasetPlan {
    std::int64_t train_per_class = 50;
    std::int64_t test_per_class = 25;
    std::uint64_t seed = 1234;
    SynthOptions synth;
};

/// Renders PGM images under out_dir/images/<class>/, then writes
/// manifest.json and classes.json. 17-degree scenes go to the train split,
/// 15-degree scenes to test; aspect angles draw uniformly from [0, 360).
std::vector<ManifestEntry> generate_dataset(const std::filesystem::path& out_dir,
                                            const DatasetPlan& plan);

struct SplitSummaryRow {
    std::string class_name;
    std::string serial;
    std::string collection;
    std::int64_t train_count = 0;
    std::int64_t test_count = 0;
};

struct SplitDatasets {
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::vector<SplitSummaryRow> summary;
};

/// Applies the per-class undersampling cap (uniform without replacement,
/// seeded) to each split, loads the kept images, and tabulates per-class
/// counts. Depression angle must agree with the split on every entry, and
/// every class needs at least one sample per split.
SplitDatasets build_splits(const std::filesystem::path& manifest_file,
                           std::optional<std::int64_t> per_class_cap, std::uint64_t seed);
SplitDatasets build_splits(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& image_root,
                           std::optional<std::int64_t> per_class_cap, std::uint64_t seed);

/// Table of per-class train/test counts plus a totals line, as CSV.
void write_split_summary_csv(const std::filesystem::path& file,
                             const std::vector<SplitSummaryRow>& summary);

}  // namespace sarlv
