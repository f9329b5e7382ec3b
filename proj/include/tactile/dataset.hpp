#pragma once

#include "tactile/image.hpp"
#include "tactile/plant.hpp"
#include "tactile/svae.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace tactile {

enum class Split { Train, Validation, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct PoseRanges {
    double x_min = 0.0, x_max = 5.0;
    double z_min = -5.0, z_max = 5.0;
    double theta_min = -kPi, theta_max = kPi;
};

struct SampleRecord {
    size_t id = 0;
    std::string file;
    Split split = Split::Train;
    ContactPose pose;
    Wrench wrench;
    std::string domain;
};

struct DatasetManifest {
    static constexpr int kSchemaVersion = 1;

    int schema_version = kSchemaVersion;
    uint64_t seed = 0;
    size_t count = 0;
    std::array<int, 3> split_ratio{7, 1, 2};
    PoseRanges ranges;
    DomainTag domain;
    std::string plant_digest;
    std::vector<SampleRecord> samples;
};

/// Validation and test sizes are rounded shares of n; train takes the rest.
std::array<size_t, 3> split_sizes(size_t n);

ContactPose sample_pose(std::mt19937_64& rng);

/// Image stored for one pose: rendered with background clutter, then
/// thresholded, exactly as the estimator sees it at run time.
TactileImage observe(const ContactPose& pose, const FingerPlantConfig& cfg, const DomainTag& domain, uint64_t seed);

/// Seed of the observation stored for sample `id` of a dataset.
uint64_t sample_render_seed(uint64_t dataset_seed, size_t id);

/// Writes manifest.json and images/NNNNNN.pgm under out_dir.
DatasetManifest generate_dataset(size_t n, const FingerPlantConfig& cfg, const DomainTag& domain, uint64_t seed,
                                 const std::filesystem::path& out_dir, int threads = 1);

struct Dataset {
    DatasetManifest manifest;
    std::vector<TactileImage> images;

    [[nodiscard]] std::vector<size_t> indices(Split s) const;
    [[nodiscard]] LabeledSet split(Split s) const;
    [[nodiscard]] size_t size() const { return images.size(); }
};

/// Throws IntegrityError when the manifest was produced by a different plant.
Dataset load_dataset(const std::filesystem::path& dir, const FingerPlantConfig& cfg);

nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DomainTag& d);
DomainTag domain_from_json(const nlohmann::json& j);

/// Shortest decimal text with 9 significant digits.
std::string format_sig9(double v);

} // namespace tactile
