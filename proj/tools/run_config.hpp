#pragma once

#include "tactile/control.hpp"
#include "tactile/plant.hpp"
#include "tactile/svae.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace tactile::cli {

struct DataSection {
    size_t n = 3000;
    uint64_t seed = 1;
};

struct ModelSection {
    SVAEArchitecture arch;
    LossConfig loss;
    TrainHyper hyper;
};

struct ControlSection {
    GraspPlant plant;
    ControllerConfig controller;
    std::vector<Setpoint> setpoints{{0.4, 1.0}, {1.6, 1.0}, {3.0, 1.0}};
    double disturb_force = 0.4;
    double disturb_duration_s = 5.0;
    double mm_per_degree = 0.02;
    ContactGeometry contact;
    size_t prop1_plants = 200;
    uint64_t prop1_seed = 1;
    double prop1_slope_max = 2.0;
};

struct GraspSection {
    std::vector<GraspObject> objects = default_objects();
    int trials = 10;
    double sigma_mm = 5.0;
    uint64_t seed = 1;
};

struct SweepSection {
    std::vector<double> alphas{0.001, 0.01, 0.1, 1, 10, 100};
    std::vector<int> latent_dims{6, 16, 32};
    double latent_alpha = 100;
    int epochs = 20;
    bool baselines = true;
};

struct LatentSection {
    std::vector<int> traverse_dims{0, 1, 2, 3};
    double lo = -5;
    double hi = 5;
    int steps = 11;
};

/// Everything a subcommand may read. Defaults are the desk pipeline.
struct RunConfig {
    FingerPlantConfig plant;
    DomainTag water = DomainTag::water();
    DataSection data;
    ModelSection model;
    ControlSection control;
    GraspSection grasp;
    SweepSection sweep;
    LatentSection latent;
    int threads = 1;

    /// Throws ConfigError (or DomainError) naming the first bad field.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Starts from defaults; every key present overrides. Unknown keys and type
/// mismatches raise ConfigError with the JSON path.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& p);

} // namespace tactile::cli
