#pragma once

#include "tactile/svae.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace tactile {

struct MetricsReport {
    std::array<double, kWrenchDim> r2{};
    std::array<double, kWrenchDim> mse{};
    double mean_r2 = 0;
    double recon_mse = 0;
    size_t count = 0;
};

/// Axes whose truth is constant are reported with R^2 = NaN and left out of
/// the mean.
MetricsReport metrics_report(const std::vector<Wrench>& pred, const std::vector<Wrench>& truth,
                             const std::vector<double>& recon_mse);
MetricsReport evaluate_set(const SvaeModel& model, const LabeledSet& set, int threads = 1);

struct Bin {
    double lower = 0;
    double upper = 0;
};

struct BinStats {
    double lower = 0;
    double upper = 0;
    double error_mean = 0;
    double error_std = 0;
    size_t count = 0;
};

/// [0,2), [2,4), ... [8,10) N
std::vector<Bin> default_force_bins();
/// [0,120), ... [480,600) N*mm
std::vector<Bin> default_torque_bins();

/// Samples are binned on |truth|; statistics are of pred - truth. Bins must be
/// ascending and contiguous, otherwise ConfigError.
std::vector<BinStats> error_histogram(std::span<const double> pred, std::span<const double> truth,
                                      const std::vector<Bin>& bins);

struct CorrelationMatrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> values;   ///< row-major; NaN where flagged
    std::vector<uint8_t> flagged; ///< zero-variance component involved

    [[nodiscard]] double at(size_t i, size_t j) const { return values[i * cols + j]; }
    [[nodiscard]] bool is_flagged(size_t i, size_t j) const { return flagged[i * cols + j] != 0; }
    /// Mean |entry| over unflagged off-diagonal entries of a square matrix.
    [[nodiscard]] double mean_abs_off_diagonal() const;
};

/// columns[k] is the k-th variable observed over the samples.
CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& columns);
CorrelationMatrix cross_correlation(const std::vector<std::vector<double>>& a,
                                    const std::vector<std::vector<double>>& b);

std::vector<std::vector<double>> latent_columns(const std::vector<LatentCode>& codes);
std::vector<std::vector<double>> wrench_columns(const std::vector<Wrench>& w);

/// d x d correlations of encoder means over the images.
CorrelationMatrix latent_correlation(const SvaeModel& model, const std::vector<TactileImage>& images,
                                     int threads = 1);
/// d x 6 correlations between encoder means and the wrench labels.
CorrelationMatrix latent_wrench_correlation(const SvaeModel& model, const LabeledSet& set, int threads = 1);

/// One row per requested dim; each row decodes steps codes with that
/// coordinate swept over [lo, hi] and every other coordinate at 0.
std::vector<std::vector<TactileImage>> latent_traversal(const SvaeModel& model, const std::vector<int>& dims,
                                                        double lo = -5.0, double hi = 5.0, int steps = 11);
std::vector<double> traversal_values(double lo, double hi, int steps);

struct DomainShiftReport {
    std::vector<double> cosine;               ///< per pair
    double mean_cosine = 0;
    std::vector<double> mean_abs_latent_diff; ///< per latent coordinate
    MetricsReport land;
    MetricsReport water;
};

/// Pairs share a pose and a wrench; images differ only in domain. Throws
/// DataError when the lists do not line up.
DomainShiftReport domain_shift_report(const SvaeModel& model, const std::vector<TactileImage>& land,
                                      const std::vector<TactileImage>& water, const std::vector<Wrench>& wrenches,
                                      int threads = 1);

double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct SweepSets {
    const LabeledSet* train = nullptr;
    const LabeledSet* validation = nullptr;
    const LabeledSet* test = nullptr;
};

struct SweepRow {
    std::string label;
    LossMode mode = LossMode::Supervised;
    double alpha = 0;
    int latent_dim = 0;
    MetricsReport test;
};

/// One training run per alpha with identical seeds, plus the prediction-only
/// and reconstruction-only baselines when requested.
std::vector<SweepRow> alpha_sweep(const std::vector<double>& alphas, const SweepSets& sets,
                                  const SVAEArchitecture& arch, double beta, const TrainHyper& hyper,
                                  bool baselines = true, int threads = 1);

/// Reconstruction-weighted runs (large alpha) for each latent size.
std::vector<SweepRow> latent_dim_sweep(const std::vector<int>& dims, const SweepSets& sets,
                                       const SVAEArchitecture& arch, double alpha, double beta,
                                       const TrainHyper& hyper, int threads = 1);

nlohmann::json to_json(const MetricsReport& r);
nlohmann::json to_json(const std::vector<BinStats>& bins);
nlohmann::json to_json(const CorrelationMatrix& m);
nlohmann::json to_json(const DomainShiftReport& r);
nlohmann::json to_json(const std::vector<SweepRow>& rows);

std::string metrics_csv(const MetricsReport& r);
std::string histogram_csv(const std::vector<std::pair<std::string, std::vector<BinStats>>>& per_axis);
std::string correlation_csv(const CorrelationMatrix& m);
std::string sweep_csv(const std::vector<SweepRow>& rows);

} // namespace tactile
