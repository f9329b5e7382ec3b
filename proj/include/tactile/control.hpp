#pragma once

#include "tactile/plant.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tactile {

class SvaeModel;

/// Rotation from the finger base frame to the world frame.
struct FrameTransform {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();

    /// Throws ConfigError unless the matrix is a proper rotation (1e-9).
    void validate() const;
    static FrameTransform about_z(double radians);
};

/// World-Y component of the rotated force part. Torques do not contribute.
double project_grip_force(const Wrench& w, const FrameTransform& T);

struct ForceNode {
    double position_mm = 0;
    double force_n = 0;
};

/// Step change of the contact onset at time t (seconds).
struct OnsetShift {
    double time_s = 0;
    double shift_mm = 0;
    std::string tag;
};

/// Gripper position to grip force. Zero before contact onset, piecewise linear
/// after it; the last segment is extended up to p_max.
struct GraspPlant {
    double p_contact = 20.0;
    double p_max = 35.0;
    /// First node sits at (p_contact, 0); positions strictly increase.
    std::vector<ForceNode> nodes{{20.0, 0.0}, {22.0, 0.5}, {25.0, 2.0}, {30.0, 5.0}, {35.0, 8.0}};
    /// Sorted by time; the latest shift at or before t applies.
    std::vector<OnsetShift> schedule;

    void validate() const;
    [[nodiscard]] double onset_shift(double t) const;
    [[nodiscard]] double contact_onset(double t) const { return p_contact + onset_shift(t); }
    [[nodiscard]] std::vector<double> slopes() const;
    [[nodiscard]] double lambda_min() const;
    [[nodiscard]] double lambda_max() const;
    /// Largest force reachable at time t, i.e. the force at p_max.
    [[nodiscard]] double max_force(double t = 0) const;
    /// Nominal-onset position producing force f (smallest such position).
    [[nodiscard]] double position_for(double f) const;

    static GraspPlant linear(double p_contact, double p_max, double slope);
    /// Nodes given as (offset from onset, force); scaled by `stiffness`.
    static GraspPlant from_offsets(double p_contact, double p_max, const std::vector<ForceNode>& offsets,
                                   double stiffness = 1.0);
};

/// Throws RangeError when p exceeds p_max (or is negative).
double plant_force(double p, const GraspPlant& plant, double t = 0);

struct ControllerConfig {
    double gain = 0.5;       ///< K, N/mm
    double tolerance = 0.05; ///< delta, N
    double loop_rate = 120;  ///< Hz

    void validate() const;
};

struct ControllerState {
    double p_measured = 0;
    double f_estimate = 0;
    double f_reference = 0;
    double p_reference = 0;
};

/// One reference-motion update, clamped to [0, p_max].
double motion_step(const ControllerState& s, const ControllerConfig& cfg, double p_max);

/// Maps the true grip force of the current tick to a force estimate.
class ForceEstimator {
  public:
    virtual ~ForceEstimator() = default;
    virtual double estimate(double true_force, uint64_t tick) = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

class OracleEstimator final : public ForceEstimator {
  public:
    double estimate(double true_force, uint64_t) override { return true_force; }
    [[nodiscard]] std::string name() const override { return "oracle"; }
};

/// Where and how the object touches the finger during a grasp.
struct ContactGeometry {
    double z_cm = 0.0;
    double theta_rad = 0.0;
};

/// Renders the finger for the current force, thresholds, encodes, predicts
/// the wrench and projects it onto the grip direction.
class SvaeEstimator final : public ForceEstimator {
  public:
    SvaeEstimator(const SvaeModel& model, FingerPlantConfig plant, DomainTag domain, ContactGeometry contact = {},
                  FrameTransform transform = {}, uint64_t seed = 0);

    double estimate(double true_force, uint64_t tick) override;
    [[nodiscard]] std::string name() const override { return "svae"; }

    /// Contact pose whose base grip force equals f (depth clamped to range).
    [[nodiscard]] ContactPose pose_for_force(double f) const;
    /// Estimate straight from a pose; the per-tick pipeline after the plant.
    double estimate_pose(const ContactPose& pose, uint64_t render_seed) const;

  private:
    const SvaeModel* model_;
    FingerPlantConfig plant_;
    DomainTag domain_;
    ContactGeometry contact_;
    FrameTransform transform_;
    uint64_t seed_;
    double force_per_cm_;
};

struct TraceRow {
    double t = 0;
    double p_measured = 0;
    double f_estimate = 0;
    double f_reference = 0;
    double f_true = 0;
    std::string event;
    bool operator==(const TraceRow&) const = default;
};

struct Trace {
    double loop_rate = 120;
    std::vector<TraceRow> rows;

    [[nodiscard]] std::string to_csv() const;
    bool operator==(const Trace&) const = default;
};

struct Setpoint {
    double force_n = 0;
    double duration_s = 1.0;
};

struct TrackingOptions {
    /// Starting gripper position; defaults to the contact onset.
    std::optional<double> initial_position;
};

/// Runs the loop for the whole plan. Throws InfeasibleReference when a
/// setpoint exceeds what the plant can deliver while it is active.
Trace run_force_tracking(const std::vector<Setpoint>& plan, const GraspPlant& plant, const ControllerConfig& cfg,
                         ForceEstimator& estimator, const TrackingOptions& opts = {});

/// Constant reference with the plant's onset schedule acting as disturbance.
/// Shift instants appear as event tags in the trace.
Trace run_disturbance(const GraspPlant& plant, double f_ref, double duration_s, const ControllerConfig& cfg,
                      ForceEstimator& estimator, const TrackingOptions& opts = {});

/// Shifts standing in for tube rotations of +45, +60 and -90 degrees.
std::vector<OnsetShift> rotation_disturbance(double mm_per_degree = 0.02, double first_s = 1.0, double spacing_s = 1.5);

struct SettleStats {
    size_t event_tick = 0;
    std::string event;
    std::optional<size_t> ticks_to_settle; ///< unset when never within tolerance
    bool held = false;                     ///< stayed within tolerance until the next event
};

/// For every tagged row: ticks until |F_est - F_ref| <= tolerance.
std::vector<SettleStats> settle_stats(const Trace& trace, double tolerance);

struct ContractionRun {
    double lambda_min = 0;
    double lambda_max = 0;
    double gain = 0;
    double f_ref = 0;
    bool gain_condition = false; ///< K > lambda_max / 2
    bool converged = false;      ///< reached |e| <= delta within the step budget
    bool strictly_decreasing = false;
    bool within_bound = false;   ///< |e_{k+1}| <= max|1 - lambda/K| |e_k| + 1e-9 at every step
    size_t steps = 0;
    std::vector<double> errors;
};

/// Iterates motion_step with an ideal estimator from the contact onset until
/// the error enters the tolerance band or max_steps pass.
ContractionRun contraction_run(const GraspPlant& plant, double gain, double f_ref, double tolerance,
                               size_t max_steps = 1000);

struct ContractionReport {
    std::vector<ContractionRun> runs;
    size_t eligible = 0; ///< runs meeting the gain condition
    size_t eligible_passed = 0;
    size_t max_steps = 0;
    ContractionRun boundary_equal; ///< linear slope 1, K = 0.5
    ContractionRun boundary_below; ///< linear slope 1, K = 0.4

    [[nodiscard]] double pass_rate() const {
        return eligible == 0 ? 0.0 : static_cast<double>(eligible_passed) / static_cast<double>(eligible);
    }
};

/// Random piecewise-linear plants, gains above the contraction bound and
/// feasible references, plus the two constructed boundary cases.
ContractionReport verify_contraction(size_t plants, uint64_t seed, double tolerance = 0.05,
                                     double slope_max = 2.0);

enum class GraspMode { OpenLoop, ClosedLoop };
std::string to_string(GraspMode m);

struct GraspObject {
    std::string name;
    double width_mm = 40;
    double f_min = 1.0;
    double f_max = 3.0;
    double stiffness = 1.0;
    ContactGeometry contact;
};

/// Default desk objects.
std::vector<GraspObject> default_objects();

struct GraspScenario {
    GraspObject object;
    double sigma_mm = 5.0;
    GraspMode mode = GraspMode::ClosedLoop;
    int trials = 10;
    uint64_t seed = 1;
    double stroke_mm = 100;   ///< fully open jaw gap
    double approach_mm = 15;  ///< closed loop starts this far before nominal contact
    size_t tick_budget = 240;

    void validate() const;
    [[nodiscard]] double f_target() const { return 0.5 * (object.f_min + object.f_max); }
    /// Plant at the nominal object location, shifted by the approach offset.
    [[nodiscard]] GraspPlant plant(double offset_mm = 0) const;
};

struct GraspOutcome {
    bool success = false;
    bool converged = false;
    double offset_mm = 0;
    double final_position = 0;
    double final_force = 0;
    size_t ticks = 0;
    Trace trace;
};

/// One trial with the given approach offset draw.
GraspOutcome grasp_trial(const GraspScenario& sc, const ControllerConfig& cfg, ForceEstimator& estimator,
                         double offset_mm);
/// One trial drawing the offset from N(0, sigma) with rng.
GraspOutcome grasp_trial(const GraspScenario& sc, const ControllerConfig& cfg, ForceEstimator& estimator,
                         std::mt19937_64& rng);

struct GraspCell {
    std::string object;
    GraspMode mode = GraspMode::OpenLoop;
    std::string domain;
    int trials = 0;
    int successes = 0;
    [[nodiscard]] double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

struct GraspTable {
    std::vector<GraspCell> cells;
    /// Mean success over objects for the given mode and domain.
    [[nodiscard]] double average(GraspMode mode, const std::string& domain) const;
};

using EstimatorFactory = std::function<std::unique_ptr<ForceEstimator>(const GraspObject&, const DomainTag&)>;

/// Every object in every mode and domain. Offsets are shared between modes so
/// open and closed loop face the same draws.
GraspTable grasp_experiment(const std::vector<GraspObject>& objects, int trials, double sigma_mm, uint64_t seed,
                            const ControllerConfig& cfg, const std::vector<DomainTag>& domains,
                            const EstimatorFactory& make_estimator, int threads = 1);

} // namespace tactile
