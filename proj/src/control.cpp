#include "tactile/control.hpp"

#include "tactile/dataset.hpp"
#include "tactile/errors.hpp"
#include "tactile/parallel.hpp"
#include "tactile/rng.hpp"
#include "tactile/svae.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace tactile {

void FrameTransform::validate() const {
    if (!rotation.allFinite()) throw ConfigError("frame transform: non-finite rotation");
    const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (orth > 1e-9) throw ConfigError("frame transform: R^T R deviates from identity by " + std::to_string(orth));
    const double det = rotation.determinant();
    if (std::abs(det - 1.0) > 1e-9) throw ConfigError("frame transform: det(R) = " + std::to_string(det));
}

FrameTransform FrameTransform::about_z(double radians) {
    FrameTransform T;
    const double c = std::cos(radians), s = std::sin(radians);
    T.rotation << c, -s, 0, s, c, 0, 0, 0, 1;
    return T;
}

double project_grip_force(const Wrench& w, const FrameTransform& T) {
    T.validate();
    const Eigen::RowVector3d row = T.rotation.row(1);
    return row(0) * w.fx + row(1) * w.fy + row(2) * w.fz;
}

// ---------------------------------------------------------------- plant

void GraspPlant::validate() const {
    if (!(p_contact >= 0.0) || !(p_contact < p_max))
        throw ConfigError("grasp plant: need 0 <= p_contact < p_max");
    if (nodes.size() < 2) throw ConfigError("grasp plant: need at least two force nodes");
    if (nodes.front().position_mm != p_contact || nodes.front().force_n != 0.0)
        throw ConfigError("grasp plant: first node must be (p_contact, 0)");
    for (size_t i = 1; i < nodes.size(); ++i) {
        if (!(nodes[i].position_mm > nodes[i - 1].position_mm))
            throw ConfigError("grasp plant: node positions must strictly increase");
        if (nodes[i].force_n < nodes[i - 1].force_n) throw ConfigError("grasp plant: force law must not decrease");
    }
    for (size_t i = 1; i < schedule.size(); ++i)
        if (schedule[i].time_s < schedule[i - 1].time_s) throw ConfigError("grasp plant: schedule must be sorted");
}

double GraspPlant::onset_shift(double t) const {
    double s = 0.0;
    for (const auto& e : schedule) {
        if (e.time_s > t) break;
        s = e.shift_mm;
    }
    return s;
}

std::vector<double> GraspPlant::slopes() const {
    std::vector<double> out;
    for (size_t i = 1; i < nodes.size(); ++i)
        out.push_back((nodes[i].force_n - nodes[i - 1].force_n) / (nodes[i].position_mm - nodes[i - 1].position_mm));
    return out;
}

double GraspPlant::lambda_min() const {
    const auto s = slopes();
    return *std::min_element(s.begin(), s.end());
}

double GraspPlant::lambda_max() const {
    const auto s = slopes();
    return *std::max_element(s.begin(), s.end());
}

namespace {

/// Force law at nominal onset, extended linearly past the last node.
double psi(const GraspPlant& plant, double q) {
    const auto& n = plant.nodes;
    if (q <= n.front().position_mm) return 0.0;
    size_t i = 1;
    while (i + 1 < n.size() && q > n[i].position_mm) ++i;
    const double slope = (n[i].force_n - n[i - 1].force_n) / (n[i].position_mm - n[i - 1].position_mm);
    return n[i - 1].force_n + slope * (q - n[i - 1].position_mm);
}

} // namespace

double GraspPlant::max_force(double t) const { return plant_force(p_max, *this, t); }

double GraspPlant::position_for(double f) const {
    if (f <= 0.0) return p_contact;
    for (size_t i = 1; i < nodes.size(); ++i) {
        const auto& a = nodes[i - 1];
        const auto& b = nodes[i];
        const bool last = i + 1 == nodes.size();
        if (f <= b.force_n || last) {
            if (b.force_n == a.force_n) {
                if (last) throw InfeasibleReference("force law is flat beyond its last node");
                continue;
            }
            return a.position_mm + (f - a.force_n) * (b.position_mm - a.position_mm) / (b.force_n - a.force_n);
        }
    }
    return p_max;
}

GraspPlant GraspPlant::linear(double p_contact, double p_max, double slope) {
    GraspPlant g;
    g.p_contact = p_contact;
    g.p_max = p_max;
    g.nodes = {{p_contact, 0.0}, {p_max, slope * (p_max - p_contact)}};
    g.validate();
    return g;
}

GraspPlant GraspPlant::from_offsets(double p_contact, double p_max, const std::vector<ForceNode>& offsets,
                                    double stiffness) {
    GraspPlant g;
    g.p_contact = p_contact;
    g.p_max = p_max;
    g.nodes.clear();
    for (const auto& o : offsets) g.nodes.push_back({p_contact + o.position_mm, stiffness * o.force_n});
    g.validate();
    return g;
}

double plant_force(double p, const GraspPlant& plant, double t) {
    if (!std::isfinite(p) || p < 0.0 || p > plant.p_max)
        throw RangeError("gripper position " + std::to_string(p) + " mm outside [0, " + std::to_string(plant.p_max) +
                         "]");
    const double shift = plant.onset_shift(t);
    if (p < plant.p_contact + shift) return 0.0;
    return psi(plant, p - shift);
}

// ---------------------------------------------------------------- controller

void ControllerConfig::validate() const {
    if (!(gain > 0.0) || !std::isfinite(gain)) throw ConfigError("controller: gain K must be positive");
    if (!(tolerance > 0.0) || !std::isfinite(tolerance)) throw ConfigError("controller: tolerance must be positive");
    if (!(loop_rate > 0.0) || !std::isfinite(loop_rate)) throw ConfigError("controller: loop rate must be positive");
}

double motion_step(const ControllerState& s, const ControllerConfig& cfg, double p_max) {
    const double e = s.f_reference - s.f_estimate;
    if (std::abs(e) <= cfg.tolerance) return s.p_measured;
    return std::clamp(s.p_measured + e / cfg.gain, 0.0, p_max);
}

// ---------------------------------------------------------------- estimator

SvaeEstimator::SvaeEstimator(const SvaeModel& model, FingerPlantConfig plant, DomainTag domain,
                             ContactGeometry contact, FrameTransform transform, uint64_t seed)
    : model_(&model), plant_(std::move(plant)), domain_(domain), contact_(contact), transform_(transform),
      seed_(seed) {
    plant_.validate();
    domain_.validate();
    transform_.validate();
    ContactPose unit{1.0, contact_.z_cm, contact_.theta_rad};
    unit.validate();
    force_per_cm_ = project_grip_force(plant_wrench(unit, plant_), transform_);
    if (!(force_per_cm_ > 0.0)) throw ConfigError("contact geometry produces no grip force");
}

ContactPose SvaeEstimator::pose_for_force(double f) const {
    const double x = std::clamp(f / force_per_cm_, 0.0, ContactPose::kMaxDepth);
    return {x, contact_.z_cm, contact_.theta_rad};
}

double SvaeEstimator::estimate_pose(const ContactPose& pose, uint64_t render_seed) const {
    const TactileImage img = observe(pose, plant_, domain_, render_seed);
    const LatentCode code = model_->encode(img);
    return project_grip_force(model_->predict_wrench(code.mu), transform_);
}

double SvaeEstimator::estimate(double true_force, uint64_t tick) {
    return estimate_pose(pose_for_force(true_force), derive_seed(seed_, 0x7469636b, tick));
}

// ---------------------------------------------------------------- traces

std::string Trace::to_csv() const {
    std::ostringstream os;
    os << "t,P_m,F_est,F_ref,event\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,", r.t, r.p_measured, r.f_estimate, r.f_reference);
        os << buf << r.event << '\n';
    }
    return os.str();
}

namespace {

std::string setpoint_tag(double f) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "setpoint %.6g", f);
    return buf;
}

void check_feasible(const GraspPlant& plant, double f, double t0, double t1) {
    auto check_at = [&](double t) {
        const double fmax = plant.max_force(t);
        if (f > fmax)
            throw InfeasibleReference("reference " + std::to_string(f) + " N exceeds the plant maximum " +
                                      std::to_string(fmax) + " N at t = " + std::to_string(t) + " s");
    };
    check_at(t0);
    for (const auto& e : plant.schedule)
        if (e.time_s > t0 && e.time_s < t1) check_at(e.time_s);
}

struct LoopInput {
    std::vector<double> f_ref; ///< per tick
    std::vector<std::string> events;
};

Trace run_loop(const LoopInput& in, const GraspPlant& plant, const ControllerConfig& cfg, ForceEstimator& est,
               const TrackingOptions& opts) {
    Trace trace;
    trace.loop_rate = cfg.loop_rate;
    double p = opts.initial_position.value_or(plant.contact_onset(0.0));
    if (p < 0.0 || p > plant.p_max) throw RangeError("initial position outside gripper travel");
    trace.rows.reserve(in.f_ref.size());
    for (size_t k = 0; k < in.f_ref.size(); ++k) {
        const double t = static_cast<double>(k) / cfg.loop_rate;
        ControllerState s;
        s.p_measured = p;
        const double f_true = plant_force(p, plant, t);
        s.f_estimate = est.estimate(f_true, k);
        s.f_reference = in.f_ref[k];
        s.p_reference = motion_step(s, cfg, plant.p_max);
        trace.rows.push_back({t, p, s.f_estimate, s.f_reference, f_true, in.events[k]});
        p = s.p_reference;
    }
    return trace;
}

size_t ticks_for(double seconds, double rate) {
    return static_cast<size_t>(std::llround(seconds * rate));
}

void tag_schedule(const GraspPlant& plant, double rate, LoopInput& in) {
    for (const auto& e : plant.schedule) {
        const auto k = static_cast<size_t>(std::ceil(e.time_s * rate - 1e-9));
        if (k >= in.events.size()) continue;
        const std::string tag = e.tag.empty() ? "shift" : e.tag;
        in.events[k] = in.events[k].empty() ? tag : in.events[k] + ";" + tag;
    }
}

} // namespace

Trace run_force_tracking(const std::vector<Setpoint>& plan, const GraspPlant& plant, const ControllerConfig& cfg,
                         ForceEstimator& estimator, const TrackingOptions& opts) {
    if (plan.empty()) throw ConfigError("force tracking: empty plan");
    cfg.validate();
    plant.validate();
    LoopInput in;
    double t0 = 0.0;
    for (const auto& sp : plan) {
        if (!(sp.duration_s > 0.0)) throw ConfigError("force tracking: setpoint duration must be positive");
        if (sp.force_n < 0.0) throw ConfigError("force tracking: negative reference");
        check_feasible(plant, sp.force_n, t0, t0 + sp.duration_s);
        const size_t n = ticks_for(sp.duration_s, cfg.loop_rate);
        for (size_t k = 0; k < n; ++k) {
            in.f_ref.push_back(sp.force_n);
            in.events.push_back(k == 0 ? setpoint_tag(sp.force_n) : std::string());
        }
        t0 += sp.duration_s;
    }
    tag_schedule(plant, cfg.loop_rate, in);
    return run_loop(in, plant, cfg, estimator, opts);
}

Trace run_disturbance(const GraspPlant& plant, double f_ref, double duration_s, const ControllerConfig& cfg,
                      ForceEstimator& estimator, const TrackingOptions& opts) {
    return run_force_tracking({{f_ref, duration_s}}, plant, cfg, estimator, opts);
}

std::vector<OnsetShift> rotation_disturbance(double mm_per_degree, double first_s, double spacing_s) {
    // Cumulative tube angle after each rotation: +45, +105, +15 degrees.
    return {{first_s, 45.0 * mm_per_degree, "rotate +45"},
            {first_s + spacing_s, 105.0 * mm_per_degree, "rotate +60"},
            {first_s + 2 * spacing_s, 15.0 * mm_per_degree, "rotate -90"}};
}

std::vector<SettleStats> settle_stats(const Trace& trace, double tolerance) {
    std::vector<size_t> marks;
    for (size_t k = 0; k < trace.rows.size(); ++k)
        if (!trace.rows[k].event.empty()) marks.push_back(k);
    std::vector<SettleStats> out;
    for (size_t m = 0; m < marks.size(); ++m) {
        const size_t begin = marks[m];
        const size_t end = m + 1 < marks.size() ? marks[m + 1] : trace.rows.size();
        SettleStats s;
        s.event_tick = begin;
        s.event = trace.rows[begin].event;
        auto inside = [&](size_t k) {
            return std::abs(trace.rows[k].f_estimate - trace.rows[k].f_reference) <= tolerance;
        };
        for (size_t k = begin; k < end; ++k) {
            if (inside(k)) {
                s.ticks_to_settle = k - begin;
                s.held = true;
                for (size_t j = k; j < end; ++j) s.held = s.held && inside(j);
                break;
            }
        }
        out.push_back(s);
    }
    return out;
}

// ---------------------------------------------------------------- contraction

ContractionRun contraction_run(const GraspPlant& plant, double gain, double f_ref, double tolerance,
                               size_t max_steps) {
    plant.validate();
    ContractionRun run;
    run.lambda_min = plant.lambda_min();
    run.lambda_max = plant.lambda_max();
    run.gain = gain;
    run.f_ref = f_ref;
    run.gain_condition = gain > run.lambda_max / 2.0;
    double factor = 0.0;
    for (double l : plant.slopes()) factor = std::max(factor, std::abs(1.0 - l / gain));

    const ControllerConfig cfg{gain, tolerance, 120.0};
    double p = plant.contact_onset(0.0);
    run.strictly_decreasing = true;
    run.within_bound = true;
    for (size_t k = 0;; ++k) {
        const double f = plant_force(p, plant);
        const double e = f_ref - f;
        if (!run.errors.empty()) {
            const double prev = std::abs(run.errors.back());
            if (!(std::abs(e) < prev)) run.strictly_decreasing = false;
            if (std::abs(e) > factor * prev + 1e-9) run.within_bound = false;
        }
        run.errors.push_back(e);
        if (std::abs(e) <= tolerance) {
            run.converged = true;
            run.steps = k;
            break;
        }
        if (k == max_steps) {
            run.steps = k;
            break;
        }
        p = motion_step({p, f, f_ref, p}, cfg, plant.p_max);
    }
    return run;
}

ContractionReport verify_contraction(size_t plants, uint64_t seed, double tolerance, double slope_max) {
    ContractionReport rep;
    for (size_t i = 0; i < plants; ++i) {
        std::mt19937_64 rng(derive_seed(seed, 0x636f6e74, i));
        const double pc = uniform(rng, 0.0, 30.0);
        const int segments = 1 + static_cast<int>(uniform_index(rng, 5));
        std::vector<ForceNode> nodes{{pc, 0.0}};
        for (int s = 0; s < segments; ++s) {
            const double len = uniform(rng, 0.5, 5.0);
            const double slope = uniform(rng, 0.05, slope_max);
            nodes.push_back({nodes.back().position_mm + len, nodes.back().force_n + slope * len});
        }
        GraspPlant g;
        g.p_contact = pc;
        g.p_max = nodes.back().position_mm;
        g.nodes = nodes;
        const double lmax = g.lambda_max();
        const double gain = lmax * uniform(rng, 0.5, 2.0);
        const double f_ref = uniform(rng, 0.0, g.max_force());
        ContractionRun run = contraction_run(g, gain, f_ref, tolerance, 100000);
        if (run.gain_condition) {
            ++rep.eligible;
            if (run.converged && run.strictly_decreasing && run.within_bound) ++rep.eligible_passed;
            rep.max_steps = std::max(rep.max_steps, run.steps);
        }
        rep.runs.push_back(std::move(run));
    }
    const GraspPlant unit = GraspPlant::linear(10.0, 30.0, 1.0);
    rep.boundary_equal = contraction_run(unit, 0.5, 1.0, tolerance);
    rep.boundary_below = contraction_run(unit, 0.4, 1.0, tolerance);
    return rep;
}

// ---------------------------------------------------------------- grasping

std::string to_string(GraspMode m) { return m == GraspMode::OpenLoop ? "open" : "closed"; }

std::vector<GraspObject> default_objects() {
    return {
        {"sponge", 60, 0.6, 1.6, 0.6, {0.0, 0.0}},
        {"bottle", 50, 1.0, 2.6, 1.0, {1.0, 0.3}},
        {"tube", 30, 1.2, 2.4, 1.0, {0.0, 1.57}},
        {"can", 45, 2.0, 4.0, 1.6, {-1.0, -0.4}},
        {"egg", 40, 0.6, 1.4, 0.8, {0.5, 0.8}},
    };
}

namespace {

const std::vector<ForceNode> kObjectLaw{{0, 0}, {2, 0.5}, {5, 2.0}, {10, 5.0}, {20, 11.0}};

} // namespace

void GraspScenario::validate() const {
    if (!(object.f_min < object.f_max)) throw ConfigError("grasp: need f_min < f_max for " + object.name);
    if (object.f_min < 0.0) throw ConfigError("grasp: negative force window for " + object.name);
    if (!(sigma_mm >= 0.0)) throw ConfigError("grasp: sigma must be non-negative");
    if (trials < 1) throw ConfigError("grasp: need at least one trial");
    if (!(object.width_mm > 0.0) || !(object.width_mm < stroke_mm))
        throw ConfigError("grasp: object width must lie in (0, stroke)");
    if (!(object.stiffness > 0.0)) throw ConfigError("grasp: stiffness must be positive");
    if (!(approach_mm >= 0.0)) throw ConfigError("grasp: approach distance must be non-negative");
    if (f_target() > plant().max_force()) throw InfeasibleReference("grasp: target force unreachable for " + object.name);
}

GraspPlant GraspScenario::plant(double offset_mm) const {
    const double pc = 0.5 * (stroke_mm - object.width_mm);
    GraspPlant g = GraspPlant::from_offsets(pc, 0.5 * stroke_mm, kObjectLaw, object.stiffness);
    if (offset_mm != 0.0) g.schedule.push_back({0.0, offset_mm, "offset"});
    return g;
}

GraspOutcome grasp_trial(const GraspScenario& sc, const ControllerConfig& cfg, ForceEstimator& estimator,
                         double offset_mm) {
    GraspOutcome out;
    out.offset_mm = offset_mm;
    const GraspPlant nominal = sc.plant();
    const GraspPlant actual = sc.plant(offset_mm);
    const double target = sc.f_target();
    auto in_window = [&](double f) { return f >= sc.object.f_min && f <= sc.object.f_max; };

    if (sc.mode == GraspMode::OpenLoop) {
        out.final_position = nominal.position_for(target);
        out.final_force = plant_force(out.final_position, actual);
        out.converged = true;
        out.success = in_window(out.final_force);
        return out;
    }

    double p = std::max(0.0, nominal.p_contact - sc.approach_mm);
    out.trace.loop_rate = cfg.loop_rate;
    for (size_t k = 0; k < sc.tick_budget; ++k) {
        const double t = static_cast<double>(k) / cfg.loop_rate;
        const double f_true = plant_force(p, actual, t);
        const double f_est = estimator.estimate(f_true, k);
        out.trace.rows.push_back({t, p, f_est, target, f_true, k == 0 ? "approach" : ""});
        out.final_position = p;
        out.final_force = f_true;
        out.ticks = k;
        if (std::abs(f_est - target) <= cfg.tolerance) {
            out.converged = true;
            out.trace.rows.back().event = "confirm";
            break;
        }
        p = motion_step({p, f_est, target, p}, cfg, actual.p_max);
    }
    out.success = out.converged && in_window(out.final_force);
    return out;
}

GraspOutcome grasp_trial(const GraspScenario& sc, const ControllerConfig& cfg, ForceEstimator& estimator,
                         std::mt19937_64& rng) {
    return grasp_trial(sc, cfg, estimator, sc.sigma_mm * standard_normal(rng));
}

double GraspTable::average(GraspMode mode, const std::string& domain) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : cells)
        if (c.mode == mode && c.domain == domain) {
            sum += c.rate();
            ++n;
        }
    return n == 0 ? 0.0 : sum / n;
}

GraspTable grasp_experiment(const std::vector<GraspObject>& objects, int trials, double sigma_mm, uint64_t seed,
                            const ControllerConfig& cfg, const std::vector<DomainTag>& domains,
                            const EstimatorFactory& make_estimator, int threads) {
    if (objects.empty()) throw ConfigError("grasp: no objects");
    if (domains.empty()) throw ConfigError("grasp: no domains");
    cfg.validate();
    std::vector<GraspScenario> scenarios;
    for (const auto& o : objects) {
        GraspScenario sc;
        sc.object = o;
        sc.sigma_mm = sigma_mm;
        sc.trials = trials;
        sc.seed = seed;
        sc.validate();
        scenarios.push_back(sc);
    }
    // Offsets depend only on the object, so every mode and domain sees the same draws.
    std::vector<std::vector<double>> offsets(objects.size());
    for (size_t i = 0; i < objects.size(); ++i) {
        std::mt19937_64 rng(derive_seed(seed, 0x67726173, i));
        for (int t = 0; t < trials; ++t) offsets[i].push_back(sigma_mm * standard_normal(rng));
    }

    const GraspMode modes[] = {GraspMode::OpenLoop, GraspMode::ClosedLoop};
    GraspTable table;
    for (const auto& d : domains)
        for (GraspMode m : modes)
            for (const auto& o : objects) table.cells.push_back({o.name, m, d.name(), trials, 0});

    parallel_for(table.cells.size(), threads, [&](size_t c) {
        const size_t obj = c % objects.size();
        const GraspMode mode = modes[(c / objects.size()) % 2];
        const DomainTag& dom = domains[c / (2 * objects.size())];
        GraspScenario sc = scenarios[obj];
        sc.mode = mode;
        OracleEstimator oracle;
        std::unique_ptr<ForceEstimator> est;
        if (mode == GraspMode::ClosedLoop) est = make_estimator(objects[obj], dom);
        int ok = 0;
        for (int t = 0; t < trials; ++t)
            ok += grasp_trial(sc, cfg, est ? *est : static_cast<ForceEstimator&>(oracle), offsets[obj][t]).success;
        table.cells[c].successes = ok;
    });
    return table;
}

} // namespace tactile
