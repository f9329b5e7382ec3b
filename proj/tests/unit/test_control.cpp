#include "tactile/control.hpp"
#include "tactile/errors.hpp"
#include "tactile/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace tactile;

TEST_SUITE("control") {

TEST_CASE("grip force projection") {
    CHECK(project_grip_force(Wrench{0, 2, 0, 0, 0, 0}, {}) == 2.0);
    CHECK(project_grip_force(Wrench{3, 0, 0, 0, 0, 0}, FrameTransform::about_z(kPi / 2)) ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(project_grip_force(Wrench{}, FrameTransform::about_z(0.3)) == 0.0);
    CHECK(project_grip_force(Wrench{0, 0, 0, 100, 200, 300}, {}) == 0.0);

    const auto T = FrameTransform::about_z(0.7);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        Wrench a{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5), 0, 0, 0};
        Wrench b{uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5), 0, 0, 0};
        const double s = uniform(rng, -2, 2), u = uniform(rng, -2, 2);
        Wrench c{s * a.fx + u * b.fx, s * a.fy + u * b.fy, s * a.fz + u * b.fz, 0, 0, 0};
        CHECK(project_grip_force(c, T) ==
              doctest::Approx(s * project_grip_force(a, T) + u * project_grip_force(b, T)).epsilon(1e-12).scale(1e-12));
    }

    FrameTransform bad;
    bad.rotation(0, 0) = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(project_grip_force(Wrench{}, bad), ConfigError);
    FrameTransform mirror;
    mirror.rotation(2, 2) = -1.0;
    CHECK_THROWS_AS(mirror.validate(), ConfigError);
}

TEST_CASE("plant force law") {
    const GraspPlant lin = GraspPlant::linear(10, 30, 1.0);
    CHECK(plant_force(5, lin) == 0.0);
    CHECK(plant_force(12, lin) == doctest::Approx(2.0));
    CHECK(plant_force(30, lin) == doctest::Approx(20.0));

    GraspPlant pw;
    pw.p_contact = 10;
    pw.p_max = 20;
    pw.nodes = {{10, 0}, {11, 0.5}, {13, 3.0}};
    CHECK_NOTHROW(pw.validate());
    CHECK(plant_force(12, pw) == doctest::Approx(1.75));
    CHECK(plant_force(14, pw) == doctest::Approx(4.25));

    CHECK_THROWS_AS(plant_force(30.001, lin), RangeError);
    CHECK_THROWS_AS(plant_force(-0.1, lin), RangeError);

    const GraspPlant def;
    CHECK(def.lambda_max() == doctest::Approx(0.6));
    CHECK(def.lambda_min() == doctest::Approx(0.25));
    CHECK(def.max_force() == doctest::Approx(8.0));
    CHECK(std::abs(plant_force(def.p_contact + 1e-6, def)) <= def.lambda_max() * 2e-6);
    for (double f : {0.4, 1.6, 3.0, 7.5}) CHECK(plant_force(def.position_for(f), def) == doctest::Approx(f));

    GraspPlant bad = def;
    bad.nodes[2].force_n = 0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = def;
    bad.nodes[0].force_n = 0.2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = def;
    bad.p_contact = 40;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("onset schedule shifts the law") {
    GraspPlant p = GraspPlant::linear(10, 30, 1.0);
    p.schedule = {{1.0, 2.0, "a"}, {2.0, -1.0, "b"}};
    CHECK(p.onset_shift(0.5) == 0.0);
    CHECK(p.onset_shift(1.0) == 2.0);
    CHECK(p.onset_shift(2.5) == -1.0);
    CHECK(plant_force(13, p, 0.0) == doctest::Approx(3.0));
    CHECK(plant_force(13, p, 1.5) == doctest::Approx(1.0));
    CHECK(plant_force(13, p, 3.0) == doctest::Approx(4.0));
    CHECK(plant_force(11.5, p, 1.5) == 0.0);
}

TEST_CASE("motion step") {
    const ControllerConfig cfg{1.0, 0.05, 120};
    CHECK(motion_step({10, 1.0, 1.0, 0}, cfg, 35) == 10.0);
    CHECK(motion_step({10, 0.0, 2.0, 0}, cfg, 35) == 12.0);
    CHECK(motion_step({10, 1.0, 1.04, 0}, cfg, 35) == 10.0);
    CHECK(motion_step({34, 0.0, 5.0, 0}, cfg, 35) == 35.0);
    CHECK(motion_step({1, 5.0, 0.0, 0}, cfg, 35) == 0.0);
    CHECK_THROWS_AS((ControllerConfig{0, 0.05, 120}.validate()), ConfigError);
    CHECK_THROWS_AS((ControllerConfig{1, 0, 120}.validate()), ConfigError);
    CHECK_THROWS_AS((ControllerConfig{1, 0.05, -1}.validate()), ConfigError);
}

TEST_CASE("gain equal to slope converges in one step") {
    const GraspPlant p = GraspPlant::linear(10, 30, 0.8);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const double pm = uniform(rng, 10, 30), fref = uniform(rng, 0, 16);
        ControllerState s{pm, plant_force(pm, p), fref, 0};
        const double next = motion_step(s, {0.8, 1e-9, 120}, p.p_max);
        CHECK(plant_force(next, p) == doctest::Approx(fref).epsilon(1e-12).scale(1e-12));
    }
}

TEST_CASE("oracle tracking of the step plan") {
    const GraspPlant plant;
    const ControllerConfig cfg;
    OracleEstimator oracle;
    const Trace tr = run_force_tracking({{0.4, 1.0}, {1.6, 1.0}, {3.0, 1.0}}, plant, cfg, oracle);
    REQUIRE(tr.rows.size() == 360);
    for (size_t i = 1; i < tr.rows.size(); ++i) CHECK(tr.rows[i].t - tr.rows[i - 1].t == doctest::Approx(1.0 / 120));
    const auto stats = settle_stats(tr, cfg.tolerance);
    size_t setpoints = 0;
    for (const auto& s : stats) {
        if (s.event.rfind("setpoint", 0) != 0) continue;
        ++setpoints;
        REQUIRE(s.ticks_to_settle.has_value());
        CHECK(*s.ticks_to_settle <= 10);
        CHECK(s.held);
    }
    CHECK(setpoints == 3);
    OracleEstimator again;
    CHECK(run_force_tracking({{0.4, 1.0}, {1.6, 1.0}, {3.0, 1.0}}, plant, cfg, again) == tr);

    const std::string csv = tr.to_csv();
    CHECK(csv.rfind("t,P_m,F_est,F_ref,event\n", 0) == 0);
    CHECK(csv.find("setpoint 1.6") != std::string::npos);
}

TEST_CASE("zero setpoint from open jaw stays put") {
    const GraspPlant plant;
    OracleEstimator oracle;
    TrackingOptions opt;
    opt.initial_position = 5.0;
    const Trace tr = run_force_tracking({{0.0, 0.5}}, plant, {}, oracle, opt);
    for (const auto& r : tr.rows) CHECK(r.p_measured == 5.0);
}

TEST_CASE("infeasible reference is rejected") {
    const GraspPlant plant;
    OracleEstimator oracle;
    CHECK_THROWS_AS(run_force_tracking({{9.0, 1.0}}, plant, {}, oracle), InfeasibleReference);
    CHECK_THROWS_AS(run_force_tracking({}, plant, {}, oracle), ConfigError);
}

TEST_CASE("rotation disturbance recovery") {
    GraspPlant plant;
    plant.schedule = rotation_disturbance();
    REQUIRE(plant.schedule.size() == 3);
    CHECK(plant.schedule[0].shift_mm == doctest::Approx(0.9));
    CHECK(plant.schedule[1].shift_mm == doctest::Approx(2.1));
    CHECK(plant.schedule[2].shift_mm == doctest::Approx(0.3));
    OracleEstimator oracle;
    const ControllerConfig cfg;
    const Trace tr = run_disturbance(plant, 0.4, 5.0, cfg, oracle);
    size_t events = 0;
    for (const auto& s : settle_stats(tr, cfg.tolerance)) {
        if (s.event.rfind("rotate", 0) != 0) continue;
        ++events;
        REQUIRE(s.ticks_to_settle.has_value());
        CHECK(*s.ticks_to_settle <= 20);
        CHECK(s.held);
    }
    CHECK(events == 3);

    // Zero-magnitude shifts leave the steady trace untouched apart from tags.
    GraspPlant still;
    still.schedule = rotation_disturbance(0.0);
    GraspPlant none;
    OracleEstimator o1, o2;
    const Trace a = run_disturbance(still, 0.4, 5.0, cfg, o1);
    const Trace b = run_disturbance(none, 0.4, 5.0, cfg, o2);
    REQUIRE(a.rows.size() == b.rows.size());
    for (size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].p_measured == b.rows[i].p_measured);
        CHECK(a.rows[i].f_estimate == b.rows[i].f_estimate);
    }
}

TEST_CASE("lost contact is recovered without oscillation") {
    GraspPlant plant;
    plant.schedule = {{0.5, 6.0, "retreat"}};
    OracleEstimator oracle;
    const ControllerConfig cfg;
    const Trace tr = run_disturbance(plant, 1.0, 2.0, cfg, oracle);
    const size_t k0 = 60;
    REQUIRE(tr.rows[k0].event == "retreat");
    CHECK(tr.rows[k0].f_estimate == 0.0);
    double prev = 1e9;
    bool settled = false;
    for (size_t k = k0; k < tr.rows.size(); ++k) {
        const double e = std::abs(tr.rows[k].f_reference - tr.rows[k].f_estimate);
        if (e <= cfg.tolerance) {
            settled = true;
            break;
        }
        // Out of contact the error stays at F_ref while the jaw closes in.
        if (tr.rows[k].f_estimate > 0) CHECK(e < prev);
        else CHECK(e == doctest::Approx(1.0));
        prev = e;
    }
    CHECK(settled);
}

TEST_CASE("contraction runs") {
    const GraspPlant lin = GraspPlant::linear(10, 30, 1.0);
    const auto ok = contraction_run(lin, 0.6, 1.0, 0.05);
    CHECK(ok.gain_condition);
    CHECK(ok.converged);
    CHECK(ok.strictly_decreasing);
    CHECK(ok.within_bound);
    for (size_t i = 1; i < ok.errors.size(); ++i)
        CHECK(std::abs(ok.errors[i]) == doctest::Approx(std::abs(ok.errors[i - 1]) * (1.0 / 0.6 - 1.0)));

    const auto edge = contraction_run(lin, 0.5, 1.0, 0.05);
    CHECK_FALSE(edge.gain_condition);
    CHECK_FALSE(edge.converged);
    CHECK_FALSE(edge.strictly_decreasing);
    const auto below = contraction_run(lin, 0.4, 1.0, 0.05);
    CHECK_FALSE(below.converged);

    const auto rep = verify_contraction(200, 7);
    CHECK(rep.runs.size() == 200);
    CHECK(rep.eligible > 0);
    CHECK(rep.pass_rate() == 1.0);
    CHECK_FALSE(rep.boundary_equal.converged);
    CHECK_FALSE(rep.boundary_below.converged);
    for (const auto& r : rep.runs) {
        if (!r.gain_condition) continue;
        CHECK(r.within_bound);
        CHECK(r.strictly_decreasing);
    }
}

TEST_CASE("grasp trials without approach noise succeed") {
    for (const auto& obj : default_objects()) {
        for (auto mode : {GraspMode::OpenLoop, GraspMode::ClosedLoop}) {
            GraspScenario sc;
            sc.object = obj;
            sc.mode = mode;
            sc.sigma_mm = 0;
            OracleEstimator o;
            const auto out = grasp_trial(sc, {}, o, 0.0);
            CAPTURE(obj.name);
            CHECK(out.success);
        }
    }
}

TEST_CASE("open loop fails beyond the window offset, closed loop compensates") {
    GraspScenario sc;
    sc.object = default_objects().front();
    const GraspPlant nominal = sc.plant();
    // Offset at which the nominal closing position leaves the force window.
    const double p_target = nominal.position_for(sc.f_target());
    const double p_low = nominal.position_for(sc.object.f_min);
    const double fail_offset = (p_target - p_low) * 1.2;
    sc.mode = GraspMode::OpenLoop;
    OracleEstimator o1, o2;
    CHECK_FALSE(grasp_trial(sc, {}, o1, fail_offset).success);
    sc.mode = GraspMode::ClosedLoop;
    const auto closed = grasp_trial(sc, {}, o2, fail_offset);
    CHECK(closed.success);
    CHECK(closed.converged);
}

TEST_CASE("grasp experiment layout") {
    const auto objects = default_objects();
    REQUIRE(objects.size() >= 5);
    EstimatorFactory oracle = [](const GraspObject&, const DomainTag&) { return std::make_unique<OracleEstimator>(); };
    const auto table = grasp_experiment(objects, 10, 0.0, 3, {}, {DomainTag::land(), DomainTag::water()}, oracle);
    CHECK(table.cells.size() == objects.size() * 4);
    for (const auto& c : table.cells) {
        CHECK(c.trials == 10);
        CHECK(c.rate() == 1.0);
    }
    const auto noisy = grasp_experiment(objects, 10, 5.0, 3, {}, {DomainTag::land()}, oracle);
    CHECK(noisy.average(GraspMode::ClosedLoop, "land") >= noisy.average(GraspMode::OpenLoop, "land"));
    CHECK(noisy.average(GraspMode::ClosedLoop, "land") == 1.0);
    CHECK(noisy.average(GraspMode::OpenLoop, "land") < 1.0);
}

} // TEST_SUITE
