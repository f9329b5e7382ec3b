// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.
//
//   acceptance [--work DIR] [criterion ...]
//
// With --work the generated dataset and trained model are kept in DIR and
// reused by later invocations; otherwise a temporary directory is used.

#include "tactile/analysis.hpp"
#include "tactile/control.hpp"
#include "tactile/dataset.hpp"
#include "tactile/errors.hpp"
#include "tactile/latent.hpp"
#include "tactile/rng.hpp"
#include "tactile/svae.hpp"

#include "../unit/helpers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace tactile;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Shared artefacts, built on first use.
class Workspace {
  public:
    explicit Workspace(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    const fs::path& dir() const { return dir_; }

    const Dataset& data() {
        if (!data_) {
            const fs::path d = dir_ / "desk_data";
            if (!fs::exists(d / "manifest.json")) {
                const auto t0 = Clock::now();
                generate_dataset(3000, plant_, DomainTag::land(), 1, d);
                std::printf("  generated 3000 samples in %.1f s\n", seconds_since(t0));
            }
            data_ = load_dataset(d, plant_);
        }
        return *data_;
    }

    const LabeledSet& split(Split s) {
        auto it = splits_.find(s);
        if (it == splits_.end()) it = splits_.emplace(s, data().split(s)).first;
        return it->second;
    }

    /// Default desk model: alpha 1, beta 0.1, d 32, batch 64, lr 5e-5, 30 epochs.
    const SvaeModel& model() {
        if (!model_) {
            const fs::path p = dir_ / "desk.svae";
            if (fs::exists(p)) {
                model_.emplace(load_checkpoint(p));
            } else {
                const auto t0 = Clock::now();
                TrainHyper h;
                h.epochs = 30;
                Checkpoint ck = train(split(Split::Train), split(Split::Validation), SVAEArchitecture{}, {1.0, 0.1}, h,
                                      [&](const EpochRecord& e) {
                                          std::printf("  epoch %2d  val total %.4f  val mean R2 %.4f  (%.0f s)\n",
                                                      e.epoch + 1, e.validation.total,
                                                      e.validation_mean_r2.value_or(NAN), seconds_since(t0));
                                          std::fflush(stdout);
                                      });
                train_seconds_ = seconds_since(t0);
                save_checkpoint(ck, p);
                model_.emplace(std::move(ck));
            }
        }
        return *model_;
    }

    std::optional<double> train_seconds() const { return train_seconds_; }
    const FingerPlantConfig& plant() const { return plant_; }

  private:
    fs::path dir_;
    FingerPlantConfig plant_;
    std::optional<Dataset> data_;
    std::map<Split, LabeledSet> splits_;
    std::optional<SvaeModel> model_;
    std::optional<double> train_seconds_;
};

// ---------------------------------------------------------------- 1

SVAEArchitecture random_micro(std::mt19937_64& rng) {
    for (;;) {
        SVAEArchitecture a;
        a.input_height = a.input_width = 16;
        a.latent_dim = 2 + static_cast<int>(uniform_index(rng, 5));
        a.channels.assign(1 + uniform_index(rng, 4), 0);
        for (int& c : a.channels) c = 1 + static_cast<int>(uniform_index(rng, 4));
        a.regressor_hidden.assign(uniform_index(rng, 3), 0);
        for (int& h : a.regressor_hidden) h = 3 + static_cast<int>(uniform_index(rng, 8));
        if (Svae(a).init_params<double>(1).scalar_count() <= 5000) return a;
    }
}

Outcome gradient_fidelity() {
    std::mt19937_64 rng(20240601);
    const double h = 1e-5;
    double worst = 0;
    size_t checked = 0, skipped = 0, max_params = 0;
    const int archs = 24;
    for (int k = 0; k < archs; ++k) {
        const SVAEArchitecture arch = random_micro(rng);
        const Svae net(arch);
        auto p = net.init_params<double>(100 + k);
        for (const auto& [name, t] : p.entries())
            if (name.back() == 'b')
                for (size_t i = 0; i < t.numel(); ++i) p.mutable_at(name)[i] = uniform(rng, -0.2, 0.2);
        max_params = std::max(max_params, p.scalar_count());
        const size_t d = static_cast<size_t>(arch.latent_dim);
        Tensor<double> x({3, 1, 16, 16}), y({3, 6}), eps({3, d});
        for (size_t i = 0; i < x.numel(); ++i) x[i] = uniform01(rng);
        for (size_t i = 0; i < y.numel(); ++i) y[i] = standard_normal(rng);
        for (size_t i = 0; i < eps.numel(); ++i) eps[i] = standard_normal(rng);
        const LossConfig cfg{std::exp(uniform(rng, -3, 3)), uniform(rng, 0.05, 1.0)};
        auto g = p.zeros_like();
        net.loss(p, x, y, eps, cfg, &g);
        const auto base = net.relu_mask(p, x, eps);
        for (const auto& [name, t] : p.entries()) {
            for (size_t i = 0; i < t.numel(); ++i) {
                const double orig = t[i];
                p.mutable_at(name)[i] = orig + h;
                const double lp = net.loss(p, x, y, eps, cfg).total;
                bool smooth = net.relu_mask(p, x, eps) == base;
                p.mutable_at(name)[i] = orig - h;
                const double lm = net.loss(p, x, y, eps, cfg).total;
                smooth = smooth && net.relu_mask(p, x, eps) == base;
                p.mutable_at(name)[i] = orig;
                // A ReLU switching inside the stencil makes the difference quotient meaningless.
                if (!smooth) {
                    ++skipped;
                    continue;
                }
                const double fd = (lp - lm) / (2 * h), an = g.at(name)[i];
                worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
                ++checked;
            }
        }
    }
    const bool coverage = skipped * 20 < checked + skipped;
    return {worst < 1e-4 && coverage,
            fmt("%d archs (<= %zu params), %zu coords checked, %zu kink-skipped, max rel err %.2e", archs, max_params,
                checked, skipped, worst)};
}

// ---------------------------------------------------------------- 2

Outcome kl_identities() {
    const std::vector<double> zero{0.0};
    const double k0 = kl_diag_gaussian<double>(zero, zero);
    const std::vector<double> lv4{std::log(4.0)};
    const double k4 = kl_diag_gaussian<double>(zero, lv4);
    const double e4 = 0.5 * (3.0 - std::log(4.0));

    // Monte Carlo: E_q[log q(z) - log p(z)] with z drawn through reparameterize.
    const std::vector<double> mu{0.5, -1.0, 0.3}, lv{0.2, -0.5, 0.7};
    const double closed = kl_diag_gaussian<double>(mu, lv);
    std::mt19937_64 rng(7);
    const size_t n = 100000;
    double acc = 0;
    std::vector<double> eps(3);
    for (size_t s = 0; s < n; ++s) {
        for (double& e : eps) e = standard_normal(rng);
        const auto z = reparameterize<double>(mu, lv, eps);
        double lr = 0;
        for (size_t j = 0; j < 3; ++j) {
            const double var = std::exp(lv[j]);
            const double lq = -0.5 * (std::log(2 * kPi * var) + (z[j] - mu[j]) * (z[j] - mu[j]) / var);
            const double lp = -0.5 * (std::log(2 * kPi) + z[j] * z[j]);
            lr += lq - lp;
        }
        acc += lr;
    }
    const double mc = acc / static_cast<double>(n);
    const bool ok = k0 == 0.0 && std::abs(k4 - e4) <= 1e-9 && std::abs(mc - closed) <= 0.01;
    return {ok, fmt("KL(0,0)=%g, KL(0,ln4)-0.5(3-ln4)=%.1e, MC %.4f vs closed %.4f (1e5 samples)", k0, k4 - e4, mc,
                    closed)};
}

// ---------------------------------------------------------------- 3

Outcome desk_training(Workspace& ws) {
    const SvaeModel& m = ws.model();
    const MetricsReport r = evaluate_set(m, ws.split(Split::Test));
    double lo = 1;
    std::ostringstream axes;
    for (size_t a = 0; a < kWrenchDim; ++a) {
        lo = std::min(lo, r.r2[a]);
        axes << kWrenchAxes[a] << ' ' << fmt("%.3f", r.r2[a]) << (a + 1 < kWrenchDim ? ", " : "");
    }
    const auto secs = ws.train_seconds();
    const bool in_time = !secs || *secs < 1800;
    return {lo >= 0.9 && in_time && m.checkpoint().meta.epochs <= 30,
            "test R2 " + axes.str() + (secs ? fmt("; trained in %.0f s", *secs) : std::string("; reused model"))};
}

// ---------------------------------------------------------------- 4

Outcome alpha_direction(Workspace& ws) {
    const auto t0 = Clock::now();
    SweepSets sets{&ws.split(Split::Train), &ws.split(Split::Validation), &ws.split(Split::Test)};
    TrainHyper h;
    h.epochs = 20;
    const auto rows = alpha_sweep({0.01, 1.0, 10.0, 100.0}, sets, SVAEArchitecture{}, 0.1, h, false);
    std::map<double, MetricsReport> by;
    for (const auto& r : rows) by[r.alpha] = r.test;
    const bool recon = by[10.0].recon_mse < by[0.01].recon_mse;
    const bool r2 = by[1.0].mean_r2 > by[100.0].mean_r2;
    const double secs = seconds_since(t0);
    return {recon && r2 && secs < 3600,
            fmt("recon MSE a=10 %.5f vs a=0.01 %.5f; mean R2 a=1 %.4f vs a=100 %.4f; %.0f s", by[10.0].recon_mse,
                by[0.01].recon_mse, by[1.0].mean_r2, by[100.0].mean_r2, secs)};
}

// ---------------------------------------------------------------- 5

// Independent piecewise-linear interpolation of the force law.
double oracle_force(const GraspPlant& g, double p) {
    if (p <= g.nodes.front().position_mm) return 0.0;
    for (size_t i = 1; i < g.nodes.size(); ++i) {
        const auto& a = g.nodes[i - 1];
        const auto& b = g.nodes[i];
        if (p <= b.position_mm || i + 1 == g.nodes.size())
            return a.force_n + (b.force_n - a.force_n) / (b.position_mm - a.position_mm) * (p - a.position_mm);
    }
    return g.nodes.back().force_n;
}

Outcome contraction_suite() {
    const auto t0 = Clock::now();
    const double delta = 0.05;
    std::mt19937_64 rng(99);
    size_t ok = 0, mismatched = 0;
    const size_t plants = 200;
    for (size_t i = 0; i < plants; ++i) {
        GraspPlant g;
        g.p_contact = uniform(rng, 0.0, 30.0);
        g.nodes = {{g.p_contact, 0.0}};
        const int segs = 1 + static_cast<int>(uniform_index(rng, 6));
        double lmax = 0;
        for (int s = 0; s < segs; ++s) {
            const double len = uniform(rng, 0.3, 6.0), slope = uniform(rng, 0.02, 3.0);
            lmax = std::max(lmax, slope);
            g.nodes.push_back({g.nodes.back().position_mm + len, g.nodes.back().force_n + slope * len});
        }
        g.p_max = g.nodes.back().position_mm;
        const double gain = lmax * uniform(rng, 0.51, 3.0);
        const double f_ref = uniform(rng, 0.0, g.nodes.back().force_n);
        const ContractionRun run = contraction_run(g, gain, f_ref, delta, 100000);

        // Oracle iteration from the contact onset.
        std::vector<double> errs;
        double p = g.p_contact;
        for (size_t k = 0; k <= 100000; ++k) {
            const double e = f_ref - oracle_force(g, p);
            errs.push_back(e);
            if (std::abs(e) <= delta) break;
            p = std::clamp(p + e / gain, 0.0, g.p_max);
        }
        bool same = errs.size() == run.errors.size();
        for (size_t k = 0; same && k < errs.size(); ++k) same = std::abs(errs[k] - run.errors[k]) <= 1e-9;
        bool decreasing = true;
        for (size_t k = 1; k < errs.size(); ++k) decreasing = decreasing && std::abs(errs[k]) < std::abs(errs[k - 1]);
        if (!same) ++mismatched;
        if (same && run.gain_condition && run.converged && run.strictly_decreasing && decreasing &&
            std::abs(errs.back()) <= delta)
            ++ok;
    }
    const ContractionReport rep = verify_contraction(200, 1);
    const ContractionRun below = contraction_run(GraspPlant::linear(10.0, 30.0, 1.0), 0.4, 1.0, delta);
    const double secs = seconds_since(t0);
    return {ok == plants && rep.pass_rate() == 1.0 && !below.converged && !rep.boundary_below.converged &&
                secs < 60,
            fmt("%zu/%zu random runs converge monotonically (%zu oracle mismatches); library suite %zu/%zu; "
                "K=0.4 L=1 converged=%s; %.1f s",
                ok, plants, mismatched, rep.eligible_passed, rep.eligible, below.converged ? "yes" : "no", secs)};
}

// ---------------------------------------------------------------- 6

struct SettleSummary {
    bool all_within = true;
    size_t worst = 0;
};

SettleSummary settle_summary(const Trace& tr, size_t limit) {
    SettleSummary s;
    for (const auto& st : settle_stats(tr, 0.05)) {
        if (!st.ticks_to_settle || *st.ticks_to_settle > limit) s.all_within = false;
        if (st.ticks_to_settle) s.worst = std::max(s.worst, *st.ticks_to_settle);
    }
    return s;
}

Outcome force_tracking(Workspace& ws) {
    const std::vector<Setpoint> plan{{0.4, 1.0}, {1.6, 1.0}, {3.0, 1.0}};
    const GraspPlant plant;
    const ControllerConfig cfg;
    OracleEstimator o1, o2;
    const Trace a = run_force_tracking(plan, plant, cfg, o1);
    const Trace b = run_force_tracking(plan, plant, cfg, o2);
    const auto so = settle_summary(a, 10);

    SvaeEstimator s1(ws.model(), ws.plant(), DomainTag::land()), s2(ws.model(), ws.plant(), DomainTag::land());
    const Trace c = run_force_tracking(plan, plant, cfg, s1);
    const Trace d = run_force_tracking(plan, plant, cfg, s2);
    const auto ss = settle_summary(c, 30);
    const bool det = a == b && c == d;
    return {so.all_within && ss.all_within && det,
            fmt("oracle worst %zu ticks, svae worst %zu ticks%s; reruns %s", so.worst, ss.worst,
                ss.all_within ? "" : " (some step never settled)", det ? "identical" : "differ")};
}

// ---------------------------------------------------------------- 7

Outcome grasp_direction(Workspace& ws) {
    const auto t0 = Clock::now();
    const SvaeModel& model = ws.model();
    const FingerPlantConfig plant = ws.plant();
    EstimatorFactory make = [&](const GraspObject& obj, const DomainTag& dom) -> std::unique_ptr<ForceEstimator> {
        return std::make_unique<SvaeEstimator>(model, plant, dom, obj.contact, FrameTransform{}, 1);
    };
    const GraspTable t = grasp_experiment(default_objects(), 10, 5.0, 1, ControllerConfig{},
                                          {DomainTag::land(), DomainTag::water()}, make);
    bool ok = true;
    std::string detail;
    for (const char* dom : {"land", "water"}) {
        const double open = t.average(GraspMode::OpenLoop, dom), closed = t.average(GraspMode::ClosedLoop, dom);
        ok = ok && closed > open && closed >= 0.8;
        detail += fmt("%s open %.0f%% closed %.0f%%; ", dom, 100 * open, 100 * closed);
    }
    const double secs = seconds_since(t0);
    return {ok && secs < 300, detail + fmt("%.0f s", secs)};
}

// ---------------------------------------------------------------- 8

Outcome domain_shift(Workspace& ws) {
    const Dataset& ds = ws.data();
    std::vector<TactileImage> land, water;
    std::vector<Wrench> wrenches;
    for (size_t i : ds.indices(Split::Test)) {
        const auto& r = ds.manifest.samples[i];
        land.push_back(ds.images[i]);
        water.push_back(observe(r.pose, ws.plant(), DomainTag::water(), sample_render_seed(ds.manifest.seed, r.id)));
        wrenches.push_back(r.wrench);
    }
    const DomainShiftReport rep = domain_shift_report(ws.model(), land, water, wrenches);
    const double gap = std::abs(rep.water.mean_r2 - rep.land.mean_r2);
    return {rep.mean_cosine >= 0.9 && gap <= 0.1,
            fmt("%zu pairs, mean cosine %.4f, mean R2 land %.4f water %.4f", land.size(), rep.mean_cosine,
                rep.land.mean_r2, rep.water.mean_r2)};
}

// ---------------------------------------------------------------- 9

Outcome realtime_budget(Workspace& ws) {
    SvaeEstimator est(ws.model(), ws.plant(), DomainTag::land());
    double sink = 0;
    for (uint64_t k = 0; k < 20; ++k) sink += est.estimate(1.0, k);
    const int ticks = 600;
    const auto t0 = Clock::now();
    for (int k = 0; k < ticks; ++k) sink += est.estimate(3.0 * k / ticks, static_cast<uint64_t>(k));
    const double mean_ms = 1000.0 * seconds_since(t0) / ticks;
    return {mean_ms <= 8.33 && std::isfinite(sink), fmt("mean tick %.3f ms over %d ticks", mean_ms, ticks)};
}

// ---------------------------------------------------------------- 10

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = testutil::read_file(e.path());
    return out;
}

Outcome format_roundtrips(Workspace& ws) {
    // Checkpoint: a trained desk-size model plus a random micro one.
    bool ck_ok = true;
    for (int k = 0; k < 2; ++k) {
        Checkpoint ck;
        if (k == 0) {
            ck = ws.model().checkpoint();
        } else {
            ck.arch = SVAEArchitecture::micro();
            ck.params = Svae(ck.arch).init_params<float>(77);
        }
        const fs::path p = ws.dir() / ("roundtrip" + std::to_string(k) + ".svae");
        save_checkpoint(ck, p);
        const Checkpoint back = load_checkpoint(p);
        const fs::path q = ws.dir() / ("roundtrip" + std::to_string(k) + "b.svae");
        save_checkpoint(back, q);
        const std::string a = testutil::read_file(p), b = testutil::read_file(q);
        ck_ok = ck_ok && back == ck && back.params == ck.params && !a.empty() && a == b;
    }

    const fs::path d1 = ws.dir() / "regen1", d2 = ws.dir() / "regen2";
    fs::remove_all(d1);
    fs::remove_all(d2);
    FingerPlantConfig plant = ws.plant();
    generate_dataset(300, plant, DomainTag::land(), 42, d1, 1);
    generate_dataset(300, plant, DomainTag::land(), 42, d2, 2);
    const auto t1 = tree_bytes(d1), t2 = tree_bytes(d2);
    const bool ds_ok = t1 == t2 && t1.count("manifest.json") == 1 && t1.size() == 301;
    fs::remove_all(d1);
    fs::remove_all(d2);
    return {ck_ok && ds_ok, fmt("checkpoint bit-exact: %s; dataset regeneration (%zu files) identical: %s",
                                ck_ok ? "yes" : "no", t1.size(), ds_ok ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv) {
    std::optional<fs::path> work;
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--work" && i + 1 < argc) {
            work = argv[++i];
        } else {
            try {
                wanted.insert(std::stoi(a));
            } catch (const std::exception&) {
                std::fprintf(stderr, "usage: acceptance [--work DIR] [criterion ...]\n");
                return 2;
            }
        }
    }
    std::optional<testutil::TempDir> tmp;
    if (!work) {
        tmp.emplace("acceptance");
        work = tmp->path();
    }
    Workspace ws(*work);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"gradient fidelity", gradient_fidelity},
        {"KL identities", kl_identities},
        {"desk training target", [&] { return desk_training(ws); }},
        {"alpha trade-off direction", [&] { return alpha_direction(ws); }},
        {"contraction suite", contraction_suite},
        {"force tracking", [&] { return force_tracking(ws); }},
        {"grasp experiment direction", [&] { return grasp_direction(ws); }},
        {"domain shift", [&] { return domain_shift(ws); }},
        {"real-time budget", [&] { return realtime_budget(ws); }},
        {"format round-trips", [&] { return format_roundtrips(ws); }},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!wanted.empty() && !wanted.count(id)) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
