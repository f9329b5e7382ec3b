#include "run_config.hpp"

#include "tactile/analysis.hpp"
#include "tactile/control.hpp"
#include "tactile/dataset.hpp"
#include "tactile/errors.hpp"
#include "tactile/image.hpp"
#include "tactile/svae.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace tactile;
using tactile::cli::RunConfig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Options {
    std::string config;
    std::optional<int> threads;
    std::string out;

    std::optional<size_t> n;
    std::optional<uint64_t> seed;
    std::string domain = "land";

    std::string data;
    std::string ckpt;
    std::string split = "test";
    std::optional<double> alpha, beta, lr;
    std::optional<int> latent, epochs, batch;

    std::vector<int> dims;
    std::vector<double> alphas;

    std::string estimator = "oracle";
    std::vector<double> setpoints;
    std::optional<double> duration, f_ref;
    std::optional<double> gain, lambda;
    std::optional<size_t> plants;

    std::optional<int> trials;
    std::optional<double> sigma;
    std::vector<std::string> domains{"land", "water"};
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write " + p.string());
    f << s;
    if (!f) throw IoError("failed writing " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

void make_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create " + p.string() + ": " + ec.message());
}

/// Resolved config written beside the outputs.
void echo_config(const RunConfig& cfg, const fs::path& where) { write_json(where, cli::to_json(cfg)); }

fs::path echo_path_for_file(const fs::path& out) { return fs::path(out.string() + ".config.json"); }

DomainTag domain_named(const std::string& name, const RunConfig& cfg) {
    if (name == "land") return DomainTag::land();
    if (name == "water") {
        DomainTag w = cfg.water;
        w.variant = DomainTag::Variant::Water;
        return w;
    }
    throw ConfigError("unknown domain '" + name + "' (land|water)");
}

Split split_named(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw ConfigError("unknown split '" + s + "' (train|validation|test)");
}

int resolve_threads(const Options& o, const RunConfig& cfg) {
    if (o.threads) return *o.threads;
    if (const char* env = std::getenv("SVAE_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError(std::string("SVAE_THREADS must be a positive integer, got '") + env + "'");
        return static_cast<int>(v);
    }
    return cfg.threads;
}

RunConfig base_config(const Options& o) {
    RunConfig cfg = o.config.empty() ? RunConfig{} : cli::load_run_config(o.config);
    if (o.n) cfg.data.n = *o.n;
    if (o.alpha) cfg.model.loss.alpha = *o.alpha;
    if (o.beta) cfg.model.loss.beta = *o.beta;
    if (o.lr) cfg.model.hyper.adam.learning_rate = *o.lr;
    if (o.latent) cfg.model.arch.latent_dim = *o.latent;
    if (o.epochs) cfg.model.hyper.epochs = *o.epochs;
    if (o.batch) cfg.model.hyper.batch_size = *o.batch;
    if (o.gain) cfg.control.controller.gain = *o.gain;
    if (o.plants) cfg.control.prop1_plants = *o.plants;
    if (o.trials) cfg.grasp.trials = *o.trials;
    if (o.sigma) cfg.grasp.sigma_mm = *o.sigma;
    cfg.threads = resolve_threads(o, cfg);
    // Keep traversal dims inside a smaller latent space.
    std::erase_if(cfg.latent.traverse_dims, [&](int d) { return d >= cfg.model.arch.latent_dim; });
    cfg.validate();
    return cfg;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

Checkpoint read_checkpoint(const std::string& path) {
    require(!path.empty(), "--ckpt is required");
    return load_checkpoint(path);
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << std::fixed << v;
    return os.str();
}

// ---------------------------------------------------------------- commands

int cmd_gen_data(const Options& o) {
    RunConfig cfg = base_config(o);
    if (o.seed) cfg.data.seed = *o.seed;
    require(!o.out.empty(), "--out is required");
    const DomainTag dom = domain_named(o.domain, cfg);
    const auto m = generate_dataset(cfg.data.n, cfg.plant, dom, cfg.data.seed, o.out, cfg.threads);
    echo_config(cfg, fs::path(o.out) / "config.json");
    const auto s = split_sizes(m.count);
    std::printf("gen-data: %zu %s samples (train %zu / validation %zu / test %zu), seed %llu -> %s\n", m.count,
                dom.name().c_str(), s[0], s[1], s[2], static_cast<unsigned long long>(m.seed), o.out.c_str());
    return 0;
}

int cmd_train(const Options& o) {
    RunConfig cfg = base_config(o);
    if (o.seed) cfg.model.hyper.seed = *o.seed;
    require(!o.data.empty(), "--data is required");
    require(!o.out.empty(), "--out is required");
    const Dataset ds = load_dataset(o.data, cfg.plant);
    const LabeledSet tr = ds.split(Split::Train), va = ds.split(Split::Validation);
    const Checkpoint ck = train(tr, va, cfg.model.arch, cfg.model.loss, cfg.model.hyper, [](const EpochRecord& e) {
        std::fprintf(stderr, "epoch %d  train %.5f  validation %.5f  mean R2 %s\n", e.epoch, e.train.total,
                     e.validation.total, e.validation_mean_r2 ? fmt(*e.validation_mean_r2).c_str() : "n/a");
    });
    const fs::path out(o.out);
    if (out.has_parent_path()) make_dir(out.parent_path());
    save_checkpoint(ck, out);
    echo_config(cfg, echo_path_for_file(out));
    const auto& last = ck.meta.history.back();
    std::printf("train: %d epochs on %zu samples, validation loss %.5f, mean R2 %s -> %s\n", ck.meta.epochs,
                tr.size(), last.validation.total,
                last.validation_mean_r2 ? fmt(*last.validation_mean_r2).c_str() : "n/a", o.out.c_str());
    return 0;
}

int cmd_eval(const Options& o) {
    RunConfig cfg = base_config(o);
    require(!o.data.empty(), "--data is required");
    require(!o.out.empty(), "--out is required");
    const Split split = split_named(o.split);
    const SvaeModel model(read_checkpoint(o.ckpt));
    const Dataset ds = load_dataset(o.data, cfg.plant);
    const LabeledSet set = ds.split(split);
    if (set.size() == 0) throw DataError("split '" + o.split + "' is empty");

    const Evaluation ev = evaluate(model, set.images, cfg.threads);
    const MetricsReport rep = metrics_report(ev.predictions, set.wrenches, ev.recon_mse);
    static const char* axes[] = {"fx", "fy", "fz", "tx", "ty", "tz"};
    std::vector<std::pair<std::string, std::vector<BinStats>>> hist;
    json hj = json::object();
    for (size_t a = 0; a < kWrenchDim; ++a) {
        std::vector<double> p, t;
        for (size_t i = 0; i < set.size(); ++i) {
            p.push_back(ev.predictions[i].values()[a]);
            t.push_back(set.wrenches[i].values()[a]);
        }
        auto bins = error_histogram(p, t, a < 3 ? default_force_bins() : default_torque_bins());
        hj[axes[a]] = to_json(bins);
        hist.emplace_back(axes[a], std::move(bins));
    }
    make_dir(o.out);
    json mj = to_json(rep);
    mj["split"] = o.split;
    mj["checkpoint"] = o.ckpt;
    write_json(fs::path(o.out) / "metrics.json", mj);
    write_text(fs::path(o.out) / "metrics.csv", metrics_csv(rep));
    write_json(fs::path(o.out) / "histogram.json", hj);
    write_text(fs::path(o.out) / "histogram.csv", histogram_csv(hist));
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("eval: %zu %s samples, mean R2 %s (min axis %s), recon MSE %.5f -> %s\n", rep.count, o.split.c_str(),
                fmt(rep.mean_r2).c_str(), fmt(*std::min_element(rep.r2.begin(), rep.r2.end())).c_str(), rep.recon_mse,
                o.out.c_str());
    return 0;
}

int cmd_latent_corr(const Options& o) {
    RunConfig cfg = base_config(o);
    require(!o.data.empty(), "--data is required");
    require(!o.out.empty(), "--out is required");
    const Split split = split_named(o.split);
    const SvaeModel model(read_checkpoint(o.ckpt));
    const Dataset ds = load_dataset(o.data, cfg.plant);
    const LabeledSet set = ds.split(split);
    if (set.size() < 2) throw DataError("split '" + o.split + "' needs at least 2 samples");
    const auto lat = latent_correlation(model, set.images, cfg.threads);
    const auto lw = latent_wrench_correlation(model, set, cfg.threads);
    make_dir(o.out);
    write_json(fs::path(o.out) / "latent_corr.json", to_json(lat));
    write_text(fs::path(o.out) / "latent_corr.csv", correlation_csv(lat));
    write_json(fs::path(o.out) / "latent_wrench_corr.json", to_json(lw));
    write_text(fs::path(o.out) / "latent_wrench_corr.csv", correlation_csv(lw));
    echo_config(cfg, fs::path(o.out) / "config.json");
    size_t flagged = 0;
    for (uint8_t f : lat.flagged) flagged += f;
    std::printf("latent corr: d=%zu, mean |off-diagonal| %.4f, %zu flagged entries -> %s\n", lat.rows,
                lat.mean_abs_off_diagonal(), flagged, o.out.c_str());
    return 0;
}

int cmd_latent_traverse(const Options& o) {
    RunConfig cfg = base_config(o);
    require(!o.out.empty(), "--out is required");
    const SvaeModel model(read_checkpoint(o.ckpt));
    std::vector<int> dims = o.dims.empty() ? cfg.latent.traverse_dims : o.dims;
    if (!o.dims.empty()) cfg.latent.traverse_dims = o.dims;
    for (int d : dims)
        require(d >= 0 && d < model.latent_dim(), "traverse dim " + std::to_string(d) + " outside [0, " +
                                                      std::to_string(model.latent_dim()) + ")");
    const auto grid = latent_traversal(model, dims, cfg.latent.lo, cfg.latent.hi, cfg.latent.steps);
    make_dir(o.out);
    for (size_t k = 0; k < dims.size(); ++k)
        write_pgm(fs::path(o.out) / ("traverse_dim" + std::to_string(dims[k]) + ".pgm"), mosaic({grid[k]}));
    write_pgm(fs::path(o.out) / "traverse.pgm", mosaic(grid));
    json values = traversal_values(cfg.latent.lo, cfg.latent.hi, cfg.latent.steps);
    write_json(fs::path(o.out) / "traverse.json", {{"dims", dims}, {"values", values}});
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("latent traverse: %zu dims x %d steps over [%g, %g] -> %s\n", dims.size(), cfg.latent.steps,
                cfg.latent.lo, cfg.latent.hi, o.out.c_str());
    return 0;
}

int cmd_latent_shift(const Options& o) {
    RunConfig cfg = base_config(o);
    require(!o.data.empty(), "--data is required");
    require(!o.out.empty(), "--out is required");
    const Split split = split_named(o.split);
    const SvaeModel model(read_checkpoint(o.ckpt));
    const Dataset ds = load_dataset(o.data, cfg.plant);
    if (ds.manifest.domain.variant != DomainTag::Variant::Land) throw DataError("latent shift expects a land dataset");
    const DomainTag water = domain_named("water", cfg);
    std::vector<TactileImage> land, wet;
    std::vector<Wrench> wrenches;
    for (size_t i : ds.indices(split)) {
        const auto& r = ds.manifest.samples[i];
        land.push_back(ds.images[i]);
        wet.push_back(observe(r.pose, cfg.plant, water, sample_render_seed(ds.manifest.seed, r.id)));
        wrenches.push_back(r.wrench);
    }
    if (land.size() < 2) throw DataError("split '" + o.split + "' needs at least 2 samples");
    const auto rep = domain_shift_report(model, land, wet, wrenches, cfg.threads);
    make_dir(o.out);
    write_json(fs::path(o.out) / "domain_shift.json", to_json(rep));
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("latent shift: %zu pairs, mean cosine %.4f, mean R2 land %.4f water %.4f -> %s\n", land.size(),
                rep.mean_cosine, rep.land.mean_r2, rep.water.mean_r2, o.out.c_str());
    return 0;
}

int cmd_sweep(const Options& o, bool alpha) {
    RunConfig cfg = base_config(o);
    if (o.seed) cfg.model.hyper.seed = *o.seed;
    if (!o.alphas.empty()) cfg.sweep.alphas = o.alphas;
    if (!o.dims.empty()) cfg.sweep.latent_dims = o.dims;
    if (o.epochs) cfg.sweep.epochs = *o.epochs;
    cfg.validate();
    require(!o.data.empty(), "--data is required");
    require(!o.out.empty(), "--out is required");
    const Dataset ds = load_dataset(o.data, cfg.plant);
    const LabeledSet tr = ds.split(Split::Train), va = ds.split(Split::Validation), te = ds.split(Split::Test);
    SweepSets sets{&tr, &va, &te};
    TrainHyper h = cfg.model.hyper;
    h.epochs = cfg.sweep.epochs;
    const auto rows = alpha ? alpha_sweep(cfg.sweep.alphas, sets, cfg.model.arch, cfg.model.loss.beta, h,
                                          cfg.sweep.baselines, cfg.threads)
                            : latent_dim_sweep(cfg.sweep.latent_dims, sets, cfg.model.arch, cfg.sweep.latent_alpha,
                                               cfg.model.loss.beta, h, cfg.threads);
    make_dir(o.out);
    const std::string stem = alpha ? "sweep_alpha" : "sweep_latent_dim";
    write_json(fs::path(o.out) / (stem + ".json"), to_json(rows));
    write_text(fs::path(o.out) / (stem + ".csv"), sweep_csv(rows));
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("sweep %s: %zu runs x %d epochs -> %s\n", alpha ? "alpha" : "latent-dim", rows.size(),
                cfg.sweep.epochs, o.out.c_str());
    return 0;
}

struct EstimatorHolder {
    std::optional<SvaeModel> model;
    std::unique_ptr<ForceEstimator> make(const RunConfig& cfg, const DomainTag& dom, ContactGeometry contact,
                                         uint64_t seed) const {
        if (!model) return std::make_unique<OracleEstimator>();
        return std::make_unique<SvaeEstimator>(*model, cfg.plant, dom, contact, FrameTransform{}, seed);
    }
};

EstimatorHolder estimator_for(const Options& o) {
    EstimatorHolder h;
    if (o.estimator == "svae") h.model.emplace(read_checkpoint(o.ckpt));
    else require(o.estimator == "oracle", "unknown estimator '" + o.estimator + "' (oracle|svae)");
    return h;
}

json settle_json(const std::vector<SettleStats>& stats) {
    json a = json::array();
    for (const auto& s : stats) {
        json e{{"tick", s.event_tick}, {"event", s.event}, {"held", s.held}};
        e["ticks_to_settle"] = s.ticks_to_settle ? json(*s.ticks_to_settle) : json(nullptr);
        a.push_back(e);
    }
    return a;
}

int cmd_control_track(const Options& o, bool disturb) {
    RunConfig cfg = base_config(o);
    if (!o.setpoints.empty()) {
        const double d = o.duration.value_or(1.0);
        cfg.control.setpoints.clear();
        for (double f : o.setpoints) cfg.control.setpoints.push_back({f, d});
    } else if (o.duration && !disturb) {
        for (auto& s : cfg.control.setpoints) s.duration_s = *o.duration;
    }
    if (disturb && o.f_ref) cfg.control.disturb_force = *o.f_ref;
    if (disturb && o.duration) cfg.control.disturb_duration_s = *o.duration;
    cfg.validate();
    require(!o.out.empty(), "--out is required");
    const DomainTag dom = domain_named(o.domain, cfg);
    const EstimatorHolder holder = estimator_for(o);
    auto est = holder.make(cfg, dom, cfg.control.contact, cfg.data.seed);

    GraspPlant plant = cfg.control.plant;
    Trace tr;
    if (disturb) {
        plant.schedule = rotation_disturbance(cfg.control.mm_per_degree);
        tr = run_disturbance(plant, cfg.control.disturb_force, cfg.control.disturb_duration_s, cfg.control.controller,
                             *est);
    } else {
        tr = run_force_tracking(cfg.control.setpoints, plant, cfg.control.controller, *est);
    }
    const auto stats = settle_stats(tr, cfg.control.controller.tolerance);
    make_dir(o.out);
    write_text(fs::path(o.out) / "trace.csv", tr.to_csv());
    write_json(fs::path(o.out) / "settle.json",
               {{"estimator", est->name()}, {"domain", dom.name()}, {"events", settle_json(stats)}});
    echo_config(cfg, fs::path(o.out) / "config.json");
    size_t worst = 0;
    bool all = true;
    for (const auto& s : stats) {
        if (s.ticks_to_settle) worst = std::max(worst, *s.ticks_to_settle);
        all = all && s.ticks_to_settle && s.held;
    }
    std::printf("control %s: %zu ticks, %zu events, %s, worst settle %zu ticks (%s) -> %s\n",
                disturb ? "disturb" : "track", tr.rows.size(), stats.size(), all ? "all settled and held" : "NOT all settled",
                worst, est->name().c_str(), o.out.c_str());
    return 0;
}

json run_json(const ContractionRun& r) {
    return {{"lambda_min", r.lambda_min},       {"lambda_max", r.lambda_max},
            {"gain", r.gain},                   {"f_ref", r.f_ref},
            {"gain_condition", r.gain_condition}, {"converged", r.converged},
            {"strictly_decreasing", r.strictly_decreasing}, {"within_bound", r.within_bound},
            {"steps", r.steps}};
}

int cmd_control_prop1(const Options& o) {
    RunConfig cfg = base_config(o);
    if (o.seed) cfg.control.prop1_seed = *o.seed;
    require(!o.lambda || *o.lambda > 0, "--lambda must be positive");
    const double gain = o.gain.value_or(cfg.control.controller.gain);
    require(!o.out.empty(), "--out is required");
    const ContractionReport rep = verify_contraction(cfg.control.prop1_plants, cfg.control.prop1_seed,
                                                     cfg.control.controller.tolerance, cfg.control.prop1_slope_max);
    json j{{"plants", rep.runs.size()},
           {"eligible", rep.eligible},
           {"eligible_passed", rep.eligible_passed},
           {"pass_rate", rep.pass_rate()},
           {"max_steps", rep.max_steps},
           {"boundary_equal", run_json(rep.boundary_equal)},
           {"boundary_below", run_json(rep.boundary_below)}};
    std::string custom;
    if (o.lambda) {
        const GraspPlant lin = GraspPlant::linear(10, 30, *o.lambda);
        const double f_ref = std::min(1.0, 0.5 * lin.max_force());
        const ContractionRun r = contraction_run(lin, gain, f_ref, cfg.control.controller.tolerance);
        j["linear_case"] = run_json(r);
        custom = ", linear K=" + fmt(gain, 3) + " lambda=" + fmt(*o.lambda, 3) + ": " +
                 (r.converged && r.strictly_decreasing ? "converges" : "NON-CONVERGENT (gain condition " +
                                                                           std::string(r.gain_condition ? "met" : "violated") + ")");
    }
    json runs = json::array();
    for (const auto& r : rep.runs) runs.push_back(run_json(r));
    j["runs"] = runs;
    make_dir(o.out);
    write_json(fs::path(o.out) / "prop1.json", j);
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("control prop1: %zu/%zu eligible runs contract, max %zu steps, K=0.5/0.4 boundary %s%s -> %s\n",
                rep.eligible_passed, rep.eligible, rep.max_steps,
                (!rep.boundary_equal.converged && !rep.boundary_below.converged) ? "flagged" : "NOT flagged",
                custom.c_str(), o.out.c_str());
    return 0;
}

int cmd_grasp(const Options& o) {
    RunConfig cfg = base_config(o);
    if (o.seed) cfg.grasp.seed = *o.seed;
    cfg.validate();
    require(!o.out.empty(), "--out is required");
    std::vector<DomainTag> domains;
    for (const auto& d : o.domains) domains.push_back(domain_named(d, cfg));
    require(!domains.empty(), "--domains must not be empty");
    const EstimatorHolder holder = estimator_for(o);
    const uint64_t seed = cfg.grasp.seed;
    EstimatorFactory factory = [&](const GraspObject& obj, const DomainTag& dom) {
        return holder.make(cfg, dom, obj.contact, seed);
    };
    const GraspTable table = grasp_experiment(cfg.grasp.objects, cfg.grasp.trials, cfg.grasp.sigma_mm, seed,
                                              cfg.control.controller, domains, factory, cfg.threads);
    json cells = json::array();
    std::ostringstream csv;
    csv << "domain,mode,object,trials,successes,rate\n";
    for (const auto& c : table.cells) {
        cells.push_back({{"domain", c.domain}, {"mode", to_string(c.mode)}, {"object", c.object}, {"trials", c.trials},
                         {"successes", c.successes}, {"rate", c.rate()}});
        csv << c.domain << ',' << to_string(c.mode) << ',' << c.object << ',' << c.trials << ',' << c.successes << ','
            << c.rate() << '\n';
    }
    json avg = json::object();
    std::string line;
    for (const auto& d : domains) {
        const double open = table.average(GraspMode::OpenLoop, d.name());
        const double closed = table.average(GraspMode::ClosedLoop, d.name());
        avg[d.name()] = {{"open_loop", open}, {"closed_loop", closed}};
        line += " " + d.name() + " open " + fmt(100 * open, 0) + "% closed " + fmt(100 * closed, 0) + "%;";
    }
    make_dir(o.out);
    write_json(fs::path(o.out) / "grasp.json", {{"estimator", o.estimator}, {"cells", cells}, {"average", avg}});
    write_text(fs::path(o.out) / "grasp.csv", csv.str());
    echo_config(cfg, fs::path(o.out) / "config.json");
    std::printf("grasp: %zu objects x %d trials (%s),%s -> %s\n", cfg.grasp.objects.size(), cfg.grasp.trials,
                o.estimator.c_str(), line.c_str(), o.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic tactile finger: data, SVAE training, analysis and force control"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    app.add_option("--threads", o.threads, "worker cap (falls back to SVAE_THREADS)")->check(CLI::PositiveNumber);

    auto out_opt = [&](CLI::App* c, const char* help) { c->add_option("--out", o.out, help); };
    auto model_opts = [&](CLI::App* c) {
        c->add_option("--alpha", o.alpha, "reconstruction/prediction balance");
        c->add_option("--beta", o.beta, "KL weight");
        c->add_option("--latent", o.latent, "latent dimension");
        c->add_option("--epochs", o.epochs, "training epochs");
        c->add_option("--batch", o.batch, "batch size");
        c->add_option("--lr", o.lr, "initial learning rate");
        c->add_option("--seed", o.seed, "training seed");
    };

    auto* gen = app.add_subcommand("gen-data", "render a labelled dataset");
    gen->add_option("--n", o.n, "sample count");
    gen->add_option("--seed", o.seed, "dataset seed");
    gen->add_option("--domain", o.domain, "land|water");
    out_opt(gen, "output directory");

    auto* tr = app.add_subcommand("train", "train an SVAE checkpoint");
    tr->add_option("--data", o.data, "dataset directory");
    model_opts(tr);
    out_opt(tr, "checkpoint path");

    auto* ev = app.add_subcommand("eval", "metrics and error histograms of a checkpoint");
    ev->add_option("--ckpt", o.ckpt, "checkpoint");
    ev->add_option("--data", o.data, "dataset directory");
    ev->add_option("--split", o.split, "train|validation|test");
    out_opt(ev, "output directory");

    auto* lat = app.add_subcommand("latent", "latent space analysis");
    lat->require_subcommand(1);
    auto* corr = lat->add_subcommand("corr", "latent and latent-wrench correlation");
    auto* trav = lat->add_subcommand("traverse", "decode sweeps of single latent coordinates");
    auto* shift = lat->add_subcommand("shift", "land/water latent comparison");
    for (auto* c : {corr, trav, shift}) {
        c->add_option("--ckpt", o.ckpt, "checkpoint");
        out_opt(c, "output directory");
    }
    for (auto* c : {corr, shift}) {
        c->add_option("--data", o.data, "dataset directory");
        c->add_option("--split", o.split, "train|validation|test");
    }
    trav->add_option("--dims", o.dims, "latent coordinates to sweep")->delimiter(',');

    auto* sweep = app.add_subcommand("sweep", "training sweeps");
    sweep->require_subcommand(1);
    auto* sa = sweep->add_subcommand("alpha", "alpha grid plus baselines");
    auto* sd = sweep->add_subcommand("latent-dim", "latent size grid");
    for (auto* c : {sa, sd}) {
        c->add_option("--data", o.data, "dataset directory");
        c->add_option("--epochs", o.epochs, "epochs per run");
        c->add_option("--seed", o.seed, "training seed");
        out_opt(c, "output directory");
    }
    sa->add_option("--alphas", o.alphas, "alpha values")->delimiter(',');
    sd->add_option("--dims", o.dims, "latent sizes")->delimiter(',');

    auto* ctl = app.add_subcommand("control", "force control scenarios");
    ctl->require_subcommand(1);
    auto* track = ctl->add_subcommand("track", "setpoint tracking");
    auto* dist = ctl->add_subcommand("disturb", "constant force under rotation disturbance");
    auto* prop = ctl->add_subcommand("prop1", "contraction verification");
    for (auto* c : {track, dist}) {
        c->add_option("--estimator", o.estimator, "oracle|svae");
        c->add_option("--ckpt", o.ckpt, "checkpoint for the svae estimator");
        c->add_option("--domain", o.domain, "land|water");
        c->add_option("--k", o.gain, "gain K, N/mm");
        c->add_option("--duration", o.duration, "seconds per setpoint / disturbance run length");
        out_opt(c, "output directory");
    }
    track->add_option("--setpoints", o.setpoints, "forces in N")->delimiter(',');
    dist->add_option("--f-ref", o.f_ref, "held force, N");
    prop->add_option("--k", o.gain, "gain K for the linear case, N/mm");
    prop->add_option("--lambda", o.lambda, "slope of the linear case, N/mm");
    prop->add_option("--plants", o.plants, "random plants");
    prop->add_option("--seed", o.seed, "seed");
    out_opt(prop, "output directory");

    auto* gr = app.add_subcommand("grasp", "open- vs closed-loop grasp experiment");
    gr->add_option("--estimator", o.estimator, "oracle|svae");
    gr->add_option("--ckpt", o.ckpt, "checkpoint for the svae estimator");
    gr->add_option("--trials", o.trials, "trials per object");
    gr->add_option("--sigma", o.sigma, "approach noise, mm");
    gr->add_option("--seed", o.seed, "seed");
    gr->add_option("--domains", o.domains, "land,water")->delimiter(',');
    out_opt(gr, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << app.help();
        return kExitValidation;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(o);
        if (tr->parsed()) return cmd_train(o);
        if (ev->parsed()) return cmd_eval(o);
        if (corr->parsed()) return cmd_latent_corr(o);
        if (trav->parsed()) return cmd_latent_traverse(o);
        if (shift->parsed()) return cmd_latent_shift(o);
        if (sa->parsed()) return cmd_sweep(o, true);
        if (sd->parsed()) return cmd_sweep(o, false);
        if (track->parsed()) return cmd_control_track(o, false);
        if (dist->parsed()) return cmd_control_track(o, true);
        if (prop->parsed()) return cmd_control_prop1(o);
        if (gr->parsed()) return cmd_grasp(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitValidation;
}
