#include "tactile/analysis.hpp"
#include "tactile/control.hpp"
#include "tactile/dataset.hpp"
#include "tactile/errors.hpp"
#include "tactile/latent.hpp"
#include "tactile/metrics.hpp"
#include "tactile/plant.hpp"
#include "tactile/svae.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace tactile;

namespace {

py::array_t<float> image_array(const TactileImage& img) {
    py::array_t<float> a({img.height, img.width});
    std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
    return a;
}

TactileImage image_from(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw ShapeError("image must be a 2-D array");
    TactileImage img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
    return img;
}

py::array_t<double> wrench_array(const Wrench& w) {
    const auto v = w.values();
    return py::array_t<double>(6, v.data());
}

Wrench wrench_from(const std::vector<double>& v) {
    if (v.size() != 6) throw ShapeError("wrench needs 6 values");
    return Wrench{v[0], v[1], v[2], v[3], v[4], v[5]};
}

FingerPlantConfig plant_config(int image_size) {
    FingerPlantConfig cfg;
    cfg.image_height = cfg.image_width = image_size;
    return cfg;
}

DomainTag domain_named(const std::string& name) {
    if (name == "land") return DomainTag::land();
    if (name == "water") return DomainTag::water();
    throw ConfigError("unknown domain '" + name + "'");
}

Split split_named(const std::string& s) { return split_from_string(s); }

py::dict metrics_dict(const MetricsReport& r) {
    py::dict d;
    d["r2"] = std::vector<double>(r.r2.begin(), r.r2.end());
    d["mse"] = std::vector<double>(r.mse.begin(), r.mse.end());
    d["mean_r2"] = r.mean_r2;
    d["recon_mse"] = r.recon_mse;
    d["count"] = r.count;
    return d;
}

} // namespace

PYBIND11_MODULE(_tactile, m) {
    m.doc() = "Synthetic tactile finger, SVAE wrench estimation and force control";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
    py::register_exception<InfeasibleReference>(m, "InfeasibleReference", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_RuntimeError);
    py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

    // plant
    py::class_<ContactPose>(m, "ContactPose")
        .def(py::init([](double x, double z, double th) { return ContactPose{x, z, th}; }), py::arg("x_cm"),
             py::arg("z_cm"), py::arg("theta_rad"))
        .def_readwrite("x_cm", &ContactPose::x_cm)
        .def_readwrite("z_cm", &ContactPose::z_cm)
        .def_readwrite("theta_rad", &ContactPose::theta_rad)
        .def("validate", &ContactPose::validate);

    m.def(
        "plant_wrench",
        [](const ContactPose& p, int image_size) { return wrench_array(plant_wrench(p, plant_config(image_size))); },
        py::arg("pose"), py::arg("image_size") = 64, "Base wrench (fx, fy, fz in N; tx, ty, tz in N*mm).");
    m.def(
        "render",
        [](const ContactPose& p, const std::string& domain, bool clutter, uint64_t seed, int image_size) {
            const auto cfg = plant_config(image_size);
            return image_array(render(deform(p, cfg), cfg, domain_named(domain), clutter, seed));
        },
        py::arg("pose"), py::arg("domain") = "land", py::arg("clutter") = false, py::arg("seed") = 0,
        py::arg("image_size") = 64);
    m.def(
        "observe",
        [](const ContactPose& p, const std::string& domain, uint64_t seed, int image_size) {
            return image_array(observe(p, plant_config(image_size), domain_named(domain), seed));
        },
        py::arg("pose"), py::arg("domain") = "land", py::arg("seed") = 0, py::arg("image_size") = 64,
        "Cluttered render passed through the colour threshold.");
    m.def(
        "color_threshold", [](const py::array_t<float>& img) { return image_array(color_threshold(image_from(img))); },
        py::arg("image"));

    // latent
    m.def(
        "kl_diag_gaussian",
        [](const std::vector<double>& mu, const std::vector<double>& logvar) {
            return kl_diag_gaussian<double>(mu, logvar);
        },
        py::arg("mu"), py::arg("logvar"));
    m.def(
        "reparameterize",
        [](const std::vector<double>& mu, const std::vector<double>& logvar, const std::vector<double>& eps) {
            return reparameterize<double>(mu, logvar, eps);
        },
        py::arg("mu"), py::arg("logvar"), py::arg("eps"));
    m.def(
        "r2", [](const std::vector<double>& p, const std::vector<double>& t) { return r2(p, t); }, py::arg("pred"),
        py::arg("truth"));

    // data
    m.def(
        "generate_dataset",
        [](size_t n, uint64_t seed, const std::filesystem::path& out, const std::string& domain, int image_size,
           int threads) {
            py::gil_scoped_release release;
            return generate_dataset(n, plant_config(image_size), domain_named(domain), seed, out, threads).count;
        },
        py::arg("n"), py::arg("seed"), py::arg("out_dir"), py::arg("domain") = "land", py::arg("image_size") = 64,
        py::arg("threads") = 1, "Writes manifest.json and images/ under out_dir; returns the sample count.");
    m.def(
        "load_split",
        [](const std::filesystem::path& dir, const std::string& split, int image_size) {
            const Dataset ds = load_dataset(dir, plant_config(image_size));
            const LabeledSet s = ds.split(split_named(split));
            py::array_t<float> images({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(image_size),
                                       static_cast<py::ssize_t>(image_size)});
            py::array_t<double> wrenches({static_cast<py::ssize_t>(s.size()), py::ssize_t{6}});
            float* ip = images.mutable_data();
            double* wp = wrenches.mutable_data();
            for (size_t i = 0; i < s.size(); ++i) {
                std::copy(s.images[i].pixels.begin(), s.images[i].pixels.end(), ip + i * image_size * image_size);
                const auto v = s.wrenches[i].values();
                std::copy(v.begin(), v.end(), wp + i * 6);
            }
            return py::make_tuple(images, wrenches);
        },
        py::arg("data_dir"), py::arg("split") = "test", py::arg("image_size") = 64,
        "(images [N,H,W], wrenches [N,6]) of one split.");

    // svae
    m.def(
        "train",
        [](const std::filesystem::path& data, const std::filesystem::path& out, int epochs, double alpha, double beta,
           int latent, uint64_t seed, int image_size) {
            const auto cfg = plant_config(image_size);
            const Dataset ds = load_dataset(data, cfg);
            SVAEArchitecture arch;
            arch.input_height = arch.input_width = image_size;
            arch.latent_dim = latent;
            TrainHyper h;
            h.epochs = epochs;
            h.seed = seed;
            Checkpoint ck;
            {
                py::gil_scoped_release release;
                ck = train(ds.split(Split::Train), ds.split(Split::Validation), arch, {alpha, beta}, h);
            }
            save_checkpoint(ck, out);
            std::vector<double> history;
            for (const auto& e : ck.meta.history) history.push_back(e.validation.total);
            return history;
        },
        py::arg("data_dir"), py::arg("out"), py::arg("epochs") = 30, py::arg("alpha") = 1.0, py::arg("beta") = 0.1,
        py::arg("latent") = 32, py::arg("seed") = 1, py::arg("image_size") = 64,
        "Trains on the train split, saves the checkpoint and returns validation losses per epoch.");

    py::class_<SvaeModel>(m, "Model")
        .def(py::init([](const std::filesystem::path& p) { return SvaeModel(load_checkpoint(p)); }), py::arg("path"))
        .def_property_readonly("latent_dim", &SvaeModel::latent_dim)
        .def(
            "encode",
            [](const SvaeModel& s, const py::array_t<float>& img) {
                const LatentCode c = s.encode(image_from(img));
                return py::make_tuple(py::array_t<float>(c.mu.size(), c.mu.data()),
                                      py::array_t<float>(c.logvar.size(), c.logvar.data()));
            },
            py::arg("image"), "(mu, logvar)")
        .def(
            "predict",
            [](const SvaeModel& s, const py::array_t<float>& img) {
                return wrench_array(s.predict_wrench(s.encode(image_from(img)).mu));
            },
            py::arg("image"), "Wrench predicted from the encoder mean.")
        .def(
            "decode", [](const SvaeModel& s, const std::vector<float>& z) { return image_array(s.decode_image(z)); },
            py::arg("z"))
        .def(
            "evaluate",
            [](const SvaeModel& s, const std::filesystem::path& data, const std::string& split) {
                const auto cfg = plant_config(s.checkpoint().arch.input_height);
                const Dataset ds = load_dataset(data, cfg);
                return metrics_dict(evaluate_set(s, ds.split(split_named(split))));
            },
            py::arg("data_dir"), py::arg("split") = "test");

    // control
    m.def(
        "project_grip_force",
        [](const std::vector<double>& w, double yaw_rad) {
            return project_grip_force(wrench_from(w), FrameTransform::about_z(yaw_rad));
        },
        py::arg("wrench"), py::arg("yaw_rad") = 0.0);
    m.def(
        "plant_force", [](double p, double t) { return plant_force(p, GraspPlant{}, t); }, py::arg("position_mm"),
        py::arg("t") = 0.0, "Grip force of the default grasp plant.");
    m.def(
        "track",
        [](const std::vector<double>& forces, double duration_s, double gain, double tolerance) {
            std::vector<Setpoint> plan;
            for (double f : forces) plan.push_back({f, duration_s});
            OracleEstimator est;
            const Trace tr = run_force_tracking(plan, GraspPlant{}, {gain, tolerance, 120}, est);
            py::dict d;
            std::vector<double> t, p, fe, fr;
            for (const auto& r : tr.rows) {
                t.push_back(r.t);
                p.push_back(r.p_measured);
                fe.push_back(r.f_estimate);
                fr.push_back(r.f_reference);
            }
            d["t"] = t;
            d["p_measured"] = p;
            d["f_estimate"] = fe;
            d["f_reference"] = fr;
            std::vector<py::object> settle;
            for (const auto& s : settle_stats(tr, tolerance))
                settle.push_back(s.ticks_to_settle ? py::cast(*s.ticks_to_settle) : py::none());
            d["ticks_to_settle"] = settle;
            return d;
        },
        py::arg("forces"), py::arg("duration_s") = 1.0, py::arg("gain") = 0.5, py::arg("tolerance") = 0.05,
        "Oracle-estimator tracking on the default plant.");
    m.def(
        "verify_contraction",
        [](size_t plants, uint64_t seed) {
            const ContractionReport r = verify_contraction(plants, seed);
            py::dict d;
            d["eligible"] = r.eligible;
            d["eligible_passed"] = r.eligible_passed;
            d["pass_rate"] = r.pass_rate();
            d["max_steps"] = r.max_steps;
            d["boundary_equal_converged"] = r.boundary_equal.converged;
            d["boundary_below_converged"] = r.boundary_below.converged;
            return d;
        },
        py::arg("plants") = 200, py::arg("seed") = 1);
}
