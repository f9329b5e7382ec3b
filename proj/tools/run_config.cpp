#include "run_config.hpp"

#include "tactile/dataset.hpp"
#include "tactile/errors.hpp"

#include <fstream>
#include <set>

namespace tactile::cli {

using nlohmann::json;

namespace {

/// Reads optional keys of one JSON object and remembers which were used.
class Section {
  public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& out) {
        used_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type (" + it->type_name() + ")");
        }
    }

    [[nodiscard]] bool has(const char* key) const { return j_.contains(key); }

    const json& raw(const char* key) {
        used_.insert(key);
        return j_.at(key);
    }

    Section sub(const char* key) {
        used_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? Section(empty_, path_ + "." + key) : Section(*it, path_ + "." + key);
    }

    [[nodiscard]] std::string path(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (const auto& [k, _] : j_.items())
            if (!used_.count(k)) throw ConfigError(path_ + ": unknown key '" + k + "'");
    }

  private:
    static inline const json empty_ = json::object();
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

json nodes_json(const std::vector<ForceNode>& nodes) {
    json a = json::array();
    for (const auto& n : nodes) a.push_back({n.position_mm, n.force_n});
    return a;
}

std::vector<ForceNode> nodes_from(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path + ": expected [[position_mm, force_n], ...]");
    std::vector<ForceNode> out;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw ConfigError(path + ": each node is [position_mm, force_n]");
        out.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return out;
}

void read_plant(Section s, FingerPlantConfig& p) {
    s.get("grid_rows", p.grid_rows);
    s.get("grid_cols", p.grid_cols);
    s.get("node_stiffness", p.node_stiffness);
    s.get("tip_taper", p.tip_taper);
    s.get("contact_radius_mm", p.contact_radius_mm);
    std::string cs = to_string(p.cross_section);
    s.get("cross_section", cs);
    p.cross_section = cross_section_from_string(cs);
    s.get("indentation_mm_per_cm", p.indentation_mm_per_cm);
    s.get("force_scale", p.force_scale);
    s.get("torque_scale", p.torque_scale);
    s.get("image_height", p.image_height);
    s.get("camera_roll_rad", p.camera_roll_rad);
    s.get("image_width", p.image_width);
    s.finish();
}

void read_water(Section s, DomainTag& d) {
    s.get("brightness_shift", d.brightness_shift);
    s.get("noise_std", d.noise_std);
    s.get("blur_radius_px", d.blur_radius_px);
    s.get("caustic_amplitude", d.caustic_amplitude);
    s.finish();
}

void read_model(Section s, ModelSection& m) {
    s.get("input_height", m.arch.input_height);
    s.get("input_width", m.arch.input_width);
    s.get("latent_dim", m.arch.latent_dim);
    s.get("channels", m.arch.channels);
    s.get("regressor_hidden", m.arch.regressor_hidden);
    s.get("alpha", m.loss.alpha);
    s.get("beta", m.loss.beta);
    std::string mode = to_string(m.loss.mode);
    s.get("loss_mode", mode);
    m.loss.mode = loss_mode_from_string(mode);
    s.get("batch_size", m.hyper.batch_size);
    s.get("epochs", m.hyper.epochs);
    s.get("seed", m.hyper.seed);
    s.get("learning_rate", m.hyper.adam.learning_rate);
    s.get("lr_decay_per_epoch", m.hyper.adam.epoch_decay);
    s.get("adam_beta1", m.hyper.adam.beta1);
    s.get("adam_beta2", m.hyper.adam.beta2);
    s.get("adam_epsilon", m.hyper.adam.epsilon);
    s.finish();
}

void read_control(Section s, ControlSection& c) {
    s.get("p_contact", c.plant.p_contact);
    s.get("p_max", c.plant.p_max);
    if (s.has("nodes")) c.plant.nodes = nodes_from(s.raw("nodes"), s.path("nodes"));
    s.get("gain", c.controller.gain);
    s.get("tolerance", c.controller.tolerance);
    s.get("loop_rate", c.controller.loop_rate);
    if (s.has("setpoints")) {
        const json& a = s.raw("setpoints");
        if (!a.is_array()) throw ConfigError(s.path("setpoints") + ": expected [[force_n, duration_s], ...]");
        c.setpoints.clear();
        for (const auto& e : a) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
                throw ConfigError(s.path("setpoints") + ": each setpoint is [force_n, duration_s]");
            c.setpoints.push_back({e[0].get<double>(), e[1].get<double>()});
        }
    }
    s.get("disturb_force", c.disturb_force);
    s.get("disturb_duration_s", c.disturb_duration_s);
    s.get("mm_per_degree", c.mm_per_degree);
    s.get("contact_z_cm", c.contact.z_cm);
    s.get("contact_theta_rad", c.contact.theta_rad);
    s.get("prop1_plants", c.prop1_plants);
    s.get("prop1_seed", c.prop1_seed);
    s.get("prop1_slope_max", c.prop1_slope_max);
    s.finish();
}

json object_json(const GraspObject& o) {
    return {{"name", o.name},         {"width_mm", o.width_mm},         {"f_min", o.f_min},
            {"f_max", o.f_max},       {"stiffness", o.stiffness},       {"contact_z_cm", o.contact.z_cm},
            {"contact_theta_rad", o.contact.theta_rad}};
}

void read_grasp(Section s, GraspSection& g) {
    if (s.has("objects")) {
        const json& a = s.raw("objects");
        if (!a.is_array()) throw ConfigError(s.path("objects") + ": expected an array");
        g.objects.clear();
        for (size_t i = 0; i < a.size(); ++i) {
            GraspObject o;
            Section os(a[i], s.path("objects") + "[" + std::to_string(i) + "]");
            os.get("name", o.name);
            os.get("width_mm", o.width_mm);
            os.get("f_min", o.f_min);
            os.get("f_max", o.f_max);
            os.get("stiffness", o.stiffness);
            os.get("contact_z_cm", o.contact.z_cm);
            os.get("contact_theta_rad", o.contact.theta_rad);
            os.finish();
            g.objects.push_back(o);
        }
    }
    s.get("trials", g.trials);
    s.get("sigma_mm", g.sigma_mm);
    s.get("seed", g.seed);
    s.finish();
}

void read_sweep(Section s, SweepSection& w) {
    s.get("alphas", w.alphas);
    s.get("latent_dims", w.latent_dims);
    s.get("latent_alpha", w.latent_alpha);
    s.get("epochs", w.epochs);
    s.get("baselines", w.baselines);
    s.finish();
}

void read_latent(Section s, LatentSection& l) {
    s.get("traverse_dims", l.traverse_dims);
    s.get("lo", l.lo);
    s.get("hi", l.hi);
    s.get("steps", l.steps);
    s.finish();
}

} // namespace

void RunConfig::validate() const {
    plant.validate();
    DomainTag w = water;
    w.variant = DomainTag::Variant::Water;
    w.validate();
    if (data.n < 10) throw ConfigError("data.n must be >= 10");
    model.arch.validate();
    model.loss.validate();
    if (model.arch.input_height != plant.image_height || model.arch.input_width != plant.image_width)
        throw ConfigError("model input size must match plant image size");
    if (model.hyper.batch_size < 1) throw ConfigError("model.batch_size must be >= 1");
    if (model.hyper.epochs < 1) throw ConfigError("model.epochs must be >= 1");
    if (!(model.hyper.adam.learning_rate > 0)) throw ConfigError("model.learning_rate must be positive");
    if (!(model.hyper.adam.epoch_decay > 0 && model.hyper.adam.epoch_decay <= 1))
        throw ConfigError("model.lr_decay_per_epoch must be in (0, 1]");
    control.plant.validate();
    control.controller.validate();
    if (control.setpoints.empty()) throw ConfigError("control.setpoints must not be empty");
    for (const auto& sp : control.setpoints)
        if (!(sp.force_n >= 0) || !(sp.duration_s > 0)) throw ConfigError("control.setpoints: force >= 0, duration > 0");
    if (!(control.disturb_force >= 0)) throw ConfigError("control.disturb_force must be >= 0");
    if (!(control.disturb_duration_s > 0)) throw ConfigError("control.disturb_duration_s must be positive");
    if (control.prop1_plants < 1) throw ConfigError("control.prop1_plants must be >= 1");
    if (!(control.prop1_slope_max > 0.05)) throw ConfigError("control.prop1_slope_max must exceed 0.05");
    ContactPose{0, control.contact.z_cm, control.contact.theta_rad}.validate();
    if (grasp.objects.empty()) throw ConfigError("grasp.objects must not be empty");
    for (const auto& o : grasp.objects) {
        GraspScenario sc;
        sc.object = o;
        sc.sigma_mm = grasp.sigma_mm;
        sc.trials = grasp.trials;
        sc.validate();
    }
    if (sweep.alphas.size() < 2) throw ConfigError("sweep.alphas needs at least 2 values");
    for (double a : sweep.alphas)
        if (!(a >= 0)) throw ConfigError("sweep.alphas must be >= 0");
    if (sweep.latent_dims.size() < 2) throw ConfigError("sweep.latent_dims needs at least 2 values");
    for (int d : sweep.latent_dims)
        if (d < 1) throw ConfigError("sweep.latent_dims must be >= 1");
    if (sweep.epochs < 1) throw ConfigError("sweep.epochs must be >= 1");
    if (latent.steps < 2) throw ConfigError("latent.steps must be >= 2");
    if (!(latent.lo < latent.hi)) throw ConfigError("latent.lo must be below latent.hi");
    for (int d : latent.traverse_dims)
        if (d < 0 || d >= model.arch.latent_dim) throw ConfigError("latent.traverse_dims out of range");
    if (threads < 1) throw ConfigError("threads must be >= 1");
}

json to_json(const RunConfig& c) {
    json objects = json::array();
    for (const auto& o : c.grasp.objects) objects.push_back(object_json(o));
    json setpoints = json::array();
    for (const auto& s : c.control.setpoints) setpoints.push_back({s.force_n, s.duration_s});
    json water = to_json(c.water);
    water.erase("variant");
    return {
        {"plant",
         {{"grid_rows", c.plant.grid_rows},
          {"grid_cols", c.plant.grid_cols},
          {"node_stiffness", c.plant.node_stiffness},
          {"tip_taper", c.plant.tip_taper},
          {"contact_radius_mm", c.plant.contact_radius_mm},
          {"cross_section", to_string(c.plant.cross_section)},
          {"indentation_mm_per_cm", c.plant.indentation_mm_per_cm},
          {"force_scale", c.plant.force_scale},
          {"torque_scale", c.plant.torque_scale},
          {"image_height", c.plant.image_height},
          {"camera_roll_rad", c.plant.camera_roll_rad},
          {"image_width", c.plant.image_width}}},
        {"water", water},
        {"data", {{"n", c.data.n}, {"seed", c.data.seed}}},
        {"model",
         {{"input_height", c.model.arch.input_height},
          {"input_width", c.model.arch.input_width},
          {"latent_dim", c.model.arch.latent_dim},
          {"channels", c.model.arch.channels},
          {"regressor_hidden", c.model.arch.regressor_hidden},
          {"alpha", c.model.loss.alpha},
          {"beta", c.model.loss.beta},
          {"loss_mode", to_string(c.model.loss.mode)},
          {"batch_size", c.model.hyper.batch_size},
          {"epochs", c.model.hyper.epochs},
          {"seed", c.model.hyper.seed},
          {"learning_rate", c.model.hyper.adam.learning_rate},
          {"lr_decay_per_epoch", c.model.hyper.adam.epoch_decay},
          {"adam_beta1", c.model.hyper.adam.beta1},
          {"adam_beta2", c.model.hyper.adam.beta2},
          {"adam_epsilon", c.model.hyper.adam.epsilon}}},
        {"control",
         {{"p_contact", c.control.plant.p_contact},
          {"p_max", c.control.plant.p_max},
          {"nodes", nodes_json(c.control.plant.nodes)},
          {"gain", c.control.controller.gain},
          {"tolerance", c.control.controller.tolerance},
          {"loop_rate", c.control.controller.loop_rate},
          {"setpoints", setpoints},
          {"disturb_force", c.control.disturb_force},
          {"disturb_duration_s", c.control.disturb_duration_s},
          {"mm_per_degree", c.control.mm_per_degree},
          {"contact_z_cm", c.control.contact.z_cm},
          {"contact_theta_rad", c.control.contact.theta_rad},
          {"prop1_plants", c.control.prop1_plants},
          {"prop1_seed", c.control.prop1_seed},
          {"prop1_slope_max", c.control.prop1_slope_max}}},
        {"grasp", {{"objects", objects}, {"trials", c.grasp.trials}, {"sigma_mm", c.grasp.sigma_mm}, {"seed", c.grasp.seed}}},
        {"sweep",
         {{"alphas", c.sweep.alphas},
          {"latent_dims", c.sweep.latent_dims},
          {"latent_alpha", c.sweep.latent_alpha},
          {"epochs", c.sweep.epochs},
          {"baselines", c.sweep.baselines}}},
        {"latent",
         {{"traverse_dims", c.latent.traverse_dims}, {"lo", c.latent.lo}, {"hi", c.latent.hi}, {"steps", c.latent.steps}}},
        {"threads", c.threads},
    };
}

RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    try {
        Section root(j, "config");
        read_plant(root.sub("plant"), c.plant);
        read_water(root.sub("water"), c.water);
        {
            Section d = root.sub("data");
            d.get("n", c.data.n);
            d.get("seed", c.data.seed);
            d.finish();
        }
        read_model(root.sub("model"), c.model);
        read_control(root.sub("control"), c.control);
        read_grasp(root.sub("grasp"), c.grasp);
        read_sweep(root.sub("sweep"), c.sweep);
        read_latent(root.sub("latent"), c.latent);
        root.get("threads", c.threads);
        root.finish();
    } catch (const FormatError& e) {
        throw ConfigError(e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + p.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
    return run_config_from_json(j);
}

} // namespace tactile::cli
