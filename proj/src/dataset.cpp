#include "tactile/dataset.hpp"

#include "tactile/errors.hpp"
#include "tactile/parallel.hpp"
#include "tactile/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace tactile {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr uint64_t kPoseStream = 0x706f7365;
constexpr uint64_t kRenderStream = 0x726e6472;
constexpr uint64_t kSplitStream = 0x73706c74;

double round_sig9(double v) { return std::strtod(format_sig9(v).c_str(), nullptr); }

std::string image_name(size_t id) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "images/%06zu.pgm", id);
    return buf;
}

json wrench_json(const Wrench& w) {
    json j = json::object();
    const auto v = w.values();
    for (size_t a = 0; a < kWrenchDim; ++a) j[kWrenchAxes[a]] = round_sig9(v[a]);
    return j;
}

Wrench wrench_from(const json& j) {
    std::array<double, 6> v{};
    for (size_t a = 0; a < kWrenchDim; ++a) v[a] = j.at(kWrenchAxes[a]).get<double>();
    return Wrench::from_values(v);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace

std::string to_string(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation") return Split::Validation;
    if (s == "test") return Split::Test;
    throw FormatError("unknown split '" + s + "'");
}

std::string format_sig9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::array<size_t, 3> split_sizes(size_t n) {
    const auto val = static_cast<size_t>(std::llround(static_cast<double>(n) * 0.1));
    const auto test = static_cast<size_t>(std::llround(static_cast<double>(n) * 0.2));
    return {n - val - test, val, test};
}

ContactPose sample_pose(std::mt19937_64& rng) {
    ContactPose p;
    p.x_cm = uniform(rng, 0.0, ContactPose::kMaxDepth);
    p.z_cm = uniform(rng, -ContactPose::kMaxLateral, ContactPose::kMaxLateral);
    p.theta_rad = uniform(rng, -kPi, kPi);
    return p;
}

TactileImage observe(const ContactPose& pose, const FingerPlantConfig& cfg, const DomainTag& domain, uint64_t seed) {
    return color_threshold(render(deform(pose, cfg), cfg, domain, true, seed));
}

uint64_t sample_render_seed(uint64_t dataset_seed, size_t id) {
    return derive_seed(dataset_seed, kRenderStream, id);
}

DatasetManifest generate_dataset(size_t n, const FingerPlantConfig& cfg, const DomainTag& domain, uint64_t seed,
                                 const fs::path& out_dir, int threads) {
    if (n < 10) throw ConfigError("dataset needs at least 10 samples, got " + std::to_string(n));
    cfg.validate();
    domain.validate();

    DatasetManifest m;
    m.seed = seed;
    m.count = n;
    m.domain = domain;
    m.plant_digest = cfg.digest();
    m.samples.resize(n);

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::mt19937_64 split_rng(derive_seed(seed, kSplitStream));
    shuffle_in_place(order.begin(), order.end(), split_rng);
    const auto sizes = split_sizes(n);
    for (size_t k = 0; k < n; ++k) {
        const Split s = k < sizes[0] ? Split::Train : (k < sizes[0] + sizes[1] ? Split::Validation : Split::Test);
        m.samples[order[k]].split = s;
    }

    std::error_code ec;
    fs::create_directories(out_dir / "images", ec);
    if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());

    parallel_for(n, threads, [&](size_t id) {
        std::mt19937_64 rng(derive_seed(seed, kPoseStream, id));
        SampleRecord& r = m.samples[id];
        r.id = id;
        r.file = image_name(id);
        r.pose = sample_pose(rng);
        r.wrench = plant_wrench(r.pose, cfg);
        r.domain = domain.name();
        write_pgm(out_dir / r.file, observe(r.pose, cfg, domain, sample_render_seed(seed, id)));
    });

    write_text(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
    return m;
}

std::vector<size_t> Dataset::indices(Split s) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < manifest.samples.size(); ++i)
        if (manifest.samples[i].split == s) out.push_back(i);
    return out;
}

LabeledSet Dataset::split(Split s) const {
    LabeledSet set;
    for (size_t i : indices(s)) {
        set.images.push_back(images[i]);
        set.wrenches.push_back(manifest.samples[i].wrench);
    }
    return set;
}

Dataset load_dataset(const fs::path& dir, const FingerPlantConfig& cfg) {
    const fs::path mpath = dir / "manifest.json";
    std::ifstream in(mpath, std::ios::binary);
    if (!in) throw IoError("cannot open " + mpath.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw FormatError(mpath.string() + ": " + e.what());
    }
    Dataset ds;
    ds.manifest = manifest_from_json(j);
    if (ds.manifest.plant_digest != cfg.digest())
        throw IntegrityError("dataset " + dir.string() + " was generated with plant " + ds.manifest.plant_digest +
                             ", current plant is " + cfg.digest());
    ds.images.reserve(ds.manifest.samples.size());
    for (const auto& r : ds.manifest.samples) {
        const fs::path p = dir / r.file;
        if (!fs::exists(p)) throw IoError("sample " + std::to_string(r.id) + ": missing image " + p.string());
        TactileImage img = read_pgm(p);
        if (img.height != cfg.image_height || img.width != cfg.image_width)
            throw DataError("sample " + std::to_string(r.id) + ": image is " + std::to_string(img.height) + "x" +
                            std::to_string(img.width));
        ds.images.push_back(std::move(img));
    }
    return ds;
}

json to_json(const DomainTag& d) {
    return {{"variant", d.name()},
            {"brightness_shift", d.brightness_shift},
            {"noise_std", d.noise_std},
            {"blur_radius_px", d.blur_radius_px},
            {"caustic_amplitude", d.caustic_amplitude}};
}

DomainTag domain_from_json(const json& j) {
    DomainTag d;
    const std::string v = j.at("variant").get<std::string>();
    if (v == "land") d.variant = DomainTag::Variant::Land;
    else if (v == "water") d.variant = DomainTag::Variant::Water;
    else throw FormatError("unknown domain variant '" + v + "'");
    d.brightness_shift = j.at("brightness_shift").get<double>();
    d.noise_std = j.at("noise_std").get<double>();
    d.blur_radius_px = j.at("blur_radius_px").get<double>();
    d.caustic_amplitude = j.at("caustic_amplitude").get<double>();
    d.validate();
    return d;
}

json to_json(const DatasetManifest& m) {
    json samples = json::array();
    for (const auto& r : m.samples) {
        samples.push_back({{"id", r.id},
                           {"file", r.file},
                           {"split", to_string(r.split)},
                           {"pose", {{"x_cm", r.pose.x_cm}, {"z_cm", r.pose.z_cm}, {"theta_rad", r.pose.theta_rad}}},
                           {"wrench", wrench_json(r.wrench)},
                           {"domain", r.domain}});
    }
    const auto sizes = split_sizes(m.count);
    return {{"schema_version", m.schema_version},
            {"seed", m.seed},
            {"count", m.count},
            {"split_ratio", m.split_ratio},
            {"split_sizes", {{"train", sizes[0]}, {"validation", sizes[1]}, {"test", sizes[2]}}},
            {"pose_ranges",
             {{"x_cm", {m.ranges.x_min, m.ranges.x_max}},
              {"z_cm", {m.ranges.z_min, m.ranges.z_max}},
              {"theta_rad", {m.ranges.theta_min, m.ranges.theta_max}}}},
            {"domain", to_json(m.domain)},
            {"plant_digest", m.plant_digest},
            {"samples", samples}};
}

DatasetManifest manifest_from_json(const json& j) {
    try {
        DatasetManifest m;
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != DatasetManifest::kSchemaVersion)
            throw FormatError("unsupported manifest schema " + std::to_string(m.schema_version));
        m.seed = j.at("seed").get<uint64_t>();
        m.count = j.at("count").get<size_t>();
        m.split_ratio = j.at("split_ratio").get<std::array<int, 3>>();
        const auto& pr = j.at("pose_ranges");
        m.ranges.x_min = pr.at("x_cm").at(0).get<double>();
        m.ranges.x_max = pr.at("x_cm").at(1).get<double>();
        m.ranges.z_min = pr.at("z_cm").at(0).get<double>();
        m.ranges.z_max = pr.at("z_cm").at(1).get<double>();
        m.ranges.theta_min = pr.at("theta_rad").at(0).get<double>();
        m.ranges.theta_max = pr.at("theta_rad").at(1).get<double>();
        m.domain = domain_from_json(j.at("domain"));
        m.plant_digest = j.at("plant_digest").get<std::string>();
        for (const auto& s : j.at("samples")) {
            SampleRecord r;
            r.id = s.at("id").get<size_t>();
            r.file = s.at("file").get<std::string>();
            r.split = split_from_string(s.at("split").get<std::string>());
            const auto& p = s.at("pose");
            r.pose = {p.at("x_cm").get<double>(), p.at("z_cm").get<double>(), p.at("theta_rad").get<double>()};
            r.wrench = wrench_from(s.at("wrench"));
            r.domain = s.at("domain").get<std::string>();
            m.samples.push_back(std::move(r));
        }
        if (m.samples.size() != m.count)
            throw FormatError("manifest lists " + std::to_string(m.samples.size()) + " samples, count says " +
                              std::to_string(m.count));
        for (size_t i = 0; i < m.samples.size(); ++i)
            if (m.samples[i].id != i) throw FormatError("manifest ids are not dense at position " + std::to_string(i));
        return m;
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
}

} // namespace tactile
