#include "tactile/plant.hpp"

#include "tactile/errors.hpp"
#include "tactile/rng.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace tactile {

namespace {

// Finger geometry in millimetres; one image pixel is one millimetre at 64 px.
constexpr double kFaceHalfWidth = 24.0;
constexpr double kFingerDepth = 40.0;
constexpr double kLineSigmaPx = 0.65;

// Field gains (dimensionless) of the displacement modes.
constexpr double kIndent = 0.9;      // local push into the finger
constexpr double kCompress = 0.35;   // global compression toward the base
constexpr double kBulge = 0.35;      // lateral spreading away from the rod
constexpr double kSway = 0.5;        // bending for off-centre contact
constexpr double kTwist = 0.3;       // shear from rod orientation
constexpr double kContactSpan = 0.75;

double half_width(const FingerPlantConfig& cfg, int r) { return kFaceHalfWidth * std::pow(cfg.tip_taper, r); }

double row_spacing(const FingerPlantConfig& cfg) { return kFingerDepth / (cfg.grid_rows - 1); }

struct Footprint {
    double lateral_radius;
    double exponent;
    double decay_depth;
};

Footprint footprint(const FingerPlantConfig& cfg, double theta) {
    const double s = std::sin(theta);
    double radius = cfg.contact_radius_mm * std::sqrt(1.0 + 0.8 * s * s);
    double exponent = 2.0;
    switch (cfg.cross_section) {
        case CrossSection::Circle: break;
        case CrossSection::Square: exponent = 4.0; break;
        case CrossSection::Hexagon: exponent = 3.0; break;
        case CrossSection::Oval: radius *= 1.5; break;
    }
    const double c = std::cos(theta);
    return {radius, exponent, 9.0 * (1.0 + 0.3 * c * c)};
}

} // namespace

void ContactPose::validate() const {
    auto bad = [](double v, double lo, double hi) { return !(v >= lo && v <= hi); };
    if (bad(x_cm, 0.0, kMaxDepth)) throw DomainError("contact depth x_cm outside [0, 5]");
    if (bad(z_cm, -kMaxLateral, kMaxLateral)) throw DomainError("lateral offset z_cm outside [-5, 5]");
    if (bad(theta_rad, -kPi, kPi)) throw DomainError("rod orientation theta outside [-pi, pi]");
}

std::string to_string(CrossSection cs) {
    switch (cs) {
        case CrossSection::Circle: return "circle";
        case CrossSection::Square: return "square";
        case CrossSection::Hexagon: return "hexagon";
        case CrossSection::Oval: return "oval";
    }
    return "circle";
}

CrossSection cross_section_from_string(const std::string& s) {
    if (s == "circle") return CrossSection::Circle;
    if (s == "square") return CrossSection::Square;
    if (s == "hexagon") return CrossSection::Hexagon;
    if (s == "oval") return CrossSection::Oval;
    throw ConfigError("unknown cross_section '" + s + "'");
}

void FingerPlantConfig::validate() const {
    if (grid_rows < 4 || grid_cols < 4) throw ConfigError("plant lattice needs at least 4x4 nodes");
    if (!(node_stiffness > 0)) throw ConfigError("node_stiffness must be positive");
    if (!(tip_taper > 0 && tip_taper <= 1)) throw ConfigError("tip_taper must lie in (0, 1]");
    if (!(contact_radius_mm > 0)) throw ConfigError("contact_radius_mm must be positive");
    if (!(indentation_mm_per_cm > 0)) throw ConfigError("indentation_mm_per_cm must be positive");
    for (double s : force_scale)
        if (!(s > 0)) throw ConfigError("force_scale entries must be positive");
    for (double s : torque_scale)
        if (!(s > 0)) throw ConfigError("torque_scale entries must be positive");
    if (image_height < 8 || image_width < 8) throw ConfigError("image must be at least 8x8");
    if (!(std::abs(camera_roll_rad) <= kPi / 4)) throw ConfigError("camera_roll_rad must lie in [-pi/4, pi/4]");
}

std::string FingerPlantConfig::digest() const {
    std::ostringstream os;
    os << std::setprecision(17) << "rows=" << grid_rows << ";cols=" << grid_cols << ";k=" << node_stiffness
       << ";taper=" << tip_taper << ";r=" << contact_radius_mm << ";cs=" << to_string(cross_section)
       << ";indent=" << indentation_mm_per_cm << ";fs=" << force_scale[0] << "," << force_scale[1] << ","
       << force_scale[2] << ";ts=" << torque_scale[0] << "," << torque_scale[1] << "," << torque_scale[2]
       << ";img=" << image_height << "x" << image_width << ";roll=" << camera_roll_rad;
    // FNV-1a keeps the digest short while the text above stays the source of truth.
    uint64_t h = 1469598103934665603ULL;
    for (char ch : os.str()) {
        h ^= static_cast<uint8_t>(ch);
        h *= 1099511628211ULL;
    }
    std::ostringstream hex;
    hex << std::hex << std::setw(16) << std::setfill('0') << h;
    return hex.str();
}

DeformationState DeformationState::scaled(double factor) const {
    DeformationState out = *this;
    for (auto& d : out.displacements) {
        d.x *= factor;
        d.y *= factor;
    }
    return out;
}

bool Wrench::finite() const {
    for (double v : values())
        if (!std::isfinite(v)) return false;
    return true;
}

bool Wrench::within_plant_range() const {
    return finite() && std::abs(fx) <= kForceLimit && std::abs(fy) <= kForceLimit && std::abs(fz) <= kForceLimit &&
           std::abs(tx) <= kTorqueLimit && std::abs(ty) <= kTorqueLimit && std::abs(tz) <= kTorqueLimit;
}

void DomainTag::validate() const {
    if (variant == Variant::Land) {
        if (brightness_shift != 0 || noise_std != 0 || blur_radius_px != 0 || caustic_amplitude != 0)
            throw ConfigError("land domain must not carry perturbations");
        return;
    }
    if (!(brightness_shift >= -0.3 && brightness_shift <= 0.3)) throw ConfigError("brightness_shift outside [-0.3, 0.3]");
    if (!(noise_std >= 0 && noise_std <= 0.2)) throw ConfigError("noise_std outside [0, 0.2]");
    if (!(blur_radius_px >= 0)) throw ConfigError("blur_radius_px must be >= 0");
    if (!(caustic_amplitude >= 0 && caustic_amplitude <= 0.3)) throw ConfigError("caustic_amplitude outside [0, 0.3]");
}

Vec2 rest_position(const FingerPlantConfig& cfg, int r, int c) {
    const double hw = half_width(cfg, r);
    const double x = (c - 0.5 * (cfg.grid_cols - 1)) * (2.0 * hw / (cfg.grid_cols - 1));
    return {x, r * row_spacing(cfg)};
}

DeformationState deform(const ContactPose& pose, const FingerPlantConfig& cfg) {
    pose.validate();
    cfg.validate();
    DeformationState st;
    st.rows = cfg.grid_rows;
    st.cols = cfg.grid_cols;
    const size_t n = static_cast<size_t>(st.rows) * st.cols;
    st.displacements.assign(n, Vec2{});
    st.contact_mask.assign(n, 0);

    const double depth = pose.x_cm * cfg.indentation_mm_per_cm;
    if (depth == 0.0) return st;

    const double xc = pose.z_cm / ContactPose::kMaxLateral * kContactSpan * kFaceHalfWidth;
    const Footprint fp = footprint(cfg, pose.theta_rad);
    const double compress = kCompress * (1.0 + 0.25 * std::cos(2.0 * pose.theta_rad));
    const double twist = kTwist * std::sin(2.0 * pose.theta_rad);
    const double sway = kSway * xc / kFaceHalfWidth;

    for (int r = 0; r < st.rows; ++r) {
        for (int c = 0; c < st.cols; ++c) {
            const Vec2 p = rest_position(cfg, r, c);
            const double u = (p.x - xc) / fp.lateral_radius;
            const double g = std::exp(-0.5 * std::pow(std::abs(u), fp.exponent) - p.y / fp.decay_depth);
            const double toward_face = 1.0 - p.y / kFingerDepth;
            Vec2& d = st.displacements[static_cast<size_t>(r) * st.cols + c];
            d.y = depth * (kIndent * g + compress * std::exp(-p.y / (0.8 * kFingerDepth)));
            d.x = depth * (kBulge * u * g + twist * g + sway * toward_face * toward_face);
            st.contact_mask[static_cast<size_t>(r) * st.cols + c] = g > 0.5 ? 1 : 0;
        }
    }
    return st;
}

Wrench wrench_at_base(const DeformationState& state, const FingerPlantConfig& cfg) {
    if (state.rows != cfg.grid_rows || state.cols != cfg.grid_cols ||
        state.displacements.size() != static_cast<size_t>(state.rows) * state.cols) {
        throw ShapeError("deformation state does not match the plant lattice");
    }
    // Linear displacement features; each is even or odd under the lateral mirror.
    double sx = 0, sy = 0, spread = 0, pitch = 0, roll = 0, yaw = 0;
    for (int r = 0; r < state.rows; ++r) {
        const double hw = half_width(cfg, r);
        for (int c = 0; c < state.cols; ++c) {
            const Vec2 p = rest_position(cfg, r, c);
            const Vec2& d = state.at(r, c);
            const double xn = p.x / hw;
            const double yn = p.y / kFingerDepth;
            sx += d.x;
            sy += d.y;
            spread += (xn * xn - 1.0 / 3.0) * d.y;
            pitch += (0.5 - yn) * d.y;
            roll += (p.x / kFaceHalfWidth) * d.y;
            yaw += (p.x * d.y - p.y * d.x) / kFaceHalfWidth;
        }
    }
    const double n = static_cast<double>(state.displacements.size());
    const double k = cfg.node_stiffness / n;
    Wrench w;
    w.frame = Frame::FingerBase;
    w.fx = k * cfg.force_scale[0] * sx;
    w.fy = k * cfg.force_scale[1] * sy;
    w.fz = k * cfg.force_scale[2] * spread;
    w.tx = k * cfg.torque_scale[0] * pitch;
    w.ty = k * cfg.torque_scale[1] * roll;
    w.tz = k * cfg.torque_scale[2] * yaw;
    return w;
}

Wrench plant_wrench(const ContactPose& pose, const FingerPlantConfig& cfg) {
    return wrench_at_base(deform(pose, cfg), cfg);
}

namespace {

void gaussian_blur(TactileImage& img, double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& v : k) v /= sum;
    auto pass = [&](bool horizontal) {
        TactileImage out = img;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                double acc = 0;
                for (int i = -radius; i <= radius; ++i) {
                    int xx = horizontal ? std::clamp(x + i, 0, img.width - 1) : x;
                    int yy = horizontal ? y : std::clamp(y + i, 0, img.height - 1);
                    acc += k[i + radius] * img.at(yy, xx);
                }
                out.at(y, x) = static_cast<float>(acc);
            }
        }
        img = std::move(out);
    };
    pass(true);
    pass(false);
}

} // namespace

TactileImage render(const DeformationState& state, const FingerPlantConfig& cfg, const DomainTag& domain,
                    bool clutter, uint64_t seed) {
    cfg.validate();
    domain.validate();
    if (state.rows != cfg.grid_rows || state.cols != cfg.grid_cols) {
        throw ShapeError("deformation state does not match the plant lattice");
    }
    const int H = cfg.image_height;
    const int W = cfg.image_width;
    const double px_per_mm = W / 64.0;
    const double cx = 0.5 * (W - 1);
    const double face_y = 0.82 * (H - 1);
    const double sigma = kLineSigmaPx * px_per_mm;
    const double reach = 3.0 * sigma;

    const double cos_r = std::cos(cfg.camera_roll_rad), sin_r = std::sin(cfg.camera_roll_rad);
    const double mid_y = 0.5 * kFingerDepth;

    auto to_px = [&](int r, int c, bool deformed) {
        Vec2 p = rest_position(cfg, r, c);
        if (deformed) {
            p.x += state.at(r, c).x;
            p.y += state.at(r, c).y;
        }
        // Roll about the lattice centre.
        const double qx = cos_r * p.x - sin_r * (p.y - mid_y);
        const double qy = sin_r * p.x + cos_r * (p.y - mid_y) + mid_y;
        return Vec2{cx + qx * px_per_mm, face_y - qy * px_per_mm};
    };

    std::vector<float> field(static_cast<size_t>(H) * W, 0.0f);
    std::vector<float> shaded(static_cast<size_t>(H) * W, 0.0f);

    auto draw_segment = [&](int r0, int c0, int r1, int c1) {
        const Vec2 a = to_px(r0, c0, true);
        const Vec2 b = to_px(r1, c1, true);
        const Vec2 a0 = to_px(r0, c0, false);
        const Vec2 b0 = to_px(r1, c1, false);
        const double len0 = std::hypot(b0.x - a0.x, b0.y - a0.y);
        const double len1 = std::hypot(b.x - a.x, b.y - a.y);
        const double strain = (len1 - len0) / len0;
        const double bright = std::clamp(0.8 - 4.0 * strain, 0.3, 1.0);
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double l2 = dx * dx + dy * dy;
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
        const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
        const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                double t = l2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / l2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ex = x - (a.x + t * dx), ey = y - (a.y + t * dy);
                const double f = std::exp(-0.5 * (ex * ex + ey * ey) / (sigma * sigma));
                const size_t i = static_cast<size_t>(y) * W + x;
                field[i] = std::max(field[i], static_cast<float>(f));
                shaded[i] = std::max(shaded[i], static_cast<float>(f * bright));
            }
        }
    };

    for (int r = 0; r < state.rows; ++r) {
        for (int c = 0; c < state.cols; ++c) {
            if (c + 1 < state.cols) draw_segment(r, c, r, c + 1);
            if (r + 1 < state.rows) draw_segment(r, c, r + 1, c);
        }
    }

    TactileImage img(H, W, 0.0f);
    std::vector<uint8_t> foreground(field.size(), 0);
    for (size_t i = 0; i < field.size(); ++i) {
        if (field[i] >= 0.5f) {
            foreground[i] = 1;
            img.pixels[i] = 0.5f + 0.5f * shaded[i];
        }
    }

    std::mt19937_64 rng(seed);
    if (clutter) {
        // Background distractors stay at least 0.15 below the foreground band.
        const int shapes = 3 + static_cast<int>(uniform_index(rng, 4));
        for (int s = 0; s < shapes; ++s) {
            const double sx = uniform(rng, 0.0, W - 1.0);
            const double sy = uniform(rng, 0.0, H - 1.0);
            const double sz = uniform(rng, 3.0, 10.0) * px_per_mm;
            const double lv = uniform(rng, 0.08, 0.35);
            const bool disc = uniform_index(rng, 2) == 0;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    const double ddx = x - sx, ddy = y - sy;
                    const bool inside = disc ? (ddx * ddx + ddy * ddy <= sz * sz)
                                             : (std::abs(ddx) <= sz && std::abs(ddy) <= 0.6 * sz);
                    const size_t i = static_cast<size_t>(y) * W + x;
                    if (inside && !foreground[i]) img.pixels[i] = static_cast<float>(lv);
                }
            }
        }
    }

    if (domain.variant == DomainTag::Variant::Water) {
        if (domain.blur_radius_px > 0) gaussian_blur(img, domain.blur_radius_px * px_per_mm);
        const bool caustics = domain.caustic_amplitude > 0;
        const double p1 = caustics ? uniform(rng, 0.0, 2.0 * kPi) : 0.0;
        const double p2 = caustics ? uniform(rng, 0.0, 2.0 * kPi) : 0.0;
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                double v = img.at(y, x) + domain.brightness_shift;
                if (caustics) {
                    const double wave = std::sin(2 * kPi * x / (0.45 * W) + p1) * std::sin(2 * kPi * y / (0.55 * H) + p2);
                    v += domain.caustic_amplitude * (0.5 + 0.5 * wave);
                }
                if (domain.noise_std > 0) v += domain.noise_std * standard_normal(rng);
                img.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return img;
}

TactileImage color_threshold(const TactileImage& img, const ThresholdBand& band) {
    if (!(band.lower < band.upper)) throw ConfigError("threshold band is empty");
    TactileImage out = img;
    for (float& v : out.pixels) {
        if (v < band.lower || v > band.upper) v = 0.0f;
    }
    return out;
}

} // namespace tactile
