#pragma once

#include "tactile/image.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tactile {

inline constexpr double kPi = 3.14159265358979323846;

/// Pose of the rod relative to the finger, as commanded during collection.
struct ContactPose {
    double x_cm = 0.0;      ///< contact depth, [0, 5]
    double z_cm = 0.0;      ///< lateral offset, [-5, 5]
    double theta_rad = 0.0; ///< rod orientation, [-pi, pi]

    static constexpr double kMaxDepth = 5.0;
    static constexpr double kMaxLateral = 5.0;

    /// Throws DomainError when any field leaves its range.
    void validate() const;
    [[nodiscard]] ContactPose mirrored() const { return {x_cm, -z_cm, -theta_rad}; }
};

enum class CrossSection { Circle, Square, Hexagon, Oval };

std::string to_string(CrossSection cs);
CrossSection cross_section_from_string(const std::string& s);

struct FingerPlantConfig {
    int grid_rows = 8;
    int grid_cols = 8;
    double node_stiffness = 1.0;      ///< N/mm
    double tip_taper = 0.92;          ///< width shrink per row, face -> base
    double contact_radius_mm = 5.0;
    CrossSection cross_section = CrossSection::Circle;
    double indentation_mm_per_cm = 1.2;
    /// Displacement-feature to (N, N*mm) gains for fx, fy, fz and tx, ty, tz.
    std::array<double, 3> force_scale{10.35, 4.719, 34.59};
    std::array<double, 3> torque_scale{1748.6, 2010.5, 5253.7};
    int image_height = 64;
    int image_width = 64;
    /// Camera roll about the optical axis relative to the lattice, radians.
    double camera_roll_rad = 0.0;

    void validate() const;
    /// Stable text digest of every field, used to tie datasets to a plant.
    [[nodiscard]] std::string digest() const;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Per-node in-plane displacement of the finger lattice (mm). Node (r, c) is
/// stored at r * cols + c; row 0 is the gripping face, the last row the base.
struct DeformationState {
    int rows = 0;
    int cols = 0;
    std::vector<Vec2> displacements;
    std::vector<uint8_t> contact_mask;

    [[nodiscard]] const Vec2& at(int r, int c) const { return displacements[static_cast<size_t>(r) * cols + c]; }
    [[nodiscard]] DeformationState scaled(double factor) const;
    friend bool operator==(const DeformationState&, const DeformationState&) = default;
};

enum class Frame { FingerBase, World };

/// 6D force (N) and torque (N*mm).
struct Wrench {
    double fx = 0, fy = 0, fz = 0;
    double tx = 0, ty = 0, tz = 0;
    Frame frame = Frame::FingerBase;

    static constexpr double kForceLimit = 10.0;
    static constexpr double kTorqueLimit = 600.0;

    [[nodiscard]] std::array<double, 6> values() const { return {fx, fy, fz, tx, ty, tz}; }
    static Wrench from_values(const std::array<double, 6>& v, Frame f = Frame::FingerBase) {
        return {v[0], v[1], v[2], v[3], v[4], v[5], f};
    }
    [[nodiscard]] bool finite() const;
    [[nodiscard]] bool within_plant_range() const;
    friend bool operator==(const Wrench&, const Wrench&) = default;
};

inline constexpr std::array<const char*, 6> kWrenchAxes{"fx", "fy", "fz", "tx", "ty", "tz"};

struct DomainTag {
    enum class Variant { Land, Water };
    Variant variant = Variant::Land;
    double brightness_shift = 0.0;
    double noise_std = 0.0;
    double blur_radius_px = 0.0;
    double caustic_amplitude = 0.0;

    static DomainTag land() { return {}; }
    /// Default underwater perturbation used by the experiments.
    static DomainTag water() { return {Variant::Water, -0.04, 0.02, 0.5, 0.06}; }
    static DomainTag water(double shift, double noise, double blur, double caustic) {
        return {Variant::Water, shift, noise, blur, caustic};
    }
    void validate() const;
    [[nodiscard]] std::string name() const { return variant == Variant::Land ? "land" : "water"; }
};

/// Foreground intensity band kept by color_threshold.
struct ThresholdBand {
    float lower = 0.5f;
    float upper = 1.0f;
};

/// Rest position (mm) of lattice node (r, c); x lateral, y into the finger.
Vec2 rest_position(const FingerPlantConfig& cfg, int r, int c);

DeformationState deform(const ContactPose& pose, const FingerPlantConfig& cfg);
Wrench wrench_at_base(const DeformationState& state, const FingerPlantConfig& cfg);

/// Rasterizes the lattice as seen by the in-finger camera. Finger pixels lie
/// in [0.5, 1], background is exactly 0 before any domain perturbation.
TactileImage render(const DeformationState& state, const FingerPlantConfig& cfg, const DomainTag& domain,
                    bool clutter, uint64_t seed);

TactileImage color_threshold(const TactileImage& img, const ThresholdBand& band = {});

/// Convenience: wrench_at_base(deform(pose)).
Wrench plant_wrench(const ContactPose& pose, const FingerPlantConfig& cfg);

} // namespace tactile
