#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bellhalo/detector.hpp"

namespace bellhalo {

/// Axis-aligned ellipsoid mapping one spin halo back onto the unit shell.
struct HaloGeometry {
    Vec3 center = Vec3::Zero();     // mm
    Vec3 semi_axes = Vec3::Ones();  // mm
    Vec3 k_offset = Vec3::Zero();   // normalized momentum

    void validate() const;
};

/// Raw-hit window, in units of r_tof about the current center estimate.
struct RawWindow {
    double r_min = 0.6;
    double r_max = 1.2;
    double z_max = 0.8;
};

/// Final momentum window applied after normalization.
struct ShellWindow {
    double k_min = 0.9;
    double k_max = 1.1;
    double kz_max = 0.75;
};

/// A reconstructed atom. `hit` indexes the detector hit list it came from.
struct KPoint {
    Vec3 k = Vec3::Zero();
    Spin spin = Spin::Up;
    std::uint32_t shot_id = 0;
    std::size_t hit = 0;
};

/// Component-wise median of hit positions.
Vec3 median_center(std::span<const DetectorHit> hits);

std::vector<DetectorHit> truncate_raw(std::span<const DetectorHit> hits, double r_tof, const Vec3& center,
                                      const RawWindow& window = {});

/// Algebraic least squares for A x^2 + B y^2 + C z^2 + D x + E y + F z = 1.
/// Throws NumericalError on a rank-deficient design or a non-ellipsoidal solution.
HaloGeometry fit_ellipsoid(std::span<const Vec3> points);

/// k = (r - center) / semi_axes per axis, shell window, then minus k_offset.
/// `hit` is the position within `hits`.
std::vector<KPoint> normalize(std::span<const DetectorHit> hits, const HaloGeometry& geom,
                              const ShellWindow& window = {});

struct RecenterOptions {
    /// Candidate back-to-back pairs have |k_i + k_j - 2 v| below this.
    double window = 5 * 0.0138;
    /// Fixed-point iteration of the window center; stops once v moves less than `tolerance`.
    int iterations = 20;
    double tolerance = 1e-7;
};

/// Offset v such that back-to-back pair sums center on zero after k -> k - v.
/// Pairs are taken within each shot over all spin combinations. Points must be
/// grouped by shot_id. Throws NumericalError when a spin state is missing or no
/// candidate pair exists.
Vec3 recenter(std::span<const KPoint> points, const RecenterOptions& opt = {});

struct ReconstructionOptions {
    RawWindow raw;
    ShellWindow shell;
    RecenterOptions recentering;
    bool recenter = true;
};

struct Reconstruction {
    HaloGeometry up;
    HaloGeometry down;
    /// Hit order preserved; `hit` indexes the input.
    std::vector<KPoint> points;
};

/// Per spin region: median seed, raw truncation, ellipsoid fit, normalization.
/// Then a common k_offset from recentering is subtracted from every point.
Reconstruction reconstruct(std::span<const DetectorHit> hits, double r_tof, const ReconstructionOptions& opt = {});

}  // namespace bellhalo
