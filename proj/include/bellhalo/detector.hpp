#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bellhalo/source.hpp"

namespace bellhalo {

/// Geometry of the time-of-flight image. Positions are in mm; the z axis
/// carries the arrival-time coordinate already converted to length.
struct DetectorConfig {
    double r_tof = 25.0;
    /// Stern-Gerlach push of the up halo along -z.
    double sg_offset = 60.0;
    /// Per-axis scaling of the up halo by stray-field forces.
    std::array<double, 3> distort{1.0, 1.0, 1.0};
    double efficiency = 0.10;
    double res_xy = 0.12;
    double res_z = 0.003;

    void validate() const;
    /// Plane z = -sg_offset/2 separating the two spin halos.
    double split_z() const noexcept { return -0.5 * sg_offset; }
};

struct DetectorHit {
    Vec3 r = Vec3::Zero();
    Spin spin_region = Spin::Up;
    std::uint32_t shot_id = 0;

    bool operator==(const DetectorHit&) const = default;
};

/// Maps each atom of the shot to a detector hit: scale by r_tof, distort and
/// displace the up halo, thin by efficiency, blur by the resolution, and
/// label by the side of the split plane. Hits keep the shot's event order.
std::vector<DetectorHit> project(const Shot& shot, const DetectorConfig& cfg, Rng& rng);

/// All shots, each with its own detector stream keyed by (seed, shot_id).
std::vector<DetectorHit> project_shots(std::span<const Shot> shots, const DetectorConfig& cfg, std::uint64_t master_seed,
                                       unsigned threads);

/// CSV: header `shot_id,x_mm,y_mm,z_mm,spin`, spin in {U, D}.
void write_events_csv(std::span<const DetectorHit> hits, const std::filesystem::path& path);
std::vector<DetectorHit> read_events_csv(const std::filesystem::path& path);

/// Binary: magic "BHEV1" then little-endian records {u32 shot_id, f64 x, f64 y, f64 z, u8 spin}.
void write_events_binary(std::span<const DetectorHit> hits, const std::filesystem::path& path);
std::vector<DetectorHit> read_events_binary(const std::filesystem::path& path);

/// Picks the format from the extension: ".bhev" binary, anything else CSV.
void write_events(std::span<const DetectorHit> hits, const std::filesystem::path& path);
std::vector<DetectorHit> read_events(const std::filesystem::path& path);

}  // namespace bellhalo
