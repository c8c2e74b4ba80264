#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bellhalo/qubit.hpp"
#include "bellhalo/rng.hpp"

namespace bellhalo {

using Vec3 = Eigen::Vector3d;

/// Stream tags mixed into per-shot RNG keys.
enum class StreamTag : std::uint64_t { Source = 1, Detector = 2, Bootstrap = 3 };

struct SourceConfig {
    /// Mean occupation of each (momentum, spin) mode. Both spin channels of a
    /// mode pair are thermally populated with this mean.
    double n_occ = 0.058;
    /// Back-to-back mode pairs per shot. Their directions form a fixed lattice.
    std::uint32_t n_modes = 500;
    /// Per-axis std of k_A + k_B for one pair (normalized momentum units).
    double sigma_bb = 0.005;
    double kz_cap = 0.8;
    double p_penning = 0.0;
    /// Mean uncorrelated counts per shot per spin.
    double bg_rate = 0.0;

    /// Throws ConfigError naming the first offending field (prefixed "source.").
    void validate() const;
};

struct PairEvent {
    Vec3 k = Vec3::Zero();
    Spin spin = Spin::Up;
    std::optional<std::uint32_t> partner_id;
    std::uint32_t shot_id = 0;
};

struct Shot {
    std::uint32_t shot_id = 0;
    std::vector<PairEvent> events;
    RotationSetting rotation;
    std::uint64_t seed = 0;
};

/// Mode directions: a Fibonacci lattice on the band 0 < k_z <= kz_cap. Every
/// mode pair occupies +u (arm A, upper hemisphere) and -u (arm B). The lower
/// edge stays half a lattice spacing above the equator so no +u lands on a -v.
std::vector<Vec3> mode_directions(const SourceConfig& cfg);

/// Exact z-basis counting statistics of the rotated pair source.
///
/// The K pairs of one mode are generated by (sum_ij M_ij a_i^+ b_j^+)^K |0>,
/// with M = sqrt(2) times the coefficient matrix of the rotated triplet. The
/// total K is the sum of two geometric counts (one per spin channel), so every
/// mode keeps occupation n_occ and the back-to-back g2 of the rotated state is
/// 1 + |M_ij|^2 (1 + 1/n_occ). For K = 1 this reduces to born_sample.
class PairSampler {
public:
    PairSampler(const SourceConfig& cfg, const RotationSetting& rotation);

    /// Number of up atoms on arm A and arm B for a mode holding `pairs` pairs.
    std::pair<std::uint32_t, std::uint32_t> sample_up_counts(std::uint32_t pairs, Rng& rng) const;

    /// Probability table over (up_A, up_B), row-major (pairs+1)^2, normalized.
    std::vector<double> up_count_distribution(std::uint32_t pairs) const;

    const TwoQubitState& pair_state() const noexcept { return state_; }
    const std::vector<Vec3>& directions() const noexcept { return directions_; }
    const SourceConfig& config() const noexcept { return cfg_; }
    const RotationSetting& rotation() const noexcept { return rotation_; }

private:
    SourceConfig cfg_;
    RotationSetting rotation_;
    TwoQubitState state_;
    Matrix2c coupling_;
    std::vector<Vec3> directions_;
    std::vector<std::vector<double>> cumulative_;  // index K, cached for small K
};

Shot sample_shot(const PairSampler& sampler, std::uint32_t shot_id, std::uint64_t master_seed);
Shot sample_shot(const SourceConfig& cfg, const RotationSetting& rotation, std::uint32_t shot_id,
                 std::uint64_t master_seed);

/// Removes exactly one atom, chosen uniformly, from each complete pair with
/// probability p. Survivors lose their partner link.
Shot apply_penning(Shot shot, double p_penning, Rng& rng);

/// Appends Poisson(bg_rate) unpaired atoms per spin, uniform on the shell band.
Shot add_background(Shot shot, double bg_rate, const SourceConfig& cfg, Rng& rng);

/// Shots [first_id, first_id + n) for one rotation; identical for any thread count.
std::vector<Shot> generate_shots(const SourceConfig& cfg, const RotationSetting& rotation, std::uint32_t n,
                                 std::uint64_t master_seed, unsigned threads, std::uint32_t first_id = 0);

}  // namespace bellhalo
