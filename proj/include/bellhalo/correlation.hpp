#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "bellhalo/reconstruction.hpp"

namespace bellhalo {

struct CorrelationParams {
    double bin_width = 0.0138;
    /// Half-range per axis of the Delta k histogram.
    double extent = 0.2;
    /// Each shot is mixed with the next mix_depth shots (cyclically) for the denominator.
    std::uint32_t mix_depth = 64;

    void validate() const;
};

/// Order of the four spin combinations everywhere: (A, B) = uu, dd, ud, du.
enum class SpinPair : int { UU = 0, DD = 1, UD = 2, DU = 3 };
inline constexpr std::array<SpinPair, 4> kSpinPairs{SpinPair::UU, SpinPair::DD, SpinPair::UD, SpinPair::DU};
constexpr Spin arm_a_spin(SpinPair p) { return (p == SpinPair::UU || p == SpinPair::UD) ? Spin::Up : Spin::Down; }
constexpr Spin arm_b_spin(SpinPair p) { return (p == SpinPair::UU || p == SpinPair::DU) ? Spin::Up : Spin::Down; }

/// Reconstructed momenta of one shot, split into arm A (k_z > 0) and arm B
/// (k_z < 0) and by spin (index static_cast<int>(Spin)).
struct ShotPoints {
    std::uint32_t shot_id = 0;
    std::array<std::vector<Vec3>, 2> a;
    std::array<std::vector<Vec3>, 2> b;
};

/// One entry per shot id in [first_id, first_id + n_shots), including shots
/// without points, which still count in the event-mixing normalization.
/// Throws ConfigError for points outside the range.
std::vector<ShotPoints> group_by_shot(std::span<const KPoint> points, std::uint32_t first_id, std::uint32_t n_shots);

/// Cubic bins of Delta k = k_A + k_B with the center bin straddling zero.
class CorrelationHistogram {
public:
    CorrelationHistogram() = default;
    explicit CorrelationHistogram(const CorrelationParams& params);

    int bins_per_axis() const noexcept { return 2 * half_ + 1; }
    std::size_t size() const noexcept { return num_.size(); }
    double bin_width() const noexcept { return bin_width_; }
    /// Flat index of the bin holding dk, or nullopt outside the extent.
    std::optional<std::size_t> index(const Vec3& dk) const noexcept;
    std::size_t center_index() const noexcept;
    std::array<int, 3> unflatten(std::size_t flat) const noexcept;
    Vec3 bin_center(std::size_t flat) const noexcept;

    std::vector<std::uint64_t>& num() noexcept { return num_; }
    std::vector<std::uint64_t>& den() noexcept { return den_; }
    const std::vector<std::uint64_t>& num() const noexcept { return num_; }
    const std::vector<std::uint64_t>& den() const noexcept { return den_; }

    /// Mixed-shot pair counts are divided by this to match one same-shot pass.
    std::uint32_t den_scale = 1;
    std::uint32_t n_shots = 0;

    /// num * den_scale / den, nullopt where the denominator is empty.
    std::optional<double> g2(std::size_t flat) const noexcept;

    /// Elementwise addition; shapes and den_scale must agree.
    void merge(const CorrelationHistogram& other);

private:
    double bin_width_ = 0.0138;
    int half_ = 0;
    std::vector<std::uint64_t> num_;
    std::vector<std::uint64_t> den_;
};

/// Center-bin pair counts per shot, for resampling.
struct CenterCounts {
    std::vector<std::array<std::uint64_t, 4>> num;
    std::vector<std::array<std::uint64_t, 4>> den;
    std::uint32_t den_scale = 1;
};

struct PairHistograms {
    std::array<CorrelationHistogram, 4> hist;  // indexed by SpinPair
    CenterCounts center;
};

/// Numerator from same-shot (A, B) pairs, denominator from event mixing.
/// Integer counts, so the result is identical for any thread count.
/// Throws ConfigError for fewer than 2 shots.
PairHistograms accumulate_g2(std::span<const ShotPoints> shots, const CorrelationParams& params, unsigned threads = 1);

/// Single spin combination (i at arm A, j at arm B).
CorrelationHistogram accumulate_g2(std::span<const ShotPoints> shots, Spin i, Spin j, const CorrelationParams& params,
                                   unsigned threads = 1);

/// g2 in the center bin. Throws NumericalError if its denominator is empty.
double bb_value(const CorrelationHistogram& hist);

/// Center-bin g2 for the four spin pairs with per-shot multiplicities
/// (empty span: all ones). Throws NumericalError on an empty denominator.
std::array<double, 4> center_g2(const CenterCounts& counts, std::span<const std::uint32_t> weights = {});

/// Back-to-back g2 of the cross-spin pairs (ud and du pooled).
double cross_spin_bb(const CenterCounts& counts, std::span<const std::uint32_t> weights = {});

/// G_ij = 2 g2_ij / sum g2.
std::array<double, 4> normalized_G(const std::array<double, 4>& g2);

/// (g2_uu + g2_dd - g2_ud - g2_du) / sum g2.
double correlator_B(const std::array<double, 4>& g2);

struct BellEstimate {
    double theta_a = 0.0;
    double theta_b = 0.0;
    double b = 0.0;
    double se = 0.0;
    std::array<double, 4> g2{};
};

/// `theta,B,se,g2_uu,g2_dd,g2_ud,g2_du`, one row per estimate (theta = theta_a).
void write_bell_csv(std::span<const BellEstimate> rows, const std::filesystem::path& path);

/// Flattened histogram: `ix,iy,iz,dkx,dky,dkz,num,den,g2` with g2 empty where undefined.
void write_histogram_csv(const CorrelationHistogram& hist, const std::filesystem::path& path);

}  // namespace bellhalo
