#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bellhalo/bootstrap.hpp"
#include "bellhalo/correlation.hpp"

namespace bellhalo {

struct AnalysisConfig {
    CorrelationParams correlation;
    ReconstructionOptions reconstruction;
    double eta = 0.5;
    std::uint32_t n_resamples = 200;
};

/// Everything needed to go from a rotation setting to a Bell estimate.
struct SimConfig {
    SourceConfig source;
    DetectorConfig detector;
    AnalysisConfig analysis;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;

    void validate() const;
};

/// No loss, no background, no distortion, no resolution blur.
SimConfig ideal_preset();
/// Source and detector imperfections tuned to reproduce the measured B(pi/2) = 0.90.
SimConfig realistic_preset();

/// Source plus detector for shots [first_id, first_id + n_shots). Hits are
/// grouped by shot in id order.
std::vector<DetectorHit> simulate_hits(const SimConfig& cfg, const RotationSetting& rotation, std::uint32_t n_shots,
                                       std::uint32_t first_id = 0);

struct Analysis {
    Reconstruction reconstruction;
    PairHistograms histograms;
    BellEstimate bell;
    /// Pooled cross-spin back-to-back g2 and its bootstrap error.
    double g2_bb = 0.0;
    double g2_bb_se = 0.0;
};

/// Reconstruction, correlation and bootstrap for one setting.
Analysis analyze_hits(std::span<const DetectorHit> hits, const SimConfig& cfg, const RotationSetting& rotation,
                      std::uint32_t first_id, std::uint32_t n_shots);

/// Simulates and analyses one setting; shot ids start at first_id.
Analysis run_setting(const SimConfig& cfg, const RotationSetting& rotation, std::uint32_t n_shots,
                     std::uint32_t first_id);

/// Common rotation angle sweep; point i uses shot ids starting at i * n_shots.
std::vector<BellEstimate> bell_sweep(std::span<const double> thetas, std::uint32_t n_shots, const SimConfig& cfg);

struct ScanPoint {
    double n_occ = 0.0;
    double g2_bb = 0.0;
    double se = 0.0;
};

std::vector<ScanPoint> source_scan(std::span<const double> n_values, std::uint32_t n_shots, const SimConfig& cfg);

/// Weighted least squares g2 = a + b / n.
struct InverseFit {
    double a = 0.0;
    double b = 0.0;
    double se_a = 0.0;
    double se_b = 0.0;
};
InverseFit fit_inverse(std::span<const ScanPoint> points);

struct ChshResult {
    ChshSettings settings;
    /// E(a,b), E(a',b'), E(a',b), E(a,b').
    std::array<BellEstimate, 4> terms{};
    double value = 0.0;
    double se = 0.0;
    /// Back-to-back g2 from a separate unrotated run, and eps = (g2 - 1)/(g2 + 1).
    double g2_bb = 0.0;
    double g2_bb_se = 0.0;
    double epsilon = 0.0;
    double epsilon_se = 0.0;
    /// 2 sqrt(2) eps.
    double predicted = 0.0;
};

/// Four independent-angle runs plus one unrotated run, each n_shots.
ChshResult chsh_run(const ChshSettings& settings, std::uint32_t n_shots, const SimConfig& cfg);

}  // namespace bellhalo
