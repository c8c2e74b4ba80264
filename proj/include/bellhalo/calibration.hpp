#pragma once

#include <span>
#include <vector>

#include "bellhalo/rng.hpp"

namespace bellhalo {

/// y = offset + (amplitude / 2) cos(frequency x + phase) exp(-decay x).
/// amplitude is the peak-to-peak swing: the Rabi amplitude for sin^2 data,
/// the fringe visibility for Ramsey data.
struct OscillationFit {
    double amplitude = 0.0;
    double frequency = 0.0;  // rad per unit of x
    double phase = 0.0;      // (-pi, pi]
    double offset = 0.0;
    double decay = 0.0;
    double residual_rms = 0.0;
    double se_amplitude = 0.0;
    double se_frequency = 0.0;
    double se_phase = 0.0;
    double se_offset = 0.0;
    double se_decay = 0.0;
    /// False when the data show no oscillation; frequency and phase are then meaningless.
    bool frequency_constrained = true;
};

enum class OscillationModel { Rabi, Ramsey, Damped };

/// P_down(tau) = amplitude sin^2(omega' tau / 2), omega' = omega (1 + jitter N(0,1))
/// drawn per point. Binomial with counts_per_point atoms; 0 returns exact values.
std::vector<double> simulate_rabi(std::span<const double> tau, double omega, double amplitude, Rng& rng,
                                  unsigned counts_per_point, double jitter = 0.0);

/// P_up(phi) = (1 + visibility cos phi) / 2, binomial as above.
std::vector<double> simulate_ramsey(std::span<const double> phi, double visibility, Rng& rng,
                                    unsigned counts_per_point);

/// Levenberg-Marquardt fit started from the periodogram peak. Rabi and Ramsey
/// keep decay at 0. Throws ConfigError for fewer than 8 points and
/// NumericalError, carrying the best parameters, if the iteration fails.
OscillationFit fit_sine(std::span<const double> x, std::span<const double> y, OscillationModel model);

}  // namespace bellhalo
