#pragma once

#include <array>
#include <complex>
#include <numbers>
#include <utility>

#include <Eigen/Dense>

#include "bellhalo/rng.hpp"

namespace bellhalo {

enum class Spin : unsigned char { Up = 0, Down = 1 };

constexpr Spin flip(Spin s) noexcept { return s == Spin::Up ? Spin::Down : Spin::Up; }

using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;

/// Two-qubit density matrix in the basis (up-up, up-down, down-up, down-down),
/// first factor is arm A. Up is the m_J = 1 level and carries sigma_z = +1.
class TwoQubitState {
public:
    /// Validates Hermiticity, unit trace and positivity; throws ConfigError otherwise.
    explicit TwoQubitState(const Matrix4c& rho);

    static TwoQubitState product(const Eigen::Vector3d& bloch_a, const Eigen::Vector3d& bloch_b);
    static TwoQubitState basis(Spin a, Spin b);
    static TwoQubitState maximally_mixed();
    /// Pure state from amplitudes; normalized internally.
    static TwoQubitState pure(const Eigen::Vector4cd& psi);

    const Matrix4c& rho() const noexcept { return rho_; }
    double probability(Spin a, Spin b) const noexcept;

private:
    Matrix4c rho_;
};

/// Rotation pulse settings. Angles are pulse areas: a pulse of area theta turns
/// the Bloch vector by theta, so theta = pi/2 mixes the two levels evenly.
/// azimuth selects the rotation axis cos(azimuth) x + sin(azimuth) y measured
/// from the y axis, so azimuth = 0 is the R_y pulse.
struct RotationSetting {
    double theta_a = 0.0;
    double theta_b = 0.0;
    double azimuth = 0.0;

    static RotationSetting common(double theta, double azimuth = 0.0) { return {theta, theta, azimuth}; }
};

/// 2x2 spin correlators C_ij = <sigma_i^A sigma_j^B>, i, j in {x, z}.
struct SpinCorrelators {
    double xx = 0.0;
    double xz = 0.0;
    double zx = 0.0;
    double zz = 0.0;
};

/// Single-qubit pulse exp(-i theta/2 (n . sigma)), n in the xy plane at `azimuth` from y.
Matrix2c pulse(double theta, double azimuth);

TwoQubitState bell_triplet();
TwoQubitState rotate(const TwoQubitState& state, const RotationSetting& setting);
/// Convex combination w * a + (1 - w) * b.
TwoQubitState mix(const TwoQubitState& a, const TwoQubitState& b, double w);

double correlator_zz(const TwoQubitState& state);
SpinCorrelators correlators(const TwoQubitState& state);

/// Oscillation amplitude of B(theta) under common y rotations; > 1 only for entangled states.
double amplitude_A(const SpinCorrelators& c);

/// |b1 - b2|. Above 1 witnesses entanglement, above sqrt(2) excludes the
/// binary-outcome/vector LHV class.
double witness_S(double b1, double b2);

inline constexpr double kEntanglementBound = 1.0;
inline const double kBellBound = std::numbers::sqrt2;

/// Born-rule sample of the z-basis outcome (spin at A, spin at B).
std::pair<Spin, Spin> born_sample(const TwoQubitState& state, Rng& rng);

/// CHSH settings: pulse areas at A (theta, theta') and at B (phi, phi').
struct ChshSettings {
    double a = 0.0;
    double a_prime = 0.0;
    double b = 0.0;
    double b_prime = 0.0;
};

/// E(a,b) with independent y pulses at A and B.
double correlator_E(const TwoQubitState& state, double theta_a, double theta_b);
/// |E(a,b) + E(a',b') + E(a',b) - E(a,b')|.
double chsh_value(const TwoQubitState& state, const ChshSettings& s);
/// Settings reaching 2 sqrt(2) on the triplet, E(a,b) = -cos(a + b).
ChshSettings optimal_chsh_settings();

/// Pair-source correlator -eps cos(bloch_a + bloch_b), eps = (g2 - 1)/(g2 + 1).
/// Takes Bloch-sphere angles; with the pulse-area convention above these coincide
/// with pulse angles.
double bogoliubov_E(double bloch_a, double bloch_b, double g2);
double bogoliubov_epsilon(double g2);

/// g2 above which the optimised CHSH value of the pair source exceeds 2.
inline const double kChshG2Threshold = 3.0 + 2.0 * std::numbers::sqrt2;

}  // namespace bellhalo
