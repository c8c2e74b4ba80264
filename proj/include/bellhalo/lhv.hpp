#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "bellhalo/qubit.hpp"
#include "bellhalo/rng.hpp"

namespace bellhalo {

/// One term p * rho_a (x) rho_b of a separable mixture.
struct ProductTerm {
    double weight = 1.0;
    Eigen::Vector3d bloch_a = Eigen::Vector3d::Zero();
    Eigen::Vector3d bloch_b = Eigen::Vector3d::Zero();
};

/// Sum of product terms; weights are renormalized to 1.
TwoQubitState separable_state(const std::vector<ProductTerm>& terms);

/// Random separable state: 2..8 terms, flat Dirichlet weights, Bloch vectors uniform in the ball.
TwoQubitState sample_separable(Rng& rng);

/// Measurement directions in the zx plane of the Bloch sphere, angle measured from +z.
inline constexpr std::size_t kLhvGridSize = 16;

/// Hidden-variable value: A answers +/-1 for every direction on the grid,
/// B answers on average along a vector of length <= 1 in the zx plane.
struct VectorLhvComponent {
    double weight = 1.0;
    std::array<int, kLhvGridSize> a_outcome{};
    Eigen::Vector2d b_vector = Eigen::Vector2d::Zero();  // (z, x) components
};

struct LhvCorrelationTable {
    std::array<double, kLhvGridSize> direction{};  // Bloch angle from +z
    std::array<double, kLhvGridSize> E{};          // <A(beta) B(beta)>
    /// max over the grid of |E(beta) - E(beta + pi/2)|.
    double S = 0.0;
};

LhvCorrelationTable lhv_correlations(const std::vector<VectorLhvComponent>& model);

/// Random model with 1..8 hidden-variable values and arbitrary binary responses at A.
LhvCorrelationTable sample_vector_lhv(Rng& rng);

}  // namespace bellhalo
