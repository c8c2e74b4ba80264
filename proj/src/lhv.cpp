#include "bellhalo/lhv.hpp"

#include <cmath>
#include <numbers>

#include "bellhalo/errors.hpp"

namespace bellhalo {
namespace {

std::vector<double> flat_dirichlet(std::size_t k, Rng& rng) {
    std::vector<double> w(k);
    double total = 0.0;
    for (auto& x : w) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        x = -std::log(u);
        total += x;
    }
    for (auto& x : w) x /= total;
    return w;
}

Eigen::Vector3d uniform_in_ball(Rng& rng) {
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    while (d.norm() == 0.0) d = {rng.normal(), rng.normal(), rng.normal()};
    return d.normalized() * std::cbrt(rng.uniform());
}

}  // namespace

TwoQubitState separable_state(const std::vector<ProductTerm>& terms) {
    if (terms.empty()) throw ConfigError("separable mixture needs at least one term");
    double total = 0.0;
    for (const auto& t : terms) {
        if (!(t.weight >= 0.0)) throw ConfigError("negative mixture weight");
        total += t.weight;
    }
    if (!(total > 0.0)) throw ConfigError("mixture weights sum to zero");
    Matrix4c rho = Matrix4c::Zero();
    for (const auto& t : terms) rho += (t.weight / total) * TwoQubitState::product(t.bloch_a, t.bloch_b).rho();
    return TwoQubitState(rho);
}

TwoQubitState sample_separable(Rng& rng) {
    const std::size_t k = 2 + rng.below(7);
    const auto w = flat_dirichlet(k, rng);
    std::vector<ProductTerm> terms(k);
    for (std::size_t i = 0; i < k; ++i) terms[i] = {w[i], uniform_in_ball(rng), uniform_in_ball(rng)};
    return separable_state(terms);
}

LhvCorrelationTable lhv_correlations(const std::vector<VectorLhvComponent>& model) {
    LhvCorrelationTable table;
    double total = 0.0;
    for (const auto& c : model) {
        if (!(c.weight >= 0.0)) throw ConfigError("negative hidden-variable weight");
        if (c.b_vector.norm() > 1.0 + 1e-12) throw ConfigError("B response vector longer than 1");
        total += c.weight;
    }
    for (std::size_t k = 0; k < kLhvGridSize; ++k) {
        const double beta = 2.0 * std::numbers::pi * static_cast<double>(k) / kLhvGridSize;
        table.direction[k] = beta;
        const Eigen::Vector2d n(std::cos(beta), std::sin(beta));
        double e = 0.0;
        if (total > 0.0) {
            for (const auto& c : model) {
                const int a = c.a_outcome[k] >= 0 ? 1 : -1;
                e += (c.weight / total) * a * c.b_vector.dot(n);
            }
        }
        table.E[k] = e;
    }
    constexpr std::size_t quarter = kLhvGridSize / 4;
    for (std::size_t k = 0; k < kLhvGridSize; ++k)
        table.S = std::max(table.S, std::abs(table.E[k] - table.E[(k + quarter) % kLhvGridSize]));
    return table;
}

LhvCorrelationTable sample_vector_lhv(Rng& rng) {
    const std::size_t k = 1 + rng.below(8);
    const auto w = flat_dirichlet(k, rng);
    std::vector<VectorLhvComponent> model(k);
    for (std::size_t i = 0; i < k; ++i) {
        model[i].weight = w[i];
        for (auto& a : model[i].a_outcome) a = rng.bernoulli(0.5) ? 1 : -1;
        // Mostly full-length vectors, where the bound is tight.
        const double len = rng.bernoulli(0.5) ? 1.0 : std::sqrt(rng.uniform());
        const double psi = 2.0 * std::numbers::pi * rng.uniform();
        model[i].b_vector = len * Eigen::Vector2d(std::cos(psi), std::sin(psi));
    }
    return lhv_correlations(model);
}

}  // namespace bellhalo
