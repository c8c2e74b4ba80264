#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

namespace bellhalo {

struct BootstrapOptions {
    /// Resample size as a fraction of the number of shots.
    double eta = 0.5;
    std::uint32_t n_resamples = 200;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Estimator over a resample given as a multiplicity per item (shot).
using WeightedEstimator = std::function<double(std::span<const std::uint32_t> weights)>;

/// Draws n_resamples subsets of round(eta * n) items with replacement and
/// returns sqrt(eta * Var). Resample r uses its own stream, so the result does
/// not depend on the thread count. Estimator failures are rethrown as
/// NumericalError naming the resample index.
double bootstrap_se(std::size_t n_items, const WeightedEstimator& estimator, const BootstrapOptions& opt);

}  // namespace bellhalo
