#include "bellhalo/bootstrap.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"
#include "bellhalo/rng.hpp"

namespace bellhalo {

double bootstrap_se(std::size_t n_items, const WeightedEstimator& estimator, const BootstrapOptions& opt) {
    if (n_items < 10) throw ConfigError("bootstrap needs at least 10 shots, got " + std::to_string(n_items));
    if (!(opt.eta > 0.0 && opt.eta <= 1.0)) throw ConfigError("bootstrap eta must be in (0, 1]");
    if (opt.n_resamples < 50) throw ConfigError("bootstrap needs at least 50 resamples");

    const auto m = static_cast<std::size_t>(std::max(1.0, std::round(opt.eta * static_cast<double>(n_items))));
    std::vector<double> results(opt.n_resamples);
    parallel_for(opt.n_resamples, opt.threads, [&](std::size_t r) {
        Rng rng(opt.seed, r, 3);
        std::vector<std::uint32_t> weights(n_items, 0);
        for (std::size_t i = 0; i < m; ++i) ++weights[rng.below(n_items)];
        try {
            results[r] = estimator(weights);
        } catch (const std::exception& e) {
            throw NumericalError("bootstrap resample " + std::to_string(r) + ": " + e.what());
        }
        if (!std::isfinite(results[r]))
            throw NumericalError("bootstrap resample " + std::to_string(r) + ": non-finite estimate");
    });

    // Shifted by the first result so identical results give exactly zero.
    const double ref = results.front();
    double mean = 0.0;
    for (double x : results) mean += x - ref;
    mean /= static_cast<double>(results.size());
    double var = 0.0;
    for (double x : results) var += (x - ref - mean) * (x - ref - mean);
    var /= static_cast<double>(results.size() - 1);
    return std::sqrt(opt.eta * var);
}

}  // namespace bellhalo
