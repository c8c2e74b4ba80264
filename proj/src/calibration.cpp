#include "bellhalo/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "bellhalo/errors.hpp"

namespace bellhalo {
namespace {

constexpr double kPi = std::numbers::pi;

double binomial_fraction(double p, unsigned n, Rng& rng) {
    if (n == 0) return p;
    std::binomial_distribution<unsigned> dist(n, std::clamp(p, 0.0, 1.0));
    return static_cast<double>(dist(rng)) / n;
}

double wrap(double phase) {
    phase = std::remainder(phase, 2.0 * kPi);
    return phase <= -kPi ? phase + 2.0 * kPi : phase;
}

// Parameters: amplitude, frequency, phase, offset[, decay].
struct SineResidual {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    std::span<const double> x, y;
    int n_params;

    int inputs() const { return n_params; }
    int values() const { return static_cast<int>(x.size()); }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
        const double d = n_params > 4 ? p[4] : 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            r[static_cast<Eigen::Index>(i)] =
                p[3] + 0.5 * p[0] * std::cos(p[1] * x[i] + p[2]) * std::exp(-d * x[i]) - y[i];
        return 0;
    }

    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& j) const {
        const double d = n_params > 4 ? p[4] : 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            const double arg = p[1] * x[i] + p[2];
            const double e = std::exp(-d * x[i]);
            const double c = std::cos(arg), s = std::sin(arg);
            j(row, 0) = 0.5 * c * e;
            j(row, 1) = -0.5 * p[0] * s * e * x[i];
            j(row, 2) = -0.5 * p[0] * s * e;
            j(row, 3) = 1.0;
            if (n_params > 4) j(row, 4) = -0.5 * p[0] * c * e * x[i];
        }
        return 0;
    }
};

struct Seed {
    double amplitude, frequency, phase, offset, rss;
};

// Linear fit c + a cos(w x) + b sin(w x) at fixed w.
Seed linear_sine(std::span<const double> x, std::span<const double> y, double w) {
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d aty = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Eigen::Vector3d row(1.0, std::cos(w * x[i]), std::sin(w * x[i]));
        ata += row * row.transpose();
        aty += row * y[i];
    }
    const Eigen::Vector3d c = ata.ldlt().solve(aty);
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - c[0] - c[1] * std::cos(w * x[i]) - c[2] * std::sin(w * x[i]);
        rss += r * r;
    }
    // a cos + b sin = R cos(w x + phi) with R = hypot(a, b), phi = atan2(-b, a).
    return {2.0 * std::hypot(c[1], c[2]), w, std::atan2(-c[2], c[1]), c[0], std::isfinite(rss) ? rss : 1e300};
}

Seed periodogram_peak(std::span<const double> x, std::span<const double> y) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    const double span = *hi - *lo;
    const double w_max = kPi * static_cast<double>(x.size() - 1) / span;
    const double step = 2.0 * kPi / (8.0 * span);
    Seed best{0, 0, 0, 0, 1e300};
    for (double w = step; w <= w_max; w += step) {
        const Seed s = linear_sine(x, y, w);
        if (s.rss < best.rss) best = s;
    }
    return best;
}

}  // namespace

std::vector<double> simulate_rabi(std::span<const double> tau, double omega, double amplitude, Rng& rng,
                                  unsigned counts_per_point, double jitter) {
    if (!(omega > 0.0)) throw ConfigError("rabi.omega: must be > 0");
    if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw ConfigError("rabi.amplitude: must be in [0, 1]");
    std::vector<double> out(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
        const double w = jitter > 0.0 ? omega * (1.0 + jitter * rng.normal()) : omega;
        const double s = std::sin(0.5 * w * tau[i]);
        out[i] = binomial_fraction(amplitude * s * s, counts_per_point, rng);
    }
    return out;
}

std::vector<double> simulate_ramsey(std::span<const double> phi, double visibility, Rng& rng,
                                    unsigned counts_per_point) {
    if (!(visibility >= 0.0 && visibility <= 1.0)) throw ConfigError("ramsey.visibility: must be in [0, 1]");
    std::vector<double> out(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i)
        out[i] = binomial_fraction(0.5 * (1.0 + visibility * std::cos(phi[i])), counts_per_point, rng);
    return out;
}

OscillationFit fit_sine(std::span<const double> x, std::span<const double> y, OscillationModel model) {
    if (x.size() != y.size()) throw ConfigError("fit_sine: x and y differ in length");
    if (x.size() < 8) throw ConfigError("fit_sine: need at least 8 points");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ConfigError("fit_sine: non-finite data");

    OscillationFit fit;
    const auto [ymin, ymax] = std::minmax_element(y.begin(), y.end());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    if (*ymax - *ymin < 1e-12) {
        fit.offset = mean;
        fit.frequency_constrained = false;
        return fit;
    }

    const Seed seed = periodogram_peak(x, y);
    const int np = model == OscillationModel::Damped ? 5 : 4;
    Eigen::VectorXd p(np);
    p << seed.amplitude, seed.frequency, seed.phase, seed.offset;
    if (np == 5) p[4] = 0.0;

    SineResidual f{x, y, np};
    Eigen::LevenbergMarquardt<SineResidual> lm(f);
    lm.parameters.maxfev = 2000;
    lm.parameters.xtol = 1e-14;
    lm.parameters.ftol = 1e-14;
    const auto status = lm.minimize(p);

    Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
    f(p, r);
    const double rss = r.squaredNorm();
    fit.residual_rms = std::sqrt(rss / static_cast<double>(x.size()));
    if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
        status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation || !p.allFinite()) {
        std::ostringstream msg;
        msg << "fit_sine did not converge (status " << static_cast<int>(status) << "); best amplitude " << p[0]
            << ", frequency " << p[1] << ", phase " << p[2] << ", offset " << p[3] << ", rms " << fit.residual_rms;
        throw NumericalError(msg.str());
    }

    if (p[0] < 0.0) {
        p[0] = -p[0];
        p[2] += kPi;
    }
    if (p[1] < 0.0) {
        p[1] = -p[1];
        p[2] = -p[2];
    }
    fit.amplitude = p[0];
    fit.frequency = p[1];
    fit.phase = wrap(p[2]);
    fit.offset = p[3];
    fit.decay = np == 5 ? p[4] : 0.0;

    Eigen::MatrixXd j(static_cast<Eigen::Index>(x.size()), np);
    f.df(p, j);
    const double dof = static_cast<double>(x.size()) - np;
    const Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (dof > 0 && lu.isInvertible()) {
        const Eigen::MatrixXd cov = lu.inverse() * (rss / dof);
        fit.se_amplitude = std::sqrt(std::max(0.0, cov(0, 0)));
        fit.se_frequency = std::sqrt(std::max(0.0, cov(1, 1)));
        fit.se_phase = std::sqrt(std::max(0.0, cov(2, 2)));
        fit.se_offset = std::sqrt(std::max(0.0, cov(3, 3)));
        if (np == 5) fit.se_decay = std::sqrt(std::max(0.0, cov(4, 4)));
    } else {
        fit.frequency_constrained = false;
    }
    if (fit.amplitude < 3.0 * fit.se_amplitude) fit.frequency_constrained = false;
    return fit;
}

}  // namespace bellhalo
