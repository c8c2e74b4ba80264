#include "bellhalo/qubit.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "bellhalo/errors.hpp"

namespace bellhalo {
namespace {

using cd = std::complex<double>;

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-12;
constexpr double kPsdTol = -1e-10;

Matrix2c sigma_x() {
    Matrix2c m;
    m << 0, 1, 1, 0;
    return m;
}
Matrix2c sigma_y() {
    Matrix2c m;
    m << 0, cd(0, -1), cd(0, 1), 0;
    return m;
}
Matrix2c sigma_z() {
    Matrix2c m;
    m << 1, 0, 0, -1;
    return m;
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
    Matrix4c out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) out(2 * i + j, 2 * k + l) = a(i, k) * b(j, l);
    return out;
}

int index_of(Spin a, Spin b) { return 2 * static_cast<int>(a) + static_cast<int>(b); }

double expectation(const Matrix4c& rho, const Matrix2c& a, const Matrix2c& b) {
    return (rho * kron(a, b)).trace().real();
}

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) throw ConfigError(std::string("rotation angle ") + name + " is not finite");
}

}  // namespace

TwoQubitState::TwoQubitState(const Matrix4c& rho) : rho_(rho) {
    if (!rho.allFinite()) throw ConfigError("density matrix has non-finite entries");
    const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol) {
        std::ostringstream msg;
        msg << "density matrix is not Hermitian (max deviation " << herm << ")";
        throw ConfigError(msg.str());
    }
    const cd tr = rho.trace();
    if (std::abs(tr - cd(1.0, 0.0)) > kTraceTol) {
        std::ostringstream msg;
        msg << "density matrix trace is " << tr.real() << ", expected 1";
        throw ConfigError(msg.str());
    }
    // Symmetrize before the eigen-solve; the check above bounds the correction.
    const Matrix4c h = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix4c> eig(h, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < kPsdTol) {
        std::ostringstream msg;
        msg << "density matrix is not positive semidefinite (eigenvalue " << eig.eigenvalues().minCoeff() << ")";
        throw ConfigError(msg.str());
    }
}

TwoQubitState TwoQubitState::product(const Eigen::Vector3d& bloch_a, const Eigen::Vector3d& bloch_b) {
    auto single = [](const Eigen::Vector3d& r) {
        Matrix2c m = Matrix2c::Identity();
        m += r.x() * sigma_x() + r.y() * sigma_y() + r.z() * sigma_z();
        return Matrix2c(0.5 * m);
    };
    if (bloch_a.norm() > 1.0 + 1e-12 || bloch_b.norm() > 1.0 + 1e-12)
        throw ConfigError("Bloch vector longer than 1");
    return TwoQubitState(kron(single(bloch_a), single(bloch_b)));
}

TwoQubitState TwoQubitState::basis(Spin a, Spin b) {
    Matrix4c rho = Matrix4c::Zero();
    const int i = index_of(a, b);
    rho(i, i) = 1.0;
    return TwoQubitState(rho);
}

TwoQubitState TwoQubitState::maximally_mixed() { return TwoQubitState(Matrix4c(Matrix4c::Identity() * 0.25)); }

TwoQubitState TwoQubitState::pure(const Eigen::Vector4cd& psi) {
    const double n = psi.norm();
    if (!(n > 0.0)) throw ConfigError("zero state vector");
    const Eigen::Vector4cd v = psi / n;
    return TwoQubitState(Matrix4c(v * v.adjoint()));
}

double TwoQubitState::probability(Spin a, Spin b) const noexcept {
    const int i = index_of(a, b);
    return std::max(0.0, rho_(i, i).real());
}

Matrix2c pulse(double theta, double azimuth) {
    // Axis at `azimuth` from +y towards -x: azimuth = 0 is sigma_y.
    const Matrix2c n_sigma = -std::sin(azimuth) * sigma_x() + std::cos(azimuth) * sigma_y();
    return Matrix2c(std::cos(theta / 2) * Matrix2c::Identity() - cd(0, 1) * std::sin(theta / 2) * n_sigma);
}

TwoQubitState bell_triplet() {
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(index_of(Spin::Up, Spin::Down)) = 1.0 / std::sqrt(2.0);
    psi(index_of(Spin::Down, Spin::Up)) = 1.0 / std::sqrt(2.0);
    return TwoQubitState(Matrix4c(psi * psi.adjoint()));
}

TwoQubitState rotate(const TwoQubitState& state, const RotationSetting& setting) {
    require_finite(setting.theta_a, "theta_a");
    require_finite(setting.theta_b, "theta_b");
    require_finite(setting.azimuth, "azimuth");
    const Matrix4c u = kron(pulse(setting.theta_a, setting.azimuth), pulse(setting.theta_b, setting.azimuth));
    Matrix4c rho = u * state.rho() * u.adjoint();
    // Unitary conjugation keeps the trace; strip accumulated round-off from the diagonal phase.
    rho = 0.5 * (rho + rho.adjoint());
    return TwoQubitState(rho);
}

TwoQubitState mix(const TwoQubitState& a, const TwoQubitState& b, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("mixture weight outside [0, 1]");
    return TwoQubitState(Matrix4c(w * a.rho() + (1.0 - w) * b.rho()));
}

double correlator_zz(const TwoQubitState& state) {
    // Diagonal of sigma_z (x) sigma_z is (+1, -1, -1, +1).
    const Matrix4c& r = state.rho();
    return r(0, 0).real() - r(1, 1).real() - r(2, 2).real() + r(3, 3).real();
}

SpinCorrelators correlators(const TwoQubitState& state) {
    const Matrix4c& r = state.rho();
    return {expectation(r, sigma_x(), sigma_x()), expectation(r, sigma_x(), sigma_z()),
            expectation(r, sigma_z(), sigma_x()), expectation(r, sigma_z(), sigma_z())};
}

double amplitude_A(const SpinCorrelators& c) { return std::hypot(c.xx - c.zz, c.xz + c.zx); }

double witness_S(double b1, double b2) {
    constexpr double slack = 1e-9;
    if (!(std::abs(b1) <= 1.0 + slack) || !(std::abs(b2) <= 1.0 + slack))
        throw ConfigError("correlator outside [-1, 1]");
    return std::abs(b1 - b2);
}

std::pair<Spin, Spin> born_sample(const TwoQubitState& state, Rng& rng) {
    static constexpr std::array<std::pair<Spin, Spin>, 4> outcomes{
        {{Spin::Up, Spin::Up}, {Spin::Up, Spin::Down}, {Spin::Down, Spin::Up}, {Spin::Down, Spin::Down}}};
    std::array<double, 4> p{};
    double total = 0.0;
    for (int i = 0; i < 4; ++i) {
        p[i] = std::max(0.0, state.rho()(i, i).real());
        total += p[i];
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        acc += p[i];
        if (u < acc) return outcomes[i];
    }
    // Last outcome with non-zero weight, so a pure |up up> never returns down-down by round-off.
    for (int i = 3; i >= 0; --i)
        if (p[i] > 0.0) return outcomes[i];
    return outcomes[3];
}

double correlator_E(const TwoQubitState& state, double theta_a, double theta_b) {
    return correlator_zz(rotate(state, {theta_a, theta_b, 0.0}));
}

double chsh_value(const TwoQubitState& state, const ChshSettings& s) {
    return std::abs(correlator_E(state, s.a, s.b) + correlator_E(state, s.a_prime, s.b_prime) +
                    correlator_E(state, s.a_prime, s.b) - correlator_E(state, s.a, s.b_prime));
}

ChshSettings optimal_chsh_settings() {
    constexpr double pi = std::numbers::pi;
    return {0.0, pi / 2, -pi / 4, -3 * pi / 4};
}

double bogoliubov_epsilon(double g2) {
    if (!(g2 >= 1.0)) throw ConfigError("g2 must be >= 1");
    if (std::isinf(g2)) return 1.0;
    return (g2 - 1.0) / (g2 + 1.0);
}

double bogoliubov_E(double bloch_a, double bloch_b, double g2) {
    return -bogoliubov_epsilon(g2) * std::cos(bloch_a + bloch_b);
}

}  // namespace bellhalo
