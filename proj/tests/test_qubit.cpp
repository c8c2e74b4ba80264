#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bellhalo/errors.hpp"
#include "bellhalo/lhv.hpp"
#include "bellhalo/qubit.hpp"
#include "oracles.hpp"

using namespace bellhalo;
constexpr double pi = std::numbers::pi;

namespace {

TwoQubitState random_state(Rng& rng) {
    Matrix4c g;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) g(i, j) = {rng.normal(), rng.normal()};
    Matrix4c rho = g * g.adjoint();
    rho /= rho.trace().real();
    return TwoQubitState(Matrix4c(0.5 * (rho + rho.adjoint())));
}

oracle::M4 to_oracle(const TwoQubitState& s) {
    oracle::M4 m{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) m[i][j] = s.rho()(i, j);
    return m;
}

double max_diff(const Matrix4c& a, const oracle::M4& b) {
    double d = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) d = std::max(d, std::abs(a(i, j) - b[i][j]));
    return d;
}

// Fraction check at 5 binomial standard deviations.
void check_fraction(std::size_t hits, std::size_t n, double p) {
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(n));
    const double f = static_cast<double>(hits) / static_cast<double>(n);
    CHECK(std::abs(f - p) <= 5 * sigma + 1e-12);
}

}  // namespace

TEST_CASE("triplet density matrix") {
    const auto rho = bell_triplet().rho();
    CHECK(max_diff(rho, oracle::triplet()) < 1e-15);
    CHECK(rho(1, 1).real() == doctest::Approx(0.5));
    CHECK(rho(1, 2).real() == doctest::Approx(0.5));
    CHECK(std::abs(rho(0, 0)) == 0.0);
    CHECK(std::abs(rho(3, 3)) == 0.0);
}

TEST_CASE("zz correlator of canonical states") {
    CHECK(correlator_zz(TwoQubitState::basis(Spin::Up, Spin::Up)) == doctest::Approx(1.0));
    CHECK(correlator_zz(bell_triplet()) == doctest::Approx(-1.0));
    CHECK(correlator_zz(TwoQubitState::maximally_mixed()) == doctest::Approx(0.0));
}

TEST_CASE("spin correlators against direct matrix algebra") {
    const auto c = correlators(bell_triplet());
    const auto o = oracle::triplet();
    CHECK(c.xx == doctest::Approx(oracle::expect(o, oracle::sx, oracle::sx)).epsilon(1e-12));
    CHECK(c.zz == doctest::Approx(oracle::expect(o, oracle::sz, oracle::sz)).epsilon(1e-12));
    CHECK(c.xx == doctest::Approx(1.0));
    CHECK(c.zz == doctest::Approx(-1.0));
    CHECK(std::abs(c.xz) < 1e-15);
    CHECK(std::abs(c.zx) < 1e-15);
    CHECK(amplitude_A(c) == doctest::Approx(2.0));

    const auto up = correlators(TwoQubitState::basis(Spin::Up, Spin::Up));
    CHECK(up.zz == doctest::Approx(1.0));
    CHECK(std::abs(up.xx) + std::abs(up.xz) + std::abs(up.zx) < 1e-15);

    const auto mixed = correlators(TwoQubitState::maximally_mixed());
    CHECK(std::abs(mixed.xx) + std::abs(mixed.xz) + std::abs(mixed.zx) + std::abs(mixed.zz) < 1e-15);
    CHECK(amplitude_A({}) == 0.0);
}

TEST_CASE("correlators match the oracle on random states") {
    Rng rng(7, 1);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_state(rng);
        const auto o = to_oracle(s);
        const auto c = correlators(s);
        CHECK(c.xx == doctest::Approx(oracle::expect(o, oracle::sx, oracle::sx)).epsilon(1e-12));
        CHECK(c.xz == doctest::Approx(oracle::expect(o, oracle::sx, oracle::sz)).epsilon(1e-12));
        CHECK(c.zx == doctest::Approx(oracle::expect(o, oracle::sz, oracle::sx)).epsilon(1e-12));
        CHECK(c.zz == doctest::Approx(oracle::expect(o, oracle::sz, oracle::sz)).epsilon(1e-12));
        for (auto v : {c.xx, c.xz, c.zx, c.zz}) CHECK(std::abs(v) <= 1 + 1e-10);
    }
}

TEST_CASE("rotation examples") {
    const auto psi = bell_triplet();
    CHECK((rotate(psi, {}).rho() - psi.rho()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(correlator_zz(rotate(psi, RotationSetting::common(pi / 4)))) < 1e-12);
    CHECK(correlator_zz(rotate(psi, RotationSetting::common(pi / 2))) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(rotate(psi, {NAN, 0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(rotate(psi, {0.0, INFINITY, 0.0}), ConfigError);
}

TEST_CASE("y rotation matches the element-wise oracle") {
    Rng rng(7, 2);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_state(rng);
        const double ta = 2 * pi * rng.uniform(), tb = 2 * pi * rng.uniform();
        CHECK(max_diff(rotate(s, {ta, tb, 0.0}).rho(), oracle::rotate_y(to_oracle(s), ta, tb)) < 1e-12);
    }
}

TEST_CASE("rotation is unitary on random states") {
    Rng rng(7, 3);
    for (int t = 0; t < 100; ++t) {
        const auto s = random_state(rng);
        const RotationSetting set{2 * pi * rng.uniform(), 2 * pi * rng.uniform(), 2 * pi * rng.uniform()};
        const Matrix4c r = rotate(s, set).rho();
        CHECK(std::abs(r.trace().real() - 1.0) < 1e-10);
        CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
        Eigen::SelfAdjointEigenSolver<Matrix4c> before(s.rho()), after(r);
        CHECK((before.eigenvalues() - after.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("B(theta) = -cos 2 theta on the triplet") {
    for (int i = 0; i < 100; ++i) {
        const double theta = pi * i / 99.0;
        CHECK(std::abs(correlator_zz(rotate(bell_triplet(), RotationSetting::common(theta))) + std::cos(2 * theta)) <
              1e-12);
    }
}

TEST_CASE("independent rotations depend only on the angle sum") {
    for (int i = 0; i < 20; ++i) {
        for (int j = 0; j < 20; ++j) {
            const double a = -pi + 2 * pi * i / 19.0, b = -pi + 2 * pi * j / 19.0;
            const double e = correlator_E(bell_triplet(), a, b);
            CHECK(std::abs(e - correlator_E(bell_triplet(), a + b, 0.0)) < 1e-12);
            CHECK(std::abs(e + std::cos(a + b)) < 1e-12);
        }
    }
}

TEST_CASE("Born sampling") {
    SUBCASE("eigenstate") {
        Rng rng(3, 1);
        const auto s = TwoQubitState::basis(Spin::Up, Spin::Down);
        for (int i = 0; i < 1000; ++i) CHECK(born_sample(s, rng) == std::pair{Spin::Up, Spin::Down});
    }
    SUBCASE("frequencies follow the diagonal") {
        const std::array<TwoQubitState, 5> states{bell_triplet(), rotate(bell_triplet(), RotationSetting::common(pi / 4)),
                                                  TwoQubitState::maximally_mixed(),
                                                  TwoQubitState::basis(Spin::Down, Spin::Down),
                                                  rotate(bell_triplet(), {0.3, 1.1, 0.0})};
        Rng rng(3, 2);
        for (const auto& s : states) {
            const auto o = to_oracle(s);
            constexpr std::size_t n = 1'000'000;
            std::array<std::size_t, 4> counts{};
            for (std::size_t i = 0; i < n; ++i) {
                const auto [a, b] = born_sample(s, rng);
                ++counts[2 * static_cast<int>(a) + static_cast<int>(b)];
            }
            for (int k = 0; k < 4; ++k) check_fraction(counts[k], n, o[k][k].real());
        }
    }
}

TEST_CASE("witness S") {
    CHECK(witness_S(-1, 1) == 2.0);
    CHECK(witness_S(0.90, -0.87) == doctest::Approx(1.77));
    CHECK(witness_S(0.3, 0.3) == 0.0);
    CHECK(witness_S(1.0 + 1e-10, -1.0) == doctest::Approx(2.0));
    CHECK_THROWS_AS(witness_S(1.01, 0.0), ConfigError);
    CHECK_THROWS_AS(witness_S(0.0, NAN), ConfigError);
}

TEST_CASE("CHSH optimum agrees with a brute-force grid search") {
    // Analytic E = -cos(a + b), maximized over a 64^4 grid of pulse angles.
    constexpr int n = 64;
    std::array<double, n> cosines{};
    for (int i = 0; i < n; ++i) cosines[i] = std::cos(2 * pi * i / n);
    auto e = [&](int a, int b) { return -cosines[(a + b) % n]; };
    double best = 0.0;
    for (int a = 0; a < n; ++a)
        for (int ap = 0; ap < n; ++ap)
            for (int b = 0; b < n; ++b)
                for (int bp = 0; bp < n; ++bp)
                    best = std::max(best, std::abs(e(a, b) + e(ap, bp) + e(ap, b) - e(a, bp)));
    CHECK(best == doctest::Approx(2 * std::numbers::sqrt2).epsilon(1e-12));
    CHECK(chsh_value(bell_triplet(), optimal_chsh_settings()) == doctest::Approx(best).epsilon(1e-9));
}

TEST_CASE("CHSH bounds") {
    Rng rng(5, 1);
    const auto up = TwoQubitState::basis(Spin::Up, Spin::Up);
    for (int t = 0; t < 1000; ++t) {
        const ChshSettings s{2 * pi * rng.uniform(), 2 * pi * rng.uniform(), 2 * pi * rng.uniform(),
                             2 * pi * rng.uniform()};
        CHECK(chsh_value(up, s) <= 2.0 + 1e-12);
        CHECK(chsh_value(TwoQubitState::maximally_mixed(), s) < 1e-12);
    }
}

TEST_CASE("Tsirelson bound on random states") {
    Rng rng(5, 2);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const auto s = random_state(rng);
        const ChshSettings set{2 * pi * rng.uniform(), 2 * pi * rng.uniform(), 2 * pi * rng.uniform(),
                               2 * pi * rng.uniform()};
        worst = std::max(worst, chsh_value(s, set));
    }
    CHECK(worst <= 2 * std::numbers::sqrt2 + 1e-9);
}

TEST_CASE("pair-source correlator") {
    CHECK(bogoliubov_E(0, 0, INFINITY) == -1.0);
    CHECK(bogoliubov_E(0, 0, kChshG2Threshold) == doctest::Approx(-1 / std::numbers::sqrt2).epsilon(1e-12));
    CHECK(std::abs(bogoliubov_E(pi / 2, 0, 7.0)) < 1e-15);
    CHECK(bogoliubov_epsilon(1.0) == 0.0);
    CHECK_THROWS_AS(bogoliubov_E(0, 0, 0.99), ConfigError);
    CHECK_THROWS_AS(bogoliubov_epsilon(NAN), ConfigError);
}

TEST_CASE("density matrix validation") {
    Matrix4c bad = Matrix4c::Zero();
    bad(0, 0) = 1.0;
    bad(0, 1) = 0.1;
    CHECK_THROWS_AS(TwoQubitState{bad}, ConfigError);
    CHECK_THROWS_AS(TwoQubitState{Matrix4c(Matrix4c::Identity() * 0.5)}, ConfigError);
    Matrix4c neg = Matrix4c::Zero();
    neg(0, 0) = 1.5;
    neg(1, 1) = -0.5;
    CHECK_THROWS_AS(TwoQubitState{neg}, ConfigError);
    CHECK_THROWS_AS(TwoQubitState::product(Eigen::Vector3d(0, 0, 1.1), Eigen::Vector3d::Zero()), ConfigError);
}

TEST_CASE("separable states") {
    const auto s = separable_state({{1.0, Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 1)}});
    CHECK((s.rho() - TwoQubitState::basis(Spin::Up, Spin::Up).rho()).cwiseAbs().maxCoeff() < 1e-15);

    const auto anti = separable_state({{0.5, Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1)},
                                       {0.5, Eigen::Vector3d(0, 0, -1), Eigen::Vector3d(0, 0, 1)}});
    const auto o = oracle::projector({0.0, 1.0, 0.0, 0.0});
    const auto o2 = oracle::projector({0.0, 0.0, 1.0, 0.0});
    oracle::M4 mix{};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) mix[i][j] = 0.5 * (o[i][j] + o2[i][j]);
    const auto c = correlators(anti);
    CHECK(c.zz == doctest::Approx(oracle::expect(mix, oracle::sz, oracle::sz)));
    CHECK(c.zz == doctest::Approx(-1.0));
    CHECK(amplitude_A(c) == doctest::Approx(1.0));

    CHECK_THROWS_AS(separable_state({}), ConfigError);
    CHECK_THROWS_AS(separable_state({{-1.0, {}, {}}}), ConfigError);
}

TEST_CASE("separable amplitude never exceeds 1") {
    Rng rng(9, 1);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) worst = std::max(worst, amplitude_A(correlators(sample_separable(rng))));
    CHECK(worst <= 1.0 + 1e-9);
    CHECK(worst > 0.5);
}

TEST_CASE("vector hidden-variable models") {
    VectorLhvComponent c;
    c.a_outcome.fill(1);
    c.b_vector = Eigen::Vector2d(1.0, 0.0);
    const auto t = lhv_correlations({c});
    CHECK(t.E[0] == doctest::Approx(1.0));
    CHECK(std::abs(t.E[kLhvGridSize / 4]) < 1e-15);
    CHECK(std::abs(t.E[0] - t.E[kLhvGridSize / 4]) == doctest::Approx(1.0));
    // The table maximizes over all orthogonal pairs; cos(beta) - cos(beta + pi/2) peaks at sqrt(2).
    CHECK(t.S == doctest::Approx(std::numbers::sqrt2));

    c.b_vector.setZero();
    const auto zero = lhv_correlations({c});
    for (double e : zero.E) CHECK(e == 0.0);
    CHECK(zero.S == 0.0);

    c.b_vector = Eigen::Vector2d(1.5, 0.0);
    CHECK_THROWS_AS(lhv_correlations({c}), ConfigError);

    Rng rng(9, 2);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) worst = std::max(worst, sample_vector_lhv(rng).S);
    CHECK(worst <= std::numbers::sqrt2 + 1e-9);
    CHECK(worst > 1.3);
}
