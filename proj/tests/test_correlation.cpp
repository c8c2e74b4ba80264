#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bellhalo/bootstrap.hpp"
#include "bellhalo/correlation.hpp"
#include "bellhalo/errors.hpp"

using namespace bellhalo;

namespace {

// Uniform points on a shell of radial width 0.02 inside the |k_z| < 0.75 band.
Vec3 shell_point(Rng& rng) {
    while (true) {
        Vec3 u(rng.normal(), rng.normal(), rng.normal());
        u.normalize();
        if (std::abs(u.z()) < 0.75 && std::abs(u.z()) > 0.01) return (1.0 + 0.02 * rng.normal()) * u;
    }
}

std::vector<ShotPoints> uncorrelated_shots(std::uint32_t n, int per_group, std::uint64_t seed) {
    std::vector<ShotPoints> shots(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        Rng rng(seed, s);
        shots[s].shot_id = s;
        for (int spin = 0; spin < 2; ++spin) {
            const auto na = rng.poisson(per_group), nb = rng.poisson(per_group);
            while (shots[s].a[spin].size() < na) {
                const Vec3 k = shell_point(rng);
                if (k.z() > 0) shots[s].a[spin].push_back(k);
            }
            while (shots[s].b[spin].size() < nb) {
                const Vec3 k = shell_point(rng);
                if (k.z() < 0) shots[s].b[spin].push_back(k);
            }
        }
    }
    return shots;
}

// Synthetic shots with back-to-back pairs in the (A up, B down) channel plus background.
std::vector<ShotPoints> paired_shots(std::uint32_t n, std::uint64_t seed) {
    auto shots = uncorrelated_shots(n, 6, seed);
    for (auto& s : shots) {
        Rng rng(seed, s.shot_id, 99);
        for (int p = 0; p < 3; ++p) {
            Vec3 k = shell_point(rng);
            if (k.z() < 0) k = -k;
            s.a[0].push_back(k);
            s.b[1].push_back(-k + 0.003 * Vec3(rng.normal(), rng.normal(), rng.normal()));
        }
    }
    return shots;
}

CorrelationParams coarse() {
    CorrelationParams p;
    p.bin_width = 0.05;
    p.extent = 0.2;
    return p;
}

double gaussian_bin_average(double s, double w) {
    return s * std::sqrt(2 * std::numbers::pi) / w * std::erf(w / (2 * std::sqrt(2.0) * s));
}

}  // namespace

TEST_CASE("parameter validation") {
    CorrelationParams p;
    p.bin_width = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.extent = p.bin_width / 4;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.mix_depth = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("histogram geometry") {
    CorrelationHistogram h(CorrelationParams{});
    CHECK(h.bins_per_axis() % 2 == 1);
    CHECK(h.index(Vec3::Zero()) == h.center_index());
    CHECK(h.index(Vec3(0.0069 - 1e-9, -0.0069 + 1e-9, 0)) == h.center_index());
    CHECK(h.index(Vec3(0.0070, 0, 0)) != h.center_index());
    CHECK_FALSE(h.index(Vec3(0.3, 0, 0)));
    CHECK(h.bin_center(h.center_index()).norm() == 0.0);
    const auto c = h.unflatten(h.center_index());
    CHECK(c[0] == h.bins_per_axis() / 2);
    CHECK(c[1] == c[0]);
    CHECK(c[2] == c[0]);
}

TEST_CASE("grouping by shot") {
    const std::vector<KPoint> pts{{Vec3(0, 0, 0.5), Spin::Up, 11, 0}, {Vec3(0, 0, -0.5), Spin::Down, 13, 1}};
    const auto g = group_by_shot(pts, 10, 5);
    REQUIRE(g.size() == 5);
    CHECK(g[1].a[0].size() == 1);
    CHECK(g[3].b[1].size() == 1);
    CHECK(g[0].a[0].empty());
    CHECK_THROWS_AS(group_by_shot(pts, 12, 5), ConfigError);
}

TEST_CASE("ratio arithmetic") {
    const auto g = normalized_G({1, 1, 1, 1});
    for (double v : g) CHECK(v == 0.5);
    const auto h = normalized_G({1, 1, 19, 19});
    CHECK(h[0] == doctest::Approx(0.05));
    CHECK(h[2] == doctest::Approx(0.95));
    CHECK(std::accumulate(h.begin(), h.end(), 0.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(correlator_B({1, 1, 19, 19}) == doctest::Approx(-0.9));
    CHECK(correlator_B({3, 3, 3, 3}) == 0.0);
    CHECK_THROWS_AS(normalized_G({0, 0, 0, 0}), NumericalError);
    CHECK_THROWS_AS(correlator_B({0, 0, 0, 0}), NumericalError);
}

TEST_CASE("center-bin value") {
    CorrelationHistogram flat(CorrelationParams{});
    std::fill(flat.num().begin(), flat.num().end(), 40);
    std::fill(flat.den().begin(), flat.den().end(), 40);
    CHECK(bb_value(flat) == 1.0);

    flat.den()[flat.center_index()] = 0;
    CHECK_THROWS_AS(bb_value(flat), NumericalError);
    CHECK_FALSE(flat.g2(flat.center_index()));
}

TEST_CASE("center bin of a Gaussian peak") {
    // g2(dk) = 1 + 29 exp(-|dk|^2 / 2 s^2), integrated over every bin on a fine midpoint grid.
    CorrelationParams p;
    const double s = 0.02, w = p.bin_width;
    CorrelationHistogram h(p);
    constexpr int sub = 12;
    constexpr double scale = 1e9;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const Vec3 c = h.bin_center(i);
        double acc = 0;
        for (int x = 0; x < sub; ++x)
            for (int y = 0; y < sub; ++y)
                for (int z = 0; z < sub; ++z) {
                    const Vec3 d = c + w * (Vec3(x, y, z) + Vec3::Constant(0.5)) / sub - Vec3::Constant(w / 2);
                    acc += 1 + 29 * std::exp(-d.squaredNorm() / (2 * s * s));
                }
        h.num()[i] = static_cast<std::uint64_t>(std::llround(scale * acc / (sub * sub * sub)));
        h.den()[i] = static_cast<std::uint64_t>(scale);
    }
    const double expected = 1 + 29 * std::pow(gaussian_bin_average(s, w), 3);
    CHECK(bb_value(h) == doctest::Approx(expected).epsilon(1e-3));
    CHECK(std::abs(bb_value(h) - 30) / 30 < 0.10);
}

TEST_CASE("uncorrelated shells give g2 = 1") {
    const auto shots = uncorrelated_shots(2000, 40, 3);
    CorrelationParams wide;
    wide.bin_width = 0.08;
    const auto ph = accumulate_g2(shots, wide, 1);
    for (auto pair : kSpinPairs) {
        const auto& h = ph.hist[static_cast<int>(pair)];
        const double num = double(h.num()[h.center_index()]);
        REQUIRE(num > 400);
        CHECK(std::abs(bb_value(h) - 1.0) < 5 / std::sqrt(num));
    }
    CHECK_THROWS_AS(accumulate_g2(std::span(shots).first(1), coarse(), 1), ConfigError);
}

TEST_CASE("accumulation is independent of the partition") {
    const auto shots = paired_shots(300, 5);
    const auto ref = accumulate_g2(shots, coarse(), 1);
    for (unsigned t : {2u, 3u, 7u}) {
        const auto other = accumulate_g2(shots, coarse(), t);
        for (int p = 0; p < 4; ++p) {
            CHECK(other.hist[p].num() == ref.hist[p].num());
            CHECK(other.hist[p].den() == ref.hist[p].den());
        }
        CHECK(other.center.num == ref.center.num);
        CHECK(other.center.den == ref.center.den);
    }
    const auto single = accumulate_g2(shots, Spin::Up, Spin::Down, coarse(), 2);
    CHECK(single.num() == ref.hist[static_cast<int>(SpinPair::UD)].num());
    CHECK(single.den() == ref.hist[static_cast<int>(SpinPair::UD)].den());
    CHECK(bb_value(single) > 5.0);
}

TEST_CASE("histogram merge is commutative and associative") {
    const auto a = accumulate_g2(paired_shots(40, 1), Spin::Up, Spin::Down, coarse());
    const auto b = accumulate_g2(paired_shots(40, 2), Spin::Up, Spin::Down, coarse());
    const auto c = accumulate_g2(paired_shots(40, 3), Spin::Up, Spin::Down, coarse());
    auto ab = a, ba = b;
    ab.merge(b);
    ba.merge(a);
    CHECK(ab.num() == ba.num());
    CHECK(ab.den() == ba.den());
    auto ab_c = ab, bc = b;
    ab_c.merge(c);
    bc.merge(c);
    auto a_bc = a;
    a_bc.merge(bc);
    CHECK(ab_c.num() == a_bc.num());
    CHECK(ab_c.den() == a_bc.den());
    CHECK_THROWS_AS(ab.merge(CorrelationHistogram(CorrelationParams{})), ConfigError);
}

TEST_CASE("swapping spin labels leaves B unchanged") {
    auto shots = paired_shots(400, 8);
    const auto g = center_g2(accumulate_g2(shots, coarse()).center);
    for (auto& s : shots) {
        std::swap(s.a[0], s.a[1]);
        std::swap(s.b[0], s.b[1]);
    }
    const auto h = center_g2(accumulate_g2(shots, coarse()).center);
    CHECK(h[0] == g[1]);
    CHECK(h[1] == g[0]);
    CHECK(h[2] == g[3]);
    CHECK(h[3] == g[2]);
    CHECK(std::abs(correlator_B(h) - correlator_B(g)) < 1e-15);
}

TEST_CASE("weights reproduce the unweighted estimate") {
    const auto ph = accumulate_g2(paired_shots(100, 4), coarse());
    const std::vector<std::uint32_t> ones(100, 1);
    CHECK(center_g2(ph.center) == center_g2(ph.center, ones));
    CHECK(cross_spin_bb(ph.center) == cross_spin_bb(ph.center, ones));
    const std::vector<std::uint32_t> zeros(100, 0);
    CHECK_THROWS_AS(center_g2(ph.center, zeros), NumericalError);
}

TEST_CASE("bootstrap of a sample mean") {
    Rng rng(11, 1);
    std::vector<double> x(400);
    for (auto& v : x) v = rng.normal();
    const WeightedEstimator mean = [&](std::span<const std::uint32_t> w) {
        double s = 0, n = 0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            s += w[i] * x[i];
            n += w[i];
        }
        return s / n;
    };
    // Closed form: sample sd / sqrt(n).
    double m = 0, v = 0;
    for (double e : x) m += e / 400;
    for (double e : x) v += (e - m) * (e - m) / 399;
    const double sem = std::sqrt(v / 400);
    CHECK(sem == doctest::Approx(0.05).epsilon(0.1));

    std::array<double, 3> se{};
    std::array<double, 3> etas{0.1, 0.5, 0.9};
    for (int i = 0; i < 3; ++i) {
        BootstrapOptions opt;
        opt.eta = etas[i];
        opt.n_resamples = 400;
        opt.seed = 3;
        se[i] = bootstrap_se(x.size(), mean, opt);
        CHECK(se[i] == doctest::Approx(sem).epsilon(0.2));
        CHECK(se[i] == doctest::Approx(0.05).epsilon(0.2));
    }
    CHECK(se[0] == doctest::Approx(se[2]).epsilon(0.2));

    BootstrapOptions opt;
    opt.threads = 3;
    opt.seed = 3;
    opt.n_resamples = 400;
    BootstrapOptions serial = opt;
    serial.threads = 1;
    CHECK(bootstrap_se(x.size(), mean, opt) == bootstrap_se(x.size(), mean, serial));
}

TEST_CASE("bootstrap contracts") {
    const WeightedEstimator constant = [](std::span<const std::uint32_t>) { return 4.2; };
    CHECK(bootstrap_se(50, constant, {}) == 0.0);
    CHECK_THROWS_AS(bootstrap_se(9, constant, {}), ConfigError);
    BootstrapOptions opt;
    opt.eta = 0;
    CHECK_THROWS_AS(bootstrap_se(50, constant, opt), ConfigError);
    opt.eta = 1.2;
    CHECK_THROWS_AS(bootstrap_se(50, constant, opt), ConfigError);
    opt = {};
    opt.n_resamples = 49;
    CHECK_THROWS_AS(bootstrap_se(50, constant, opt), ConfigError);

    int calls = 0;
    const WeightedEstimator fails = [&](std::span<const std::uint32_t>) -> double {
        if (++calls == 7) throw NumericalError("empty center bin");
        return 1.0;
    };
    try {
        bootstrap_se(50, fails, {});
        FAIL("no error");
    } catch (const NumericalError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("resample 6") != std::string::npos);
        CHECK(msg.find("empty center bin") != std::string::npos);
    }
}
