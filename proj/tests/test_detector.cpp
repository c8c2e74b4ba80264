#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "bellhalo/detector.hpp"
#include "bellhalo/errors.hpp"
#include "bellhalo/reconstruction.hpp"

using namespace bellhalo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("bellhalo_det_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

DetectorConfig clean() {
    DetectorConfig c;
    c.efficiency = 1.0;
    c.res_xy = 0.0;
    c.res_z = 0.0;
    return c;
}

Shot shell_shot(std::size_t n, Rng& rng, std::uint32_t id = 0) {
    Shot s;
    s.shot_id = id;
    for (std::size_t i = 0; i < n; ++i) {
        Vec3 k(rng.normal(), rng.normal(), rng.normal());
        k.normalize();
        s.events.push_back({k, i % 2 ? Spin::Up : Spin::Down, std::nullopt, id});
    }
    return s;
}

std::vector<DetectorHit> random_hits(std::size_t n, Rng& rng) {
    std::vector<DetectorHit> hits(n);
    for (std::size_t i = 0; i < n; ++i)
        hits[i] = {Vec3(30 * rng.normal(), 30 * rng.normal(), 50 * rng.normal() - 30),
                   rng.bernoulli(0.5) ? Spin::Up : Spin::Down, static_cast<std::uint32_t>(rng.below(100000))};
    return hits;
}

std::string error_of(auto&& fn) {
    try {
        fn();
    } catch (const IoError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("validation") {
    auto bad = [](auto mutate, const char* key) {
        DetectorConfig c;
        mutate(c);
        try {
            c.validate();
            FAIL("accepted ", key);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(key) != std::string::npos);
        }
    };
    bad([](DetectorConfig& c) { c.r_tof = 0; }, "detector.r_tof");
    bad([](DetectorConfig& c) { c.efficiency = 0; }, "detector.efficiency");
    bad([](DetectorConfig& c) { c.efficiency = 1.01; }, "detector.efficiency");
    bad([](DetectorConfig& c) { c.res_xy = -1; }, "detector.res_xy");
    bad([](DetectorConfig& c) { c.distort[2] = 2.5; }, "detector.distort");
    CHECK_NOTHROW(DetectorConfig{}.validate());
}

TEST_CASE("noise-free geometry") {
    Rng rng(1, 1);
    const auto shot = shell_shot(2000, rng, 7);
    const auto hits = project(shot, clean(), rng);
    REQUIRE(hits.size() == shot.events.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const auto& h = hits[i];
        CHECK(h.shot_id == 7);
        CHECK(h.spin_region == shot.events[i].spin);
        const Vec3 center = h.spin_region == Spin::Up ? Vec3(0, 0, -60) : Vec3::Zero();
        CHECK((h.r - center).norm() == doctest::Approx(25.0).epsilon(1e-12));
    }
}

TEST_CASE("efficiency thinning") {
    Rng rng(1, 2);
    DetectorConfig c = clean();
    c.efficiency = 0.10;
    const auto big = shell_shot(100000, rng);
    const double n = double(project(big, c, rng).size());
    CHECK(std::abs(n - 1e4) < 5 * std::sqrt(1e5 * 0.1 * 0.9));

    // Distribution of survivors over 1000 trials of 500 atoms against Binomial(500, 0.1).
    const auto small = shell_shot(500, rng);
    double s = 0, s2 = 0;
    constexpr int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const double k = double(project(small, c, rng).size());
        s += k;
        s2 += k * k;
    }
    const double mean = s / trials, var = s2 / trials - mean * mean;
    const double bin_var = 500 * 0.1 * 0.9;
    CHECK(std::abs(mean - 50.0) < 5 * std::sqrt(bin_var / trials));
    // Sample variance of a near-normal variate has relative sd sqrt(2 / trials).
    CHECK(std::abs(var / bin_var - 1.0) < 5 * std::sqrt(2.0 / trials));
}

TEST_CASE("distortion is recovered by the ellipsoid fit") {
    Rng rng(1, 3);
    DetectorConfig c = clean();
    c.distort = {1.05, 1.0, 0.95};
    const auto shot = shell_shot(20000, rng, 3);
    const auto hits = project(shot, c, rng);
    std::vector<Vec3> up;
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].spin_region == shot.events[i].spin);
        CHECK(hits[i].shot_id == 3);
        if (hits[i].spin_region == Spin::Up) up.push_back(hits[i].r);
    }
    const auto g = fit_ellipsoid(up);
    CHECK(g.semi_axes.x() == doctest::Approx(26.25).epsilon(0.01));
    CHECK(g.semi_axes.y() == doctest::Approx(25.0).epsilon(0.01));
    CHECK(g.semi_axes.z() == doctest::Approx(23.75).epsilon(0.01));
    CHECK(g.center.z() == doctest::Approx(-60.0).epsilon(1e-6));
}

TEST_CASE("projection is deterministic and thread independent") {
    SourceConfig sc;
    sc.n_occ = 0.2;
    const auto shots = generate_shots(sc, {}, 40, 9, 1);
    const auto a = project_shots(shots, DetectorConfig{}, 9, 1);
    const auto b = project_shots(shots, DetectorConfig{}, 9, 3);
    CHECK(a == b);
    CHECK_FALSE(a.empty());
}

TEST_CASE("event file round trips") {
    TempDir tmp;
    Rng rng(2, 1);
    const auto hits = random_hits(10000, rng);

    write_events(hits, tmp.path / "e.bhev");
    CHECK(read_events(tmp.path / "e.bhev") == hits);
    CHECK(fs::file_size(tmp.path / "e.bhev") == 5 + 29 * hits.size());

    write_events(hits, tmp.path / "e.csv");
    const auto back = read_events(tmp.path / "e.csv");
    REQUIRE(back.size() == hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(back[i].shot_id == hits[i].shot_id);
        CHECK(back[i].spin_region == hits[i].spin_region);
        CHECK((back[i].r - hits[i].r).cwiseAbs().maxCoeff() < 1e-9);
    }

    write_events({}, tmp.path / "empty.csv");
    std::ifstream in(tmp.path / "empty.csv");
    std::string content((std::istreambuf_iterator<char>(in)), {});
    CHECK(content == "shot_id,x_mm,y_mm,z_mm,spin\n");
    CHECK(read_events(tmp.path / "empty.csv").empty());
    write_events({}, tmp.path / "empty.bhev");
    CHECK(read_events(tmp.path / "empty.bhev").empty());
}

TEST_CASE("malformed event files") {
    TempDir tmp;
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream(tmp.path / name, std::ios::binary) << text;
        return tmp.path / name;
    };
    auto bad_spin = write("x.csv", "shot_id,x_mm,y_mm,z_mm,spin\n0,1,2,3,U\n1,1,2,3,X\n");
    CHECK(error_of([&] { read_events(bad_spin); }).find(":3:") != std::string::npos);

    auto header = write("h.csv", "id,x,y,z,s\n");
    CHECK(error_of([&] { read_events(header); }).find(":1:") != std::string::npos);

    auto fields = write("f.csv", "shot_id,x_mm,y_mm,z_mm,spin\n0,1,2,U\n");
    CHECK(error_of([&] { read_events(fields); }).find(":2:") != std::string::npos);

    auto number = write("n.csv", "shot_id,x_mm,y_mm,z_mm,spin\n0,1,abc,3,D\n");
    CHECK(error_of([&] { read_events(number); }).find(":2:") != std::string::npos);

    Rng rng(2, 2);
    write_events(random_hits(3, rng), tmp.path / "t.bhev");
    fs::resize_file(tmp.path / "t.bhev", 5 + 29 * 2 + 10);
    CHECK(error_of([&] { read_events(tmp.path / "t.bhev"); }).find("offset 63") != std::string::npos);

    auto magic = write("m.bhev", "BHEV2");
    CHECK(error_of([&] { read_events(magic); }).find("magic") != std::string::npos);

    const auto missing = tmp.path / "nope.csv";
    CHECK(error_of([&] { read_events(missing); }).find("nope.csv") != std::string::npos);
}
