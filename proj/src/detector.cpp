#include "bellhalo/detector.hpp"

#include <cmath>
#include <string>

#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"

namespace bellhalo {

void DetectorConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& what) {
        throw ConfigError("detector." + field + ": " + what);
    };
    if (!(std::isfinite(r_tof) && r_tof > 0.0)) fail("r_tof", "must be > 0");
    if (!std::isfinite(sg_offset)) fail("sg_offset", "must be finite");
    for (double d : distort)
        if (!(d > 0.5 && d < 2.0)) fail("distort", "factors must lie in (0.5, 2)");
    if (!(efficiency > 0.0 && efficiency <= 1.0)) fail("efficiency", "must be in (0, 1]");
    if (!(res_xy >= 0.0)) fail("res_xy", "must be >= 0");
    if (!(res_z >= 0.0)) fail("res_z", "must be >= 0");
}

std::vector<DetectorHit> project(const Shot& shot, const DetectorConfig& cfg, Rng& rng) {
    std::vector<DetectorHit> hits;
    hits.reserve(static_cast<std::size_t>(static_cast<double>(shot.events.size()) * cfg.efficiency) + 4);
    const double split = cfg.split_z();
    for (const auto& ev : shot.events) {
        Vec3 r = cfg.r_tof * ev.k;
        if (ev.spin == Spin::Up) {
            for (int a = 0; a < 3; ++a) r[a] *= cfg.distort[a];
            r.z() -= cfg.sg_offset;
        }
        if (cfg.efficiency < 1.0 && !rng.bernoulli(cfg.efficiency)) continue;
        if (cfg.res_xy > 0.0) {
            r.x() += cfg.res_xy * rng.normal();
            r.y() += cfg.res_xy * rng.normal();
        }
        if (cfg.res_z > 0.0) r.z() += cfg.res_z * rng.normal();
        hits.push_back({r, r.z() < split ? Spin::Up : Spin::Down, shot.shot_id});
    }
    return hits;
}

std::vector<DetectorHit> project_shots(std::span<const Shot> shots, const DetectorConfig& cfg, std::uint64_t master_seed,
                                       unsigned threads) {
    cfg.validate();
    std::vector<std::vector<DetectorHit>> per_shot(shots.size());
    parallel_for(shots.size(), threads, [&](std::size_t i) {
        Rng rng(master_seed, shots[i].shot_id, static_cast<std::uint64_t>(StreamTag::Detector));
        per_shot[i] = project(shots[i], cfg, rng);
    });
    std::vector<DetectorHit> all;
    std::size_t total = 0;
    for (const auto& v : per_shot) total += v.size();
    all.reserve(total);
    for (auto& v : per_shot) all.insert(all.end(), v.begin(), v.end());
    return all;
}

}  // namespace bellhalo
