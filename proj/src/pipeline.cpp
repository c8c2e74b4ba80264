#include "bellhalo/pipeline.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"

namespace bellhalo {

void SimConfig::validate() const {
    source.validate();
    detector.validate();
    analysis.correlation.validate();
    if (!(analysis.eta > 0.0 && analysis.eta <= 1.0)) throw ConfigError("analysis.bootstrap.eta: must be in (0, 1]");
    if (analysis.n_resamples < 50) throw ConfigError("analysis.bootstrap.n_resamples: must be >= 50");
}

SimConfig ideal_preset() {
    SimConfig cfg;
    cfg.source.n_occ = 0.001;
    cfg.source.n_modes = 20000;
    cfg.source.sigma_bb = 0.002;
    cfg.detector.res_xy = 0.0;
    cfg.detector.res_z = 0.0;
    return cfg;
}

SimConfig realistic_preset() {
    SimConfig cfg;
    cfg.source.n_occ = 0.058;
    cfg.source.n_modes = 3000;
    cfg.source.p_penning = 0.1;
    cfg.source.bg_rate = 2.0;
    cfg.detector.distort = {1.05, 1.0, 0.95};
    return cfg;
}

std::vector<DetectorHit> simulate_hits(const SimConfig& cfg, const RotationSetting& rotation, std::uint32_t n_shots,
                                       std::uint32_t first_id) {
    cfg.validate();
    const PairSampler sampler(cfg.source, rotation);
    std::vector<std::vector<DetectorHit>> per_shot(n_shots);
    parallel_for(n_shots, cfg.threads, [&](std::size_t i) {
        const auto id = first_id + static_cast<std::uint32_t>(i);
        const Shot shot = sample_shot(sampler, id, cfg.master_seed);
        Rng rng(cfg.master_seed, id, static_cast<std::uint64_t>(StreamTag::Detector));
        per_shot[i] = project(shot, cfg.detector, rng);
    });
    std::vector<DetectorHit> hits;
    for (auto& v : per_shot) hits.insert(hits.end(), v.begin(), v.end());
    return hits;
}

Analysis analyze_hits(std::span<const DetectorHit> hits, const SimConfig& cfg, const RotationSetting& rotation,
                      std::uint32_t first_id, std::uint32_t n_shots) {
    Analysis out;
    try {
        out.reconstruction = reconstruct(hits, cfg.detector.r_tof, cfg.analysis.reconstruction);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("reconstruction: ") + e.what());
    }
    const CenterCounts* center = nullptr;
    try {
        const auto shots = group_by_shot(out.reconstruction.points, first_id, n_shots);
        out.histograms = accumulate_g2(shots, cfg.analysis.correlation, cfg.threads);
        center = &out.histograms.center;
        out.bell.theta_a = rotation.theta_a;
        out.bell.theta_b = rotation.theta_b;
        out.bell.g2 = center_g2(*center);
        out.bell.b = correlator_B(out.bell.g2);
        out.g2_bb = cross_spin_bb(*center);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("correlation: ") + e.what());
    }

    BootstrapOptions opt;
    opt.eta = cfg.analysis.eta;
    opt.n_resamples = cfg.analysis.n_resamples;
    opt.threads = cfg.threads;
    opt.seed = stream_key(cfg.master_seed, first_id, static_cast<std::uint64_t>(StreamTag::Bootstrap));
    try {
        out.bell.se = bootstrap_se(
            n_shots, [&](std::span<const std::uint32_t> w) { return correlator_B(center_g2(*center, w)); }, opt);
        out.g2_bb_se =
            bootstrap_se(n_shots, [&](std::span<const std::uint32_t> w) { return cross_spin_bb(*center, w); }, opt);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("bootstrap: ") + e.what());
    }
    return out;
}

Analysis run_setting(const SimConfig& cfg, const RotationSetting& rotation, std::uint32_t n_shots,
                     std::uint32_t first_id) {
    const auto hits = simulate_hits(cfg, rotation, n_shots, first_id);
    return analyze_hits(hits, cfg, rotation, first_id, n_shots);
}

std::vector<BellEstimate> bell_sweep(std::span<const double> thetas, std::uint32_t n_shots, const SimConfig& cfg) {
    std::vector<BellEstimate> out;
    out.reserve(thetas.size());
    for (std::size_t i = 0; i < thetas.size(); ++i)
        out.push_back(
            run_setting(cfg, RotationSetting::common(thetas[i]), n_shots, static_cast<std::uint32_t>(i) * n_shots).bell);
    return out;
}

std::vector<ScanPoint> source_scan(std::span<const double> n_values, std::uint32_t n_shots, const SimConfig& cfg) {
    std::vector<ScanPoint> out;
    for (std::size_t i = 0; i < n_values.size(); ++i) {
        SimConfig c = cfg;
        c.source.n_occ = n_values[i];
        const auto a = run_setting(c, RotationSetting{}, n_shots, static_cast<std::uint32_t>(i) * n_shots);
        out.push_back({n_values[i], a.g2_bb, a.g2_bb_se});
    }
    return out;
}

InverseFit fit_inverse(std::span<const ScanPoint> points) {
    if (points.size() < 2) throw NumericalError("inverse fit needs at least 2 points");
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : points) {
        if (!(p.n_occ > 0.0)) throw NumericalError("scan point with n <= 0");
        const double w = p.se > 0.0 ? 1.0 / (p.se * p.se) : 1.0;
        const double x = 1.0 / p.n_occ;
        s += w;
        sx += w * x;
        sy += w * p.g2_bb;
        sxx += w * x * x;
        sxy += w * x * p.g2_bb;
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0.0)) throw NumericalError("inverse fit: all n values coincide");
    InverseFit f;
    f.b = (s * sxy - sx * sy) / det;
    f.a = (sxx * sy - sx * sxy) / det;
    f.se_a = std::sqrt(sxx / det);
    f.se_b = std::sqrt(s / det);
    return f;
}

ChshResult chsh_run(const ChshSettings& settings, std::uint32_t n_shots, const SimConfig& cfg) {
    ChshResult r;
    r.settings = settings;
    const std::array<std::pair<double, double>, 4> angles{
        {{settings.a, settings.b}, {settings.a_prime, settings.b_prime}, {settings.a_prime, settings.b},
         {settings.a, settings.b_prime}}};
    double sum = 0.0, var = 0.0;
    for (int k = 0; k < 4; ++k) {
        const RotationSetting rot{angles[k].first, angles[k].second, 0.0};
        r.terms[k] = run_setting(cfg, rot, n_shots, static_cast<std::uint32_t>(k) * n_shots).bell;
        sum += (k == 3 ? -1.0 : 1.0) * r.terms[k].b;
        var += r.terms[k].se * r.terms[k].se;
    }
    r.value = std::abs(sum);
    r.se = std::sqrt(var);

    const auto bb = run_setting(cfg, RotationSetting{}, n_shots, 4 * n_shots);
    r.g2_bb = bb.g2_bb;
    r.g2_bb_se = bb.g2_bb_se;
    r.epsilon = bogoliubov_epsilon(std::max(1.0, r.g2_bb));
    r.epsilon_se = 2.0 / ((r.g2_bb + 1.0) * (r.g2_bb + 1.0)) * r.g2_bb_se;
    r.predicted = 2.0 * std::numbers::sqrt2 * r.epsilon;
    return r;
}

}  // namespace bellhalo
