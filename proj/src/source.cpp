#include "bellhalo/source.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <unordered_map>

#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"

namespace bellhalo {
namespace {

using cd = std::complex<double>;

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError("source." + field + ": " + what);
}

std::vector<cd> powers(cd base, std::uint32_t n) {
    std::vector<cd> out(n + 1, 1.0);
    for (std::uint32_t i = 1; i <= n; ++i) out[i] = out[i - 1] * base;
    return out;
}

double lfact(std::uint32_t n) { return std::lgamma(static_cast<double>(n) + 1.0); }

// Largest K worth caching: beyond it P(K) = (K+1) q^K (1-q)^2 is below 1e-16.
std::uint32_t cache_limit(double n_occ) {
    const double q = n_occ / (1.0 + n_occ);
    std::uint32_t k = 2;
    while (k < 256 && (k + 1.0) * std::pow(q, k) > 1e-16) ++k;
    return k;
}

Vec3 smear(const Vec3& k, double sigma, Rng& rng) {
    return k + sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
}

// K = sum of two geometric counts with ratio q, conditioned on K >= 1:
// P(K = k) = (k + 1) q^k (1 - q)^2 / (1 - p_empty), sampled by inversion.
std::uint32_t occupied_pair_count(double q, double p_empty, Rng& rng) {
    const double u = rng.uniform() * (1.0 - p_empty);
    double term = (1.0 - q) * (1.0 - q);
    double acc = 0.0;
    for (std::uint32_t k = 1; k < 100000; ++k) {
        term *= q;
        acc += (k + 1.0) * term;
        if (u < acc) return k;
    }
    return 100000;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

void SourceConfig::validate() const {
    require(std::isfinite(n_occ) && n_occ > 0.0, "n_occ", "must be > 0");
    require(n_modes >= 1, "n_modes", "must be >= 1");
    require(std::isfinite(sigma_bb) && sigma_bb > 0.0, "sigma_bb", "must be > 0");
    require(kz_cap > 0.0 && kz_cap <= 1.0, "kz_cap", "must be in (0, 1]");
    require(p_penning >= 0.0 && p_penning <= 1.0, "p_penning", "must be in [0, 1]");
    require(std::isfinite(bg_rate) && bg_rate >= 0.0, "bg_rate", "must be >= 0");
}

std::vector<Vec3> mode_directions(const SourceConfig& cfg) {
    const std::size_t n = cfg.n_modes;
    const double spacing = std::sqrt(2.0 * std::numbers::pi * cfg.kz_cap / static_cast<double>(n));
    const double z_lo = std::min(0.5 * spacing, 0.5 * cfg.kz_cap);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    std::vector<Vec3> dirs(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = z_lo + (cfg.kz_cap - z_lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        dirs[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
    }
    return dirs;
}

PairSampler::PairSampler(const SourceConfig& cfg, const RotationSetting& rotation)
    : cfg_(cfg), rotation_(rotation), state_(rotate(bell_triplet(), rotation)) {
    cfg_.validate();
    // Coefficient matrix of the rotated triplet: C' = U_A C U_B^T.
    Matrix2c c = Matrix2c::Zero();
    c(0, 1) = c(1, 0) = 1.0 / std::sqrt(2.0);
    const Matrix2c ua = pulse(rotation.theta_a, rotation.azimuth);
    const Matrix2c ub = pulse(rotation.theta_b, rotation.azimuth);
    coupling_ = std::sqrt(2.0) * ua * c * ub.transpose();
    directions_ = mode_directions(cfg_);

    const std::uint32_t limit = cache_limit(cfg_.n_occ);
    cumulative_.resize(limit + 1);
    for (std::uint32_t k = 2; k <= limit; ++k) {
        auto p = up_count_distribution(k);
        double acc = 0.0;
        for (auto& x : p) {
            acc += x;
            x = acc;
        }
        cumulative_[k] = std::move(p);
    }
}

std::vector<double> PairSampler::up_count_distribution(std::uint32_t pairs) const {
    const std::uint32_t K = pairs;
    const auto p_uu = powers(coupling_(0, 0), K), p_ud = powers(coupling_(0, 1), K);
    const auto p_du = powers(coupling_(1, 0), K), p_dd = powers(coupling_(1, 1), K);
    std::vector<double> prob((K + 1) * (K + 1), 0.0);
    double total = 0.0;
    for (std::uint32_t a_up = 0; a_up <= K; ++a_up) {
        for (std::uint32_t b_up = 0; b_up <= K; ++b_up) {
            // k1: up-up factors, k2: up-down, k3: down-up, k4: down-down.
            const std::uint32_t lo = (a_up + b_up > K) ? a_up + b_up - K : 0;
            const std::uint32_t hi = std::min(a_up, b_up);
            const double fock = 0.5 * (lfact(a_up) + lfact(K - a_up) + lfact(b_up) + lfact(K - b_up));
            cd amp = 0.0;
            for (std::uint32_t k1 = lo; k1 <= hi; ++k1) {
                const std::uint32_t k2 = a_up - k1, k3 = b_up - k1, k4 = K - a_up - b_up + k1;
                const double mag = std::exp(fock - lfact(k1) - lfact(k2) - lfact(k3) - lfact(k4));
                amp += mag * p_uu[k1] * p_ud[k2] * p_du[k3] * p_dd[k4];
            }
            const double p = std::norm(amp);
            prob[a_up * (K + 1) + b_up] = p;
            total += p;
        }
    }
    for (auto& x : prob) x /= total;
    return prob;
}

std::pair<std::uint32_t, std::uint32_t> PairSampler::sample_up_counts(std::uint32_t pairs, Rng& rng) const {
    if (pairs == 0) return {0, 0};
    if (pairs == 1) {
        const auto [a, b] = born_sample(state_, rng);
        return {a == Spin::Up ? 1u : 0u, b == Spin::Up ? 1u : 0u};
    }
    std::vector<double> local;
    const std::vector<double>* cum = nullptr;
    if (pairs < cumulative_.size()) {
        cum = &cumulative_[pairs];
    } else {
        local = up_count_distribution(pairs);
        double acc = 0.0;
        for (auto& x : local) {
            acc += x;
            x = acc;
        }
        cum = &local;
    }
    const double u = rng.uniform() * cum->back();
    const auto it = std::upper_bound(cum->begin(), cum->end(), u);
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cum->begin()), cum->size() - 1);
    return {static_cast<std::uint32_t>(idx / (pairs + 1)), static_cast<std::uint32_t>(idx % (pairs + 1))};
}

Shot sample_shot(const PairSampler& sampler, std::uint32_t shot_id, std::uint64_t master_seed) {
    const SourceConfig& cfg = sampler.config();
    Rng rng(master_seed, shot_id, static_cast<std::uint64_t>(StreamTag::Source));
    Shot shot;
    shot.shot_id = shot_id;
    shot.rotation = sampler.rotation();
    shot.seed = rng.key();

    const double q = cfg.n_occ / (1.0 + cfg.n_occ);
    const double p_empty = (1.0 - q) * (1.0 - q);
    const double atom_sigma = cfg.sigma_bb / std::sqrt(2.0);
    std::uint32_t next_pair = 0;
    std::vector<Spin> a_spins, b_spins;
    const auto& dirs = sampler.directions();
    // Two independent thermal channels per mode. Runs of empty modes are
    // skipped with one geometric draw, then K >= 1 is drawn conditionally.
    std::size_t mode = 0;
    while (true) {
        mode += rng.geometric(1.0 - p_empty);
        if (mode >= dirs.size()) break;
        const Vec3& u = dirs[mode++];
        const std::uint32_t pairs = occupied_pair_count(q, p_empty, rng);
        const auto [a_up, b_up] = sampler.sample_up_counts(pairs, rng);
        a_spins.assign(pairs, Spin::Down);
        b_spins.assign(pairs, Spin::Down);
        std::fill_n(a_spins.begin(), a_up, Spin::Up);
        std::fill_n(b_spins.begin(), b_up, Spin::Up);
        if (pairs > 1) {
            shuffle(a_spins, rng);
            shuffle(b_spins, rng);
        }
        for (std::uint32_t j = 0; j < pairs; ++j) {
            const std::uint32_t id = next_pair++;
            shot.events.push_back({smear(u, atom_sigma, rng), a_spins[j], id, shot_id});
            shot.events.push_back({smear(-u, atom_sigma, rng), b_spins[j], id, shot_id});
        }
    }
    shot = apply_penning(std::move(shot), cfg.p_penning, rng);
    shot = add_background(std::move(shot), cfg.bg_rate, cfg, rng);
    return shot;
}

Shot sample_shot(const SourceConfig& cfg, const RotationSetting& rotation, std::uint32_t shot_id,
                 std::uint64_t master_seed) {
    return sample_shot(PairSampler(cfg, rotation), shot_id, master_seed);
}

Shot apply_penning(Shot shot, double p_penning, Rng& rng) {
    if (!(p_penning >= 0.0 && p_penning <= 1.0)) throw ConfigError("source.p_penning: must be in [0, 1]");
    if (p_penning == 0.0) return shot;
    std::unordered_map<std::uint32_t, std::size_t> first;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < shot.events.size(); ++i) {
        const auto& id = shot.events[i].partner_id;
        if (!id) continue;
        auto [it, inserted] = first.try_emplace(*id, i);
        if (!inserted) pairs.emplace_back(it->second, i);
    }
    std::vector<char> removed(shot.events.size(), 0);
    for (const auto& [i, j] : pairs) {
        if (!rng.bernoulli(p_penning)) continue;
        const bool drop_first = rng.bernoulli(0.5);
        removed[drop_first ? i : j] = 1;
        shot.events[drop_first ? j : i].partner_id.reset();
    }
    std::vector<PairEvent> kept;
    kept.reserve(shot.events.size());
    for (std::size_t i = 0; i < shot.events.size(); ++i)
        if (!removed[i]) kept.push_back(std::move(shot.events[i]));
    shot.events = std::move(kept);
    return shot;
}

Shot add_background(Shot shot, double bg_rate, const SourceConfig& cfg, Rng& rng) {
    if (!(std::isfinite(bg_rate) && bg_rate >= 0.0)) throw ConfigError("source.bg_rate: must be >= 0");
    if (bg_rate == 0.0) return shot;
    for (Spin s : {Spin::Up, Spin::Down}) {
        const auto count = rng.poisson(bg_rate);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double z = cfg.kz_cap * (2.0 * rng.uniform() - 1.0);
            const double phi = 2.0 * std::numbers::pi * rng.uniform();
            const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double radius = 1.0 + cfg.sigma_bb * rng.normal();
            shot.events.push_back({radius * Vec3(rxy * std::cos(phi), rxy * std::sin(phi), z), s, std::nullopt,
                                   shot.shot_id});
        }
    }
    return shot;
}

std::vector<Shot> generate_shots(const SourceConfig& cfg, const RotationSetting& rotation, std::uint32_t n,
                                 std::uint64_t master_seed, unsigned threads, std::uint32_t first_id) {
    const PairSampler sampler(cfg, rotation);
    std::vector<Shot> shots(n);
    parallel_for(n, threads, [&](std::size_t i) {
        shots[i] = sample_shot(sampler, first_id + static_cast<std::uint32_t>(i), master_seed);
    });
    return shots;
}

}  // namespace bellhalo
