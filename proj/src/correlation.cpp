#include "bellhalo/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "bellhalo/errors.hpp"
#include "bellhalo/parallel.hpp"

namespace bellhalo {

void CorrelationParams::validate() const {
    if (!(bin_width > 0.0 && std::isfinite(bin_width))) throw ConfigError("analysis.bin_width: must be > 0");
    if (!(extent >= 0.5 * bin_width && std::isfinite(extent)))
        throw ConfigError("analysis.extent: must be at least half a bin");
    if (mix_depth < 1) throw ConfigError("analysis.mix_depth: must be >= 1");
}

std::vector<ShotPoints> group_by_shot(std::span<const KPoint> points, std::uint32_t first_id, std::uint32_t n_shots) {
    std::vector<ShotPoints> shots(n_shots);
    for (std::uint32_t i = 0; i < n_shots; ++i) shots[i].shot_id = first_id + i;
    for (const auto& p : points) {
        if (p.shot_id < first_id || p.shot_id - first_id >= n_shots)
            throw ConfigError("shot id " + std::to_string(p.shot_id) + " outside the analysed range");
        auto& s = shots[p.shot_id - first_id];
        (p.k.z() > 0.0 ? s.a : s.b)[static_cast<int>(p.spin)].push_back(p.k);
    }
    // Arm A ascending and arm B descending in x, so -k_B ascends with k_A.
    for (auto& s : shots)
        for (int spin = 0; spin < 2; ++spin) {
            std::sort(s.a[spin].begin(), s.a[spin].end(), [](const Vec3& u, const Vec3& v) { return u.x() < v.x(); });
            std::sort(s.b[spin].begin(), s.b[spin].end(), [](const Vec3& u, const Vec3& v) { return u.x() > v.x(); });
        }
    return shots;
}

CorrelationHistogram::CorrelationHistogram(const CorrelationParams& params) : bin_width_(params.bin_width) {
    params.validate();
    half_ = static_cast<int>(std::floor(params.extent / params.bin_width - 0.5 + 1e-9));
    half_ = std::max(half_, 0);
    const std::size_t n = static_cast<std::size_t>(bins_per_axis());
    num_.assign(n * n * n, 0);
    den_.assign(n * n * n, 0);
}

std::optional<std::size_t> CorrelationHistogram::index(const Vec3& dk) const noexcept {
    const int n = bins_per_axis();
    std::size_t flat = 0;
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor(dk[a] / bin_width_ + 0.5);
        if (!(f >= -half_ && f <= half_)) return std::nullopt;
        flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(static_cast<int>(f) + half_);
    }
    return flat;
}

std::size_t CorrelationHistogram::center_index() const noexcept {
    const auto n = static_cast<std::size_t>(bins_per_axis());
    const auto h = static_cast<std::size_t>(half_);
    return (h * n + h) * n + h;
}

std::array<int, 3> CorrelationHistogram::unflatten(std::size_t flat) const noexcept {
    const auto n = static_cast<std::size_t>(bins_per_axis());
    return {static_cast<int>(flat / (n * n)), static_cast<int>(flat / n % n), static_cast<int>(flat % n)};
}

Vec3 CorrelationHistogram::bin_center(std::size_t flat) const noexcept {
    const auto ix = unflatten(flat);
    return Vec3(ix[0] - half_, ix[1] - half_, ix[2] - half_) * bin_width_;
}

std::optional<double> CorrelationHistogram::g2(std::size_t flat) const noexcept {
    if (den_[flat] == 0) return std::nullopt;
    return static_cast<double>(num_[flat]) * den_scale / static_cast<double>(den_[flat]);
}

void CorrelationHistogram::merge(const CorrelationHistogram& other) {
    if (other.num_.size() != num_.size() || other.den_scale != den_scale || other.bin_width_ != bin_width_)
        throw ConfigError("cannot merge histograms of different shape");
    for (std::size_t i = 0; i < num_.size(); ++i) {
        num_[i] += other.num_[i];
        den_[i] += other.den_[i];
    }
    n_shots += other.n_shots;
}

namespace {

// Adds every (A from sa, B from sb) pair of each spin combination; returns center-bin counts.
// Both arms are x-sorted (see group_by_shot), so a sliding window skips pairs whose
// x sum already falls outside the histogram.
std::array<std::uint64_t, 4> count_pairs(const ShotPoints& sa, const ShotPoints& sb,
                                         std::array<CorrelationHistogram, 4>& hist, bool numerator) {
    std::array<std::uint64_t, 4> center{};
    const std::size_t c = hist[0].center_index();
    const double reach = (0.5 * hist[0].bins_per_axis()) * hist[0].bin_width() * (1.0 + 1e-9);
    for (SpinPair p : kSpinPairs) {
        const int ip = static_cast<int>(p);
        auto& h = hist[ip];
        auto& counts = numerator ? h.num() : h.den();
        const auto& arm_a = sa.a[static_cast<int>(arm_a_spin(p))];
        const auto& arm_b = sb.b[static_cast<int>(arm_b_spin(p))];
        std::size_t lo = 0;
        for (const Vec3& ka : arm_a) {
            while (lo < arm_b.size() && ka.x() + arm_b[lo].x() > reach) ++lo;
            for (std::size_t j = lo; j < arm_b.size() && ka.x() + arm_b[j].x() >= -reach; ++j) {
                const auto idx = h.index(ka + arm_b[j]);
                if (!idx) continue;
                ++counts[*idx];
                if (*idx == c) ++center[ip];
            }
        }
    }
    return center;
}

}  // namespace

PairHistograms accumulate_g2(std::span<const ShotPoints> shots, const CorrelationParams& params, unsigned threads) {
    params.validate();
    const std::size_t n = shots.size();
    if (n < 2) throw ConfigError("g2 needs at least 2 shots, got " + std::to_string(n));
    const auto depth = static_cast<std::uint32_t>(std::min<std::size_t>(params.mix_depth, n - 1));

    auto fresh = [&] {
        std::array<CorrelationHistogram, 4> h;
        for (auto& x : h) {
            x = CorrelationHistogram(params);
            x.den_scale = depth;
        }
        return h;
    };

    PairHistograms out;
    out.hist = fresh();
    out.center.num.assign(n, {});
    out.center.den.assign(n, {});
    out.center.den_scale = depth;

    threads = std::max(1u, threads);
    const std::size_t chunks = std::min<std::size_t>(threads, n);
    std::vector<std::array<CorrelationHistogram, 4>> partial(chunks);
    parallel_chunks(n, chunks, threads, [&](std::size_t begin, std::size_t end, std::size_t chunk) {
        auto local = fresh();
        for (std::size_t s = begin; s < end; ++s) {
            out.center.num[s] = count_pairs(shots[s], shots[s], local, true);
            std::array<std::uint64_t, 4> den{};
            for (std::uint32_t d = 1; d <= depth; ++d) {
                const auto c = count_pairs(shots[s], shots[(s + d) % n], local, false);
                for (int p = 0; p < 4; ++p) den[p] += c[p];
            }
            out.center.den[s] = den;
        }
        partial[chunk] = std::move(local);
    });
    for (auto& part : partial)
        for (int p = 0; p < 4; ++p) out.hist[p].merge(part[p]);
    for (auto& h : out.hist) h.n_shots = static_cast<std::uint32_t>(n);
    return out;
}

CorrelationHistogram accumulate_g2(std::span<const ShotPoints> shots, Spin i, Spin j, const CorrelationParams& params,
                                   unsigned threads) {
    auto all = accumulate_g2(shots, params, threads);
    for (SpinPair p : kSpinPairs)
        if (arm_a_spin(p) == i && arm_b_spin(p) == j) return std::move(all.hist[static_cast<int>(p)]);
    throw ConfigError("unknown spin pair");
}

double bb_value(const CorrelationHistogram& hist) {
    const auto g = hist.g2(hist.center_index());
    if (!g) throw NumericalError("center bin has an empty denominator");
    return *g;
}

std::array<double, 4> center_g2(const CenterCounts& counts, std::span<const std::uint32_t> weights) {
    if (!weights.empty() && weights.size() != counts.num.size())
        throw ConfigError("weight vector does not match the number of shots");
    std::array<double, 4> num{}, den{};
    for (std::size_t s = 0; s < counts.num.size(); ++s) {
        const double w = weights.empty() ? 1.0 : weights[s];
        if (w == 0.0) continue;
        for (int p = 0; p < 4; ++p) {
            num[p] += w * static_cast<double>(counts.num[s][p]);
            den[p] += w * static_cast<double>(counts.den[s][p]);
        }
    }
    std::array<double, 4> g2{};
    for (int p = 0; p < 4; ++p) {
        if (!(den[p] > 0.0)) throw NumericalError("center bin has an empty denominator");
        g2[p] = num[p] * counts.den_scale / den[p];
    }
    return g2;
}

double cross_spin_bb(const CenterCounts& counts, std::span<const std::uint32_t> weights) {
    if (!weights.empty() && weights.size() != counts.num.size())
        throw ConfigError("weight vector does not match the number of shots");
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < counts.num.size(); ++s) {
        const double w = weights.empty() ? 1.0 : weights[s];
        for (SpinPair p : {SpinPair::UD, SpinPair::DU}) {
            num += w * static_cast<double>(counts.num[s][static_cast<int>(p)]);
            den += w * static_cast<double>(counts.den[s][static_cast<int>(p)]);
        }
    }
    if (!(den > 0.0)) throw NumericalError("center bin has an empty denominator");
    return num * counts.den_scale / den;
}

std::array<double, 4> normalized_G(const std::array<double, 4>& g2) {
    double sum = 0.0;
    for (double g : g2) {
        if (!(g >= 0.0)) throw NumericalError("g2 values must be >= 0");
        sum += g;
    }
    if (!(sum > 0.0)) throw NumericalError("g2 values sum to zero");
    std::array<double, 4> out{};
    for (int p = 0; p < 4; ++p) out[p] = 2.0 * g2[p] / sum;
    return out;
}

double correlator_B(const std::array<double, 4>& g2) {
    double sum = 0.0;
    for (double g : g2) {
        if (!(g >= 0.0)) throw NumericalError("g2 values must be >= 0");
        sum += g;
    }
    if (!(sum > 0.0)) throw NumericalError("g2 values sum to zero");
    return (g2[0] + g2[1] - g2[2] - g2[3]) / sum;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::out | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_bell_csv(std::span<const BellEstimate> rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "theta,B,se,g2_uu,g2_dd,g2_ud,g2_du\n";
    for (const auto& r : rows) {
        out << fmt(r.theta_a) << ',' << fmt(r.b) << ',' << fmt(r.se);
        for (double g : r.g2) out << ',' << fmt(g);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_histogram_csv(const CorrelationHistogram& hist, const std::filesystem::path& path) {
    auto out = open_csv(path);
    out << "ix,iy,iz,dkx,dky,dkz,num,den,g2\n";
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto ix = hist.unflatten(i);
        const Vec3 c = hist.bin_center(i);
        out << ix[0] << ',' << ix[1] << ',' << ix[2] << ',' << fmt(c.x()) << ',' << fmt(c.y()) << ',' << fmt(c.z())
            << ',' << hist.num()[i] << ',' << hist.den()[i] << ',';
        if (const auto g = hist.g2(i)) out << fmt(*g);
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace bellhalo
