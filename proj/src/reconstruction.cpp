#include "bellhalo/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bellhalo/errors.hpp"

namespace bellhalo {

void HaloGeometry::validate() const {
    if (!center.allFinite()) throw ConfigError("halo center not finite");
    if (!(semi_axes.minCoeff() > 0.0) || !semi_axes.allFinite()) throw ConfigError("halo semi-axes must be > 0");
    if (!(k_offset.norm() < 0.2)) throw ConfigError("k_offset must be shorter than 0.2");
}

Vec3 median_center(std::span<const DetectorHit> hits) {
    if (hits.empty()) throw NumericalError("median of an empty hit set");
    Vec3 c;
    std::vector<double> v(hits.size());
    for (int a = 0; a < 3; ++a) {
        for (std::size_t i = 0; i < hits.size(); ++i) v[i] = hits[i].r[a];
        const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
        std::nth_element(v.begin(), mid, v.end());
        c[a] = *mid;
        if (v.size() % 2 == 0) c[a] = 0.5 * (c[a] + *std::max_element(v.begin(), mid));
    }
    return c;
}

std::vector<DetectorHit> truncate_raw(std::span<const DetectorHit> hits, double r_tof, const Vec3& center,
                                      const RawWindow& window) {
    std::vector<DetectorHit> kept;
    kept.reserve(hits.size());
    for (const auto& h : hits) {
        const Vec3 d = (h.r - center) / r_tof;
        const double r = d.norm();
        if (r > window.r_min && r < window.r_max && std::abs(d.z()) < window.z_max) kept.push_back(h);
    }
    return kept;
}

HaloGeometry fit_ellipsoid(std::span<const Vec3> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    if (n < 6) throw NumericalError("ellipsoid fit needs at least 6 points, got " + std::to_string(n));

    // Work in centered, unit-rms coordinates for conditioning.
    Vec3 mean = Vec3::Zero();
    for (const auto& p : points) mean += p;
    mean /= static_cast<double>(n);
    double rms = 0.0;
    for (const auto& p : points) rms += (p - mean).squaredNorm();
    rms = std::sqrt(rms / static_cast<double>(n));
    if (!(rms > 0.0)) throw NumericalError("ellipsoid fit: all points coincide");

    Eigen::MatrixXd design(n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 q = (points[static_cast<std::size_t>(i)] - mean) / rms;
        design.row(i) << q.x() * q.x(), q.y() * q.y(), q.z() * q.z(), q.x(), q.y(), q.z();
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < 6)
        throw NumericalError("ellipsoid fit: degenerate point cloud (rank " + std::to_string(qr.rank()) + " of 6)");
    const Eigen::VectorXd p = qr.solve(Eigen::VectorXd::Ones(n));

    const Vec3 quad = p.head<3>();
    if (!(quad.minCoeff() > 0.0)) throw NumericalError("ellipsoid fit: solution is not an ellipsoid");
    const Vec3 c = -0.5 * p.tail<3>().cwiseQuotient(quad);
    const double g = 1.0 + quad.dot(c.cwiseProduct(c));
    HaloGeometry geom;
    geom.center = mean + rms * c;
    geom.semi_axes = rms * (Vec3::Constant(g).cwiseQuotient(quad)).cwiseSqrt();
    if (!geom.semi_axes.allFinite() || !geom.center.allFinite()) throw NumericalError("ellipsoid fit: non-finite result");
    return geom;
}

std::vector<KPoint> normalize(std::span<const DetectorHit> hits, const HaloGeometry& geom, const ShellWindow& window) {
    std::vector<KPoint> out;
    out.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const Vec3 k = (hits[i].r - geom.center).cwiseQuotient(geom.semi_axes);
        const double r = k.norm();
        if (!(r > window.k_min && r < window.k_max && std::abs(k.z()) < window.kz_max)) continue;
        out.push_back({k - geom.k_offset, hits[i].spin_region, hits[i].shot_id, i});
    }
    return out;
}

Vec3 recenter(std::span<const KPoint> points, const RecenterOptions& opt) {
    bool has_up = false, has_down = false;
    for (const auto& p : points) (p.spin == Spin::Up ? has_up : has_down) = true;
    if (!has_up || !has_down) throw NumericalError("recentering needs both spin populations");

    Vec3 v = Vec3::Zero();
    const double w2 = opt.window * opt.window;
    for (int it = 0; it < std::max(1, opt.iterations); ++it) {
        Vec3 sum = Vec3::Zero();
        std::size_t count = 0;
        for (std::size_t b = 0; b < points.size();) {
            std::size_t e = b;
            while (e < points.size() && points[e].shot_id == points[b].shot_id) ++e;
            for (std::size_t i = b; i < e; ++i)
                for (std::size_t j = i + 1; j < e; ++j) {
                    const Vec3 s = points[i].k + points[j].k;
                    if ((s - 2.0 * v).squaredNorm() < w2) {
                        sum += s;
                        ++count;
                    }
                }
            b = e;
        }
        if (count == 0) throw NumericalError("recentering found no back-to-back candidate pairs");
        const Vec3 next = sum / (2.0 * static_cast<double>(count));
        const double step = (next - v).norm();
        v = next;
        if (step < opt.tolerance) break;
    }
    return v;
}

Reconstruction reconstruct(std::span<const DetectorHit> hits, double r_tof, const ReconstructionOptions& opt) {
    if (!(r_tof > 0.0)) throw ConfigError("r_tof must be > 0");
    Reconstruction out;
    for (Spin s : {Spin::Up, Spin::Down}) {
        std::vector<DetectorHit> sub;
        std::vector<std::size_t> index;
        for (std::size_t i = 0; i < hits.size(); ++i)
            if (hits[i].spin_region == s) {
                sub.push_back(hits[i]);
                index.push_back(i);
            }
        const char* name = s == Spin::Up ? "up" : "down";
        if (sub.size() < 6) throw NumericalError(std::string("too few ") + name + " hits to reconstruct");
        const auto kept = truncate_raw(sub, r_tof, median_center(sub), opt.raw);
        std::vector<Vec3> pts(kept.size());
        for (std::size_t i = 0; i < kept.size(); ++i) pts[i] = kept[i].r;
        HaloGeometry geom = fit_ellipsoid(pts);
        auto ks = normalize(sub, geom, opt.shell);
        for (auto& p : ks) p.hit = index[p.hit];
        (s == Spin::Up ? out.up : out.down) = geom;
        out.points.insert(out.points.end(), ks.begin(), ks.end());
    }
    std::sort(out.points.begin(), out.points.end(), [](const KPoint& a, const KPoint& b) { return a.hit < b.hit; });

    if (opt.recenter) {
        // Hits arrive grouped by shot, which recenter relies on.
        const Vec3 v = recenter(out.points, opt.recentering);
        out.up.k_offset = out.down.k_offset = v;
        for (auto& p : out.points) p.k -= v;
    }
    return out;
}

}  // namespace bellhalo
