#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gcprobe/stein_probes.hpp"

namespace gcprobe::testing {

inline Complex z1(const RealVector& x) {
    return {x(x.size() - 2), x(x.size() - 1)};
}

inline GHFunction monomial(int m, double scale = 1.0) {
    return {"z^" + std::to_string(m) + "/" + std::to_string(scale),
            [m, scale](const RealVector& x) { return std::pow(z1(x) / scale, m); }, true};
}

// Disc exhaustion on C: K_j = {|z| <= r_j}, r_j = 1 - 1/(j+1), U_j the open
// disc of radius u_j = r_j + 0.9 (r_{j+1} - r_j). Level j uses z/s_j and
// (z/s_j)^2 with s_j = r_j + 0.6 (r_{j+1} - r_j); level 1 also carries z/4,
// whose Levi form is 1/16 everywhere.
struct DiscExhaustion {
    ModelChart chart{0, 1};
    Box box = Box::cube(2, 2.0);
    std::vector<ExhaustionLevel> levels;
    std::vector<double> r, u;
    std::vector<RealVector> certification;
    std::vector<RealVector> grid;
    std::vector<SublevelBound> bounds;
};

inline double disc_radius(int j) {
    return 1.0 - 1.0 / (j + 1);
}

inline DiscExhaustion disc_exhaustion(int levels) {
    DiscExhaustion fx;
    for (int j = 1; j <= levels; ++j) {
        const double rj = disc_radius(j);
        const double gap = disc_radius(j + 1) - rj;
        const double uj = rj + 0.9 * gap;
        const double sj = rj + 0.6 * gap;
        fx.r.push_back(rj);
        fx.u.push_back(uj);
        ExhaustionLevel level;
        level.functions = {monomial(1, sj), monomial(2, sj)};
        if (j == 1) {
            level.functions.push_back(monomial(1, 4.0));
        }
        level.k_samples = annulus_samples(fx.chart, 0.0, rj, 6, 24);
        level.outside_samples = annulus_samples(fx.chart, uj, disc_radius(j + 2), 4, 24);
        fx.levels.push_back(std::move(level));
        fx.bounds.push_back({static_cast<double>(j - 1), uj});
    }
    fx.certification = annulus_samples(fx.chart, 0.0, 0.8, 5, 12);
    fx.grid = lattice(Box::cube(2, 1.2), 0.05);
    return fx;
}

// One-sided distances between a grid hull and the closed unit disc.
inline double hausdorff_to_unit_disc(const std::vector<RealVector>& hull) {
    double out = 0.0;
    for (const auto& h : hull) {
        out = std::max(out, std::max(0.0, h.norm() - 1.0));
    }
    for (int ri = 0; ri <= 100; ++ri) {
        const double r = ri / 100.0;
        for (int a = 0; a < 360; ++a) {
            const double t = a * 3.14159265358979323846 / 180.0;
            RealVector q(2);
            q << r * std::cos(t), r * std::sin(t);
            double best = 1e300;
            for (const auto& h : hull) {
                best = std::min(best, (q - h).norm());
            }
            out = std::max(out, best);
        }
    }
    return out;
}

}  // namespace gcprobe::testing
