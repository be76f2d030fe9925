#include "gcprobe/stein_probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/SVD>

namespace gcprobe {

void verify_family(FunctionFamily& family, const ModelChart& chart, const std::vector<RealVector>& samples,
                   const Box& box, const FieldOptions& options) {
    for (auto& g : family.gh_functions) {
        g.verified = gh_check_model(g.f, chart, samples, box, options).gh;
    }
    for (auto& m : family.poisson_maps) {
        m.verified = poisson_map_check(m.f, chart, samples, box, options).pass;
    }
}

std::vector<RealVector> annulus_samples(const ModelChart& chart, double r_inner, double r_outer, int rings,
                                        int per_ring) {
    if (chart.n < 1) {
        throw InputError("annulus_samples: chart has no complex coordinate");
    }
    if (rings < 1 || per_ring < 1 || r_inner < 0.0 || r_outer < r_inner) {
        throw InputError("annulus_samples: need rings, per_ring >= 1 and 0 <= r_inner <= r_outer");
    }
    std::vector<RealVector> out;
    for (int r = 0; r < rings; ++r) {
        const double radius = rings == 1 ? r_outer : r_inner + (r_outer - r_inner) * r / (rings - 1);
        const int count = radius == 0.0 ? 1 : per_ring;
        for (int a = 0; a < count; ++a) {
            const double t = 2.0 * std::numbers::pi * a / count;
            RealVector x = RealVector::Zero(chart.d());
            x(chart.x_index(0)) = radius * std::cos(t);
            x(chart.y_index(0)) = radius * std::sin(t);
            out.push_back(std::move(x));
        }
    }
    return out;
}

std::vector<RealVector> lattice(const Box& box, double step) {
    if (!(step > 0.0)) {
        throw InputError("lattice: step must be positive");
    }
    const Index d = box.dim();
    std::vector<long> counts(static_cast<std::size_t>(d));
    std::size_t total = 1;
    for (Index i = 0; i < d; ++i) {
        // a small slack keeps the upper bound when it is a multiple of step
        counts[static_cast<std::size_t>(i)] =
            static_cast<long>(std::floor((box.upper(i) - box.lower(i)) / step + 1e-9)) + 1;
        total *= static_cast<std::size_t>(counts[static_cast<std::size_t>(i)]);
    }
    if (total > 50'000'000) {
        throw InputError("lattice: more than 5e7 points");
    }
    std::vector<RealVector> out;
    out.reserve(total);
    std::vector<long> idx(static_cast<std::size_t>(d), 0);
    for (std::size_t n = 0; n < total; ++n) {
        RealVector x(d);
        for (Index i = 0; i < d; ++i) {
            x(i) = box.lower(i) + static_cast<double>(idx[static_cast<std::size_t>(i)]) * step;
        }
        out.push_back(std::move(x));
        for (Index i = d - 1; i >= 0; --i) {
            auto& k = idx[static_cast<std::size_t>(i)];
            if (++k < counts[static_cast<std::size_t>(i)]) {
                break;
            }
            k = 0;
        }
    }
    return out;
}

HullResult o_hull(const std::vector<RealVector>& k, const FunctionFamily& family, const std::vector<RealVector>& grid,
                  double tol) {
    if (family.gh_functions.empty()) {
        throw InputError("o_hull: empty family (the hull would be the whole grid)");
    }
    if (k.empty()) {
        throw InputError("o_hull: empty compact");
    }
    std::vector<double> bound;
    HullResult out;
    for (const auto& g : family.gh_functions) {
        double m = 0.0;
        for (const auto& x : k) {
            m = std::max(m, std::abs(g.f(x)));
        }
        bound.push_back(m + tol);
        out.family.push_back(g.name);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        bool inside = true;
        for (std::size_t l = 0; l < bound.size() && inside; ++l) {
            inside = std::abs(family.gh_functions[l].f(grid[i])) <= bound[l];
        }
        if (inside) {
            out.indices.push_back(i);
            out.points.push_back(grid[i]);
        }
    }
    return out;
}

double hausdorff_to_disc(const std::vector<RealVector>& points, double radius) {
    if (points.empty()) {
        throw InputError("hausdorff_to_disc: no points");
    }
    double out = 0.0;
    for (const auto& p : points) {
        if (p.size() != 2) {
            throw InputError("hausdorff_to_disc: points must be planar");
        }
        out = std::max(out, p.norm() - radius);
    }
    for (int ri = 0; ri <= 100; ++ri) {
        const double r = radius * ri / 100.0;
        for (int a = 0; a < 360; ++a) {
            const double t = a * std::numbers::pi / 180.0;
            const RealVector q{{r * std::cos(t), r * std::sin(t)}};
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : points) {
                best = std::min(best, (q - p).norm());
            }
            out = std::max(out, best);
        }
    }
    return out;
}

IdempotenceResult hull_idempotence_check(const std::vector<RealVector>& k, const FunctionFamily& family,
                                         const std::vector<RealVector>& grid, double tol) {
    const HullResult first = o_hull(k, family, grid, tol);
    IdempotenceResult out;
    out.first_size = first.indices.size();
    if (first.points.empty()) {
        out.idempotent = true;
        return out;
    }
    const HullResult second = o_hull(first.points, family, grid, tol);
    out.second_size = second.indices.size();
    out.idempotent = first.indices == second.indices;
    return out;
}

std::vector<PairVerdict> separability_probe(const std::vector<std::pair<RealVector, RealVector>>& pairs,
                                            const FunctionFamily& family, SeparationMode mode, double tol) {
    std::vector<PairVerdict> out;
    for (const auto& [a, b] : pairs) {
        if (a.size() != b.size()) {
            throw InputError("separability_probe: pair points differ in dimension");
        }
        PairVerdict v;
        auto consider = [&](const std::string& name, double diff) {
            if (diff > v.difference) {
                v.difference = diff;
                if (diff > tol) {
                    v.witness = name;
                }
            }
        };
        for (const auto& g : family.gh_functions) {
            consider(g.name, std::abs(g.f(a) - g.f(b)));
        }
        if (mode == SeparationMode::include_poisson_maps) {
            for (const auto& m : family.poisson_maps) {
                consider(m.name, (m.f(a) - m.f(b)).norm());
            }
        }
        v.separated = v.difference > tol;
        out.push_back(std::move(v));
    }
    return out;
}

namespace {

RankGap rank_with_floor(const ComplexMatrix& m, double tol, Index expected) {
    RankGap gap;
    gap.expected = expected;
    if (m.size() == 0) {
        return gap;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m);
    const auto& sv = svd.singularValues();
    const double scale = std::max(1.0, sv(0));
    while (gap.rank < sv.size() && sv(gap.rank) > tol * scale) {
        ++gap.rank;
    }
    gap.smallest_kept = gap.rank > 0 ? sv(gap.rank - 1) / scale : 0.0;
    gap.largest_discarded = gap.rank < sv.size() ? sv(gap.rank) / scale : 0.0;
    return gap;
}

}  // namespace

RegularityReport regularity_probe(const RealVector& x, const std::vector<VectorField>& maps,
                                  const std::vector<ComplexField>& functions, const ModelChart& chart, const Box& box,
                                  const FieldOptions& options) {
    if (box.dim() != chart.d()) {
        throw InputError("regularity_probe: box does not match chart");
    }
    if (static_cast<Index>(maps.size()) != chart.m) {
        throw InputError("regularity_probe: expected " + std::to_string(chart.m) + " Poisson maps, got " +
                         std::to_string(maps.size()));
    }
    if (static_cast<Index>(functions.size()) < chart.n) {
        throw InputError("regularity_probe: expected at least " + std::to_string(chart.n) + " GH functions, got " +
                         std::to_string(functions.size()));
    }
    const double h = fd_step_at(x, options.fd_step);
    require_margin(box, x, h, "regularity_probe");

    const Index rows = 2 * static_cast<Index>(maps.size() + functions.size());
    const VectorField all = [&](const RealVector& y) {
        RealVector v(rows);
        Index r = 0;
        for (const auto& m : maps) {
            const RealVector mv = m(y);
            if (mv.size() != 2) {
                throw InputError("regularity_probe: Poisson maps take values in R^2");
            }
            v.segment(r, 2) = mv;
            r += 2;
        }
        for (const auto& g : functions) {
            const Complex gv = g(y);
            v(r++) = gv.real();
            v(r++) = gv.imag();
        }
        return v;
    };
    const RealMatrix jac = fd_jacobian(all, x, h);

    ComplexMatrix dz(static_cast<Index>(functions.size()), chart.n);
    const Index offset = 2 * static_cast<Index>(maps.size());
    for (Index i = 0; i < dz.rows(); ++i) {
        for (Index j = 0; j < chart.n; ++j) {
            // dg/dz = 1/2 (dg/dx - i dg/dy)
            const Complex gx(jac(offset + 2 * i, chart.x_index(j)), jac(offset + 2 * i + 1, chart.x_index(j)));
            const Complex gy(jac(offset + 2 * i, chart.y_index(j)), jac(offset + 2 * i + 1, chart.y_index(j)));
            dz(i, j) = 0.5 * (gx - Complex(0.0, 1.0) * gy);
        }
    }

    RegularityReport report;
    report.real = rank_with_floor(jac.cast<Complex>(), options.tol, chart.d());
    report.complex = rank_with_floor(dz, options.tol, chart.n);
    report.regular = report.real.rank == chart.d() && report.complex.rank == chart.n;
    return report;
}

double ReplayRng::uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double ReplayRng::normal() {
    // Box-Muller on (0, 1]
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ComplexVector ReplayRng::in_ball(Index n, double radius) {
    ComplexVector v(n);
    for (Index i = 0; i < n; ++i) {
        const double re = normal();
        v(i) = Complex(re, normal());
    }
    const double norm = v.norm();
    if (norm == 0.0) {
        return ComplexVector::Zero(n);
    }
    const double r = radius * std::pow(uniform(), 1.0 / static_cast<double>(2 * n));
    return v * (r / norm);
}

namespace {

bool regular_on(const std::vector<RealVector>& k, const std::vector<VectorField>& maps,
                const std::vector<ComplexField>& functions, const ModelChart& chart, const Box& box,
                const FieldOptions& options, std::string* why) {
    for (std::size_t i = 0; i < k.size(); ++i) {
        const RegularityReport r = regularity_probe(k[i], maps, functions, chart, box, options);
        if (!r.regular) {
            if (why) {
                *why = "not regular at K sample " + std::to_string(i) + " (real rank " + std::to_string(r.real.rank) +
                       "/" + std::to_string(r.real.expected) + ", complex rank " + std::to_string(r.complex.rank) +
                       "/" + std::to_string(r.complex.expected) + ")";
            }
            return false;
        }
    }
    return true;
}

bool injective_on(const std::vector<RealVector>& k, const std::vector<VectorField>& maps,
                  const std::vector<ComplexField>& functions, double tol, std::string* why) {
    std::vector<ComplexVector> values;
    for (const auto& x : k) {
        ComplexVector v(static_cast<Index>(2 * maps.size() + functions.size()));
        Index r = 0;
        for (const auto& m : maps) {
            const RealVector mv = m(x);
            v(r++) = mv(0);
            v(r++) = mv(1);
        }
        for (const auto& g : functions) {
            v(r++) = g(x);
        }
        values.push_back(std::move(v));
    }
    for (std::size_t a = 0; a < values.size(); ++a) {
        for (std::size_t b = a + 1; b < values.size(); ++b) {
            if ((values[a] - values[b]).cwiseAbs().maxCoeff() <= tol) {
                if (why) {
                    *why = "K samples " + std::to_string(a) + " and " + std::to_string(b) + " collide";
                }
                return false;
            }
        }
    }
    return true;
}

}  // namespace

ReductionResult reduce_regular_tuple(const std::vector<VectorField>& maps, const std::vector<ComplexField>& functions,
                                     const std::vector<RealVector>& k, const ModelChart& chart, const Box& box,
                                     const ReductionOptions& options) {
    if (functions.size() < 2) {
        throw InputError("reduce_regular_tuple: need N + 1 >= 2 GH functions");
    }
    const Index n_out = static_cast<Index>(functions.size()) - 1;
    const Index needed = options.mode == ReductionMode::regular ? 2 * chart.n : 2 * chart.n + 1;
    if (n_out < needed) {
        throw InputError("reduce_regular_tuple: N = " + std::to_string(n_out) + " is below the threshold " +
                         std::to_string(needed));
    }
    if (n_out < chart.n) {
        throw InputError("reduce_regular_tuple: fewer functions than the type");
    }
    if (k.empty()) {
        throw InputError("reduce_regular_tuple: empty compact");
    }
    if (options.trials < 1 || !(options.radius > 0.0)) {
        throw InputError("reduce_regular_tuple: trials and radius must be positive");
    }

    ReductionResult out;
    out.seed = options.seed;
    out.input_regular = regular_on(k, maps, functions, chart, box, options.field, nullptr);
    if (options.mode == ReductionMode::injective) {
        out.input_injective = injective_on(k, maps, functions, options.field.tol, nullptr);
    }

    ReplayRng rng(options.seed);
    const ComplexField last = functions.back();
    std::string why;
    for (int trial = 1; trial <= options.trials; ++trial) {
        const ComplexVector c = rng.in_ball(n_out, options.radius);
        std::vector<ComplexField> reduced;
        for (Index j = 0; j < n_out; ++j) {
            const ComplexField g = functions[static_cast<std::size_t>(j)];
            const Complex cj = c(j);
            reduced.push_back([g, last, cj](const RealVector& x) { return g(x) - cj * last(x); });
        }
        bool ok = regular_on(k, maps, reduced, chart, box, options.field, &why);
        if (ok && options.mode == ReductionMode::injective) {
            ok = injective_on(k, maps, reduced, options.field.tol, &why);
        }
        out.trials_used = trial;
        if (ok) {
            out.success = true;
            out.c = c;
            out.reduced = std::move(reduced);
            return out;
        }
    }
    out.reason = "no candidate within " + std::to_string(options.trials) + " trials; last: " + why;
    return out;
}

namespace {

double max_modulus(const ComplexField& g, const std::vector<RealVector>& pts) {
    double m = 0.0;
    for (const auto& x : pts) {
        m = std::max(m, std::abs(g(x)));
    }
    return m;
}

double level_sum(const std::vector<GHFunction>& fs, const std::vector<int>& powers, const RealVector& x) {
    double s = 0.0;
    for (std::size_t l = 0; l < fs.size(); ++l) {
        s += std::pow(std::abs(fs[l].f(x)), 2 * powers[l]);
    }
    return s;
}

}  // namespace

ExhaustionResult exhaustion_build(const std::vector<ExhaustionLevel>& levels, const ModelChart& chart, const Box& box,
                                  const std::vector<RealVector>& certification_samples,
                                  const std::vector<RealVector>& grid, const std::vector<SublevelBound>& bounds,
                                  const ExhaustionOptions& options) {
    if (levels.empty()) {
        throw InputError("exhaustion_build: no levels");
    }
    if (options.power_limit < 1) {
        throw InputError("exhaustion_build: power limit must be positive");
    }
    ExhaustionResult out;
    out.f = [](const RealVector&) { return Complex(-1.0, 0.0); };

    for (std::size_t jj = 0; jj < levels.size(); ++jj) {
        const int j = static_cast<int>(jj) + 1;
        const auto& level = levels[jj];
        const double target = std::ldexp(1.0, -j);
        const double count = static_cast<double>(std::max<std::size_t>(1, level.functions.size()));
        std::vector<int> powers;
        for (const auto& g : level.functions) {
            const double mk = max_modulus(g.f, level.k_samples);
            if (mk >= 1.0) {
                out.failing_level = j;
                out.reason = "level " + std::to_string(j) + ": |" + g.name + "| reaches " + std::to_string(mk) +
                             " on K_j, power search cannot reach the bound";
                out.powers.push_back(powers);
                return out;
            }
            int m = 1;
            if (mk > 0.0) {
                // each term below 2^-j / L on K_j
                m = std::max(1, static_cast<int>(std::ceil(std::log(target / count) / (2.0 * std::log(mk)))));
            }
            if (m > options.power_limit) {
                out.failing_level = j;
                out.reason = "level " + std::to_string(j) + ": " + g.name + " needs power " + std::to_string(m) +
                             " on K_j (max |g| = " + std::to_string(mk) + ")";
                out.powers.push_back(powers);
                return out;
            }
            powers.push_back(m);
        }
        for (const auto& x : level.k_samples) {
            if (!(level_sum(level.functions, powers, x) < target)) {
                out.failing_level = j;
                out.reason = "level " + std::to_string(j) + ": K_j bound not met";
                out.powers.push_back(powers);
                return out;
            }
        }
        // raise the dominant function at each outside sample until the sum exceeds j
        for (const auto& x : level.outside_samples) {
            while (!(level_sum(level.functions, powers, x) > static_cast<double>(j))) {
                std::size_t best = level.functions.size();
                double best_mod = 1.0;
                for (std::size_t l = 0; l < level.functions.size(); ++l) {
                    const double v = std::abs(level.functions[l].f(x));
                    if (v > best_mod && powers[l] < options.power_limit) {
                        best_mod = v;
                        best = l;
                    }
                }
                if (best == level.functions.size()) {
                    out.failing_level = j;
                    out.reason = "level " + std::to_string(j) + ": outside bound " + std::to_string(j) +
                                 " unattainable within power " + std::to_string(options.power_limit);
                    out.powers.push_back(powers);
                    return out;
                }
                ++powers[best];
            }
        }
        out.powers.push_back(std::move(powers));
    }

    std::vector<std::pair<ComplexField, int>> terms;
    for (std::size_t jj = 0; jj < levels.size(); ++jj) {
        for (std::size_t l = 0; l < levels[jj].functions.size(); ++l) {
            terms.emplace_back(levels[jj].functions[l].f, out.powers[jj][l]);
        }
    }
    out.f = [terms](const RealVector& x) {
        double s = -1.0;
        for (const auto& [g, m] : terms) {
            s += std::pow(std::norm(g(x)), m);
        }
        return Complex(s, 0.0);
    };

    out.max_on_k1 = -std::numeric_limits<double>::infinity();
    for (const auto& x : levels.front().k_samples) {
        out.max_on_k1 = std::max(out.max_on_k1, out.f(x).real());
    }
    for (const auto& level : levels) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& x : level.outside_samples) {
            m = std::min(m, out.f(x).real());
        }
        out.min_outside.push_back(m);
    }

    out.psh = l_psh_check(out.f, chart, certification_samples, box, options.field);
    for (const auto& b : bounds) {
        SublevelResult r;
        r.c = b.c;
        r.radius = b.radius;
        for (const auto& x : grid) {
            if (out.f(x).real() < b.c) {
                ++r.count;
                r.farthest = std::max(r.farthest, x.norm());
            }
        }
        r.contained = r.farthest <= b.radius;
        out.sublevels.push_back(r);
    }

    bool outside_ok = true;
    for (std::size_t jj = 0; jj < levels.size(); ++jj) {
        outside_ok = outside_ok && out.min_outside[jj] > static_cast<double>(jj);
    }
    const bool sublevels_ok =
        std::all_of(out.sublevels.begin(), out.sublevels.end(), [](const SublevelResult& r) { return r.contained; });
    out.success = out.max_on_k1 < 0.0 && outside_ok && out.psh.strictly_psh && sublevels_ok;
    if (!out.success) {
        if (!out.psh.strictly_psh) {
            out.reason = "not strictly L-psh on the certification samples (min Levi eigenvalue " +
                         std::to_string(out.psh.min_eigenvalue) + ")";
        } else if (!sublevels_ok) {
            out.reason = "a sublevel set leaves its bound";
        } else {
            out.reason = "sign conditions fail on the samples";
        }
    }
    return out;
}

std::vector<MembershipVerdict> polyhedron_membership(const std::vector<PolyhedronMember>& p,
                                                     const std::vector<RealVector>& points, double tol) {
    std::vector<MembershipVerdict> out;
    for (const auto& x : points) {
        MembershipVerdict v;
        for (const auto& g : p) {
            v.max_modulus = std::max(v.max_modulus, std::abs(g.g(x)) / g.scale);
        }
        v.member = v.max_modulus < 1.0 - tol;
        out.push_back(v);
    }
    return out;
}

std::vector<RealVector> shell_points(const std::vector<RealVector>& grid, double radius, double width) {
    std::vector<RealVector> out;
    for (const auto& x : grid) {
        const double r = x.norm();
        if (r >= radius - width && r <= radius) {
            out.push_back(x);
        }
    }
    return out;
}

PolyhedronSearchResult polyhedron_search(const std::vector<RealVector>& k, const std::vector<RealVector>& shell,
                                         const std::vector<GHFunction>& candidates,
                                         const PolyhedronSearchOptions& options) {
    PolyhedronSearchResult out;
    if (candidates.empty()) {
        out.reason = "empty candidate family";
        if (!shell.empty()) {
            out.uncovered = shell.front();
        }
        return out;
    }
    if (k.empty()) {
        throw InputError("polyhedron_search: empty compact");
    }
    std::vector<PolyhedronMember> scaled;
    std::vector<std::vector<bool>> covers;
    for (const auto& g : candidates) {
        const double mk = max_modulus(g.f, k);
        if (mk == 0.0) {
            continue;
        }
        PolyhedronMember m{g.name, g.f, mk * (1.0 + options.rescale_margin)};
        std::vector<bool> cov;
        for (const auto& x : shell) {
            cov.push_back(std::abs(g.f(x)) / m.scale > 1.0 + options.tol);
        }
        scaled.push_back(std::move(m));
        covers.push_back(std::move(cov));
    }
    std::vector<bool> covered(shell.size(), false);
    for (std::size_t i = 0; i < shell.size(); ++i) {
        for (const auto& cov : covers) {
            covered[i] = covered[i] || cov[i];
        }
        if (!covered[i]) {
            out.uncovered = shell[i];
            out.reason = "shell point " + std::to_string(i) + " is not separated from K by any candidate";
            return out;
        }
    }
    std::vector<bool> done(shell.size(), false);
    std::size_t remaining = shell.size();
    while (remaining > 0) {
        std::size_t best = 0, best_count = 0;
        for (std::size_t c = 0; c < covers.size(); ++c) {
            std::size_t count = 0;
            for (std::size_t i = 0; i < shell.size(); ++i) {
                count += (!done[i] && covers[c][i]) ? 1 : 0;
            }
            if (count > best_count) {
                best_count = count;
                best = c;
            }
        }
        out.selected.push_back(scaled[best]);
        for (std::size_t i = 0; i < shell.size(); ++i) {
            if (!done[i] && covers[best][i]) {
                done[i] = true;
                --remaining;
            }
        }
    }
    out.found = true;
    return out;
}

}  // namespace gcprobe
