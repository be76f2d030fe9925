#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "gcprobe/field_calculus.hpp"
#include "support/random.hpp"

using namespace gcprobe;

namespace {

const Complex kI(0.0, 1.0);

RealVector vec(std::initializer_list<double> xs) {
    RealVector v(static_cast<Index>(xs.size()));
    Index k = 0;
    for (double x : xs) {
        v(k++) = x;
    }
    return v;
}

std::vector<RealVector> random_points(std::mt19937_64& rng, Index d, double half, int count) {
    std::uniform_real_distribution<double> u(-half, half);
    std::vector<RealVector> pts;
    for (int k = 0; k < count; ++k) {
        RealVector x(d);
        for (Index i = 0; i < d; ++i) {
            x(i) = u(rng);
        }
        pts.push_back(x);
    }
    return pts;
}

// z = x + iy from the last two coordinates of a (1,1) or (0,1) chart
Complex z_of(const RealVector& x) {
    const Index n = x.size();
    return {x(n - 2), x(n - 1)};
}

// J0 conjugated by a rotation through x_1 in the (e_2, e_3) plane of R^4
RealMatrix rotation(double t) {
    RealMatrix r = RealMatrix::Identity(4, 4);
    r(1, 1) = std::cos(t);
    r(1, 2) = -std::sin(t);
    r(2, 1) = std::sin(t);
    r(2, 2) = std::cos(t);
    return r;
}

RealMatrix rotation_derivative(double t) {
    RealMatrix r = RealMatrix::Zero(4, 4);
    r(1, 1) = -std::sin(t);
    r(1, 2) = -std::cos(t);
    r(2, 1) = std::cos(t);
    r(2, 2) = -std::sin(t);
    return r;
}

RealMatrix rotating_vector_block(const RealVector& x) {
    const RealMatrix r = rotation(x(0));
    return -(r * standard_complex_operator(2) * r.transpose());
}

StructureField rotating_field(const Box& box) {
    return StructureField(box, [](const RealVector& x) {
        const RealMatrix jv = rotating_vector_block(x);
        RealMatrix j = RealMatrix::Zero(8, 8);
        j.topLeftCorner(4, 4) = jv;
        j.bottomRightCorner(4, 4) = -jv.transpose();
        return j;
    });
}

// Classical Nijenhuis tensor of J_V on constant vectors, with the exact
// derivative of J_V (only x_1 enters).
RealVector exact_nijenhuis(const RealVector& x, const RealVector& u, const RealVector& v) {
    const double t = x(0);
    const RealMatrix r = rotation(t);
    const RealMatrix dr = rotation_derivative(t);
    const RealMatrix j0 = standard_complex_operator(2);
    const RealMatrix j = -(r * j0 * r.transpose());
    const RealMatrix dj = -(dr * j0 * r.transpose() + r * j0 * dr.transpose());
    auto along = [&](const RealVector& w) -> RealMatrix { return w(0) * dj; };
    return along(j * u) * v - along(j * v) * u + j * (along(v) * u) - j * (along(u) * v);
}

}  // namespace

TEST_CASE("box margins and step", "[field][margin]") {
    const Box box = Box::cube(2, 1.0);
    CHECK(fd_step_at(vec({0.5, -3.0}), 1e-5) == Catch::Approx(4e-5));
    CHECK_NOTHROW(require_margin(box, vec({0.0, 0.0}), 1e-5, "t"));
    CHECK_THROWS_AS(require_margin(box, vec({1.0 - 1e-5, 0.0}), 1e-5, "t"), InputError);
    const Section s = Section::constant(vec({1.0, 0.0}), vec({0.0, 0.0}));
    CHECK_THROWS_AS(courant_bracket(s, s, vec({0.99999, 0.0}), box), InputError);
    CHECK_THROWS_AS(fd_step_at(vec({0.0}), 0.0), InputError);
}

TEST_CASE("Courant bracket examples", "[field][courant]") {
    const Box box = Box::cube(2, 2.0);
    const RealVector zero2 = RealVector::Zero(2);
    const RealVector x = vec({0.7, -0.3});

    SECTION("constant sections commute") {
        const CourantValue v = courant_bracket(Section::constant(vec({1, 0}), zero2),
                                               Section::constant(vec({0, 1}), zero2), x, box);
        CHECK(v.max_abs() < 1e-12);
    }

    SECTION("[d_x, x d_y] = d_y") {
        const Section dx = Section::constant(vec({1, 0}), zero2);
        const Section xdy{[](const RealVector& y) { return vec({0.0, y(0)}); },
                          [](const RealVector&) { return RealVector(RealVector::Zero(2)); }};
        const CourantValue v = courant_bracket(dx, xdy, x, box);
        CHECK((v.vector - vec({0, 1})).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(v.covector.cwiseAbs().maxCoeff() < 1e-8);
    }

    SECTION("d_x against x dy gives dy") {
        // L_{d_x}(x dy) = dy and i_{d_x}(x dy) = 0
        const Section dx = Section::constant(vec({1, 0}), zero2);
        const Section form{[](const RealVector&) { return RealVector(RealVector::Zero(2)); },
                           [](const RealVector& y) { return vec({0.0, y(0)}); }};
        const CourantValue v = courant_bracket(dx, form, x, box);
        CHECK(v.vector.cwiseAbs().maxCoeff() < 1e-8);
        CHECK((v.covector - vec({0, 1})).cwiseAbs().maxCoeff() < 1e-8);
    }

    SECTION("d_y against x dy has an exact correction term") {
        // L_{d_y}(x dy) = 0, i_{d_y}(x dy) = x, so the bracket is -1/2 dx
        const Section dy = Section::constant(vec({0, 1}), zero2);
        const Section form{[](const RealVector&) { return RealVector(RealVector::Zero(2)); },
                           [](const RealVector& y) { return vec({0.0, y(0)}); }};
        const CourantValue v = courant_bracket(dy, form, x, box);
        CHECK((v.covector - vec({-0.5, 0})).cwiseAbs().maxCoeff() < 1e-8);
    }
}

namespace {

// Cubic polynomial sections on R^3 with hand-computed bracket.
struct PolySection {
    RealMatrix lin;     // linear coefficients, 3 x 3
    RealVector cubic;   // coefficient of x_k^3 in component k
    RealMatrix lin_xi;
    RealVector cubic_xi;

    static PolySection random(std::mt19937_64& rng) {
        return {gcprobe::testing::random_real(rng, 3, 3), gcprobe::testing::random_real(rng, 3, 1),
                gcprobe::testing::random_real(rng, 3, 3), gcprobe::testing::random_real(rng, 3, 1)};
    }

    RealVector a(const RealVector& x) const { return lin * x + cubic.cwiseProduct(x.array().cube().matrix()); }
    RealVector xi(const RealVector& x) const { return lin_xi * x + cubic_xi.cwiseProduct(x.array().cube().matrix()); }
    RealMatrix da(const RealVector& x) const {
        return lin + RealMatrix((3.0 * cubic.cwiseProduct(x.cwiseAbs2())).asDiagonal());
    }
    RealMatrix dxi(const RealVector& x) const {
        return lin_xi + RealMatrix((3.0 * cubic_xi.cwiseProduct(x.cwiseAbs2())).asDiagonal());
    }
    Section section() const {
        const PolySection self = *this;
        return {[self](const RealVector& y) { return self.a(y); }, [self](const RealVector& y) { return self.xi(y); }};
    }
};

CourantValue exact_bracket(const PolySection& s1, const PolySection& s2, const RealVector& x) {
    const RealVector a1 = s1.a(x), a2 = s2.a(x), xi1 = s1.xi(x), xi2 = s2.xi(x);
    const RealMatrix da1 = s1.da(x), da2 = s2.da(x), dxi1 = s1.dxi(x), dxi2 = s2.dxi(x);
    // d(a1 . xi2 - a2 . xi1) by the product rule
    const RealVector dphi = da1.transpose() * xi2 + dxi2.transpose() * a1 - da2.transpose() * xi1 - dxi1.transpose() * a2;
    CourantValue out;
    out.vector = da2 * a1 - da1 * a2;
    out.covector = (dxi2 * a1 + da1.transpose() * xi2) - (dxi1 * a2 + da2.transpose() * xi1) - 0.5 * dphi;
    return out;
}

double bracket_error(const CourantValue& a, const CourantValue& b) {
    return std::max((a.vector - b.vector).cwiseAbs().maxCoeff(), (a.covector - b.covector).cwiseAbs().maxCoeff());
}

}  // namespace

TEST_CASE("Courant bracket properties on polynomial sections", "[field][courant][property]") {
    std::mt19937_64 rng(314);
    const Box box = Box::cube(3, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const PolySection s1 = PolySection::random(rng);
        const PolySection s2 = PolySection::random(rng);
        const RealVector x = random_points(rng, 3, 1.0, 1).front();
        const CourantValue ab = courant_bracket(s1.section(), s2.section(), x, box);
        const CourantValue ba = courant_bracket(s2.section(), s1.section(), x, box);
        CHECK((ab.vector + ba.vector).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((ab.covector + ba.covector).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(bracket_error(ab, exact_bracket(s1, s2, x)) < 1e-7);

        // second order: the truncation error of a cubic shrinks by 4 per halving
        const CourantValue exact = exact_bracket(s1, s2, x);
        const double coarse = bracket_error(courant_bracket(s1.section(), s2.section(), x, box, 1e-2), exact);
        const double fine = bracket_error(courant_bracket(s1.section(), s2.section(), x, box, 5e-3), exact);
        INFO("coarse " << coarse << " fine " << fine);
        CHECK(coarse / fine >= 3.0);
    }
}

TEST_CASE("Nijenhuis residual", "[field][nijenhuis]") {
    std::mt19937_64 rng(2718);

    SECTION("constant models vanish") {
        for (auto [m, n] : {std::pair<Index, Index>{1, 0}, {0, 1}, {1, 1}, {0, 2}}) {
            const ModelChart chart{m, n};
            const StructureField field = chart.field(Box::cube(chart.d(), 2.0));
            for (const RealVector& x : random_points(rng, chart.d(), 1.0, 5)) {
                CHECK(nijenhuis_residual(field, x) < 1e-6);
            }
        }
    }

    SECTION("constant closed B keeps integrability") {
        const ModelChart chart{0, 2};
        const Box box = Box::cube(4, 2.0);
        const RealMatrix b = gcprobe::testing::random_antisymmetric(rng, 4);
        const StructureField field = b_transform(chart.field(box), [b](const RealVector&) { return b; });
        for (const RealVector& x : random_points(rng, 4, 1.0, 5)) {
            CHECK(field.certificate(x).valid);
            CHECK(nijenhuis_residual(field, x) < 1e-6);
            CHECK(closedness_residual([b](const RealVector&) { return b; }, x, box) < 1e-9);
        }
    }

    SECTION("non-closed B is detected") {
        const Box box = Box::cube(4, 2.0);
        // B = x_1 dx_2 ^ dx_3, dB = dx_1 ^ dx_2 ^ dx_3
        const MatrixField b = [](const RealVector& y) {
            RealMatrix m = RealMatrix::Zero(4, 4);
            m(1, 2) = y(0);
            m(2, 1) = -y(0);
            return m;
        };
        CHECK(closedness_residual(b, vec({0.1, 0.2, 0.3, 0.4}), box) == Catch::Approx(1.0).epsilon(1e-6));
    }

    SECTION("rotating J matches the exact tensor and is large") {
        const Box box = Box::cube(4, 2.0);
        const StructureField field = rotating_field(box);
        int large = 0;
        const auto pts = random_points(rng, 4, 1.5, 100);
        for (const RealVector& x : pts) {
            REQUIRE(field.certificate(x).valid);
            double worst_exact = 0.0;
            for (Index i = 0; i < 4; ++i) {
                for (Index j = i + 1; j < 4; ++j) {
                    RealVector ei = RealVector::Zero(4), ej = RealVector::Zero(4);
                    ei(i) = 1.0;
                    ej(j) = 1.0;
                    const RealVector zero = RealVector::Zero(4);
                    const CourantValue n =
                        nijenhuis_tensor(field, Section::constant(ei, zero), Section::constant(ej, zero), x);
                    const RealVector expected = exact_nijenhuis(x, ei, ej);
                    CHECK((n.vector - expected).cwiseAbs().maxCoeff() < 1e-6);
                    CHECK(n.covector.cwiseAbs().maxCoeff() < 1e-6);
                    worst_exact = std::max(worst_exact, expected.cwiseAbs().maxCoeff());
                }
            }
            const double residual = nijenhuis_residual(field, x);
            CHECK(residual >= worst_exact - 1e-6);
            if (residual > 1e-2) {
                ++large;
            }
        }
        CHECK(large >= 90);
    }

    SECTION("the coordinate frame and a random non-constant frame agree") {
        const Box box = Box::cube(4, 2.0);
        const StructureField field = rotating_field(box);
        const RealMatrix f0 = gcprobe::testing::random_real(rng, 8, 8);
        const RealMatrix f1 = gcprobe::testing::random_real(rng, 8, 8);
        const RealMatrix f2 = gcprobe::testing::random_real(rng, 8, 8);
        const auto frame = [f0, f1, f2](const RealVector& y) -> RealMatrix {
            return f0 + y(0) * f1 + y(1) * y(3) * f2;
        };
        auto frame_section = [frame](Index a) -> Section {
            return {[frame, a](const RealVector& y) -> RealVector { return frame(y).col(a).head(4); },
                    [frame, a](const RealVector& y) -> RealVector { return frame(y).col(a).tail(4); }};
        };
        const RealVector x = vec({0.3, -0.4, 0.5, 0.2});
        RealMatrix coord(8, 64);
        for (Index i = 0; i < 8; ++i) {
            for (Index j = 0; j < 8; ++j) {
                RealVector ei = RealVector::Zero(8), ej = RealVector::Zero(8);
                ei(i) = 1.0;
                ej(j) = 1.0;
                const CourantValue n = nijenhuis_tensor(field, Section::constant(ei.head(4), ei.tail(4)),
                                                        Section::constant(ej.head(4), ej.tail(4)), x);
                coord.col(i * 8 + j) << n.vector, n.covector;
            }
        }
        const RealMatrix fx = frame(x);
        for (Index a = 0; a < 3; ++a) {
            for (Index b = a + 1; b < 4; ++b) {
                const CourantValue n = nijenhuis_tensor(field, frame_section(a), frame_section(b), x);
                RealVector direct(8);
                direct << n.vector, n.covector;
                RealVector expected = RealVector::Zero(8);
                for (Index i = 0; i < 8; ++i) {
                    for (Index j = 0; j < 8; ++j) {
                        expected += fx(i, a) * fx(j, b) * coord.col(i * 8 + j);
                    }
                }
                CHECK((direct - expected).cwiseAbs().maxCoeff() < 1e-5);
            }
        }
    }

    SECTION("invalid J is an input error") {
        const StructureField bad(Box::cube(2, 1.0), [](const RealVector&) { return RealMatrix(RealMatrix::Identity(4, 4)); });
        CHECK_THROWS_AS(nijenhuis_residual(bad, vec({0.0, 0.0})), InputError);
    }
}

TEST_CASE("d_L on functions", "[field][dl]") {
    SECTION("constants") {
        const ModelChart chart{1, 1};
        const StructureField field = chart.field(Box::cube(4, 2.0));
        const DLValue v = d_l_function([](const RealVector&) { return Complex(3.0, 1.0); }, field, vec({0.1, 0.2, 0.3, 0.4}));
        CHECK(v.norm < 1e-12);
        CHECK(v.components.size() == 4);
    }

    SECTION("z^2 on C is GH") {
        const ModelChart chart{0, 1};
        const StructureField field = chart.field(Box::cube(2, 3.0));
        const DLValue v = d_l_function([](const RealVector& x) { return z_of(x) * z_of(x); }, field, vec({1.0, 0.0}));
        CHECK(v.norm < 1e-8);
    }

    SECTION("p_1 on R^2 x C is not") {
        const ModelChart chart{1, 1};
        const StructureField field = chart.field(Box::cube(4, 2.0));
        const DLValue v = d_l_function([](const RealVector& x) { return Complex(x(0), 0.0); }, field, vec({0.1, 0.2, 0.3, 0.4}));
        // orthonormal basis (e_k - i W e_k) / sqrt 2 on the p-plane, so |d_L p_1| = 1 / sqrt 2
        CHECK(v.norm == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
    }

    SECTION("B-transforms keep the vanishing of d_L") {
        std::mt19937_64 rng(6);
        const ModelChart chart{1, 1};
        const Box box = Box::cube(4, 2.0);
        const RealMatrix b = gcprobe::testing::random_antisymmetric(rng, 4);
        const StructureField plain = chart.field(box);
        const StructureField shifted = b_transform(plain, [b](const RealVector&) { return b; });
        const ComplexField f = [](const RealVector& x) { return Complex(x(0) * x(1), 0.0) + z_of(x); };
        const ComplexField g = [](const RealVector& x) { return z_of(x) * z_of(x); };
        const RealVector x = vec({0.2, 0.5, -0.1, 0.3});
        CHECK(d_l_function(f, plain, x).norm > 0.1);
        CHECK(d_l_function(f, shifted, x).norm > 0.1);
        CHECK(d_l_function(g, plain, x).norm < 1e-8);
        CHECK(d_l_function(g, shifted, x).norm < 1e-8);
    }
}

namespace {

struct CorpusEntry {
    const char* name;
    ComplexField f;
    std::function<Complex(const RealVector&)> dzbar;  // exact
    std::function<double(const RealVector&)> dp;      // exact max_l |df/dp_l|
    bool gh;
};

std::vector<CorpusEntry> corpus() {
    auto zero_c = [](const RealVector&) { return Complex(0.0, 0.0); };
    auto zero_r = [](const RealVector&) { return 0.0; };
    return {
        {"z^3 - 2z", [](const RealVector& x) { const Complex z = z_of(x); return z * z * z - 2.0 * z; }, zero_c, zero_r,
         true},
        {"conj z", [](const RealVector& x) { return std::conj(z_of(x)); },
         [](const RealVector&) { return Complex(1.0, 0.0); }, zero_r, false},
        {"|z|^2", [](const RealVector& x) { return Complex(std::norm(z_of(x)), 0.0); },
         [](const RealVector& x) { return z_of(x); }, zero_r, false},
        {"constant", [](const RealVector&) { return Complex(5.0, -2.0); }, zero_c, zero_r, true},
        {"exp z", [](const RealVector& x) { return std::exp(z_of(x)); }, zero_c, zero_r, true},
        {"p1 z", [](const RealVector& x) { return x(0) * z_of(x); }, zero_c,
         [](const RealVector& x) { return std::abs(z_of(x)); }, false},
        {"p1", [](const RealVector& x) { return Complex(x(0), 0.0); }, zero_c, [](const RealVector&) { return 1.0; },
         false},
        {"Re z", [](const RealVector& x) { return Complex(z_of(x).real(), 0.0); },
         [](const RealVector&) { return Complex(0.5, 0.0); }, zero_r, false},
        {"z^2 + 3iz", [](const RealVector& x) { const Complex z = z_of(x); return z * z + 3.0 * kI * z; }, zero_c,
         zero_r, true},
        {"1/(z+3)", [](const RealVector& x) { return 1.0 / (z_of(x) + 3.0); }, zero_c, zero_r, true},
        {"sin p2 + z", [](const RealVector& x) { return std::sin(x(1)) + z_of(x); }, zero_c,
         [](const RealVector& x) { return std::abs(std::cos(x(1))); }, false},
        {"(z-1)^4", [](const RealVector& x) { return std::pow(z_of(x) - 1.0, 4); }, zero_c, zero_r, true},
    };
}

}  // namespace

TEST_CASE("GH corpus", "[field][gh]") {
    std::mt19937_64 rng(1234);
    const ModelChart chart{1, 1};
    const Box box = Box::cube(4, 2.0);
    const auto samples = random_points(rng, 4, 1.5, 10);
    const auto entries = corpus();
    REQUIRE(entries.size() == 12);
    for (const auto& e : entries) {
        INFO(e.name);
        const GHReport r = gh_check_model(e.f, chart, samples, box);
        CHECK(r.gh == e.gh);
        CHECK(r.dl_gh == e.gh);
        CHECK(r.agree);
        for (const auto& s : r.samples) {
            CHECK(std::abs(s.zbar_residual - std::abs(e.dzbar(s.x))) < 1e-6);
            CHECK(std::abs(s.p_residual - e.dp(s.x)) < 1e-6);
        }
    }

    SECTION("products and compositions of GH functions stay GH") {
        const ComplexField f = entries[0].f;
        const ComplexField g = entries[9].f;
        const ComplexField prod = [f, g](const RealVector& x) { return f(x) * g(x); };
        const ComplexField comp = [f](const RealVector& x) { const Complex w = f(x); return w * w - 4.0 * w + 1.0; };
        CHECK(gh_check_model(prod, chart, samples, box).max_zbar < 1e-5);
        CHECK(gh_check_model(comp, chart, samples, box).gh);
    }

    SECTION("margins are enforced") {
        CHECK_THROWS_AS(gh_check_model(entries[0].f, chart, {vec({2.0, 0, 0, 0})}, box), InputError);
    }
}

TEST_CASE("Poisson maps", "[field][poisson]") {
    std::mt19937_64 rng(55);
    const ModelChart chart{1, 1};
    const Box box = Box::cube(4, 2.0);
    const auto samples = random_points(rng, 4, 1.5, 10);

    const PoissonReport pr1 = poisson_map_check([](const RealVector& x) { return vec({x(0), x(1)}); }, chart, samples, box);
    CHECK(pr1.pass);
    CHECK(pr1.max_residual < 1e-7);

    const PoissonReport scaled =
        poisson_map_check([](const RealVector& x) { return vec({x(0), 2.0 * x(1)}); }, chart, samples, box);
    CHECK_FALSE(scaled.pass);
    CHECK(scaled.max_residual == Catch::Approx(1.0).epsilon(1e-6));

    const PoissonReport constant =
        poisson_map_check([](const RealVector&) { return vec({1.0, 2.0}); }, chart, samples, box);
    CHECK(constant.max_residual == Catch::Approx(1.0));

    SECTION("symplectomorphisms of the plane are Poisson") {
        // shear (p1, p2 + p1^2) preserves dp1 ^ dp2
        const PoissonReport shear = poisson_map_check(
            [](const RealVector& x) { return vec({x(0), x(1) + x(0) * x(0)}); }, chart, samples, box);
        CHECK(shear.pass);
    }

    CHECK_THROWS_AS(poisson_map_check([](const RealVector& x) { return vec({x(0)}); }, chart, samples, box), InputError);
}

TEST_CASE("Levi forms", "[field][psh]") {
    std::mt19937_64 rng(77);
    const Box box = Box::cube(4, 2.0);
    const ModelChart chart{1, 1};
    const auto samples = random_points(rng, 4, 1.2, 10);
    auto real = [](auto fn) { return [fn](const RealVector& x) { return Complex(fn(x), 0.0); }; };

    const PshReport norm = l_psh_check(real([](const RealVector& x) { return std::norm(z_of(x)); }), chart, samples, box);
    CHECK(norm.psh);
    CHECK(norm.strictly_psh);
    CHECK(norm.leafwise_residual < 1e-6);
    for (const auto& s : norm.samples) {
        CHECK(std::abs(s.levi(0, 0) - 1.0) < 1e-6);
        CHECK(s.hermitian_residual < 1e-6);
    }

    const PshReport re_sq =
        l_psh_check(real([](const RealVector& x) { return (z_of(x) * z_of(x)).real(); }), chart, samples, box);
    CHECK(re_sq.psh);
    CHECK_FALSE(re_sq.strictly_psh);
    CHECK(std::abs(re_sq.min_eigenvalue) < 1e-6);

    const PshReport neg = l_psh_check(real([](const RealVector& x) { return -std::norm(z_of(x)); }), chart, samples, box);
    CHECK_FALSE(neg.psh);
    CHECK(neg.min_eigenvalue == Catch::Approx(-1.0).epsilon(1e-5));

    const PshReport leaf = l_psh_check(real([](const RealVector& x) { return x(0) * x(0); }), chart, samples, box);
    CHECK_FALSE(leaf.psh);
    for (const auto& s : leaf.samples) {
        CHECK(s.leafwise == Catch::Approx(2.0 * std::abs(s.x(0))).margin(1e-6));
    }

    const PshReport mixed =
        l_psh_check(real([](const RealVector& x) { return std::norm(z_of(x)) + x(0); }), chart, samples, box);
    CHECK_FALSE(mixed.psh);
    CHECK(mixed.min_eigenvalue > 0.5);

    SECTION("two complex variables: Levi matrix of |z1 + 2 z2|^2 has eigenvalues 0 and 5") {
        const ModelChart c2{0, 2};
        const auto pts = random_points(rng, 4, 1.0, 5);
        const PshReport r = l_psh_check(
            real([](const RealVector& x) { return std::norm(Complex(x(0), x(1)) + 2.0 * Complex(x(2), x(3))); }), c2,
            pts, box);
        CHECK(r.psh);
        CHECK_FALSE(r.strictly_psh);
        const auto& levi = r.samples.front().levi;
        CHECK(std::abs(levi(0, 1) - 2.0) < 1e-5);
        CHECK(r.hermitian_residual < 1e-6);
    }

    CHECK_THROWS_AS(l_psh_check([](const RealVector& x) { return z_of(x); }, chart, samples, box), InputError);
}
