#include <catch_amalgamated.hpp>

#include <random>

#include "gcprobe/expression.hpp"

using namespace gcprobe;

namespace {

const Complex kI(0.0, 1.0);

RealVector at(const ModelChart& chart, std::initializer_list<double> p, std::initializer_list<Complex> z) {
    RealVector pv(static_cast<Index>(p.size()));
    ComplexVector zv(static_cast<Index>(z.size()));
    Index k = 0;
    for (double v : p) {
        pv(k++) = v;
    }
    k = 0;
    for (Complex v : z) {
        zv(k++) = v;
    }
    return chart_point(chart, pv, zv);
}

}  // namespace

TEST_CASE("expression values", "[expression]") {
    const ModelChart c{0, 1};
    CHECK(std::abs(Expression::parse("z1^2").eval(at(c, {}, {Complex(1, 1)}), c) - 2.0 * kI) < 1e-15);
    CHECK(std::abs(Expression::parse("z1*zbar1").eval(at(c, {}, {Complex(3, 4)}), c) - 25.0) < 1e-13);
    CHECK(std::abs(Expression::parse("conj(z1) - zbar1").eval(at(c, {}, {Complex(0.3, -2)}), c)) < 1e-15);
    CHECK(std::abs(Expression::parse("abs(z1)").eval(at(c, {}, {Complex(3, 4)}), c) - 5.0) < 1e-15);
    CHECK(std::abs(Expression::parse("re(z1) + 2*im(z1)*i").eval(at(c, {}, {Complex(3, 4)}), c) - Complex(3, 8)) <
          1e-15);
    CHECK(std::abs(Expression::parse("-z1/2 + 1.5e1").eval(at(c, {}, {Complex(2, 0)}), c) - 14.0) < 1e-15);
    CHECK(std::abs(Expression::parse("(z1 - 1)^0").eval(at(c, {}, {Complex(1, 0)}), c) - 1.0) < 1e-15);
    CHECK(std::abs(Expression::parse("z1/(2+i)").eval(at(c, {}, {Complex(2, 1)}), c) - 1.0) < 1e-15);
}

TEST_CASE("expression diagnostics", "[expression]") {
    CHECK_THROWS_AS(Expression::parse("w1 + 2"), ParseError);
    try {
        Expression::parse("z1 + q");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.column() == 6);
        CHECK(std::string(e.what()).find("'q'") != std::string::npos);
    }
    CHECK_THROWS_AS(Expression::parse("z1 / z1"), ParseError);
    CHECK_THROWS_AS(Expression::parse("z1^-1"), ParseError);
    CHECK_THROWS_AS(Expression::parse("z1^1000"), ParseError);
    CHECK_THROWS_AS(Expression::parse("(z1"), ParseError);
    CHECK_THROWS_AS(Expression::parse("z1 2"), ParseError);
    CHECK_THROWS_AS(Expression::parse(""), ParseError);
    CHECK_THROWS_AS(Expression::parse("z0"), ParseError);

    const ModelChart c{0, 1};
    CHECK_THROWS_AS(Expression::parse("p1 + z1").eval(at(c, {}, {1.0}), c), InputError);
    CHECK_THROWS_AS(Expression::parse("z2").field(c), InputError);
    CHECK_THROWS_AS(Expression::parse("abs(z1)").jet(at(c, {}, {1.0}), c), InputError);
}

TEST_CASE("named subexpressions", "[expression]") {
    std::map<std::string, Expression> env;
    env.emplace("f", Expression::parse("z1^2 + 1"));
    const Expression g = Expression::parse("f^2 - 3*f", env);
    const ModelChart c{0, 1};
    const RealVector x = at(c, {}, {Complex(0.5, -0.2)});
    const Complex fz = std::pow(Complex(0.5, -0.2), 2) + 1.0;
    CHECK(std::abs(g.eval(x, c) - (fz * fz - 3.0 * fz)) < 1e-14);
    CHECK(g.polynomial());
}

TEST_CASE("exact derivatives", "[expression][jet]") {
    const ModelChart c{1, 1};
    SECTION("spot values") {
        const Jet zz = Expression::parse("z1*conj(z1)").jet(at(c, {0, 0}, {3.0}), c);
        CHECK(std::abs(zz.d_zbar(0) - 3.0) < 1e-15);
        CHECK(std::abs(zz.d_z(0) - 3.0) < 1e-15);
        const Jet pp = Expression::parse("p1^2").jet(at(c, {2.0, 0.0}, {0.0}), c);
        CHECK(std::abs(pp.d_p(0) - 4.0) < 1e-15);
        CHECK(std::abs(pp.d_p(1)) == 0.0);
        const Jet re = Expression::parse("re(z1)").jet(at(c, {0, 0}, {1.0}), c);
        CHECK(std::abs(re.d_z(0) - 0.5) < 1e-15);
        CHECK(std::abs(re.d_zbar(0) - 0.5) < 1e-15);
        const Jet im = Expression::parse("im(z1^2)").jet(at(c, {0, 0}, {Complex(1, 2)}), c);
        // im(z^2) = (z^2 - zbar^2) / 2i, d/dz = z / i
        CHECK(std::abs(im.d_z(0) - Complex(1, 2) / kI) < 1e-14);
    }

    SECTION("exact and finite-difference derivatives agree") {
        const std::vector<std::string> fixtures{"z1^3 - 2*z1",       "z1*zbar1",          "p1^2*z1 + p2",
                                                "re(z1^2) - im(p1*z1)", "conj(z1^2 + i*p2)", "(z1 - 1)^4/3",
                                                "p1*p2 - zbar1^2",   "z1^2 + 3*i*z1"};
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (const auto& text : fixtures) {
            INFO(text);
            const Expression e = Expression::parse(text);
            const ComplexField f = e.field(c);
            for (int k = 0; k < 10; ++k) {
                const RealVector x = at(c, {u(rng), u(rng)}, {Complex(u(rng), u(rng))});
                const double h = fd_step_at(x, kDefaultFdStep);
                const ComplexVector g = fd_gradient(f, x, h);
                const Jet j = e.jet(x, c);
                CHECK(std::abs(j.value - f(x)) < 1e-14);
                CHECK(std::abs(g(0) - j.d_p(0)) < 1e-7);
                CHECK(std::abs(g(1) - j.d_p(1)) < 1e-7);
                const Complex dz_fd = 0.5 * (g(2) - kI * g(3));
                const Complex dzbar_fd = 0.5 * (g(2) + kI * g(3));
                CHECK(std::abs(dz_fd - j.d_z(0)) < 1e-7);
                CHECK(std::abs(dzbar_fd - j.d_zbar(0)) < 1e-7);
            }
        }
    }
}
