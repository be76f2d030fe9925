#include "gcprobe/expression.hpp"

#include <cctype>
#include <cstdlib>
#include <vector>

namespace gcprobe {

ParseError::ParseError(const std::string& message, std::size_t column)
    : InputError(message + " (column " + std::to_string(column) + ")"), column_(column) {}

struct Expression::Node {
    enum class Kind { constant, p, z, zbar, add, sub, mul, div, neg, pow, conj, re, im, abs };

    Kind kind = Kind::constant;
    Complex value;
    int index = 0;  // 0-based variable index, or exponent for pow
    std::shared_ptr<const Node> a;
    std::shared_ptr<const Node> b;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;
using Kind = Node::Kind;

constexpr int kMaxExponent = 256;

NodePtr make(Kind kind, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr constant(Complex c) {
    auto n = std::make_shared<Node>();
    n->value = c;
    return n;
}

bool is_constant(const NodePtr& n) {
    switch (n->kind) {
    case Kind::constant:
        return true;
    case Kind::p:
    case Kind::z:
    case Kind::zbar:
        return false;
    default:
        return is_constant(n->a) && (!n->b || is_constant(n->b));
    }
}

class Parser {
public:
    Parser(const std::string& text, const std::map<std::string, Expression>& env) : s_(text), env_(env) {}

    NodePtr parse() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) {
            fail("unexpected '" + std::string(1, s_[pos_]) + "'");
        }
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError("expression: " + msg, pos_ + 1); }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            fail(std::string("expected '") + c + "'");
        }
    }

    NodePtr expr() {
        NodePtr n = term();
        for (;;) {
            if (accept('+')) {
                n = make(Kind::add, n, term());
            } else if (accept('-')) {
                n = make(Kind::sub, n, term());
            } else {
                return n;
            }
        }
    }

    NodePtr term() {
        NodePtr n = unary();
        for (;;) {
            if (accept('*')) {
                n = make(Kind::mul, n, unary());
            } else if (accept('/')) {
                const std::size_t at = pos_;
                NodePtr d = unary();
                if (!is_constant(d)) {
                    pos_ = at;
                    fail("division only by constants");
                }
                n = make(Kind::div, n, d);
            } else {
                return n;
            }
        }
    }

    NodePtr unary() {
        if (accept('-')) {
            return make(Kind::neg, unary());
        }
        if (accept('+')) {
            return unary();
        }
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) {
            skip();
            const std::size_t start = pos_;
            while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
                ++pos_;
            }
            if (start == pos_) {
                fail("exponent must be a non-negative integer");
            }
            if (pos_ - start > 3 || std::stoi(s_.substr(start, pos_ - start)) > kMaxExponent) {
                pos_ = start;
                fail("exponent above " + std::to_string(kMaxExponent));
            }
            auto n = std::make_shared<Node>();
            n->kind = Kind::pow;
            n->a = base;
            n->index = std::stoi(s_.substr(start, pos_ - start));
            return n;
        }
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) {
            fail("unexpected end of expression");
        }
        const char c = s_[pos_];
        if (accept('(')) {
            NodePtr n = expr();
            expect(')');
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            return name();
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
        const char* begin = s_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) {
            fail("bad number");
        }
        pos_ += static_cast<std::size_t>(end - begin);
        return constant(Complex(v, 0.0));
    }

    NodePtr name() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
            ++pos_;
        }
        const std::string id = s_.substr(start, pos_ - start);
        static const std::map<std::string, Kind> functions{
            {"conj", Kind::conj}, {"re", Kind::re}, {"im", Kind::im}, {"abs", Kind::abs}};
        if (auto f = functions.find(id); f != functions.end()) {
            expect('(');
            NodePtr arg = expr();
            expect(')');
            return make(f->second, arg);
        }
        if (id == "i") {
            return constant(Complex(0.0, 1.0));
        }
        if (auto v = variable(id)) {
            return v;
        }
        if (auto e = env_.find(id); e != env_.end()) {
            return e->second.root();
        }
        pos_ = start;
        fail("unknown name '" + id + "'");
    }

    static NodePtr variable(const std::string& id) {
        for (auto [prefix, kind] : {std::pair<const char*, Kind>{"zbar", Kind::zbar}, {"z", Kind::z}, {"p", Kind::p}}) {
            const std::string pre(prefix);
            if (id.size() > pre.size() && id.compare(0, pre.size(), pre) == 0) {
                const std::string digits = id.substr(pre.size());
                if (digits.find_first_not_of("0123456789") != std::string::npos || digits[0] == '0') {
                    return nullptr;
                }
                auto n = std::make_shared<Node>();
                n->kind = kind;
                n->index = std::stoi(digits) - 1;
                return n;
            }
        }
        return nullptr;
    }

    const std::string& s_;
    const std::map<std::string, Expression>& env_;
    std::size_t pos_ = 0;
};

bool has_abs(const NodePtr& n) {
    if (!n) {
        return false;
    }
    return n->kind == Kind::abs || has_abs(n->a) || has_abs(n->b);
}

int max_index(const NodePtr& n, Kind kind) {
    if (!n) {
        return 0;
    }
    int m = std::max(max_index(n->a, kind), max_index(n->b, kind));
    const bool match = n->kind == kind || (kind == Kind::z && n->kind == Kind::zbar);
    if (match) {
        m = std::max(m, n->index + 1);
    }
    return m;
}

struct Env {
    const RealVector& x;
    const ModelChart& chart;

    Complex z(int j) const { return {x(chart.x_index(j)), x(chart.y_index(j))}; }
};

Complex eval_node(const NodePtr& n, const Env& env) {
    switch (n->kind) {
    case Kind::constant:
        return n->value;
    case Kind::p:
        return {env.x(env.chart.p_index(n->index)), 0.0};
    case Kind::z:
        return env.z(n->index);
    case Kind::zbar:
        return std::conj(env.z(n->index));
    case Kind::add:
        return eval_node(n->a, env) + eval_node(n->b, env);
    case Kind::sub:
        return eval_node(n->a, env) - eval_node(n->b, env);
    case Kind::mul:
        return eval_node(n->a, env) * eval_node(n->b, env);
    case Kind::div:
        return eval_node(n->a, env) / eval_node(n->b, env);
    case Kind::neg:
        return -eval_node(n->a, env);
    case Kind::pow: {
        const Complex base = eval_node(n->a, env);
        Complex r(1.0, 0.0);
        for (int k = 0; k < n->index; ++k) {
            r *= base;
        }
        return r;
    }
    case Kind::conj:
        return std::conj(eval_node(n->a, env));
    case Kind::re:
        return {eval_node(n->a, env).real(), 0.0};
    case Kind::im:
        return {eval_node(n->a, env).imag(), 0.0};
    case Kind::abs:
        return {std::abs(eval_node(n->a, env)), 0.0};
    }
    return {};
}

Jet zero_jet(const ModelChart& chart, Complex v) {
    return {v, ComplexVector::Zero(2 * chart.m), ComplexVector::Zero(chart.n), ComplexVector::Zero(chart.n)};
}

Jet scale(const Jet& j, Complex c) {
    return {j.value * c, j.d_p * c, j.d_z * c, j.d_zbar * c};
}

Jet combine(const Jet& a, const Jet& b, Complex ca, Complex cb) {
    return {ca * a.value + cb * b.value, ca * a.d_p + cb * b.d_p, ca * a.d_z + cb * b.d_z, ca * a.d_zbar + cb * b.d_zbar};
}

Jet multiply(const Jet& a, const Jet& b) {
    return {a.value * b.value, a.d_p * b.value + b.d_p * a.value, a.d_z * b.value + b.d_z * a.value,
            a.d_zbar * b.value + b.d_zbar * a.value};
}

// conj(f): d/dz conj f = conj(df/dzbar), d/dzbar conj f = conj(df/dz)
Jet conjugate_jet(const Jet& a) {
    return {std::conj(a.value), a.d_p.conjugate(), a.d_zbar.conjugate(), a.d_z.conjugate()};
}

Jet jet_node(const NodePtr& n, const Env& env) {
    const ModelChart& chart = env.chart;
    switch (n->kind) {
    case Kind::constant:
        return zero_jet(chart, n->value);
    case Kind::p: {
        Jet j = zero_jet(chart, {env.x(chart.p_index(n->index)), 0.0});
        j.d_p(n->index) = 1.0;
        return j;
    }
    case Kind::z: {
        Jet j = zero_jet(chart, env.z(n->index));
        j.d_z(n->index) = 1.0;
        return j;
    }
    case Kind::zbar: {
        Jet j = zero_jet(chart, std::conj(env.z(n->index)));
        j.d_zbar(n->index) = 1.0;
        return j;
    }
    case Kind::add:
        return combine(jet_node(n->a, env), jet_node(n->b, env), 1.0, 1.0);
    case Kind::sub:
        return combine(jet_node(n->a, env), jet_node(n->b, env), 1.0, -1.0);
    case Kind::mul:
        return multiply(jet_node(n->a, env), jet_node(n->b, env));
    case Kind::div:
        return scale(jet_node(n->a, env), 1.0 / eval_node(n->b, env));
    case Kind::neg:
        return scale(jet_node(n->a, env), -1.0);
    case Kind::pow: {
        const Jet base = jet_node(n->a, env);
        Jet r = zero_jet(chart, 1.0);
        for (int k = 0; k < n->index; ++k) {
            r = multiply(r, base);
        }
        return r;
    }
    case Kind::conj:
        return conjugate_jet(jet_node(n->a, env));
    case Kind::re: {
        const Jet a = jet_node(n->a, env);
        return combine(a, conjugate_jet(a), 0.5, 0.5);
    }
    case Kind::im: {
        const Jet a = jet_node(n->a, env);
        const Complex c = 1.0 / Complex(0.0, 2.0);
        return combine(a, conjugate_jet(a), c, -c);
    }
    case Kind::abs:
        break;
    }
    throw InputError("expression: no exact derivatives through abs()");
}

void require_point(const RealVector& x, const ModelChart& chart) {
    if (x.size() != chart.d()) {
        throw InputError("expression: point has dimension " + std::to_string(x.size()) + ", chart has " +
                         std::to_string(chart.d()));
    }
}

}  // namespace

Expression::Expression(std::string text, std::shared_ptr<const Node> root)
    : text_(std::move(text)), root_(std::move(root)) {}

Expression Expression::parse(const std::string& text, const std::map<std::string, Expression>& env) {
    Parser parser(text, env);
    return Expression(text, parser.parse());
}

bool Expression::polynomial() const {
    return !has_abs(root_);
}

int Expression::max_p_index() const {
    return max_index(root_, Kind::p);
}

int Expression::max_z_index() const {
    return max_index(root_, Kind::z);
}

void Expression::check_chart(const ModelChart& chart) const {
    if (max_p_index() > 2 * chart.m) {
        throw InputError("expression '" + text_ + "' uses p" + std::to_string(max_p_index()) + " but the chart has " +
                         std::to_string(2 * chart.m) + " p-coordinates");
    }
    if (max_z_index() > chart.n) {
        throw InputError("expression '" + text_ + "' uses z" + std::to_string(max_z_index()) + " but the chart has " +
                         std::to_string(chart.n) + " z-coordinates");
    }
}

Complex Expression::eval(const RealVector& x, const ModelChart& chart) const {
    require_point(x, chart);
    check_chart(chart);
    return eval_node(root_, Env{x, chart});
}

Jet Expression::jet(const RealVector& x, const ModelChart& chart) const {
    require_point(x, chart);
    check_chart(chart);
    return jet_node(root_, Env{x, chart});
}

ComplexField Expression::field(const ModelChart& chart) const {
    check_chart(chart);
    auto root = root_;
    return [root, chart](const RealVector& x) {
        require_point(x, chart);
        return eval_node(root, Env{x, chart});
    };
}

RealVector chart_point(const ModelChart& chart, const RealVector& p, const ComplexVector& z) {
    if (p.size() != 2 * chart.m || z.size() != chart.n) {
        throw InputError("chart_point: expected " + std::to_string(2 * chart.m) + " p and " + std::to_string(chart.n) +
                         " z coordinates");
    }
    RealVector x(chart.d());
    for (Index l = 0; l < p.size(); ++l) {
        x(chart.p_index(l)) = p(l);
    }
    for (Index j = 0; j < z.size(); ++j) {
        x(chart.x_index(j)) = z(j).real();
        x(chart.y_index(j)) = z(j).imag();
    }
    return x;
}

}  // namespace gcprobe
