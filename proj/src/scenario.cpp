#include "gcprobe/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "gcprobe/expression.hpp"
#include "gcprobe/field_calculus.hpp"
#include "gcprobe/gc_linear.hpp"
#include "gcprobe/stein_probes.hpp"

#ifndef GCPROBE_VERSION
#define GCPROBE_VERSION "0.0.0"
#endif

namespace gcprobe {

ScenarioError::ScenarioError(const std::string& message, std::size_t line, std::size_t column)
    : InputError(line > 0 ? message + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"
                          : message),
      line_(line),
      column_(column) {}

namespace {

using json = nlohmann::ordered_json;

struct Tolerances {
    double linear = kDefaultTol;
    double angle = 1e-8;
    double field = kDefaultFieldTol;
    double fd_step = kDefaultFdStep;
    double strictness = kDefaultStrictness;
    double derivative = 1e-7;

    void merge(const json& j) {
        for (auto& [key, slot] : slots()) {
            if (j.contains(key)) {
                *slot = j.at(key).get<double>();
            }
        }
        for (const auto& [key, value] : j.items()) {
            if (!has(key)) {
                throw ScenarioError("unknown tolerance '" + key + "'");
            }
            if (!value.is_number() || !(value.get<double>() > 0.0)) {
                throw ScenarioError("tolerance '" + key + "' must be a positive number");
            }
        }
    }

    bool has(const std::string& key) {
        for (auto& [k, slot] : slots()) {
            if (k == key) {
                return true;
            }
        }
        return false;
    }

    std::vector<std::pair<std::string, double*>> slots() {
        return {{"linear", &linear}, {"angle", &angle},           {"field", &field},
                {"fd_step", &fd_step}, {"strictness", &strictness}, {"derivative", &derivative}};
    }

    json table() const {
        return json{{"linear", linear}, {"angle", angle},           {"field", field},
                    {"fd_step", fd_step}, {"strictness", strictness}, {"derivative", derivative}};
    }

    FieldOptions field_options() const { return {fd_step, field, strictness}; }
};

using FieldFactory = std::function<StructureField(const Box&, const Tolerances&)>;

struct FieldDef {
    Index d = 0;
    FieldFactory make;
    std::vector<MatrixField> b_fields;  // pointwise B-transforms applied, innermost first
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    Tolerances tol;
    std::map<std::string, LinearGCStructure> models;
    std::map<std::string, RealMatrix> maps;
    std::map<std::string, FieldDef> fields;
    std::map<std::string, Expression> functions;
    std::map<std::string, std::vector<Expression>> poisson_maps;
    json checks = json::array();
    bool parallel = false;
    std::optional<std::string> report_path;
    ReportFormat format = ReportFormat::structured;
};

const std::vector<std::string>& operation_names();

// ---------------------------------------------------------------- parsing

std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    std::size_t line = 1, column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    // nlohmann reports the byte after the offending character
    return {line, column > 1 ? column - 1 : column};
}

RealMatrix read_matrix(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j.front().is_array()) {
        throw InputError(what + ": expected a non-empty list of rows");
    }
    const auto rows = static_cast<Index>(j.size());
    const auto cols = static_cast<Index>(j.front().size());
    RealMatrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const json& row = j.at(static_cast<std::size_t>(r));
        if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
            throw InputError(what + ": rows must have equal length");
        }
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
        }
    }
    require_finite(m, what.c_str());
    return m;
}

RealVector read_vector(const json& j, const std::string& what) {
    if (!j.is_array()) {
        throw InputError(what + ": expected a list of numbers");
    }
    RealVector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v(static_cast<Index>(i)) = j.at(i).get<double>();
    }
    return v;
}

Expression parse_expression(const json& j, const std::map<std::string, Expression>& env, const std::string& what) {
    std::string text;
    if (j.is_string()) {
        text = j.get<std::string>();
    } else if (j.is_number()) {
        std::ostringstream os;
        os.precision(17);
        os << j.get<double>();
        text = os.str();
    } else {
        throw ScenarioError(what + ": expected an expression string");
    }
    try {
        return Expression::parse(text, env);
    } catch (const ParseError& e) {
        throw ScenarioError(what + ": " + e.what() + " in \"" + text + "\" at column " + std::to_string(e.column()));
    }
}

std::vector<std::vector<Expression>> parse_expression_matrix(const json& j, const std::map<std::string, Expression>& env,
                                                             const std::string& what) {
    if (!j.is_array() || j.empty()) {
        throw ScenarioError(what + ": expected a non-empty list of rows");
    }
    std::vector<std::vector<Expression>> out;
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != j.front().size()) {
            throw ScenarioError(what + ": rows must have equal length");
        }
        std::vector<Expression> r;
        for (const auto& e : row) {
            r.push_back(parse_expression(e, env, what));
        }
        out.push_back(std::move(r));
    }
    return out;
}

MatrixField matrix_field(std::vector<std::vector<Expression>> entries, const ModelChart& chart) {
    return [entries = std::move(entries), chart](const RealVector& x) {
        RealMatrix m(static_cast<Index>(entries.size()), static_cast<Index>(entries.front().size()));
        for (std::size_t r = 0; r < entries.size(); ++r) {
            for (std::size_t c = 0; c < entries[r].size(); ++c) {
                m(static_cast<Index>(r), static_cast<Index>(c)) = entries[r][c].eval(x, chart).real();
            }
        }
        return m;
    };
}

const LinearGCStructure& lookup_model(const Scenario& sc, const std::string& name) {
    const auto it = sc.models.find(name);
    if (it == sc.models.end()) {
        throw ScenarioError("unresolved model '" + name + "'");
    }
    return it->second;
}

LinearGCStructure load_model(const Scenario& sc, const std::string& name, const json& j) {
    const double tol = sc.tol.linear;
    if (j.contains("standard_model")) {
        const auto mn = j.at("standard_model");
        return standard_model(mn.at(0).get<Index>(), mn.at(1).get<Index>(), tol);
    }
    if (j.contains("complex")) {
        return complex_structure(j.at("complex").get<Index>(), tol);
    }
    if (j.contains("symplectic")) {
        return symplectic_structure(j.at("symplectic").get<Index>(), tol);
    }
    if (j.contains("product")) {
        const auto& names = j.at("product");
        if (!names.is_array() || names.empty()) {
            throw ScenarioError("model '" + name + "': product needs a list of model names");
        }
        LinearGCStructure out = lookup_model(sc, names.front().get<std::string>());
        for (std::size_t i = 1; i < names.size(); ++i) {
            out = product_structure(out, lookup_model(sc, names.at(i).get<std::string>()));
        }
        return out;
    }
    if (j.contains("b_transform")) {
        const LinearGCStructure& base = lookup_model(sc, j.at("b_transform").get<std::string>());
        return b_transform(base, read_matrix(j.at("b"), "model '" + name + "' b"));
    }
    if (j.contains("matrix")) {
        return LinearGCStructure(read_matrix(j.at("matrix"), "model '" + name + "'"), tol);
    }
    throw ScenarioError("model '" + name + "': expected one of standard_model, complex, symplectic, product, "
                        "b_transform, matrix");
}

FieldDef load_field(const Scenario& sc, const std::string& name, const json& j) {
    if (j.contains("model")) {
        const LinearGCStructure model = lookup_model(sc, j.at("model").get<std::string>());
        return {model.d(), [model](const Box& box, const Tolerances& t) {
                    return StructureField::constant(model, box, t.fd_step);
                },
                {}};
    }
    if (j.contains("vector_block") || j.contains("matrix")) {
        const bool block = j.contains("vector_block");
        auto entries = parse_expression_matrix(block ? j.at("vector_block") : j.at("matrix"), sc.functions,
                                               "field '" + name + "'");
        const auto rows = static_cast<Index>(entries.size());
        if (rows != static_cast<Index>(entries.front().size()) || rows % 2 != 0) {
            throw ScenarioError("field '" + name + "': matrix must be square of even size");
        }
        const Index d = block ? rows : rows / 2;
        if (d % 2 != 0) {
            throw ScenarioError("field '" + name + "': dimension must be even");
        }
        const ModelChart chart{d / 2, 0};
        for (const auto& row : entries) {
            for (const auto& e : row) {
                try {
                    e.check_chart(chart);
                } catch (const InputError& err) {
                    throw ScenarioError("field '" + name + "': " + err.what());
                }
            }
        }
        MatrixField m = matrix_field(std::move(entries), chart);
        MatrixField j_at = m;
        if (block) {
            j_at = [m, d](const RealVector& x) {
                const RealMatrix jv = m(x);
                RealMatrix out = RealMatrix::Zero(2 * d, 2 * d);
                out.topLeftCorner(d, d) = -jv;
                out.bottomRightCorner(d, d) = jv.transpose();
                return out;
            };
        }
        return {d, [j_at](const Box& box, const Tolerances& t) { return StructureField(box, j_at, t.fd_step, t.linear); },
                {}};
    }
    if (j.contains("base")) {
        const std::string base_name = j.at("base").get<std::string>();
        const auto it = sc.fields.find(base_name);
        if (it == sc.fields.end()) {
            throw ScenarioError("unresolved field '" + base_name + "'");
        }
        const FieldDef base = it->second;
        const ModelChart chart{base.d / 2, 0};
        auto entries = parse_expression_matrix(j.at("b"), sc.functions, "field '" + name + "' b");
        if (static_cast<Index>(entries.size()) != base.d) {
            throw ScenarioError("field '" + name + "': b must be " + std::to_string(base.d) + " x " +
                                std::to_string(base.d));
        }
        MatrixField b = matrix_field(std::move(entries), chart);
        std::vector<MatrixField> bs = base.b_fields;
        bs.push_back(b);
        return {base.d, [base, b](const Box& box, const Tolerances& t) { return b_transform(base.make(box, t), b); },
                std::move(bs)};
    }
    throw ScenarioError("field '" + name + "': expected one of model, vector_block, matrix, base");
}

template <typename F>
void for_each_entry(const json& doc, const char* key, F&& f) {
    if (!doc.contains(key)) {
        return;
    }
    const json& section = doc.at(key);
    if (!section.is_object()) {
        throw ScenarioError(std::string("'") + key + "' must be an object of named entries");
    }
    for (const auto& [name, value] : section.items()) {
        try {
            f(name, value);
        } catch (const ScenarioError&) {
            throw;
        } catch (const InputError& e) {
            throw ScenarioError(std::string(key) + " '" + name + "': " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ScenarioError(std::string(key) + " '" + name + "': " + e.what());
        }
    }
}

template <typename Table>
void require_in(const Table& table, const json& value, const char* kind, const std::string& check) {
    auto one = [&](const json& v) {
        if (!v.is_string()) {
            throw ScenarioError("check '" + check + "': " + kind + " references must be names");
        }
        if (!table.count(v.get<std::string>())) {
            throw ScenarioError("check '" + check + "': unresolved " + std::string(kind) + " '" + v.get<std::string>() +
                                "'");
        }
    };
    if (value.is_array()) {
        for (const auto& v : value) {
            one(v);
        }
    } else {
        one(value);
    }
}

void resolve_references(const Scenario& sc, const json& check, const std::string& name) {
    const json& args = check.contains("args") ? check.at("args") : json::object();
    for (const char* key : {"model", "source", "target", "models"}) {
        if (args.contains(key)) {
            require_in(sc.models, args.at(key), "model", name);
        }
    }
    if (args.contains("map")) {
        require_in(sc.maps, args.at("map"), "map", name);
    }
    if (args.contains("field")) {
        require_in(sc.fields, args.at("field"), "field", name);
    }
    for (const char* key : {"poisson_map", "poisson_maps"}) {
        if (args.contains(key)) {
            require_in(sc.poisson_maps, args.at(key), "Poisson map", name);
        }
    }
    for (const char* key : {"function", "functions", "family", "subfamily", "candidates"}) {
        if (args.contains(key)) {
            require_in(sc.functions, args.at(key), "function", name);
        }
    }
    if (args.contains("levels")) {
        for (const auto& level : args.at("levels")) {
            if (level.contains("functions")) {
                require_in(sc.functions, level.at("functions"), "function", name);
            }
        }
    }
}

Scenario load_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte);
        std::string what = e.what();
        const auto pos = what.find("syntax error");
        throw ScenarioError("scenario parse error: " + (pos == std::string::npos ? what : what.substr(pos)), line,
                            column);
    }
    if (!doc.is_object()) {
        throw ScenarioError("scenario must be an object", 1, 1);
    }
    Scenario sc;
    try {
        if (doc.contains("version") && doc.at("version").get<int>() != 1) {
            throw ScenarioError("unsupported scenario version " + doc.at("version").dump());
        }
        sc.name = doc.value("name", std::string("scenario"));
        sc.seed = doc.value("seed", std::uint64_t{0});
        sc.parallel = doc.value("parallel", false);
        if (doc.contains("tolerances")) {
            sc.tol.merge(doc.at("tolerances"));
        }
        if (doc.contains("output")) {
            const json& out = doc.at("output");
            if (out.contains("report")) {
                sc.report_path = out.at("report").get<std::string>();
            }
            if (out.contains("format")) {
                sc.format = parse_format(out.at("format").get<std::string>());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ScenarioError(std::string("scenario header: ") + e.what());
    }

    for_each_entry(doc, "functions", [&](const std::string& name, const json& v) {
        sc.functions.emplace(name, parse_expression(v, sc.functions, "function '" + name + "'"));
    });
    for_each_entry(doc, "poisson_maps", [&](const std::string& name, const json& v) {
        if (!v.is_array() || v.size() != 2) {
            throw ScenarioError("Poisson map '" + name + "': expected two component expressions");
        }
        std::vector<Expression> comps;
        for (const auto& c : v) {
            comps.push_back(parse_expression(c, sc.functions, "Poisson map '" + name + "'"));
        }
        sc.poisson_maps.emplace(name, std::move(comps));
    });
    for_each_entry(doc, "models",
                   [&](const std::string& name, const json& v) { sc.models.emplace(name, load_model(sc, name, v)); });
    for_each_entry(doc, "maps", [&](const std::string& name, const json& v) {
        sc.maps.emplace(name, read_matrix(v.is_object() ? v.at("matrix") : v, "map '" + name + "'"));
    });
    for_each_entry(doc, "fields",
                   [&](const std::string& name, const json& v) { sc.fields.emplace(name, load_field(sc, name, v)); });

    if (!doc.contains("checks") || !doc.at("checks").is_array()) {
        throw ScenarioError("scenario needs a 'checks' list");
    }
    std::set<std::string> seen;
    const auto& ops = operation_names();
    for (std::size_t i = 0; i < doc.at("checks").size(); ++i) {
        const json& check = doc.at("checks").at(i);
        if (!check.is_object() || !check.contains("op") || !check.at("op").is_string()) {
            throw ScenarioError("check " + std::to_string(i + 1) + " needs an 'op' name");
        }
        const std::string op = check.at("op").get<std::string>();
        const std::string name = check.value("name", op + "#" + std::to_string(i + 1));
        if (std::find(ops.begin(), ops.end(), op) == ops.end()) {
            throw ScenarioError("check '" + name + "': unknown operation '" + op + "'");
        }
        if (!seen.insert(name).second) {
            throw ScenarioError("duplicate check name '" + name + "'");
        }
        if (check.contains("args") && !check.at("args").is_object()) {
            throw ScenarioError("check '" + name + "': args must be an object");
        }
        resolve_references(sc, check, name);
        json c = check;
        c["name"] = name;
        sc.checks.push_back(std::move(c));
    }
    return sc;
}

// ---------------------------------------------------------------- checks

std::uint64_t check_seed(std::uint64_t seed, std::size_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

json point_json(const RealVector& x) {
    json a = json::array();
    for (Index i = 0; i < x.size(); ++i) {
        a.push_back(x(i));
    }
    return a;
}

json complex_json(Complex c) {
    return json::array({c.real(), c.imag()});
}

struct Ctx {
    const Scenario& sc;
    const json& args;
    Tolerances tol;
    std::uint64_t seed;
    ReplayRng rng;
    json residuals = json::object();
    json ranks = json::object();
    json witnesses = json::object();
    json samples = json::array();
    bool consistent = true;

    Ctx(const Scenario& s, const json& a, Tolerances t, std::uint64_t sd)
        : sc(s), args(a), tol(t), seed(sd), rng(sd) {}

    bool has(const char* key) const { return args.contains(key); }
    const json& at(const char* key) const {
        if (!args.contains(key)) {
            throw InputError(std::string("missing argument '") + key + "'");
        }
        return args.at(key);
    }
    template <typename T>
    T get(const char* key, T fallback) const {
        return args.contains(key) ? args.at(key).get<T>() : fallback;
    }

    const LinearGCStructure& model(const char* key) const { return sc.models.at(at(key).get<std::string>()); }
    const RealMatrix& map(const char* key) const { return sc.maps.at(at(key).get<std::string>()); }
    const Expression& function(const std::string& name) const { return sc.functions.at(name); }

    ModelChart chart() const {
        const json& c = at("chart");
        return {c.at(0).get<Index>(), c.at(1).get<Index>()};
    }
    Box box(Index d) const { return Box::cube(d, get("box", 2.0)); }

    std::vector<std::string> names(const char* key) const {
        std::vector<std::string> out;
        const json& v = at(key);
        if (v.is_array()) {
            for (const auto& n : v) {
                out.push_back(n.get<std::string>());
            }
        } else {
            out.push_back(v.get<std::string>());
        }
        return out;
    }

    std::vector<RealVector> points(const json& spec, const ModelChart& chart) {
        std::vector<RealVector> out;
        auto add = [&](const RealVector& x) {
            if (x.size() != chart.d()) {
                throw InputError("sample point has dimension " + std::to_string(x.size()) + ", expected " +
                                 std::to_string(chart.d()));
            }
            out.push_back(x);
        };
        if (spec.is_array()) {
            for (const auto& p : spec) {
                add(read_vector(p, "points"));
            }
        } else if (spec.contains("points")) {
            return points(spec.at("points"), chart);
        } else if (spec.contains("annulus")) {
            const json& a = spec.at("annulus");
            out = annulus_samples(chart, a.at("r_inner").get<double>(), a.at("r_outer").get<double>(),
                                  a.at("rings").get<int>(), a.at("per_ring").get<int>());
        } else if (spec.contains("circle")) {
            const json& a = spec.at("circle");
            const double r = a.at("radius").get<double>();
            out = annulus_samples(chart, r, r, 1, a.at("count").get<int>());
        } else if (spec.contains("random")) {
            const json& a = spec.at("random");
            const int count = a.at("count").get<int>();
            const double half = a.at("half_width").get<double>();
            for (int k = 0; k < count; ++k) {
                RealVector x(chart.d());
                for (Index i = 0; i < chart.d(); ++i) {
                    x(i) = half * (2.0 * rng.uniform() - 1.0);
                }
                out.push_back(x);
            }
        } else if (spec.contains("lattice")) {
            const json& a = spec.at("lattice");
            out = lattice(Box::cube(chart.d(), a.at("half_width").get<double>()), a.at("step").get<double>());
        } else {
            throw InputError("sample spec needs one of points, annulus, circle, random, lattice");
        }
        if (out.empty()) {
            throw InputError("sample spec produced no points");
        }
        return out;
    }
    std::vector<RealVector> points(const char* key, const ModelChart& chart) { return points(at(key), chart); }

    RealMatrix random_b(Index d, double scale) {
        RealMatrix b = RealMatrix::Zero(d, d);
        for (Index i = 0; i < d; ++i) {
            for (Index j = i + 1; j < d; ++j) {
                b(i, j) = scale * rng.normal();
                b(j, i) = -b(i, j);
            }
        }
        return b;
    }

    FunctionFamily family(const char* key, const ModelChart& chart) const {
        FunctionFamily f;
        if (has(key)) {
            for (const auto& n : names(key)) {
                const Expression& e = function(n);
                e.check_chart(chart);
                f.gh_functions.push_back({n, e.field(chart), true});
            }
        }
        return f;
    }

    VectorField poisson_map(const std::string& name, const ModelChart& chart) const {
        const auto comps = sc.poisson_maps.at(name);
        for (const auto& c : comps) {
            c.check_chart(chart);
        }
        return [comps, chart](const RealVector& x) {
            RealVector v(2);
            v << comps[0].eval(x, chart).real(), comps[1].eval(x, chart).real();
            return v;
        };
    }

    std::vector<VectorField> poisson_maps(const ModelChart& chart) const {
        std::vector<VectorField> out;
        if (has("poisson_maps")) {
            for (const auto& n : names("poisson_maps")) {
                out.push_back(poisson_map(n, chart));
            }
        }
        return out;
    }

    std::vector<ComplexField> fields_of(const char* key, const ModelChart& chart) const {
        std::vector<ComplexField> out;
        for (const auto& g : family(key, chart).gh_functions) {
            out.push_back(g.f);
        }
        return out;
    }
};

using Op = std::function<json(Ctx&)>;

json op_validate(Ctx& c) {
    const LinearGCStructure& m = c.model("model");
    const ValidityCertificate cert = validate(m.matrix(), c.tol.linear);
    c.residuals["square"] = cert.square_residual;
    c.residuals["orthogonality"] = cert.orthogonality_residual;
    c.ranks["d"] = m.d();
    return cert.valid;
}

json op_eigenbundle(Ctx& c) {
    const LinearGCStructure m(c.model("model").matrix(), c.tol.linear);
    const Eigenbundle e = eigenbundle(m);
    c.residuals["isotropy"] = e.isotropy_residual;
    c.residuals["transversality_angle"] = e.transversality_angle;
    c.ranks["projector_rank"] = e.projector_rank;
    c.ranks["dim"] = e.l.dim();
    c.ranks["conjugate_overlap_dim"] = e.conjugate_overlap_dim;
    return e.valid && e.isotropy_residual < c.tol.linear;
}

json op_structure_suite(Ctx& c) {
    const LinearGCStructure& base = c.model("model");
    const int count = c.get("random_b", 0);
    const double scale = c.get("b_scale", 1.0);
    bool ok = true;
    double sq = 0.0, orth = 0.0, iso = 0.0;
    double min_angle = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= count; ++k) {
        const LinearGCStructure j = k == 0 ? LinearGCStructure(base.matrix(), c.tol.linear)
                                           : b_transform(LinearGCStructure(base.matrix(), c.tol.linear),
                                                         c.random_b(base.d(), scale));
        const ValidityCertificate cert = validate(j.matrix(), c.tol.linear);
        const Eigenbundle e = eigenbundle(j);
        const bool good = cert.valid && e.valid && e.l.dim() == j.d() && e.conjugate_overlap_dim == 0 &&
                          e.isotropy_residual < c.tol.linear;
        ok = ok && good;
        sq = std::max(sq, cert.square_residual);
        orth = std::max(orth, cert.orthogonality_residual);
        iso = std::max(iso, e.isotropy_residual);
        min_angle = std::min(min_angle, e.transversality_angle);
        c.samples.push_back(json{{"b_index", k},
                                 {"square", cert.square_residual},
                                 {"orthogonality", cert.orthogonality_residual},
                                 {"isotropy", e.isotropy_residual},
                                 {"transversality_angle", e.transversality_angle},
                                 {"valid", good}});
    }
    c.residuals["square"] = sq;
    c.residuals["orthogonality"] = orth;
    c.residuals["isotropy"] = iso;
    c.residuals["min_transversality_angle"] = min_angle;
    c.ranks["structures"] = count + 1;
    c.ranks["d"] = base.d();
    return ok;
}

json op_type(Ctx& c) {
    const TypeInfo t = type_of(eigenbundle(c.model("model")).l);
    c.ranks["type"] = t.type;
    c.ranks["rho_dim"] = t.e.dim();
    c.ranks["delta_dim"] = t.delta.cols();
    return t.type == c.at("expected").get<Index>();
}

json op_type_additivity(Ctx& c) {
    const auto names = c.names("models");
    if (names.size() < 2) {
        throw InputError("type_additivity needs at least two models");
    }
    Index sum = 0;
    LinearGCStructure prod = c.sc.models.at(names.front());
    for (std::size_t i = 0; i < names.size(); ++i) {
        const LinearGCStructure& m = c.sc.models.at(names[i]);
        sum += type_of(eigenbundle(m).l).type;
        if (i > 0) {
            prod = product_structure(prod, m);
        }
    }
    const Index t = type_of(eigenbundle(prod).l).type;
    c.ranks["sum_of_types"] = sum;
    c.ranks["product_type"] = t;
    return t == sum;
}

json op_b_invariance(Ctx& c) {
    const LinearGCStructure& m = c.model("model");
    const int count = c.get("count", 25);
    const double scale = c.get("b_scale", 1.0);
    const Subspace l = eigenbundle(m).l;
    const TypeInfo t0 = type_of(l);
    bool ok = true;
    double worst = 0.0, worst_l = 0.0;
    for (int k = 0; k < count; ++k) {
        const RealMatrix b = c.random_b(m.d(), scale);
        const Subspace lb = eigenbundle(b_transform(m, b)).l;
        const TypeInfo tb = type_of(lb);
        const double angle = equal_subspaces(tb.e, t0.e, c.tol.linear).max_angle;
        const double direct = equal_subspaces(lb, b_transform(l, b, c.tol.linear), c.tol.linear).max_angle;
        ok = ok && tb.type == t0.type && angle < c.tol.linear && direct < c.tol.angle;
        worst = std::max(worst, angle);
        worst_l = std::max(worst_l, direct);
        c.samples.push_back(json{{"b_index", k + 1}, {"type", tb.type}, {"rho_angle", angle}, {"l_angle", direct}});
    }
    c.ranks["type"] = t0.type;
    c.residuals["max_rho_angle"] = worst;
    c.residuals["max_l_angle"] = worst_l;
    return ok;
}

json op_presentation_roundtrip(Ctx& c) {
    const LinearGCStructure& m = c.model("model");
    const int count = c.get("random_b", 0);
    const double scale = c.get("b_scale", 1.0);
    bool ok = true;
    double worst = 0.0;
    for (int k = 0; k <= count; ++k) {
        const LinearGCStructure j = k == 0 ? m : b_transform(m, c.random_b(m.d(), scale));
        const Subspace l = eigenbundle(j).l;
        const IsotropicPresentation p = extract_presentation(l);
        const Subspace back = isotropic_from(p.e, p.sigma);
        const double angle = equal_subspaces(back, l, c.tol.angle).max_angle;
        ok = ok && p.valid && angle < c.tol.angle;
        worst = std::max(worst, angle);
        c.samples.push_back(json{{"b_index", k},
                                 {"angle", angle},
                                 {"sigma_fit", p.sigma_fit_residual},
                                 {"delta_dim", p.delta.cols()}});
    }
    c.residuals["max_angle"] = worst;
    return ok;
}

json op_gc_map(Ctx& c) {
    const RealMatrix& f = c.map("map");
    const LinearGCStructure& s = c.model("source");
    const LinearGCStructure& t = c.model("target");
    if (f.rows() != t.d() || f.cols() != s.d()) {
        throw InputError("map has shape " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                         ", expected " + std::to_string(t.d()) + "x" + std::to_string(s.d()));
    }
    const GCMapReport r =
        is_gc_map(f, extract_presentation(eigenbundle(s).l), extract_presentation(eigenbundle(t).l), c.tol.linear);
    c.residuals["e_condition_angle"] = r.e_condition.residual_angle;
    c.residuals["poisson_angle"] = r.poisson_condition.residual_angle;
    json failed = json::array();
    if (!r.e_condition.pass) {
        failed.push_back("e_condition");
    }
    if (!r.poisson_condition.pass) {
        failed.push_back("poisson_condition");
    }
    c.witnesses["failed_conditions"] = failed;
    return r.is_gc_map;
}

json op_type_jump(Ctx& c) {
    const RealMatrix& f = c.map("map");
    const LinearGCStructure& s = c.model("source");
    const LinearGCStructure& t = c.model("target");
    const Subspace ls = eigenbundle(s).l;
    const Subspace lt = eigenbundle(t).l;
    const GCMapReport gc = is_gc_map(f, extract_presentation(ls), extract_presentation(lt), c.tol.linear);
    const ImageStructure img = image_structure(f, ls, lt, c.tol.linear);
    c.ranks["source_type"] = img.source_type;
    c.ranks["target_type"] = img.target_type;
    c.ranks["image_type"] = img.image_type;
    c.ranks["source_dim"] = s.d();
    c.ranks["target_dim"] = t.d();
    c.residuals["transversality_angle"] = img.induced.transversality_angle;
    c.residuals["rho_angle"] = img.rho_angle;
    c.witnesses["is_gc_map"] = gc.is_gc_map;
    c.witnesses["is_gc_subspace"] = img.induced.is_gc_subspace;
    c.witnesses["type_jump_holds"] = img.type_jump_holds;
    c.witnesses["image_type_matches"] = img.image_type_matches;
    c.witnesses["rho_matches"] = img.rho_matches;
    return gc.is_gc_map && img.induced.is_gc_subspace && img.type_jump_holds && img.image_type_matches &&
           img.rho_matches;
}

json op_nijenhuis(Ctx& c) {
    const FieldDef& def = c.sc.fields.at(c.at("field").get<std::string>());
    const StructureField field = def.make(c.box(def.d), c.tol);
    const ModelChart chart{def.d / 2, 0};
    const auto pts = c.points("points", chart);
    const std::string mode = c.get("mode", std::string("integrable"));
    const double threshold = c.get("threshold", 1e-2);
    double mx = 0.0, mn = std::numeric_limits<double>::infinity();
    double closedness = 0.0;
    int above = 0;
    for (const auto& x : pts) {
        for (const auto& b : def.b_fields) {
            closedness = std::max(closedness, closedness_residual(b, x, field.box(), c.tol.fd_step));
        }
        const double r = nijenhuis_residual(field, x);
        mx = std::max(mx, r);
        mn = std::min(mn, r);
        above += r > threshold ? 1 : 0;
        c.samples.push_back(json{{"x", point_json(x)}, {"nijenhuis", r}});
    }
    const double fraction = static_cast<double>(above) / static_cast<double>(pts.size());
    c.residuals["max"] = mx;
    c.residuals["min"] = mn;
    c.residuals["fraction_above_threshold"] = fraction;
    c.witnesses["mode"] = mode;
    if (!def.b_fields.empty()) {
        // not enforced: a non-closed B is reported, the verdict is the Nijenhuis one
        c.residuals["b_closedness"] = closedness;
        c.witnesses["b_closed"] = closedness < c.tol.field;
    }
    if (mode == "integrable") {
        return mx < c.tol.field;
    }
    if (mode == "non_integrable") {
        return fraction >= c.get("min_fraction", 0.9);
    }
    throw InputError("nijenhuis mode must be integrable or non_integrable");
}

// Gradient in the real chart coordinates from an exact jet.
ComplexVector real_gradient(const Jet& jet, const ModelChart& chart) {
    ComplexVector g(chart.d());
    const Complex i(0.0, 1.0);
    for (Index l = 0; l < 2 * chart.m; ++l) {
        g(chart.p_index(l)) = jet.d_p(l);
    }
    for (Index j = 0; j < chart.n; ++j) {
        g(chart.x_index(j)) = jet.d_z(j) + jet.d_zbar(j);
        g(chart.y_index(j)) = i * (jet.d_z(j) - jet.d_zbar(j));
    }
    return g;
}

struct ExprSection {
    std::vector<Expression> vector, covector;
};

ExprSection read_section(const Ctx& c, const json& j, const ModelChart& chart) {
    ExprSection s;
    for (const char* key : {"vector", "covector"}) {
        const json& comps = j.at(key);
        if (static_cast<Index>(comps.size()) != chart.d()) {
            throw InputError(std::string("section ") + key + " part needs " + std::to_string(chart.d()) +
                             " components");
        }
        auto& out = std::string(key) == "vector" ? s.vector : s.covector;
        for (const auto& e : comps) {
            Expression ex = parse_expression(e, c.sc.functions, "section");
            ex.check_chart(chart);
            out.push_back(std::move(ex));
        }
    }
    return s;
}

VectorField expression_vector(const std::vector<Expression>& comps, const ModelChart& chart) {
    return [comps, chart](const RealVector& x) {
        RealVector v(static_cast<Index>(comps.size()));
        for (std::size_t k = 0; k < comps.size(); ++k) {
            v(static_cast<Index>(k)) = comps[k].eval(x, chart).real();
        }
        return v;
    };
}

RealMatrix exact_jacobian(const std::vector<Expression>& comps, const RealVector& x, const ModelChart& chart) {
    RealMatrix m(static_cast<Index>(comps.size()), chart.d());
    for (std::size_t k = 0; k < comps.size(); ++k) {
        m.row(static_cast<Index>(k)) = real_gradient(comps[k].jet(x, chart), chart).real().transpose();
    }
    return m;
}

CourantValue exact_courant(const ExprSection& s1, const ExprSection& s2, const RealVector& x, const ModelChart& chart) {
    const RealVector a1 = expression_vector(s1.vector, chart)(x), a2 = expression_vector(s2.vector, chart)(x);
    const RealVector x1 = expression_vector(s1.covector, chart)(x), x2 = expression_vector(s2.covector, chart)(x);
    const RealMatrix da1 = exact_jacobian(s1.vector, x, chart), da2 = exact_jacobian(s2.vector, x, chart);
    const RealMatrix dx1 = exact_jacobian(s1.covector, x, chart), dx2 = exact_jacobian(s2.covector, x, chart);
    const RealVector dphi = da1.transpose() * x2 + dx2.transpose() * a1 - da2.transpose() * x1 - dx1.transpose() * a2;
    CourantValue v;
    v.vector = da2 * a1 - da1 * a2;
    v.covector = dx2 * a1 + da1.transpose() * x2 - dx1 * a2 - da2.transpose() * x1 - 0.5 * dphi;
    return v;
}

json op_courant_convergence(Ctx& c) {
    const ModelChart chart = c.chart();
    const ExprSection e1 = read_section(c, c.at("s1"), chart);
    const ExprSection e2 = read_section(c, c.at("s2"), chart);
    const Section s1{expression_vector(e1.vector, chart), expression_vector(e1.covector, chart)};
    const Section s2{expression_vector(e2.vector, chart), expression_vector(e2.covector, chart)};
    const auto steps = c.get("steps", std::vector<double>{1e-2, 5e-3});
    if (steps.size() != 2 || !(steps[1] < steps[0])) {
        throw InputError("steps must be two decreasing step sizes");
    }
    const Box box = c.box(chart.d());
    double err_coarse = 0.0, err_fine = 0.0;
    for (const auto& x : c.points("points", chart)) {
        const CourantValue exact = exact_courant(e1, e2, x, chart);
        auto error = [&](double h) {
            const CourantValue fd = courant_bracket(s1, s2, x, box, h);
            return std::max((fd.vector - exact.vector).cwiseAbs().maxCoeff(),
                            (fd.covector - exact.covector).cwiseAbs().maxCoeff());
        };
        const double a = error(steps[0]), b = error(steps[1]);
        err_coarse = std::max(err_coarse, a);
        err_fine = std::max(err_fine, b);
        c.samples.push_back(json{{"x", point_json(x)}, {"error_coarse", a}, {"error_fine", b}});
    }
    const double ratio = err_fine > 0.0 ? err_coarse / err_fine : std::numeric_limits<double>::infinity();
    c.residuals["error_coarse"] = err_coarse;
    c.residuals["error_fine"] = err_fine;
    c.residuals["ratio"] = std::isfinite(ratio) ? json(ratio) : json("inf");
    return ratio >= c.get("min_ratio", 3.0);
}

json op_gh_check(Ctx& c) {
    const ModelChart chart = c.chart();
    const Expression& e = c.function(c.at("function").get<std::string>());
    e.check_chart(chart);
    const auto pts = c.points("points", chart);
    const GHReport r = gh_check_model(e.field(chart), chart, pts, c.box(chart.d()), c.tol.field_options());
    c.residuals["max_zbar"] = r.max_zbar;
    c.residuals["max_p"] = r.max_p;
    c.residuals["max_dl"] = r.max_dl;
    c.witnesses["dl_gh"] = r.dl_gh;
    c.consistent = r.agree;
    for (const auto& s : r.samples) {
        c.samples.push_back(
            json{{"x", point_json(s.x)}, {"zbar", s.zbar_residual}, {"p", s.p_residual}, {"dl", s.dl_norm}});
    }
    if (e.polynomial()) {
        double zbar = 0.0, p = 0.0;
        for (const auto& x : pts) {
            const Jet j = e.jet(x, chart);
            if (j.d_zbar.size() > 0) {
                zbar = std::max(zbar, j.d_zbar.cwiseAbs().maxCoeff());
            }
            if (j.d_p.size() > 0) {
                p = std::max(p, j.d_p.cwiseAbs().maxCoeff());
            }
        }
        const bool exact_gh = zbar < c.tol.field && p < c.tol.field;
        c.residuals["exact_zbar"] = zbar;
        c.residuals["exact_p"] = p;
        c.witnesses["exact_gh"] = exact_gh;
        c.consistent = c.consistent && exact_gh == r.gh;
    }
    c.witnesses["consistent"] = c.consistent;
    return r.gh;
}

json op_poisson_check(Ctx& c) {
    const ModelChart chart = c.chart();
    const VectorField f = c.poisson_map(c.at("poisson_map").get<std::string>(), chart);
    const PoissonReport r =
        poisson_map_check(f, chart, c.points("points", chart), c.box(chart.d()), c.tol.field_options());
    c.residuals["max"] = r.max_residual;
    for (const auto& s : r.samples) {
        c.samples.push_back(json{{"x", point_json(s.x)}, {"poisson", s.residual}});
    }
    return r.pass;
}

json op_levi(Ctx& c) {
    const ModelChart chart = c.chart();
    const Expression& e = c.function(c.at("function").get<std::string>());
    e.check_chart(chart);
    const PshReport r =
        l_psh_check(e.field(chart), chart, c.points("points", chart), c.box(chart.d()), c.tol.field_options());
    c.residuals["leafwise"] = r.leafwise_residual;
    c.residuals["min_eigenvalue"] = r.min_eigenvalue;
    c.residuals["hermitian"] = r.hermitian_residual;
    for (const auto& s : r.samples) {
        c.samples.push_back(
            json{{"x", point_json(s.x)}, {"leafwise", s.leafwise}, {"min_eigenvalue", s.min_eigenvalue}});
    }
    if (r.strictly_psh) {
        return "strict";
    }
    if (r.psh) {
        return "psh";
    }
    return r.leafwise_residual > c.tol.field ? "leaf_fail" : "negative";
}

json op_hull(Ctx& c) {
    const ModelChart chart = c.chart();
    const FunctionFamily fam = c.family("family", chart);
    const auto k = c.points("k", chart);
    const auto grid = c.points("grid", chart);
    const HullResult h = o_hull(k, fam, grid, c.tol.linear);
    c.ranks["hull_size"] = h.indices.size();
    c.ranks["grid_size"] = grid.size();
    bool ok = true;
    const IdempotenceResult idem = hull_idempotence_check(k, fam, grid, c.tol.linear);
    c.witnesses["idempotent"] = idem.idempotent;
    ok = ok && idem.idempotent;
    if (c.has("smaller_k")) {
        const HullResult small = o_hull(c.points("smaller_k", chart), fam, grid, c.tol.linear);
        const bool mono = std::includes(h.indices.begin(), h.indices.end(), small.indices.begin(), small.indices.end());
        c.witnesses["monotone_in_k"] = mono;
        c.ranks["smaller_hull_size"] = small.indices.size();
        ok = ok && mono;
    }
    if (c.has("subfamily")) {
        const HullResult wide = o_hull(k, c.family("subfamily", chart), grid, c.tol.linear);
        const bool anti = std::includes(wide.indices.begin(), wide.indices.end(), h.indices.begin(), h.indices.end());
        c.witnesses["anti_monotone_in_family"] = anti;
        c.ranks["subfamily_hull_size"] = wide.indices.size();
        ok = ok && anti;
    }
    if (c.has("reference_disc")) {
        if (chart.d() != 2) {
            throw InputError("reference_disc needs a planar chart");
        }
        const double dist = hausdorff_to_disc(h.points, c.at("reference_disc").get<double>());
        c.residuals["hausdorff"] = dist;
        ok = ok && dist <= c.get("hausdorff_max", 0.08);
    }
    return ok;
}

json op_separability(Ctx& c) {
    const ModelChart chart = c.chart();
    FunctionFamily fam = c.family("family", chart);
    if (c.has("poisson_maps")) {
        for (const auto& n : c.names("poisson_maps")) {
            fam.poisson_maps.push_back({n, c.poisson_map(n, chart), true});
        }
    }
    const std::string mode = c.get("mode", std::string("gh_functions_only"));
    SeparationMode m;
    if (mode == "gh_functions_only") {
        m = SeparationMode::gh_functions_only;
    } else if (mode == "include_poisson_maps") {
        m = SeparationMode::include_poisson_maps;
    } else {
        throw InputError("mode must be gh_functions_only or include_poisson_maps");
    }
    std::vector<std::pair<RealVector, RealVector>> pairs;
    for (const auto& p : c.at("pairs")) {
        const RealVector a = read_vector(p.at(0), "pair"), b = read_vector(p.at(1), "pair");
        if (a.size() != chart.d() || b.size() != chart.d()) {
            throw InputError("pair points must match the chart dimension");
        }
        pairs.emplace_back(a, b);
    }
    const auto v = separability_probe(pairs, fam, m, c.tol.linear);
    bool all = true;
    json w = json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
        all = all && v[i].separated;
        w.push_back(v[i].separated ? json(v[i].witness) : json(nullptr));
        c.samples.push_back(json{{"x", point_json(pairs[i].first)}, {"difference", v[i].difference}});
    }
    c.witnesses["separating"] = w;
    return all;
}

json op_regularity(Ctx& c) {
    const ModelChart chart = c.chart();
    const auto maps = c.poisson_maps(chart);
    const auto fs = c.fields_of("functions", chart);
    const Box box = c.box(chart.d());
    bool all = true;
    for (const auto& x : c.points("points", chart)) {
        const RegularityReport r = regularity_probe(x, maps, fs, chart, box, c.tol.field_options());
        all = all && r.regular;
        c.samples.push_back(json{{"x", point_json(x)},
                                 {"real_rank", r.real.rank},
                                 {"complex_rank", r.complex.rank},
                                 {"smallest_kept", r.complex.smallest_kept},
                                 {"largest_discarded", r.complex.largest_discarded}});
    }
    return all;
}

json op_reduction(Ctx& c) {
    const ModelChart chart = c.chart();
    const auto maps = c.poisson_maps(chart);
    const auto fs = c.fields_of("functions", chart);
    const auto k = c.points("k", chart);
    const Box box = c.box(chart.d());
    ReductionOptions o;
    o.seed = c.seed;
    o.trials = c.get("trials", 100);
    o.radius = c.get("radius", 0.1);
    o.field = c.tol.field_options();
    const std::string mode = c.get("mode", std::string("regular"));
    if (mode == "injective") {
        o.mode = ReductionMode::injective;
    } else if (mode != "regular") {
        throw InputError("mode must be regular or injective");
    }
    const ReductionResult r = reduce_regular_tuple(maps, fs, k, chart, box, o);
    c.ranks["trials_used"] = r.trials_used;
    c.witnesses["input_regular"] = r.input_regular;
    c.witnesses["input_injective"] = r.input_injective;
    c.witnesses["reason"] = r.reason;
    json cs = json::array();
    for (Index i = 0; i < r.c.size(); ++i) {
        cs.push_back(complex_json(r.c(i)));
    }
    c.witnesses["c"] = cs;
    bool ok = r.success && r.trials_used <= c.get("max_trials", o.trials);
    if (r.success && o.mode == ReductionMode::regular) {
        bool again = true;
        for (const auto& x : k) {
            const RegularityReport rr = regularity_probe(x, maps, r.reduced, chart, box, c.tol.field_options());
            again = again && rr.regular;
            c.samples.push_back(
                json{{"x", point_json(x)}, {"complex_rank", rr.complex.rank}, {"smallest_kept", rr.complex.smallest_kept}});
        }
        c.witnesses["reduced_regular"] = again;
        ok = ok && again;
    }
    return ok;
}

json op_exhaustion(Ctx& c) {
    const ModelChart chart = c.chart();
    std::vector<ExhaustionLevel> levels;
    for (const auto& lj : c.at("levels")) {
        ExhaustionLevel level;
        for (const auto& n : lj.at("functions")) {
            const Expression& e = c.function(n.get<std::string>());
            e.check_chart(chart);
            level.functions.push_back({n.get<std::string>(), e.field(chart), true});
        }
        level.k_samples = c.points(lj.at("k"), chart);
        level.outside_samples = c.points(lj.at("outside"), chart);
        levels.push_back(std::move(level));
    }
    std::vector<SublevelBound> bounds;
    if (c.has("bounds")) {
        for (const auto& b : c.at("bounds")) {
            bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
        }
    }
    std::vector<RealVector> grid;
    if (c.has("grid")) {
        grid = c.points("grid", chart);
    }
    ExhaustionOptions o;
    o.power_limit = c.get("power_limit", 64);
    o.field = c.tol.field_options();
    const ExhaustionResult r =
        exhaustion_build(levels, chart, c.box(chart.d()), c.points("certification", chart), grid, bounds, o);
    c.residuals["max_on_k1"] = r.max_on_k1;
    json mo = json::array();
    for (double v : r.min_outside) {
        mo.push_back(v);
    }
    c.residuals["min_outside"] = mo;
    c.residuals["min_eigenvalue"] = r.psh.min_eigenvalue;
    c.residuals["leafwise"] = r.psh.leafwise_residual;
    c.ranks["powers"] = r.powers;
    c.witnesses["failing_level"] = r.failing_level;
    c.witnesses["reason"] = r.reason;
    json sl = json::array();
    for (const auto& s : r.sublevels) {
        sl.push_back(json{{"c", s.c}, {"radius", s.radius}, {"contained", s.contained}, {"farthest", s.farthest}});
    }
    c.witnesses["sublevels"] = sl;
    for (const auto& s : r.psh.samples) {
        c.samples.push_back(json{{"x", point_json(s.x)}, {"min_eigenvalue", s.min_eigenvalue}, {"f", r.f(s.x).real()}});
    }
    return r.success;
}

json op_polyhedron_search(Ctx& c) {
    const ModelChart chart = c.chart();
    const FunctionFamily fam = c.family("candidates", chart);
    const auto k = c.points("k", chart);
    const auto grid = c.points("grid", chart);
    const json& shell = c.at("shell");
    const auto sh = shell_points(grid, shell.at("radius").get<double>(), shell.at("width").get<double>());
    PolyhedronSearchOptions o;
    o.tol = c.tol.linear;
    o.rescale_margin = c.get("rescale_margin", 1e-3);
    const PolyhedronSearchResult r = polyhedron_search(k, sh, fam.gh_functions, o);
    json sel = json::array();
    for (const auto& m : r.selected) {
        sel.push_back(json{{"name", m.name}, {"scale", m.scale}});
    }
    c.witnesses["selected"] = sel;
    c.witnesses["uncovered"] = r.uncovered ? point_json(*r.uncovered) : json(nullptr);
    c.witnesses["reason"] = r.reason;
    c.ranks["shell_points"] = sh.size();
    return r.found;
}

json op_expression_derivatives(Ctx& c) {
    const ModelChart chart = c.chart();
    const auto pts = c.points("points", chart);
    double worst = 0.0;
    for (const auto& n : c.names("functions")) {
        const Expression& e = c.function(n);
        e.check_chart(chart);
        const ComplexField f = e.field(chart);
        for (const auto& x : pts) {
            const ComplexVector exact = real_gradient(e.jet(x, chart), chart);
            const ComplexVector fd = fd_gradient(f, x, fd_step_at(x, c.tol.fd_step));
            const double err = (fd - exact).cwiseAbs().maxCoeff();
            worst = std::max(worst, err);
            c.samples.push_back(json{{"x", point_json(x)}, {"function", n}, {"error", err}});
        }
    }
    c.residuals["max_error"] = worst;
    return worst < c.tol.derivative;
}

const std::vector<std::pair<std::string, Op>>& operations() {
    static const std::vector<std::pair<std::string, Op>> ops{
        {"validate", op_validate},
        {"eigenbundle", op_eigenbundle},
        {"structure_suite", op_structure_suite},
        {"type", op_type},
        {"type_additivity", op_type_additivity},
        {"b_invariance", op_b_invariance},
        {"presentation_roundtrip", op_presentation_roundtrip},
        {"gc_map", op_gc_map},
        {"type_jump", op_type_jump},
        {"nijenhuis", op_nijenhuis},
        {"courant_convergence", op_courant_convergence},
        {"gh_check", op_gh_check},
        {"poisson_check", op_poisson_check},
        {"levi", op_levi},
        {"hull", op_hull},
        {"separability", op_separability},
        {"regularity", op_regularity},
        {"reduction", op_reduction},
        {"exhaustion", op_exhaustion},
        {"polyhedron_search", op_polyhedron_search},
        {"expression_derivatives", op_expression_derivatives},
    };
    return ops;
}

const std::vector<std::string>& operation_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [n, op] : operations()) {
            out.push_back(n);
        }
        return out;
    }();
    return names;
}

struct CheckOutcome {
    json entry;
    double seconds = 0.0;
};

CheckOutcome run_check(const Scenario& sc, const json& check, std::size_t index) {
    const auto start = std::chrono::steady_clock::now();
    const std::string name = check.at("name").get<std::string>();
    const std::string op = check.at("op").get<std::string>();
    const json expect = check.contains("expect") ? check.at("expect") : json(true);
    const std::uint64_t seed = check.contains("seed") ? check.at("seed").get<std::uint64_t>() : check_seed(sc.seed, index);

    json entry;
    entry["name"] = name;
    entry["op"] = op;
    if (check.contains("group")) {
        entry["group"] = check.at("group");
    }
    entry["seed"] = seed;
    entry["expect"] = expect;

    const json args = check.contains("args") ? check.at("args") : json::object();
    json verdict = nullptr;
    json error = nullptr;
    bool consistent = true;
    std::optional<Ctx> ctx;
    try {
        Tolerances t = sc.tol;
        if (check.contains("tolerances")) {
            t.merge(check.at("tolerances"));
        }
        ctx.emplace(sc, args, t, seed);
        const auto& ops = operations();
        const auto it = std::find_if(ops.begin(), ops.end(), [&](const auto& p) { return p.first == op; });
        verdict = it->second(*ctx);
        consistent = ctx->consistent;
    } catch (const std::exception& e) {
        error = e.what();
    }
    entry["verdict"] = verdict;
    entry["passed"] = error.is_null() && consistent && verdict == expect;
    entry["error"] = error;
    entry["residuals"] = ctx ? ctx->residuals : json::object();
    entry["ranks"] = ctx ? ctx->ranks : json::object();
    entry["witnesses"] = ctx ? ctx->witnesses : json::object();
    entry["samples"] = ctx ? ctx->samples : json::array();
    const auto stop = std::chrono::steady_clock::now();
    return {std::move(entry), std::chrono::duration<double>(stop - start).count()};
}

std::string csv_field(const json& v) {
    if (v.is_null()) {
        return "";
    }
    if (v.is_string()) {
        std::string s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string out = "\"";
        for (char ch : s) {
            out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        }
        return out + "\"";
    }
    if (v.is_boolean()) {
        return v.get<bool>() ? "true" : "false";
    }
    return v.dump();
}

}  // namespace

std::vector<std::string> known_operations() {
    return operation_names();
}

ReportFormat parse_format(const std::string& name) {
    if (name == "structured") {
        return ReportFormat::structured;
    }
    if (name == "tabular") {
        return ReportFormat::tabular;
    }
    throw InputError("unknown report format '" + name + "' (structured or tabular)");
}

RunResult run_scenario_text(const std::string& text, const RunOverrides& overrides, const std::string& base_dir) {
    Scenario sc = load_scenario(text);
    if (overrides.seed) {
        sc.seed = *overrides.seed;
    }
    if (overrides.tol) {
        if (!(*overrides.tol > 0.0)) {
            throw InputError("--tol must be positive");
        }
        sc.tol.linear = sc.tol.angle = sc.tol.field = sc.tol.derivative = *overrides.tol;
    }
    if (overrides.fd_step) {
        if (!(*overrides.fd_step > 0.0)) {
            throw InputError("--fd-step must be positive");
        }
        sc.tol.fd_step = *overrides.fd_step;
    }

    const auto start = std::chrono::steady_clock::now();
    std::vector<CheckOutcome> outcomes(sc.checks.size());
    if (sc.parallel) {
        std::vector<std::future<CheckOutcome>> futures;
        for (std::size_t i = 0; i < sc.checks.size(); ++i) {
            futures.push_back(std::async(std::launch::async, [&sc, i] { return run_check(sc, sc.checks.at(i), i); }));
        }
        for (std::size_t i = 0; i < futures.size(); ++i) {
            outcomes[i] = futures[i].get();
        }
    } else {
        for (std::size_t i = 0; i < sc.checks.size(); ++i) {
            outcomes[i] = run_check(sc, sc.checks.at(i), i);
        }
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json report;
    report["schema"] = kReportSchema;
    report["tool_version"] = GCPROBE_VERSION;
    report["scenario"] = sc.name;
    report["seed"] = sc.seed;
    report["tolerances"] = sc.tol.table();
    std::size_t passed = 0;
    json checks = json::array();
    json timings = json::array();
    for (auto& o : outcomes) {
        passed += o.entry.at("passed").get<bool>() ? 1 : 0;
        timings.push_back(json{{"name", o.entry.at("name")}, {"seconds", o.seconds}});
        checks.push_back(std::move(o.entry));
    }
    report["summary"] = json{{"checks", outcomes.size()},
                             {"passed", passed},
                             {"failed", outcomes.size() - passed},
                             {"all_passed", passed == outcomes.size()}};
    report["checks"] = std::move(checks);
    report["timings"] = json{{"total_seconds", total}, {"checks", std::move(timings)}};

    RunResult result;
    result.all_passed = passed == outcomes.size();
    result.format = overrides.format.value_or(sc.format);
    if (overrides.report_path) {
        result.report_path = *overrides.report_path;
    } else if (sc.report_path) {
        const std::filesystem::path p(*sc.report_path);
        result.report_path = p.is_absolute() ? p.string() : (std::filesystem::path(base_dir) / p).string();
    }
    if (!result.report_path.empty()) {
        std::ofstream out(result.report_path, std::ios::binary);
        if (!out) {
            throw InputError("cannot write report to " + result.report_path);
        }
        out << format_report(report, result.format);
    }
    result.report = std::move(report);
    return result;
}

RunResult run_scenario_file(const std::string& path, const RunOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ScenarioError("cannot open scenario " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::filesystem::path parent = std::filesystem::path(path).parent_path();
    return run_scenario_text(ss.str(), overrides, parent.empty() ? "." : parent.string());
}

std::string report_body(const nlohmann::ordered_json& report) {
    json copy = report;
    copy.erase("timings");
    return copy.dump(2);
}

std::string format_report(const nlohmann::ordered_json& report, ReportFormat format) {
    return format == ReportFormat::structured ? report.dump(2) + "\n" : tabular_report(report);
}

std::string tabular_report(const nlohmann::ordered_json& report) {
    std::size_t dim = 0;
    std::vector<std::string> columns;
    for (const auto& check : report.at("checks")) {
        for (const auto& s : check.at("samples")) {
            if (s.contains("x")) {
                dim = std::max(dim, s.at("x").size());
            }
            for (const auto& [key, value] : s.items()) {
                if (key != "x" && std::find(columns.begin(), columns.end(), key) == columns.end()) {
                    columns.push_back(key);
                }
            }
        }
    }
    std::ostringstream out;
    out << "check,op,sample";
    for (std::size_t i = 0; i < dim; ++i) {
        out << ",x" << i + 1;
    }
    for (const auto& col : columns) {
        out << "," << col;
    }
    out << "\n";
    for (const auto& check : report.at("checks")) {
        std::size_t k = 0;
        for (const auto& s : check.at("samples")) {
            out << csv_field(check.at("name")) << "," << csv_field(check.at("op")) << "," << k++;
            for (std::size_t i = 0; i < dim; ++i) {
                out << ",";
                if (s.contains("x") && i < s.at("x").size()) {
                    out << csv_field(s.at("x").at(i));
                }
            }
            for (const auto& col : columns) {
                out << "," << (s.contains(col) ? csv_field(s.at(col)) : std::string());
            }
            out << "\n";
        }
    }
    return out.str();
}

}  // namespace gcprobe
