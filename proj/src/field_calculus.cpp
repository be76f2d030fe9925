#include "gcprobe/field_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace gcprobe {

Box Box::cube(Index d, double half_width) {
    return {RealVector::Constant(d, -half_width), RealVector::Constant(d, half_width)};
}

bool Box::contains(const RealVector& x) const {
    return x.size() == dim() && (x.array() >= lower.array()).all() && (x.array() <= upper.array()).all();
}

double Box::distance_to_boundary(const RealVector& x) const {
    if (x.size() != dim()) {
        throw InputError("box: point has dimension " + std::to_string(x.size()) + ", box has " + std::to_string(dim()));
    }
    if (dim() == 0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::min((x - lower).minCoeff(), (upper - x).minCoeff());
}

double fd_step_at(const RealVector& x, double fd_step) {
    if (!(fd_step > 0.0)) {
        throw InputError("fd_step must be positive");
    }
    const double scale = x.size() == 0 ? 0.0 : x.cwiseAbs().maxCoeff();
    return fd_step * (1.0 + scale);
}

void require_margin(const Box& box, const RealVector& x, double reach, const char* what) {
    if (!x.allFinite()) {
        throw InputError(std::string(what) + ": non-finite point");
    }
    const double dist = box.distance_to_boundary(x);
    if (dist < 2.0 * reach) {
        throw InputError(std::string(what) + ": point within " + std::to_string(2.0 * reach) +
                         " of the box boundary (distance " + std::to_string(dist) + ")");
    }
}

ComplexVector fd_gradient(const ComplexField& f, const RealVector& x, double h) {
    ComplexVector g(x.size());
    RealVector y = x;
    for (Index j = 0; j < x.size(); ++j) {
        y(j) = x(j) + h;
        const Complex fp = f(y);
        y(j) = x(j) - h;
        const Complex fm = f(y);
        y(j) = x(j);
        g(j) = (fp - fm) / (2.0 * h);
    }
    return g;
}

RealMatrix fd_jacobian(const VectorField& f, const RealVector& x, double h) {
    const RealVector f0 = f(x);
    RealMatrix jac(f0.size(), x.size());
    RealVector y = x;
    for (Index j = 0; j < x.size(); ++j) {
        y(j) = x(j) + h;
        const RealVector fp = f(y);
        y(j) = x(j) - h;
        const RealVector fm = f(y);
        y(j) = x(j);
        jac.col(j) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

RealMatrix fd_hessian(const RealField& f, const RealVector& x, double h) {
    const Index d = x.size();
    RealMatrix hess(d, d);
    const double f0 = f(x);
    RealVector y = x;
    for (Index a = 0; a < d; ++a) {
        y(a) = x(a) + h;
        const double fp = f(y);
        y(a) = x(a) - h;
        const double fm = f(y);
        y(a) = x(a);
        hess(a, a) = (fp - 2.0 * f0 + fm) / (h * h);
        for (Index b = a + 1; b < d; ++b) {
            double acc = 0.0;
            for (int sa : {1, -1}) {
                for (int sb : {1, -1}) {
                    y(a) = x(a) + sa * h;
                    y(b) = x(b) + sb * h;
                    acc += sa * sb * f(y);
                }
            }
            y(a) = x(a);
            y(b) = x(b);
            hess(a, b) = hess(b, a) = acc / (4.0 * h * h);
        }
    }
    return hess;
}

Section Section::constant(RealVector vector, RealVector covector) {
    return {[vector](const RealVector&) { return vector; }, [covector](const RealVector&) { return covector; }};
}

double CourantValue::max_abs() const {
    double m = 0.0;
    if (vector.size() > 0) {
        m = vector.cwiseAbs().maxCoeff();
    }
    if (covector.size() > 0) {
        m = std::max(m, covector.cwiseAbs().maxCoeff());
    }
    return m;
}

namespace {

void require_section_dims(const RealVector& v, Index d, const char* part) {
    if (v.size() != d) {
        throw InputError(std::string("courant_bracket: ") + part + " has " + std::to_string(v.size()) +
                         " components, expected " + std::to_string(d));
    }
    if (!v.allFinite()) {
        throw InputError(std::string("courant_bracket: non-finite ") + part);
    }
}

// (L_A xi)_k = A^j d_j xi_k + xi_j d_k A^j
RealVector lie_derivative(const RealVector& a, const RealMatrix& da, const RealVector& xi, const RealMatrix& dxi) {
    return dxi * a + da.transpose() * xi;
}

}  // namespace

CourantValue courant_bracket(const Section& s1, const Section& s2, const RealVector& x, const Box& box,
                             double fd_step) {
    const Index d = box.dim();
    const double h = fd_step_at(x, fd_step);
    require_margin(box, x, h, "courant_bracket");

    const RealVector a1 = s1.vector_part(x);
    const RealVector a2 = s2.vector_part(x);
    const RealVector xi1 = s1.covector_part(x);
    const RealVector xi2 = s2.covector_part(x);
    require_section_dims(a1, d, "vector part");
    require_section_dims(a2, d, "vector part");
    require_section_dims(xi1, d, "covector part");
    require_section_dims(xi2, d, "covector part");

    const RealMatrix da1 = fd_jacobian(s1.vector_part, x, h);
    const RealMatrix da2 = fd_jacobian(s2.vector_part, x, h);
    const RealMatrix dxi1 = fd_jacobian(s1.covector_part, x, h);
    const RealMatrix dxi2 = fd_jacobian(s2.covector_part, x, h);

    const ComplexField contraction = [&](const RealVector& y) {
        return Complex(s1.vector_part(y).dot(s2.covector_part(y)) - s2.vector_part(y).dot(s1.covector_part(y)), 0.0);
    };
    const RealVector dphi = fd_gradient(contraction, x, h).real();

    CourantValue out;
    out.vector = da2 * a1 - da1 * a2;
    out.covector = lie_derivative(a1, da1, xi2, dxi2) - lie_derivative(a2, da2, xi1, dxi1) - 0.5 * dphi;
    return out;
}

struct StructureField::Cache {
    std::mutex mutex;
    std::map<std::vector<double>, ValidityCertificate> certificates;
};

StructureField::StructureField(Box box, MatrixField j_at, double fd_step, double tol)
    : box_(std::move(box)), j_at_(std::move(j_at)), fd_step_(fd_step), tol_(tol), cache_(std::make_shared<Cache>()) {
    if (box_.upper.size() != box_.lower.size()) {
        throw InputError("structure field: box bounds differ in dimension");
    }
    if (box_.dim() % 2 != 0) {
        throw InputError("structure field: dimension must be even");
    }
    if (!(box_.upper.array() > box_.lower.array()).all()) {
        throw InputError("structure field: empty box");
    }
    if (!(fd_step_ > 0.0) || !(tol_ > 0.0)) {
        throw InputError("structure field: fd_step and tol must be positive");
    }
}

StructureField StructureField::constant(const LinearGCStructure& j, Box box, double fd_step) {
    if (j.d() != box.dim()) {
        throw InputError("structure field: J has d = " + std::to_string(j.d()) + ", box dimension " +
                         std::to_string(box.dim()));
    }
    RealMatrix m = j.matrix();
    return StructureField(std::move(box), [m](const RealVector&) { return m; }, fd_step, j.tol());
}

RealMatrix StructureField::j(const RealVector& x) const {
    RealMatrix m = j_at_(x);
    if (m.rows() != 2 * d() || m.cols() != 2 * d()) {
        throw InputError("structure field: J(x) has shape " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected " + std::to_string(2 * d()));
    }
    require_finite(m, "structure field");
    return m;
}

ValidityCertificate StructureField::certificate(const RealVector& x) const {
    std::vector<double> key(x.data(), x.data() + x.size());
    {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        auto it = cache_->certificates.find(key);
        if (it != cache_->certificates.end()) {
            return it->second;
        }
    }
    const ValidityCertificate cert = validate(j(x), tol_);
    std::lock_guard<std::mutex> lock(cache_->mutex);
    cache_->certificates.emplace(std::move(key), cert);
    return cert;
}

namespace {

RealVector stack(const Section& s, const RealVector& x) {
    const RealVector a = s.vector_part(x);
    const RealVector xi = s.covector_part(x);
    RealVector v(a.size() + xi.size());
    v << a, xi;
    return v;
}

Section apply_j(const StructureField& field, const Section& s) {
    const Index d = field.d();
    auto both = [field, s](const RealVector& y) -> RealVector { return field.j(y) * stack(s, y); };
    return {[both, d](const RealVector& y) -> RealVector { return both(y).head(d); },
            [both, d](const RealVector& y) -> RealVector { return both(y).tail(d); }};
}

RealVector stacked(const CourantValue& v) {
    RealVector out(v.vector.size() + v.covector.size());
    out << v.vector, v.covector;
    return out;
}

void require_valid(const StructureField& field, const RealVector& x, const char* what) {
    const ValidityCertificate cert = field.certificate(x);
    if (!cert.valid) {
        throw InputError(std::string(what) + ": J is not a valid structure at the point (square residual " +
                         std::to_string(cert.square_residual) + ", orthogonality residual " +
                         std::to_string(cert.orthogonality_residual) + ")");
    }
}

}  // namespace

CourantValue nijenhuis_tensor(const StructureField& field, const Section& c, const Section& dsec, const RealVector& x) {
    require_valid(field, x, "nijenhuis");
    const Index d = field.d();
    const Box& box = field.box();
    const double step = field.fd_step();
    const Section jc = apply_j(field, c);
    const Section jd = apply_j(field, dsec);
    const RealMatrix jx = field.j(x);

    const RealVector n = stacked(courant_bracket(jc, jd, x, box, step)) -
                         jx * stacked(courant_bracket(jc, dsec, x, box, step)) -
                         jx * stacked(courant_bracket(c, jd, x, box, step)) -
                         stacked(courant_bracket(c, dsec, x, box, step));
    return {n.head(d), n.tail(d)};
}

double nijenhuis_residual(const StructureField& field, const RealVector& x) {
    const Index d = field.d();
    std::vector<Section> frame;
    for (Index i = 0; i < 2 * d; ++i) {
        RealVector unit = RealVector::Zero(2 * d);
        unit(i) = 1.0;
        frame.push_back(Section::constant(unit.head(d), unit.tail(d)));
    }
    double worst = 0.0;
    for (std::size_t a = 0; a < frame.size(); ++a) {
        for (std::size_t b = a + 1; b < frame.size(); ++b) {
            worst = std::max(worst, nijenhuis_tensor(field, frame[a], frame[b], x).max_abs());
        }
    }
    return worst;
}

double closedness_residual(const MatrixField& b, const RealVector& x, const Box& box, double fd_step) {
    const Index d = box.dim();
    const double h = fd_step_at(x, fd_step);
    require_margin(box, x, h, "closedness_residual");
    std::vector<RealMatrix> db(static_cast<std::size_t>(d));
    RealVector y = x;
    for (Index i = 0; i < d; ++i) {
        y(i) = x(i) + h;
        const RealMatrix bp = b(y);
        y(i) = x(i) - h;
        const RealMatrix bm = b(y);
        y(i) = x(i);
        db[static_cast<std::size_t>(i)] = (bp - bm) / (2.0 * h);
    }
    double worst = 0.0;
    for (Index i = 0; i < d; ++i) {
        for (Index j = i + 1; j < d; ++j) {
            for (Index k = j + 1; k < d; ++k) {
                const double v = db[static_cast<std::size_t>(i)](j, k) + db[static_cast<std::size_t>(j)](k, i) +
                                 db[static_cast<std::size_t>(k)](i, j);
                worst = std::max(worst, std::abs(v));
            }
        }
    }
    return worst;
}

StructureField b_transform(const StructureField& field, const MatrixField& b) {
    const Index d = field.d();
    auto j_at = [field, b, d](const RealVector& x) -> RealMatrix {
        const RealMatrix bx = b(x);
        if (bx.rows() != d || bx.cols() != d) {
            throw InputError("b_transform: B(x) must be d x d");
        }
        RealMatrix eb = RealMatrix::Identity(2 * d, 2 * d);
        eb.bottomLeftCorner(d, d) = bx;
        RealMatrix emb = RealMatrix::Identity(2 * d, 2 * d);
        emb.bottomLeftCorner(d, d) = -bx;
        return emb * field.j(x) * eb;
    };
    return StructureField(field.box(), j_at, field.fd_step(), field.tol());
}

DLValue d_l_function(const ComplexField& f, const StructureField& field, const RealVector& x) {
    require_valid(field, x, "d_l_function");
    const double h = fd_step_at(x, field.fd_step());
    require_margin(field.box(), x, h, "d_l_function");
    const Index d = field.d();
    const Eigenbundle eb = eigenbundle(LinearGCStructure(field.j(x), field.tol()));
    const ComplexVector grad = fd_gradient(f, x, h);
    DLValue out;
    out.l_basis = eb.l.basis();
    out.components = out.l_basis.topRows(d).transpose() * grad;
    out.norm = out.components.norm();
    return out;
}

StructureField ModelChart::field(const Box& box, double fd_step) const {
    return StructureField::constant(structure(), box, fd_step);
}

namespace {

void require_chart(const ModelChart& chart, const Box& box, const char* what) {
    if (chart.m < 0 || chart.n < 0 || chart.d() == 0) {
        throw InputError(std::string(what) + ": chart must have M, N >= 0 and M + N > 0");
    }
    if (box.dim() != chart.d()) {
        throw InputError(std::string(what) + ": box dimension " + std::to_string(box.dim()) + " does not match chart d = " +
                         std::to_string(chart.d()));
    }
}

}  // namespace

GHReport gh_check_model(const ComplexField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                        const Box& box, const FieldOptions& options) {
    require_chart(chart, box, "gh_check");
    const StructureField field = chart.field(box, options.fd_step);
    GHReport report;
    for (const RealVector& x : samples) {
        const double h = fd_step_at(x, options.fd_step);
        require_margin(box, x, h, "gh_check");
        const ComplexVector grad = fd_gradient(f, x, h);
        GHSample s;
        s.x = x;
        for (Index j = 0; j < chart.n; ++j) {
            const Complex dzbar = 0.5 * (grad(chart.x_index(j)) + Complex(0.0, 1.0) * grad(chart.y_index(j)));
            s.zbar_residual = std::max(s.zbar_residual, std::abs(dzbar));
        }
        for (Index l = 0; l < 2 * chart.m; ++l) {
            s.p_residual = std::max(s.p_residual, std::abs(grad(chart.p_index(l))));
        }
        s.dl_norm = d_l_function(f, field, x).norm;
        report.max_zbar = std::max(report.max_zbar, s.zbar_residual);
        report.max_p = std::max(report.max_p, s.p_residual);
        report.max_dl = std::max(report.max_dl, s.dl_norm);
        report.samples.push_back(std::move(s));
    }
    report.gh = report.max_zbar < options.tol && report.max_p < options.tol;
    report.dl_gh = report.max_dl < 10.0 * options.tol;
    report.agree = report.gh == report.dl_gh;
    return report;
}

RealMatrix source_bivector(const ModelChart& chart) {
    RealMatrix pi = RealMatrix::Zero(chart.d(), chart.d());
    if (chart.m > 0) {
        pi.topLeftCorner(2 * chart.m, 2 * chart.m) = standard_omega(chart.m).inverse();
    }
    return pi;
}

PoissonReport poisson_map_check(const VectorField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                                const Box& box, const FieldOptions& options) {
    require_chart(chart, box, "poisson_map_check");
    const RealMatrix pi_source = source_bivector(chart);
    const RealMatrix pi_target = standard_omega(1).inverse();
    PoissonReport report;
    for (const RealVector& x : samples) {
        const double h = fd_step_at(x, options.fd_step);
        require_margin(box, x, h, "poisson_map_check");
        const RealMatrix df = fd_jacobian(f, x, h);
        if (df.rows() != 2) {
            throw InputError("poisson_map_check: map must take values in R^2");
        }
        const double r = (df * pi_source * df.transpose() - pi_target).cwiseAbs().maxCoeff();
        report.max_residual = std::max(report.max_residual, r);
        report.samples.push_back({x, r});
    }
    report.pass = report.max_residual < options.tol;
    return report;
}

ComplexMatrix levi_matrix(const RealMatrix& hessian, const ModelChart& chart) {
    const Complex i(0.0, 1.0);
    ComplexMatrix h(chart.n, chart.n);
    for (Index a = 0; a < chart.n; ++a) {
        for (Index b = 0; b < chart.n; ++b) {
            const Index xa = chart.x_index(a), ya = chart.y_index(a);
            const Index xb = chart.x_index(b), yb = chart.y_index(b);
            h(a, b) = 0.25 * (Complex(hessian(xa, xb) + hessian(ya, yb), 0.0) + i * (hessian(xa, yb) - hessian(ya, xb)));
        }
    }
    return h;
}

PshReport l_psh_check(const ComplexField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                      const Box& box, const FieldOptions& options) {
    require_chart(chart, box, "l_psh_check");
    const RealField re = [&f](const RealVector& y) { return f(y).real(); };
    PshReport report;
    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const RealVector& x : samples) {
        const double h = fd_step_at(x, options.fd_step);
        const double h2 = kSecondStepFactor * h;
        require_margin(box, x, h2, "l_psh_check");
        const Complex value = f(x);
        if (std::abs(value.imag()) > options.tol * (1.0 + std::abs(value.real()))) {
            throw InputError("l_psh_check: function is not real-valued (imaginary part " +
                             std::to_string(value.imag()) + ")");
        }
        LeviSample s;
        s.x = x;
        const ComplexVector grad = fd_gradient(f, x, h);
        for (Index l = 0; l < 2 * chart.m; ++l) {
            s.leafwise = std::max(s.leafwise, std::abs(grad(chart.p_index(l))));
        }
        s.levi = levi_matrix(fd_hessian(re, x, h2), chart);
        if (chart.n > 0) {
            s.hermitian_residual = (s.levi - s.levi.adjoint()).cwiseAbs().maxCoeff();
            Eigen::SelfAdjointEigenSolver<ComplexMatrix> eig(s.levi, Eigen::EigenvaluesOnly);
            s.min_eigenvalue = eig.eigenvalues().minCoeff();
        }
        report.leafwise_residual = std::max(report.leafwise_residual, s.leafwise);
        report.min_eigenvalue = std::min(report.min_eigenvalue, s.min_eigenvalue);
        report.hermitian_residual = std::max(report.hermitian_residual, s.hermitian_residual);
        report.samples.push_back(std::move(s));
    }
    if (samples.empty()) {
        report.min_eigenvalue = 0.0;
    }
    report.psh = report.leafwise_residual < options.tol && report.min_eigenvalue >= -options.tol;
    report.strictly_psh = report.psh && chart.n > 0 && report.min_eigenvalue > options.strictness;
    return report;
}

}  // namespace gcprobe
