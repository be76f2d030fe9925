#include "gcprobe/gc_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace gcprobe {

namespace {

const Complex kI(0.0, 1.0);

double max_abs(const RealMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double max_abs(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Smallest principal angle between two subspaces of equal ambient dimension;
// pi/2 when one of them is zero.
double min_principal_angle(const Subspace& a, const Subspace& b) {
    if (a.dim() == 0 || b.dim() == 0) {
        return std::numbers::pi / 2;
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(ComplexMatrix(a.basis().adjoint() * b.basis()));
    const double c = std::clamp(svd.singularValues()(0), 0.0, 1.0);
    return std::acos(c);
}

RealMatrix block_diag(const RealMatrix& a, const RealMatrix& b) {
    RealMatrix out = RealMatrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

void require_antisymmetric(const RealMatrix& b, Index d, double tol, const char* what) {
    if (b.rows() != d || b.cols() != d) {
        throw InputError(std::string(what) + ": B must be " + std::to_string(d) + "x" + std::to_string(d));
    }
    require_finite(b, what);
    if (max_abs(RealMatrix(b + b.transpose())) > tol * std::max(1.0, max_abs(b))) {
        throw InputError(std::string(what) + ": B is not antisymmetric");
    }
}

// L(E, sigma) on an explicit orthonormal basis q of E.
Subspace isotropic_on_basis(const ComplexMatrix& q, const ComplexMatrix& sigma, const ComplexMatrix& extension,
                            double tol) {
    const Index d = q.rows();
    const Index e = q.cols();
    if (sigma.rows() != e || sigma.cols() != e) {
        throw InputError("isotropic_from: sigma must be " + std::to_string(e) + "x" + std::to_string(e));
    }
    const ComplexMatrix ann = null_space(q.transpose(), tol);
    ComplexMatrix cols = ComplexMatrix::Zero(2 * d, e + ann.cols());
    if (e > 0) {
        cols.topLeftCorner(d, e) = q;
        // Q^T conj(Q) = I, so this covector restricts to sigma(a) on E.
        ComplexMatrix xi = q.conjugate() * sigma.transpose();
        if (extension.size() > 0) {
            if (extension.rows() != d || extension.cols() != e) {
                throw InputError("isotropic_from: extension must be d x dim E");
            }
            xi += ann * (ann.adjoint() * extension);
        }
        cols.bottomLeftCorner(d, e) = xi;
    }
    cols.bottomRightCorner(d, ann.cols()) = ann;
    return Subspace::span(cols, tol);
}

}  // namespace

RealMatrix pairing_matrix(Index d) {
    RealMatrix g = RealMatrix::Zero(2 * d, 2 * d);
    g.topRightCorner(d, d) = 0.5 * RealMatrix::Identity(d, d);
    g.bottomLeftCorner(d, d) = 0.5 * RealMatrix::Identity(d, d);
    return g;
}

RealMatrix standard_omega(Index m) {
    RealMatrix w = RealMatrix::Zero(2 * m, 2 * m);
    for (Index l = 0; l < m; ++l) {
        // omega(e_{2l}) = e*_{2l+1}, omega(e_{2l+1}) = -e*_{2l}
        w(2 * l + 1, 2 * l) = 1.0;
        w(2 * l, 2 * l + 1) = -1.0;
    }
    return w;
}

RealMatrix standard_complex_operator(Index n) {
    RealMatrix j = RealMatrix::Zero(2 * n, 2 * n);
    for (Index k = 0; k < n; ++k) {
        j(2 * k + 1, 2 * k) = 1.0;
        j(2 * k, 2 * k + 1) = -1.0;
    }
    return j;
}

ValidityCertificate validate(const RealMatrix& j, double tol) {
    if (j.rows() != j.cols()) {
        throw InputError("validate: J must be square");
    }
    if (j.rows() % 2 != 0) {
        throw InputError("validate: J must act on V + V*, got odd size " + std::to_string(j.rows()));
    }
    require_finite(j, "validate");
    const Index n = j.rows();
    const RealMatrix g = pairing_matrix(n / 2);
    ValidityCertificate cert;
    cert.square_residual = max_abs(RealMatrix(j * j + RealMatrix::Identity(n, n)));
    cert.orthogonality_residual = max_abs(RealMatrix(j.transpose() * g * j - g));
    cert.valid = cert.square_residual < tol && cert.orthogonality_residual < tol;
    return cert;
}

LinearGCStructure::LinearGCStructure(RealMatrix j, double tol)
    : j_(std::move(j)), tol_(tol), cert_(validate(j_, tol)) {}

LinearGCStructure complex_structure(Index n, double tol) {
    const RealMatrix j0 = standard_complex_operator(n);
    return LinearGCStructure(block_diag(-j0, j0.transpose()), tol);
}

LinearGCStructure symplectic_structure(Index m, double tol) {
    const Index d = 2 * m;
    const RealMatrix w = standard_omega(m);
    RealMatrix j = RealMatrix::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d) = -w.inverse();
    j.bottomLeftCorner(d, d) = w;
    return LinearGCStructure(std::move(j), tol);
}

LinearGCStructure product_structure(const LinearGCStructure& first, const LinearGCStructure& second) {
    const Index d1 = first.d();
    const Index d2 = second.d();
    const Index d = d1 + d2;
    // slot maps: factor coordinate -> product coordinate
    std::vector<Index> map1(2 * d1), map2(2 * d2);
    for (Index i = 0; i < d1; ++i) {
        map1[i] = i;
        map1[d1 + i] = d + i;
    }
    for (Index i = 0; i < d2; ++i) {
        map2[i] = d1 + i;
        map2[d2 + i] = d + d1 + i;
    }
    RealMatrix j = RealMatrix::Zero(2 * d, 2 * d);
    for (Index r = 0; r < 2 * d1; ++r) {
        for (Index c = 0; c < 2 * d1; ++c) {
            j(map1[r], map1[c]) = first.matrix()(r, c);
        }
    }
    for (Index r = 0; r < 2 * d2; ++r) {
        for (Index c = 0; c < 2 * d2; ++c) {
            j(map2[r], map2[c]) = second.matrix()(r, c);
        }
    }
    return LinearGCStructure(std::move(j), std::max(first.tol(), second.tol()));
}

LinearGCStructure standard_model(Index symplectic_m, Index complex_n, double tol) {
    if (symplectic_m < 0 || complex_n < 0 || symplectic_m + complex_n == 0) {
        throw InputError("standard_model: need M >= 0, N >= 0, not both zero");
    }
    if (symplectic_m == 0) {
        return complex_structure(complex_n, tol);
    }
    if (complex_n == 0) {
        return symplectic_structure(symplectic_m, tol);
    }
    return product_structure(symplectic_structure(symplectic_m, tol), complex_structure(complex_n, tol));
}

LinearGCStructure b_transform(const LinearGCStructure& j, const RealMatrix& b) {
    const Index d = j.d();
    require_antisymmetric(b, d, j.tol(), "b_transform");
    RealMatrix eb = RealMatrix::Identity(2 * d, 2 * d);
    eb.bottomLeftCorner(d, d) = b;
    RealMatrix emb = RealMatrix::Identity(2 * d, 2 * d);
    emb.bottomLeftCorner(d, d) = -b;
    return LinearGCStructure(emb * j.matrix() * eb, j.tol());
}

double isotropy_residual(const Subspace& l) {
    if (l.dim() == 0) {
        return 0.0;
    }
    const RealMatrix g = pairing_matrix(l.ambient_dim() / 2);
    return max_abs(ComplexMatrix(l.basis().transpose() * g.cast<Complex>() * l.basis()));
}

Eigenbundle eigenbundle(const LinearGCStructure& j) {
    const Index n = j.matrix().rows();
    const ComplexMatrix proj =
        0.5 * (ComplexMatrix::Identity(n, n) - kI * j.matrix().cast<Complex>());
    Subspace l = Subspace::span(proj, j.tol());
    Eigenbundle out{l};
    out.projector_rank = l.dim();
    out.isotropy_residual = isotropy_residual(l);
    const Subspace conj_l = conjugate(l);
    out.conjugate_overlap_dim = intersect(l, conj_l).dim();
    out.transversality_angle = min_principal_angle(l, conj_l);
    out.valid = j.valid() && out.projector_rank == j.d() && out.conjugate_overlap_dim == 0 &&
                out.isotropy_residual < j.tol();
    return out;
}

Subspace rho(const Subspace& l) {
    const Index d = l.ambient_dim() / 2;
    return Subspace::span(ComplexMatrix(l.basis().topRows(d)), l.tol(), 1.0);
}

TypeInfo type_of(const Subspace& l) {
    const Index d = l.ambient_dim() / 2;
    Subspace e = rho(l);
    const Subspace delta_c = intersect(e, conjugate(e));
    TypeInfo out{0, e, real_basis(delta_c)};
    out.type = d - e.dim();
    return out;
}

Subspace b_transform(const Subspace& l, const RealMatrix& b, double tol) {
    const Index d = l.ambient_dim() / 2;
    require_antisymmetric(b, d, tol, "b_transform");
    RealMatrix emb = RealMatrix::Identity(2 * d, 2 * d);
    emb.bottomLeftCorner(d, d) = -b;
    return apply_map(emb, l);
}

Subspace isotropic_from(const Subspace& e, const ComplexMatrix& sigma, const ComplexMatrix& extension) {
    return isotropic_on_basis(e.basis(), sigma, extension, e.tol());
}

IsotropicPresentation extract_presentation(const Subspace& l) {
    const Index d = l.ambient_dim() / 2;
    const double tol = l.tol();
    IsotropicPresentation out{l, rho(l), {}, 0.0, 0.0, {}, {}, 0.0, Subspace::zero(2 * d, tol), false, {}};
    if (l.dim() != d) {
        out.reason = "L has dimension " + std::to_string(l.dim()) + ", expected " + std::to_string(d);
        return out;
    }
    const ComplexMatrix& q = out.e.basis();
    const Index e = q.cols();
    const ComplexMatrix vec = l.basis().topRows(d);
    const ComplexMatrix cov = l.basis().bottomRows(d);
    // Each basis element (a, xi) of L demands sigma(a, .) = xi on E:
    // with a = Q c this is S^T c = Q^T xi, i.e. C^T S = X^T.
    const ComplexMatrix coords = q.adjoint() * vec;
    const ComplexMatrix restricted = q.transpose() * cov;
    if (e > 0) {
        const ComplexMatrix lhs = coords.transpose();
        out.sigma = lhs.colPivHouseholderQr().solve(ComplexMatrix(restricted.transpose()));
        out.sigma_fit_residual = max_abs(ComplexMatrix(lhs * out.sigma - restricted.transpose()));
        out.sigma_antisymmetry_residual = max_abs(ComplexMatrix(out.sigma + out.sigma.transpose()));
    } else {
        out.sigma = ComplexMatrix(0, 0);
    }

    const Subspace delta_c = intersect(out.e, conjugate(out.e));
    out.delta = real_basis(delta_c);
    const Index m = out.delta.cols();
    if (m > 0) {
        const ComplexMatrix y = q.adjoint() * out.delta.cast<Complex>();
        out.omega_delta = ComplexMatrix(y.transpose() * out.sigma * y).imag();
        Eigen::JacobiSVD<RealMatrix> svd(out.omega_delta);
        out.omega_min_singular = svd.singularValues()(m - 1);
    } else {
        out.omega_delta = RealMatrix(0, 0);
    }
    out.poisson = isotropic_on_basis(out.delta.cast<Complex>(), out.omega_delta.cast<Complex>(), {}, tol);

    const double scale = std::max(1.0, max_abs(out.sigma));
    if (out.sigma_fit_residual > tol * scale) {
        out.reason = "sigma system inconsistent";
    } else if (out.sigma_antisymmetry_residual > tol * scale) {
        out.reason = "sigma not antisymmetric";
    } else if (m > 0 && out.omega_min_singular <= tol * scale) {
        out.reason = "Omega_Delta degenerate";
    } else if (out.poisson.dim() != d) {
        out.reason = "Poisson structure has dimension " + std::to_string(out.poisson.dim());
    } else {
        out.valid = true;
    }
    return out;
}

Subspace dirac_pushforward(const RealMatrix& f, const Subspace& p) {
    const Index n = f.cols();
    const Index m = f.rows();
    if (p.ambient_dim() != 2 * n) {
        throw InputError("dirac_pushforward: map source dimension " + std::to_string(n) +
                         " does not match structure on dimension " + std::to_string(p.ambient_dim() / 2));
    }
    if (p.dim() != n) {
        throw InputError("dirac_pushforward: P is not a Dirac structure (dim " + std::to_string(p.dim()) + ")");
    }
    require_finite(f, "dirac_pushforward");
    // (A, eta) in V + W*  ->  (A, f^T eta) in V + V*
    RealMatrix pull = RealMatrix::Zero(2 * n, n + m);
    pull.topLeftCorner(n, n) = RealMatrix::Identity(n, n);
    pull.bottomRightCorner(n, m) = f.transpose();
    const Subspace s = preimage(pull, p);
    // (A, eta) -> (f A, eta)
    RealMatrix push = RealMatrix::Zero(2 * m, n + m);
    push.topLeftCorner(m, n) = f;
    push.bottomRightCorner(m, m) = RealMatrix::Identity(m, m);
    return apply_map(push, s);
}

GCMapReport is_gc_map(const RealMatrix& f, const IsotropicPresentation& source, const IsotropicPresentation& target,
                      double tol) {
    if (f.cols() != source.e.ambient_dim() || f.rows() != target.e.ambient_dim()) {
        throw InputError("is_gc_map: map is " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                         ", structures have dimensions " + std::to_string(source.e.ambient_dim()) + " -> " +
                         std::to_string(target.e.ambient_dim()));
    }
    GCMapReport out;
    out.e_condition.residual_angle = containment_angle(apply_map(f, source.e), target.e);
    out.e_condition.pass = out.e_condition.residual_angle < tol;
    const SubspaceComparison cmp = equal_subspaces(dirac_pushforward(f, source.poisson), target.poisson, tol);
    out.poisson_condition = {cmp.equal, cmp.max_angle};
    out.is_gc_map = out.e_condition.pass && out.poisson_condition.pass;
    return out;
}

InducedStructure induced_subspace_structure(const Subspace& v_prime, const Subspace& l) {
    const Index d = l.ambient_dim() / 2;
    if (v_prime.ambient_dim() != d) {
        throw InputError("induced_subspace_structure: V' lives in dimension " + std::to_string(v_prime.ambient_dim()) +
                         ", V has dimension " + std::to_string(d));
    }
    if (!v_prime.is_real()) {
        throw InputError("induced_subspace_structure: V' is not a real subspace");
    }
    const double tol = l.tol();
    InducedStructure out{real_basis(v_prime), Subspace::zero(0, tol)};
    const RealMatrix& frame = out.frame;
    const Index dp = frame.cols();

    RealMatrix slots = RealMatrix::Zero(2 * d, dp + d);
    slots.topLeftCorner(d, dp) = frame;
    slots.bottomRightCorner(d, d) = RealMatrix::Identity(d, d);
    const Subspace meet = intersect(l, Subspace::span(slots, tol));

    // (a, xi) -> (frame coordinates of a, xi restricted to V')
    RealMatrix restrict_map = RealMatrix::Zero(2 * dp, 2 * d);
    restrict_map.topLeftCorner(dp, d) = frame.transpose();
    restrict_map.bottomRightCorner(dp, d) = frame.transpose();
    out.l = apply_map(restrict_map, meet);
    out.maximal = out.l.dim() == dp;
    const Subspace conj_l = conjugate(out.l);
    out.transversality_angle = min_principal_angle(out.l, conj_l);
    out.is_gc_subspace = out.maximal && intersect(out.l, conj_l).dim() == 0;
    return out;
}

ImageStructure image_structure(const RealMatrix& f, const Subspace& l_source, const Subspace& l_target, double tol) {
    const Index n = f.cols();
    const Index m = f.rows();
    if (l_source.ambient_dim() != 2 * n || l_target.ambient_dim() != 2 * m) {
        throw InputError("image_structure: map dimensions do not match the structures");
    }
    if (numerical_rank(f, tol).rank != n) {
        throw InputError("image_structure: map is not injective");
    }
    ImageStructure out{induced_subspace_structure(Subspace::span(f, tol), l_target)};
    out.source_type = type_of(l_source).type;
    out.target_type = type_of(l_target).type;
    out.type_jump_holds = 2 * (out.target_type - out.source_type) == m - n;
    if (out.induced.maximal) {
        const TypeInfo image = type_of(out.induced.l);
        out.image_type = image.type;
        out.image_type_matches = image.type == out.source_type;
        const RealMatrix to_frame = out.induced.frame.transpose() * f;
        const SubspaceComparison cmp = equal_subspaces(apply_map(to_frame, rho(l_source)), image.e, tol);
        out.rho_matches = cmp.equal;
        out.rho_angle = cmp.max_angle;
    }
    return out;
}

}  // namespace gcprobe
