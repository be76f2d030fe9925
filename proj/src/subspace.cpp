#include "gcprobe/subspace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gcprobe {

namespace {

template <typename Matrix>
RankDecision pivoted_rank(const Eigen::ColPivHouseholderQR<Matrix>& qr, double scale, double tol) {
    RankDecision out;
    const Index n = std::min(qr.rows(), qr.cols());
    if (n == 0 || scale == 0.0) {
        return out;
    }
    const auto& r = qr.matrixQR();
    const double threshold = tol * scale;
    Index rank = 0;
    while (rank < n && std::abs(r(rank, rank)) > threshold) {
        ++rank;
    }
    out.rank = rank;
    out.smallest_kept = rank > 0 ? std::abs(r(rank - 1, rank - 1)) / scale : 0.0;
    out.largest_discarded = rank < n ? std::abs(r(rank, rank)) / scale : 0.0;
    return out;
}

}  // namespace

void require_finite(const ComplexMatrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": non-finite entry");
    }
}

void require_finite(const RealMatrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": non-finite entry");
    }
}

Subspace::Subspace(ComplexMatrix basis, double tol, RankDecision rank)
    : basis_(std::move(basis)), tol_(tol), rank_(rank) {}

Subspace Subspace::span(const ComplexMatrix& columns, double tol) {
    return span(columns, tol, 0.0);
}

Subspace Subspace::span(const ComplexMatrix& columns, double tol, double reference_scale) {
    if (!(tol > 0.0)) {
        throw InputError("span: tolerance must be positive");
    }
    require_finite(columns, "span");
    const Index n = columns.rows();
    if (columns.cols() == 0) {
        return Subspace(ComplexMatrix(n, 0), tol, {});
    }
    const double scale = std::max(columns.colwise().norm().maxCoeff(), reference_scale);
    if (scale == 0.0) {
        return Subspace(ComplexMatrix(n, 0), tol, {});
    }
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(columns);
    const RankDecision rank = pivoted_rank(qr, scale, tol);
    ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, rank.rank);
    return Subspace(std::move(q), tol, rank);
}

Subspace Subspace::span(const RealMatrix& columns, double tol) {
    return span(ComplexMatrix(columns.cast<Complex>()), tol);
}

Subspace Subspace::zero(Index ambient_dim, double tol) {
    return Subspace(ComplexMatrix(ambient_dim, 0), tol, {});
}

Subspace Subspace::whole(Index ambient_dim, double tol) {
    RankDecision rank{ambient_dim, 1.0, 0.0};
    return Subspace(ComplexMatrix::Identity(ambient_dim, ambient_dim), tol, rank);
}

ComplexMatrix Subspace::projector() const {
    return basis_ * basis_.adjoint();
}

double Subspace::membership_residual(const ComplexVector& v) const {
    const double norm = v.norm();
    if (norm == 0.0) {
        return 0.0;
    }
    const ComplexVector rest = v - basis_ * (basis_.adjoint() * v);
    return rest.norm() / norm;
}

bool Subspace::is_real() const {
    return containment_angle(conjugate(*this), *this) < tol_;
}

ComplexMatrix null_space(const ComplexMatrix& m, double tol) {
    const Index n = m.cols();
    if (n == 0) {
        return ComplexMatrix(0, 0);
    }
    if (m.rows() == 0) {
        return ComplexMatrix::Identity(n, n);
    }
    Eigen::JacobiSVD<ComplexMatrix> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double scale = std::max(1.0, sv.size() > 0 ? sv(0) : 0.0);
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > tol * scale) {
        ++rank;
    }
    return svd.matrixV().rightCols(n - rank);
}

namespace {

void require_same_ambient(const Subspace& a, const Subspace& b, const char* what) {
    if (a.ambient_dim() != b.ambient_dim()) {
        throw InputError(std::string(what) + ": ambient dimensions differ (" +
                         std::to_string(a.ambient_dim()) + " vs " + std::to_string(b.ambient_dim()) + ")");
    }
}

double common_tol(const Subspace& a, const Subspace& b) {
    return std::max(a.tol(), b.tol());
}

// Kernel basis is already orthonormal; wrap it without another factorization.
Subspace from_orthonormal(const ComplexMatrix& q, double tol) {
    if (q.cols() == 0) {
        return Subspace::zero(q.rows(), tol);
    }
    return Subspace::span(q, tol);
}

}  // namespace

Subspace intersect(const Subspace& a, const Subspace& b) {
    require_same_ambient(a, b, "intersect");
    const Index n = a.ambient_dim();
    const ComplexMatrix id = ComplexMatrix::Identity(n, n);
    ComplexMatrix stacked(2 * n, n);
    stacked.topRows(n) = id - a.projector();
    stacked.bottomRows(n) = id - b.projector();
    const double tol = common_tol(a, b);
    return from_orthonormal(null_space(stacked, tol), tol);
}

Subspace subspace_sum(const Subspace& a, const Subspace& b) {
    require_same_ambient(a, b, "subspace_sum");
    ComplexMatrix cols(a.ambient_dim(), a.dim() + b.dim());
    cols << a.basis(), b.basis();
    return Subspace::span(cols, common_tol(a, b));
}

Subspace conjugate(const Subspace& a) {
    if (a.dim() == 0) {
        return Subspace::zero(a.ambient_dim(), a.tol());
    }
    return Subspace::span(ComplexMatrix(a.basis().conjugate()), a.tol());
}

Subspace annihilator(const Subspace& a) {
    const Index n = a.ambient_dim();
    if (a.dim() == 0) {
        return Subspace::whole(n, a.tol());
    }
    return from_orthonormal(null_space(a.basis().transpose(), a.tol()), a.tol());
}

Subspace apply_map(const ComplexMatrix& map, const Subspace& a) {
    if (map.cols() != a.ambient_dim()) {
        throw InputError("apply_map: map has " + std::to_string(map.cols()) + " columns, subspace lives in dimension " +
                         std::to_string(a.ambient_dim()));
    }
    require_finite(map, "apply_map");
    if (a.dim() == 0) {
        return Subspace::zero(map.rows(), a.tol());
    }
    const double map_scale = map.size() == 0 ? 0.0 : map.colwise().norm().maxCoeff();
    return Subspace::span(ComplexMatrix(map * a.basis()), a.tol(), map_scale);
}

Subspace apply_map(const RealMatrix& map, const Subspace& a) {
    return apply_map(ComplexMatrix(map.cast<Complex>()), a);
}

Subspace preimage(const ComplexMatrix& map, const Subspace& a) {
    if (map.rows() != a.ambient_dim()) {
        throw InputError("preimage: map has " + std::to_string(map.rows()) + " rows, subspace lives in dimension " +
                         std::to_string(a.ambient_dim()));
    }
    require_finite(map, "preimage");
    const Index n = a.ambient_dim();
    const ComplexMatrix residual_map = (ComplexMatrix::Identity(n, n) - a.projector()) * map;
    return from_orthonormal(null_space(residual_map, a.tol()), a.tol());
}

Subspace preimage(const RealMatrix& map, const Subspace& a) {
    return preimage(ComplexMatrix(map.cast<Complex>()), a);
}

double containment_angle(const Subspace& a, const Subspace& b) {
    require_same_ambient(a, b, "containment_angle");
    if (a.dim() == 0) {
        return 0.0;
    }
    const ComplexMatrix outside = a.basis() - b.basis() * (b.basis().adjoint() * a.basis());
    Eigen::JacobiSVD<ComplexMatrix> svd(outside);
    const double s = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    return std::asin(std::clamp(s, 0.0, 1.0));
}

SubspaceComparison equal_subspaces(const Subspace& a, const Subspace& b, double tol) {
    require_same_ambient(a, b, "equal_subspaces");
    if (a.dim() != b.dim()) {
        return {false, std::numbers::pi / 2};
    }
    const double angle = containment_angle(a, b);
    return {angle < tol, angle};
}

RealMatrix real_span(const RealMatrix& m, double tol) {
    const Index n = m.rows();
    if (m.cols() == 0) {
        return RealMatrix(n, 0);
    }
    const double scale = m.colwise().norm().maxCoeff();
    if (scale == 0.0) {
        return RealMatrix(n, 0);
    }
    Eigen::ColPivHouseholderQR<RealMatrix> qr(m);
    const RankDecision rank = pivoted_rank(qr, scale, tol);
    return qr.householderQ() * RealMatrix::Identity(n, rank.rank);
}

RealMatrix real_basis(const Subspace& a) {
    if (!a.is_real()) {
        throw InputError("real_basis: subspace is not stable under conjugation");
    }
    const Index n = a.ambient_dim();
    if (a.dim() == 0) {
        return RealMatrix(n, 0);
    }
    RealMatrix parts(n, 2 * a.dim());
    parts << a.basis().real(), a.basis().imag();
    RealMatrix q = real_span(parts, a.tol());
    if (q.cols() != a.dim()) {
        throw InputError("real_basis: real form has dimension " + std::to_string(q.cols()) + ", expected " +
                         std::to_string(a.dim()));
    }
    return q;
}

RankDecision numerical_rank(const ComplexMatrix& m, double tol) {
    require_finite(m, "numerical_rank");
    if (m.cols() == 0 || m.rows() == 0) {
        return {};
    }
    const double scale = m.colwise().norm().maxCoeff();
    if (scale == 0.0) {
        return {};
    }
    Eigen::ColPivHouseholderQR<ComplexMatrix> qr(m);
    return pivoted_rank(qr, scale, tol);
}

RankDecision numerical_rank(const RealMatrix& m, double tol) {
    require_finite(m, "numerical_rank");
    if (m.cols() == 0 || m.rows() == 0) {
        return {};
    }
    const double scale = m.colwise().norm().maxCoeff();
    if (scale == 0.0) {
        return {};
    }
    Eigen::ColPivHouseholderQR<RealMatrix> qr(m);
    return pivoted_rank(qr, scale, tol);
}

}  // namespace gcprobe
