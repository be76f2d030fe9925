#pragma once

// Tolerance-aware complex linear algebra. Every geometric object in the
// library (eigenbundles, projections of them, Dirac structures, pushforwards)
// is carried as a Subspace.
//
// Two different pairings appear on coordinate vectors and they must not be
// mixed up:
//   * the Hermitian product  u^H v  is used only to orthonormalize bases and
//     to measure angles;
//   * the bilinear product   u^T v  is the complexification of real
//     pairings (duality, the split form on V + V*). Annihilators and
//     isotropy tests always use this one.

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gcprobe {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr double kDefaultTol = 1e-9;

/// Thrown for malformed input: non-finite entries, mismatched dimensions,
/// arguments outside an operation's domain.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// How a numerical rank was decided: the smallest retained pivot and the
/// largest discarded one, both already divided by the reference scale.
struct RankDecision {
    Index rank = 0;
    double smallest_kept = 0.0;
    double largest_discarded = 0.0;
};

void require_finite(const ComplexMatrix& m, const char* what);
void require_finite(const RealMatrix& m, const char* what);

/// Immutable complex column span with an orthonormal basis.
class Subspace {
public:
    /// Column space of `columns`. Rank is decided by column-pivoted
    /// Householder QR: pivots above tol * (largest column norm) are kept.
    static Subspace span(const ComplexMatrix& columns, double tol = kDefaultTol);
    static Subspace span(const RealMatrix& columns, double tol = kDefaultTol);
    /// Same, with the threshold scale floored at `reference_scale`. Used when
    /// the columns are images under a map and may all be round-off.
    static Subspace span(const ComplexMatrix& columns, double tol, double reference_scale);
    static Subspace zero(Index ambient_dim, double tol = kDefaultTol);
    static Subspace whole(Index ambient_dim, double tol = kDefaultTol);

    Index ambient_dim() const { return basis_.rows(); }
    Index dim() const { return basis_.cols(); }
    double tol() const { return tol_; }
    const ComplexMatrix& basis() const { return basis_; }
    const RankDecision& rank_decision() const { return rank_; }

    /// Orthogonal projector Q Q^H.
    ComplexMatrix projector() const;

    /// Relative distance of v from the subspace, ||(I - P)v|| / ||v||.
    double membership_residual(const ComplexVector& v) const;

    bool is_real() const;

private:
    Subspace(ComplexMatrix basis, double tol, RankDecision rank);

    ComplexMatrix basis_;
    double tol_ = kDefaultTol;
    RankDecision rank_;
};

/// Orthonormal basis of the kernel of m, singular values below
/// tol * max(1, sigma_max) count as zero.
ComplexMatrix null_space(const ComplexMatrix& m, double tol = kDefaultTol);

Subspace intersect(const Subspace& a, const Subspace& b);
Subspace subspace_sum(const Subspace& a, const Subspace& b);
Subspace conjugate(const Subspace& a);

/// Covectors (in coordinate-dual components) vanishing on a under the
/// bilinear evaluation eta^T v.
Subspace annihilator(const Subspace& a);

/// Image of a under the linear map.
Subspace apply_map(const ComplexMatrix& map, const Subspace& a);
Subspace apply_map(const RealMatrix& map, const Subspace& a);

/// { x : map * x in a }.
Subspace preimage(const ComplexMatrix& map, const Subspace& a);
Subspace preimage(const RealMatrix& map, const Subspace& a);

struct SubspaceComparison {
    bool equal = false;
    double max_angle = 0.0;
};

/// Equality through principal angles. Different dimensions compare unequal
/// with angle pi/2.
SubspaceComparison equal_subspaces(const Subspace& a, const Subspace& b, double tol = kDefaultTol);

/// Largest angle between a vector of a and the subspace b. Zero iff a is
/// contained in b.
double containment_angle(const Subspace& a, const Subspace& b);

/// Real orthonormal basis of a conjugation-stable subspace, built from the
/// real and imaginary parts of its basis. Throws InputError if a is not real.
RealMatrix real_basis(const Subspace& a);

/// Orthonormal columns spanning the real column space of m.
RealMatrix real_span(const RealMatrix& m, double tol = kDefaultTol);

/// Numerical rank with the same relative rule as Subspace::span.
RankDecision numerical_rank(const ComplexMatrix& m, double tol = kDefaultTol);
RankDecision numerical_rank(const RealMatrix& m, double tol = kDefaultTol);

}  // namespace gcprobe
