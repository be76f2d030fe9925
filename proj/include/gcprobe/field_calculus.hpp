#pragma once

// Pointwise differential checks for structures given as fields on a
// coordinate box in R^d. Every derivative is a central difference with step
// h = fd_step * (1 + |x|_inf). Second derivatives use 10 h. A point is
// accepted only if it sits at least two stencil reaches inside the box.

#include <functional>
#include <memory>
#include <vector>

#include "gcprobe/gc_linear.hpp"

namespace gcprobe {

inline constexpr double kDefaultFdStep = 1e-5;
inline constexpr double kDefaultFieldTol = 1e-6;
inline constexpr double kDefaultStrictness = 1e-6;
inline constexpr double kSecondStepFactor = 10.0;

using RealField = std::function<double(const RealVector&)>;
using ComplexField = std::function<Complex(const RealVector&)>;
using VectorField = std::function<RealVector(const RealVector&)>;
using MatrixField = std::function<RealMatrix(const RealVector&)>;

struct Box {
    RealVector lower;
    RealVector upper;

    static Box cube(Index d, double half_width);
    Index dim() const { return lower.size(); }
    bool contains(const RealVector& x) const;
    double distance_to_boundary(const RealVector& x) const;
};

double fd_step_at(const RealVector& x, double fd_step);

/// Throws InputError unless x is at least `reach` inside the box.
void require_margin(const Box& box, const RealVector& x, double reach, const char* what);

ComplexVector fd_gradient(const ComplexField& f, const RealVector& x, double h);
/// (k, j) = d_j F^k.
RealMatrix fd_jacobian(const VectorField& f, const RealVector& x, double h);
/// Symmetric by construction: each mixed entry is computed once.
RealMatrix fd_hessian(const RealField& f, const RealVector& x, double h);

struct Section {
    VectorField vector_part;
    VectorField covector_part;

    static Section constant(RealVector vector, RealVector covector);
};

struct CourantValue {
    RealVector vector;
    RealVector covector;
    double max_abs() const;
};

/// [A1, A2]_Lie + L_{A1} xi2 - L_{A2} xi1 - 1/2 d(i_{A1} xi2 - i_{A2} xi1) at x.
CourantValue courant_bracket(const Section& s1, const Section& s2, const RealVector& x, const Box& box,
                             double fd_step = kDefaultFdStep);

/// J(x) on a box, with per-point validity certificates computed lazily and
/// cached. Copies share the cache.
class StructureField {
public:
    StructureField(Box box, MatrixField j_at, double fd_step = kDefaultFdStep, double tol = kDefaultTol);
    static StructureField constant(const LinearGCStructure& j, Box box, double fd_step = kDefaultFdStep);

    Index d() const { return box_.dim(); }
    const Box& box() const { return box_; }
    double fd_step() const { return fd_step_; }
    double tol() const { return tol_; }

    RealMatrix j(const RealVector& x) const;
    ValidityCertificate certificate(const RealVector& x) const;

private:
    struct Cache;

    Box box_;
    MatrixField j_at_;
    double fd_step_;
    double tol_;
    std::shared_ptr<Cache> cache_;
};

/// N(C, D) = [JC, JD] - J[JC, D] - J[C, JD] - [C, D] at x.
CourantValue nijenhuis_tensor(const StructureField& field, const Section& c, const Section& d, const RealVector& x);

/// Max-abs of N over all pairs of coordinate frame sections (e_i, 0), (0, dx_i).
double nijenhuis_residual(const StructureField& field, const RealVector& x);

/// Max-abs over x of dB, B a 2-form field given by its antisymmetric matrix.
double closedness_residual(const MatrixField& b, const RealVector& x, const Box& box, double fd_step = kDefaultFdStep);

/// e^{-B(x)} J(x) e^{B(x)} pointwise. Closedness is not enforced here.
StructureField b_transform(const StructureField& field, const MatrixField& b);

struct DLValue {
    ComplexMatrix l_basis;    // orthonormal basis of L_x
    ComplexVector components; // rho(A_i) . grad f
    double norm = 0.0;
};

DLValue d_l_function(const ComplexField& f, const StructureField& field, const RealVector& x);

/// Coordinates (p_1..p_2M, x_1, y_1, ..., x_N, y_N), z_j = x_j + i y_j.
struct ModelChart {
    Index m = 0;
    Index n = 0;

    Index d() const { return 2 * m + 2 * n; }
    Index p_index(Index l) const { return l; }
    Index x_index(Index j) const { return 2 * m + 2 * j; }
    Index y_index(Index j) const { return 2 * m + 2 * j + 1; }
    LinearGCStructure structure() const { return standard_model(m, n); }
    StructureField field(const Box& box, double fd_step = kDefaultFdStep) const;
};

struct FieldOptions {
    double fd_step = kDefaultFdStep;
    double tol = kDefaultFieldTol;
    double strictness = kDefaultStrictness;
};

struct GHSample {
    RealVector x;
    double zbar_residual = 0.0;  // max_j |df/dzbar_j|
    double p_residual = 0.0;     // max_l |df/dp_l|
    double dl_norm = 0.0;
};

struct GHReport {
    double max_zbar = 0.0;
    double max_p = 0.0;
    double max_dl = 0.0;
    bool gh = false;      // both residual families below tol
    bool dl_gh = false;   // d_L norm below 10 tol
    bool agree = false;
    std::vector<GHSample> samples;
};

GHReport gh_check_model(const ComplexField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                        const Box& box, const FieldOptions& options = {});

/// omega_0^{-1} on R^{2M} followed by zeros on C^N.
RealMatrix source_bivector(const ModelChart& chart);

struct PoissonSample {
    RealVector x;
    double residual = 0.0;
};

struct PoissonReport {
    double max_residual = 0.0;
    bool pass = false;
    std::vector<PoissonSample> samples;
};

/// f takes values in R^2 with target bivector omega_0^{-1}.
PoissonReport poisson_map_check(const VectorField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                                const Box& box, const FieldOptions& options = {});

struct LeviSample {
    RealVector x;
    double leafwise = 0.0;
    ComplexMatrix levi;
    double min_eigenvalue = 0.0;
    double hermitian_residual = 0.0;
};

struct PshReport {
    double leafwise_residual = 0.0;
    double min_eigenvalue = 0.0;
    double hermitian_residual = 0.0;
    bool psh = false;
    bool strictly_psh = false;
    std::vector<LeviSample> samples;
};

/// f must be real-valued on the samples; a non-real value is an InputError.
PshReport l_psh_check(const ComplexField& f, const ModelChart& chart, const std::vector<RealVector>& samples,
                      const Box& box, const FieldOptions& options = {});

/// Levi matrix H_ij = d^2 f / dz_i dzbar_j from the real Hessian of f.
ComplexMatrix levi_matrix(const RealMatrix& hessian, const ModelChart& chart);

}  // namespace gcprobe
