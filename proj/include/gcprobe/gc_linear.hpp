#pragma once

// Linear generalized complex structures on a real vector space V of
// dimension d. Coordinates on V + V* put the d vector slots first and the d
// covector slots last; V (x) C is complex coordinate vectors of length d with
// entrywise conjugation.
//
// The split pairing <A + xi, B + eta> = (xi(B) + eta(A)) / 2 has Gram matrix
// G = 1/2 [[0, I], [I, 0]]. It is extended to complex vectors BILINEARLY:
// isotropy is u^T G v = 0, never u^H G v.

#include <string>

#include "gcprobe/subspace.hpp"

namespace gcprobe {

/// 1/2 [[0, I], [I, 0]] of size 2d.
RealMatrix pairing_matrix(Index d);

/// Matrix W with omega(A) = W A for the standard symplectic form
/// sum dp_{2l-1} ^ dp_{2l} on R^{2m}.
RealMatrix standard_omega(Index m);

/// Standard complex structure on R^{2n} = C^n, J0 e_{2j-1} = e_{2j}.
RealMatrix standard_complex_operator(Index n);

struct ValidityCertificate {
    double square_residual = 0.0;         // ||J^2 + I||_max
    double orthogonality_residual = 0.0;  // ||J^T G J - G||_max
    bool valid = false;
};

/// Throws InputError when J is not square of even size or has non-finite
/// entries; an invalid structure is reported through the certificate.
ValidityCertificate validate(const RealMatrix& j, double tol = kDefaultTol);

/// A real automorphism of V + V*, carried together with its certificate.
class LinearGCStructure {
public:
    explicit LinearGCStructure(RealMatrix j, double tol = kDefaultTol);

    /// dim_R V.
    Index d() const { return j_.rows() / 2; }
    const RealMatrix& matrix() const { return j_; }
    double tol() const { return tol_; }
    const ValidityCertificate& certificate() const { return cert_; }
    bool valid() const { return cert_.valid; }

private:
    RealMatrix j_;
    double tol_;
    ValidityCertificate cert_;
};

LinearGCStructure complex_structure(Index n, double tol = kDefaultTol);
LinearGCStructure symplectic_structure(Index m, double tol = kDefaultTol);
LinearGCStructure product_structure(const LinearGCStructure& first, const LinearGCStructure& second);

/// R^{2M} with omega_0 times C^N. Symplectic coordinates come first.
LinearGCStructure standard_model(Index symplectic_m, Index complex_n, double tol = kDefaultTol);

/// e^{-B} J e^{B} with e^B = [[I, 0], [B, I]].
LinearGCStructure b_transform(const LinearGCStructure& j, const RealMatrix& b);

struct Eigenbundle {
    Subspace l;
    Index projector_rank = 0;
    double isotropy_residual = 0.0;      // ||L^T G L||_max on the basis
    double transversality_angle = 0.0;   // dim(L cap conj L) == 0 reported via this angle
    Index conjugate_overlap_dim = 0;
    bool valid = false;
};

/// Column space of (I - iJ)/2.
Eigenbundle eigenbundle(const LinearGCStructure& j);

struct TypeInfo {
    Index type = 0;
    Subspace e;        // rho(L)
    RealMatrix delta;  // real orthonormal basis of Delta, E cap conj E = Delta (x) C
};

/// Projection to the vector slots.
Subspace rho(const Subspace& l);

/// k = d - dim_C rho(L).
TypeInfo type_of(const Subspace& l);

/// { A + xi - B A : A + xi in L }. B must be antisymmetric.
Subspace b_transform(const Subspace& l, const RealMatrix& b, double tol = kDefaultTol);

/// Maximal isotropic L(E, sigma). `sigma` is the matrix of the 2-form on the
/// orthonormal basis of E (sigma(Q c, Q y) = c^T S y). Optional `extension`
/// (d x dim E) is added to the covector parts after projection onto Ann(E);
/// the result does not depend on it.
Subspace isotropic_from(const Subspace& e, const ComplexMatrix& sigma, const ComplexMatrix& extension = {});

struct IsotropicPresentation {
    Subspace l;
    Subspace e;
    ComplexMatrix sigma;  // on e.basis()
    double sigma_fit_residual = 0.0;
    double sigma_antisymmetry_residual = 0.0;
    RealMatrix delta;        // real orthonormal basis of Delta
    RealMatrix omega_delta;  // Im sigma restricted to Delta, on the delta basis
    double omega_min_singular = 0.0;
    Subspace poisson;
    bool valid = false;
    std::string reason;
};

IsotropicPresentation extract_presentation(const Subspace& l);

/// Dirac pushforward along f: V -> W (f is dim W x dim V, real).
/// f_* P = { f A + eta : A + f^T eta in P }.
Subspace dirac_pushforward(const RealMatrix& f, const Subspace& p);

struct ConditionResult {
    bool pass = false;
    double residual_angle = 0.0;
};

struct GCMapReport {
    ConditionResult e_condition;        // f(E_V) inside E_W
    ConditionResult poisson_condition;  // f_* P_V == P_W
    bool is_gc_map = false;
};

GCMapReport is_gc_map(const RealMatrix& f, const IsotropicPresentation& source, const IsotropicPresentation& target,
                      double tol = kDefaultTol);

struct InducedStructure {
    RealMatrix frame;  // real orthonormal basis of V' inside V
    Subspace l;        // lives in V' + V'* (2 dim V' coordinates, frame coordinates)
    bool maximal = false;
    bool is_gc_subspace = false;
    double transversality_angle = 0.0;
};

/// Structure induced on the real subspace V' from L. Throws InputError if V'
/// is not conjugation-stable.
InducedStructure induced_subspace_structure(const Subspace& v_prime, const Subspace& l);

struct ImageStructure {
    InducedStructure induced;
    Index source_type = 0;
    Index target_type = 0;
    Index image_type = 0;
    bool type_jump_holds = false;       // typ(W) - typ(V) == (dim W - dim V) / 2
    bool image_type_matches = false;    // typ(L_f(V)) == typ(V)
    bool rho_matches = false;           // rho(L_f(V)) == f(rho(L_V)) in f(V) coordinates
    double rho_angle = 0.0;
};

/// Induced structure on f(V) for an injective f: V -> W, together with the
/// type-jump test. Throws InputError if f is not injective.
ImageStructure image_structure(const RealMatrix& f, const Subspace& l_source, const Subspace& l_target,
                               double tol = kDefaultTol);

/// Largest absolute entry of L^T G L over the basis of L.
double isotropy_residual(const Subspace& l);

}  // namespace gcprobe
