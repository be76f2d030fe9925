#pragma once

// Sampled probes of the Stein conditions on product models. Every set-level
// claim here is about finite point sets (samples and grids), and hulls and
// polyhedra are relative to the supplied family only.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gcprobe/field_calculus.hpp"

namespace gcprobe {

struct GHFunction {
    std::string name;
    ComplexField f;
    bool verified = false;
};

struct PoissonMap {
    std::string name;
    VectorField f;  // values in R^2
    bool verified = false;
};

struct FunctionFamily {
    std::vector<GHFunction> gh_functions;
    std::vector<PoissonMap> poisson_maps;
};

/// Tags each member by gh_check_model / poisson_map_check on the samples.
void verify_family(FunctionFamily& family, const ModelChart& chart, const std::vector<RealVector>& samples,
                   const Box& box, const FieldOptions& options = {});

/// Points in the z_1-plane of the chart, all other coordinates zero: `rings`
/// circles with radii evenly spaced from r_inner to r_outer, `per_ring`
/// equally spaced angles on each.
std::vector<RealVector> annulus_samples(const ModelChart& chart, double r_inner, double r_outer, int rings,
                                        int per_ring);

/// Points lower + k * step inside the box, last coordinate fastest.
std::vector<RealVector> lattice(const Box& box, double step);

struct HullResult {
    std::vector<std::size_t> indices;  // into the grid, ascending
    std::vector<RealVector> points;
    std::vector<std::string> family;
};

/// Grid points p with |f(p)| <= max_K |f| + tol for every gh function.
HullResult o_hull(const std::vector<RealVector>& k, const FunctionFamily& family, const std::vector<RealVector>& grid,
                  double tol = kDefaultTol);

/// Hausdorff distance between planar points and the closed disc of the given
/// radius about the origin; the disc side is sampled on a polar grid of
/// 101 radii and 360 angles.
double hausdorff_to_disc(const std::vector<RealVector>& points, double radius);

struct IdempotenceResult {
    bool idempotent = false;
    std::size_t first_size = 0;
    std::size_t second_size = 0;
};

IdempotenceResult hull_idempotence_check(const std::vector<RealVector>& k, const FunctionFamily& family,
                                         const std::vector<RealVector>& grid, double tol = kDefaultTol);

enum class SeparationMode { gh_functions_only, include_poisson_maps };

struct PairVerdict {
    bool separated = false;
    std::string witness;
    double difference = 0.0;  // largest difference over admitted members
};

std::vector<PairVerdict> separability_probe(const std::vector<std::pair<RealVector, RealVector>>& pairs,
                                            const FunctionFamily& family, SeparationMode mode,
                                            double tol = kDefaultTol);

struct RankGap {
    Index rank = 0;
    Index expected = 0;
    double smallest_kept = 0.0;
    double largest_discarded = 0.0;
};

struct RegularityReport {
    RankGap real;     // Jacobian of all real components, expected d
    RankGap complex;  // [dg_i / dz_j], expected N
    bool regular = false;
};

/// maps: M Poisson maps; functions: at least N GH functions.
RegularityReport regularity_probe(const RealVector& x, const std::vector<VectorField>& maps,
                                  const std::vector<ComplexField>& functions, const ModelChart& chart, const Box& box,
                                  const FieldOptions& options = {});

/// Uniform draws in [0, 1) built directly from the 64-bit engine so that
/// seeded runs replay identically on every standard library.
class ReplayRng {
public:
    explicit ReplayRng(std::uint64_t seed) : engine_(seed) {}
    double uniform();
    double normal();
    /// Uniform in the closed ball of the given radius in C^n.
    ComplexVector in_ball(Index n, double radius);

private:
    std::mt19937_64 engine_;
};

enum class ReductionMode { regular, injective };

struct ReductionOptions {
    std::uint64_t seed = 42;
    int trials = 100;
    double radius = 0.1;
    ReductionMode mode = ReductionMode::regular;
    FieldOptions field;
};

struct ReductionResult {
    bool success = false;
    bool input_regular = false;
    bool input_injective = true;
    int trials_used = 0;
    ComplexVector c;
    std::vector<ComplexField> reduced;
    std::uint64_t seed = 0;
    std::string reason;
};

/// functions holds g_1..g_{N+1}; the result holds g_j - c_j g_{N+1}, j <= N.
ReductionResult reduce_regular_tuple(const std::vector<VectorField>& maps, const std::vector<ComplexField>& functions,
                                     const std::vector<RealVector>& k, const ModelChart& chart, const Box& box,
                                     const ReductionOptions& options = {});

struct ExhaustionLevel {
    std::vector<GHFunction> functions;
    std::vector<RealVector> k_samples;        // K_j
    std::vector<RealVector> outside_samples;  // K_{j+2} minus U_j
};

struct SublevelBound {
    double c = 0.0;
    double radius = 0.0;  // {f < c} on the grid must lie in |x| <= radius
};

struct SublevelResult {
    double c = 0.0;
    double radius = 0.0;
    bool contained = false;
    double farthest = 0.0;
    std::size_t count = 0;
};

struct ExhaustionOptions {
    int power_limit = 64;
    FieldOptions field;
};

struct ExhaustionResult {
    bool success = false;
    std::string reason;
    int failing_level = 0;  // 1-based, 0 if none
    std::vector<std::vector<int>> powers;
    ComplexField f;
    double max_on_k1 = 0.0;
    std::vector<double> min_outside;  // per level, min f over outside samples
    PshReport psh;
    std::vector<SublevelResult> sublevels;
};

/// f = sum_{j,l} |g_jl|^{2 m_jl} - 1 with sum_l |g_jl|^{2 m_jl} < 2^-j on K_j
/// and > j on the outside samples of level j; certified on the given samples.
ExhaustionResult exhaustion_build(const std::vector<ExhaustionLevel>& levels, const ModelChart& chart, const Box& box,
                                  const std::vector<RealVector>& certification_samples,
                                  const std::vector<RealVector>& grid, const std::vector<SublevelBound>& bounds,
                                  const ExhaustionOptions& options = {});

struct PolyhedronMember {
    std::string name;
    ComplexField g;
    double scale = 1.0;  // the polyhedron uses |g / scale|
};

struct MembershipVerdict {
    bool member = false;
    double max_modulus = 0.0;
};

std::vector<MembershipVerdict> polyhedron_membership(const std::vector<PolyhedronMember>& p,
                                                     const std::vector<RealVector>& points, double tol = kDefaultTol);

/// Grid points with radius - width <= |x| <= radius.
std::vector<RealVector> shell_points(const std::vector<RealVector>& grid, double radius, double width);

struct PolyhedronSearchOptions {
    double rescale_margin = 1e-3;
    double tol = kDefaultTol;
};

struct PolyhedronSearchResult {
    bool found = false;
    std::vector<PolyhedronMember> selected;
    std::optional<RealVector> uncovered;
    std::string reason;
};

PolyhedronSearchResult polyhedron_search(const std::vector<RealVector>& k, const std::vector<RealVector>& shell,
                                         const std::vector<GHFunction>& candidates,
                                         const PolyhedronSearchOptions& options = {});

}  // namespace gcprobe
