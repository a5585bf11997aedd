#pragma once

// Frechet, limiting, and singular subdifferentials as finitely generated
// convex bodies, with a liminf-definition sampling oracle for certification.
//
// Limiting subdifferentials are computed by declared-piece enumeration: the
// pieces whose closure meets x contribute their Frechet bodies, maxima add a
// mixture envelope, and the stored body is the convex hull of the pieces. A
// non-convex flag preserves the piece list for checkers that need it.

#include <vector>

#include "ebcert/functions.hpp"
#include "ebcert/geometry.hpp"

namespace ebcert {

enum class SubdiffKind { Frechet, Limiting };

struct Subdifferential {
  ConvexBody body;  // hull of the pieces below
  Mat singular;     // generators of the singular cone; zero columns = {0}
  SubdiffKind kind = SubdiffKind::Frechet;
  bool convex = true;
  std::vector<ConvexBody> pieces;  // populated when convex == false

  int dim() const { return body.dim(); }
};

Subdifferential frechet_subdiff(const FuncExpr& f, const Vec& x, int k_arc = 64);
Subdifferential limiting_subdiff(const FuncExpr& f, const Vec& x, int k_arc = 64);

/// Liminf-definition check: returns false iff a sampled u near x violates
///   f(u) - f(x) - <v, u-x> < -eta |u-x|.
/// Radii sweep delta0 * 2^-j; deterministic given the seed.
bool subdiff_membership_oracle(const FuncExpr& f, const Vec& x, const Vec& v, double eta,
                               int n_samples, std::uint64_t seed, double delta0 = 0.5);

/// conv({0} ∪ tau*body), the star hull [0,tau]*body for convex bodies.
ConvexBody scaled_union_hull(const ConvexBody& body, double tau);

}  // namespace ebcert
