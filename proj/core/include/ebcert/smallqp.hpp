#pragma once

// Small dense building blocks used throughout: nonnegative least squares,
// polyhedral-cone conversions between generator and inequality form,
// convex-hull facet enumeration in dimensions 1-3, and distance to a
// V-represented convex body. Everything here targets desk-scale sizes
// (n <= 8, a few dozen generators) and favors exactness over asymptotics.

#include "ebcert/base.hpp"

namespace ebcert {

struct NnlsResult {
  Vec lambda;      // nonnegative coefficients
  Vec fitted;      // G * lambda
  double residual; // |G*lambda - v|
};

/// Lawson-Hanson active-set NNLS: min |G*lambda - v| s.t. lambda >= 0.
/// Columns of G are the generators.
NnlsResult nnls(const Mat& G, const Vec& v);

/// Euclidean projection of v onto cone(columns of G). Empty G = {0}.
Vec cone_project_generators(const Mat& G, const Vec& v);

/// Extreme directions of {v : A v <= 0}. Lineality space contributes +/- a
/// basis. Returns columns = unit generators; empty matrix means the cone is
/// {0}. Intended for small dimensions (enumeration over row subsets).
Mat cone_h_to_v(const Mat& A, int dim);

/// Inequality form of cone(columns of G): rows M with cone = {v: M v <= 0}.
/// An M with zero rows means the cone is the whole space.
Mat cone_v_to_h(const Mat& G, int dim);

/// Facet representation of a full-dimensional polytope conv(points) given as
/// columns. Each facet is (normal, offset) with <normal, x> <= offset for all
/// points and equality on the facet. dim(points) must be 1, 2 or 3.
struct Facet {
  Vec normal;
  double offset;
};
std::vector<Facet> polytope_facets(const Mat& pts);

/// Distance from p to conv(V) + cone(R) (columns). Accelerated projected
/// gradient on the simplex/nonnegative weights; exact enough for certificate
/// tolerances (residuals ~1e-10 at these sizes).
struct BodyDistResult {
  double dist;
  Vec point;  // nearest point found
};
BodyDistResult body_distance(const Mat& V, const Mat& R, const Vec& p, int iters = 1200);

/// Projection of w onto the probability simplex {w >= 0, sum w = 1}.
Vec project_simplex(const Vec& w);

/// Affine rank and orthonormal basis of span(points - points.col(0)).
/// Returns basis columns (may be empty for a single point).
Mat affine_basis(const Mat& pts, double tol = 1e-10);

}  // namespace ebcert
