#pragma once

// Structured closed sets in R^n with exact distances, projections, and
// Frechet/limiting normal cones, plus a sampling oracle implementing the
// eps-normal definition directly.
//
// Sets are expression trees (halfspace systems, balls, singletons, unions,
// intersections, sublevel sets). Whenever the tree decomposes into convex
// pieces of the form {A x <= b} ∩ balls, distances and projections are
// computed exactly by KKT active-set enumeration; otherwise a seeded
// multi-start ray-search fallback refines to tol_dist.

#include <functional>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ebcert/base.hpp"
#include "ebcert/smallqp.hpp"

namespace ebcert {

class FuncExpr;
class SetExpr;
using FuncPtr = std::shared_ptr<const FuncExpr>;
using SetPtr = std::shared_ptr<const SetExpr>;

/// Intersection of finitely many halfspaces and closed balls. The exact
/// workhorse behind distances, projections and support functions.
struct ConvexPiece {
  Mat A;  // may have 0 rows
  Vec b;
  std::vector<std::pair<Vec, double>> balls;  // (center, radius)
  int dim = 0;

  int n_constraints() const { return static_cast<int>(A.rows() + balls.size()); }
  bool feasible(const Vec& x, double tol) const;
  /// Exact Euclidean projection; nullopt if the piece is empty.
  std::optional<Vec> project(const Vec& x) const;
  /// sup <d,u> over the piece; nullopt if unbounded. Throws EmptySet if empty.
  std::optional<double> support(const Vec& d) const;
  /// Exact test "the piece equals {a}" via support widths.
  bool is_singleton_at(const Vec& a) const;
  /// Normal-cone generators at a boundary point: active constraint gradients,
  /// or the full space when the piece is the singleton {a}.
  Mat normal_cone_generators(const Vec& a) const;
};

struct PieceEntry {
  ConvexPiece piece;
  bool empty = false;
  std::optional<Vec> singleton;  // set when the piece is a single point
};
struct PieceInfo {
  std::vector<PieceEntry> entries;
};

struct HalfspaceSystem {
  Mat A;  // m x n, {x : A x <= b}; m == 0 means the whole space
  Vec b;
};
struct BallSet {
  Vec center;
  double radius;  // closed ball; radius 0 is a singleton
};
struct SingletonSet {
  Vec point;
};
struct UnionSet {
  std::vector<SetPtr> parts;
};
struct IntersectionSet {
  std::vector<SetPtr> parts;
};
struct SublevelSetNode {
  FuncPtr f;
  double level;
};

class SetExpr {
 public:
  using Node =
      std::variant<HalfspaceSystem, BallSet, SingletonSet, UnionSet, IntersectionSet, SublevelSetNode>;

  int dim() const { return dim_; }
  const Node& node() const { return node_; }
  /// Convex-piece decomposition computed at construction; nullptr when the
  /// structure does not decompose (sublevel sets of general functions).
  const PieceInfo* piece_info() const { return pieces_.get(); }

  static SetPtr halfspaces(Mat A, Vec b);
  static SetPtr ball(Vec center, double radius);
  static SetPtr singleton(Vec point);
  static SetPtr unite(std::vector<SetPtr> parts);
  static SetPtr intersect(std::vector<SetPtr> parts);
  static SetPtr sublevel(FuncPtr f, double level);
  /// Canonical empty set ({x1 <= 0} ∩ {x1 >= 1}).
  static SetPtr empty(int dim);

 private:
  SetExpr(Node node, int dim) : node_(std::move(node)), dim_(dim) {}
  static SetPtr finish(Node node, int dim);

  Node node_;
  int dim_;
  std::shared_ptr<const PieceInfo> pieces_;
};

/// Raw decomposition of S into a union of convex pieces, if structure allows.
std::optional<std::vector<ConvexPiece>> convex_pieces(const SetExpr& S);

/// Finitely generated cone (conic hull of generators). No generators = {0}.
struct PolyhedralCone {
  Mat gens;  // dim x k, columns are generators (normalized)
  int dim = 0;
  bool certified = true;  // false when some generators failed oracle checks

  static PolyhedralCone zero(int d) { return {Mat(d, 0), d, true}; }
  static PolyhedralCone full(int d);
  bool is_zero() const { return gens.cols() == 0; }
};

/// V-represented convex body: conv(vertices) + cone(rays).
struct ConvexBody {
  Mat vertices;  // dim x nv, nv >= 1
  Mat rays;      // dim x nr, possibly empty

  int dim() const { return static_cast<int>(vertices.rows()); }
  static ConvexBody point(const Vec& p);
  static ConvexBody from_vertices(Mat V);
  bool bounded() const { return rays.cols() == 0; }
  double distance_to(const Vec& v) const { return body_distance(vertices, rays, v).dist; }
  bool contains(const Vec& v, double tol) const { return distance_to(v) <= tol; }
};

/// Convex hull of several bodies (vertex/ray concatenation, 2-D pruned).
ConvexBody hull_of(const std::vector<ConvexBody>& bodies);

// ---- operations ------------------------------------------------------------

double distance(const SetExpr& S, const Vec& x);
std::vector<Vec> project(const SetExpr& S, const Vec& x);
bool set_contains(const SetExpr& S, const Vec& x, double tol = tols().membership);

PolyhedralCone frechet_normal_cone(const SetExpr& S, const Vec& a);
PolyhedralCone limiting_normal_cone(const SetExpr& S, const Vec& a);

/// Definition-level check of the eps-normal inequality by sampling set points
/// near a: returns false iff some sample x in S violates
///   <v, x-a> > (eps + tol_cert) |x-a|.
/// Deterministic given the seed.
bool sampled_normal_test(const SetExpr& S, const Vec& a, const Vec& v, double eps, int n_samples,
                         std::uint64_t seed, double delta0 = 0.5);

/// v in cone(K) decided by nonnegative least squares at tolerance tol.
bool cone_membership(const PolyhedralCone& K, const Vec& v, double tol = tols().cert);

/// Intersection of finitely generated cones (dim <= 4).
PolyhedralCone cone_intersection(const std::vector<PolyhedralCone>& cones, int dim);

/// K ∩ unit ball as a V-represented body. Exact in 1-D; circular arcs are
/// discretized with k_arc vertices per full turn in 2-D; sphere directions in
/// 3-D (coarser, adequate at this desk scale).
ConvexBody cone_ball_slice(const PolyhedralCone& K, int k_arc = 64);

/// Seeded multi-start direction search: min distance from x to the set
/// {u : merit(u) <= 0} by root-finding along rays (coarse ladder + golden
/// dip localization + bisection) and pattern-refining the ray direction.
/// Used for sublevel sets and non-decomposable intersections; merit should be
/// continuous (e.g. f - level, or max of child distances).
double oracle_distance(const std::function<double(const Vec&)>& merit, const Vec& x,
                       std::uint64_t seed, double scan_limit = 64.0, Vec* argmin = nullptr);

}  // namespace ebcert
