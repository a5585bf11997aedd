#pragma once

// Structured extended-real-valued functions and smooth vector maps:
// evaluation, gradients, positive part, and symbolic solution sets.
//
// The expression grammar covers affine and quadratic functions, distances
// to structured sets, finite maxima, convex-with-smooth compositions and
// scaled norms. Two hard-coded one-dimensional specials live here as well:
// the discontinuous epigraph counterexample (1 for x>0, x for x<=0) and an
// lsc step used to exhibit boundary-condition failures. Everything else in
// the grammar is finite-valued and continuous.

#include <memory>
#include <variant>
#include <vector>

#include "ebcert/base.hpp"
#include "ebcert/geometry.hpp"

namespace ebcert {

struct SmoothMap;
using MapPtr = std::shared_ptr<const SmoothMap>;

enum class BuiltinKind {
  Lemma25Counterexample,  // f(x) = 1 (x>0), x (x<=0); lsc, not continuous at 0
  LscStep,                // f(x) = 1 (x>0), -1 (x<=0); lsc step
};

struct AffineFn {
  Vec a;
  double b;
};
struct QuadraticFn {  // x^T Q x + c.x + d, Q symmetric
  Mat Q;
  Vec c;
  double d;
};
struct DistToFn {
  SetPtr set;
};
struct MaxFn {
  std::vector<FuncPtr> children;
};
struct ComposeFn {  // g(psi(x)), g convex (validated by sampling)
  FuncPtr g;
  MapPtr psi;
};
struct NormScaledFn {  // weight * |x|
  double weight;
};
struct ScaleFn {  // c * child(x); internal plumbing (rescaling batteries)
  double c;
  FuncPtr child;
};
struct BuiltinFn {
  BuiltinKind kind;
};

class FuncExpr {
 public:
  using Node = std::variant<AffineFn, QuadraticFn, DistToFn, MaxFn, ComposeFn, NormScaledFn,
                            ScaleFn, BuiltinFn>;

  int dim() const { return dim_; }
  const Node& node() const { return node_; }

  static FuncPtr affine(Vec a, double b);
  static FuncPtr quadratic(Mat Q, Vec c, double d);
  static FuncPtr dist(SetPtr S);
  static FuncPtr max_of(std::vector<FuncPtr> children);
  /// Validates midpoint convexity of g on a seeded sample and throws on
  /// violation; surjectivity of the Jacobian is checked where it is needed.
  static FuncPtr compose(FuncPtr g, MapPtr psi, std::uint64_t check_seed = 20240901);
  static FuncPtr norm_scaled(double weight, int dim);
  static FuncPtr scale(double c, FuncPtr child);
  static FuncPtr builtin(BuiltinKind kind);

 private:
  FuncExpr(Node node, int dim) : node_(std::move(node)), dim_(dim) {}
  Node node_;
  int dim_;
};

/// Smooth vector map psi : R^n -> R^m with affine/quadratic components, so
/// Jacobians are exact.
struct SmoothMap {
  std::vector<FuncPtr> components;
  int domain_dim = 0;
  int codomain_dim = 0;

  static MapPtr make(std::vector<FuncPtr> components);
  static MapPtr identity(int n);
  static MapPtr affine_map(Mat W, Vec t);  // x -> W x + t

  /// The (W, t) pair when every component is affine.
  bool affine_parts(Mat& W, Vec& t) const;
};

Vec eval_map(const SmoothMap& psi, const Vec& x);

double eval(const FuncExpr& f, const Vec& x);
double plus_part(const FuncExpr& f, const Vec& x);

/// Closed-form gradient, cross-checked against central finite differences
/// (h = 1e-5, 1e-5 relative). Throws NotDifferentiableHere when the active
/// piece is ambiguous within tol_active.
Vec gradient(const FuncExpr& f, const Vec& x);
Vec gradient_unchecked(const FuncExpr& f, const Vec& x);

Mat jacobian(const SmoothMap& psi, const Vec& x);
Mat jacobian_unchecked(const SmoothMap& psi, const Vec& x);

/// Symbolic solution set {x : f(x) <= 0} where the structure allows, else a
/// sublevel-set wrapper around f.
SetPtr solution_set(const FuncPtr& f);

/// False only for the hard-coded discontinuous builtins.
bool continuous_everywhere(const FuncExpr& f);
/// Locally Lipschitz near every point (false for the builtins).
bool locally_lipschitz(const FuncExpr& f);

/// Midpoint-convexity spot check on seeded pairs; used for compose(g, psi).
bool midpoint_convex_sampled(const FuncExpr& f, std::uint64_t seed, int n_pairs = 1000,
                             double box = 3.0);

}  // namespace ebcert
