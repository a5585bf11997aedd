#pragma once

// Built-in problem instances: the two-set construction whose error bound
// fails while the dual inclusion holds, the discontinuous epigraph
// counterexample, and the reusable test batteries (Lipschitz functions,
// composite-convex pairs, seeded linear systems with exact constants).

#include "ebcert/composite.hpp"
#include "ebcert/errorbound.hpp"

namespace ebcert {

/// The planar two-set instance: A1 = (R_- x R_+) ∪ {x1+x2=0, x1>=0},
/// A2 = {x in R_+^2 : (x1-1)^2+x2^2 <= 1, x1^2+(x2-1)^2 <= 1},
/// f = max(d(.,A1), d(.,A2)), S_f = A1 ∩ A2 = {0}.
struct TwoSetInstance {
  SetPtr A1, A2, Sf;
  FuncPtr f;
  Vec xbar;

  static TwoSetInstance make();
  /// The boundary points x^(k) = (1/k, (2/k - 1/k^2)^{1/2}).
  Vec xk(int k) const;
  /// Inradius of the hull of the enumerated limiting subdifferential at 0,
  /// derived by facet enumeration (the certified inner ball of the hull).
  double derived_epsilon() const;
  /// tau for the bounded dual inclusion: 1 / (0.95 * derived_epsilon()).
  double derived_tau() const;
};

FuncPtr lemma25_function();  // f(x) = 1 (x>0), x (x<=0)
FuncPtr step_function();     // f(x) = 1 (x>0), -1 (x<=0)

struct BatteryInstance {
  std::string name;
  FuncPtr f;
  Vec xbar;
  bool expect_error_bound;  // expected modulus verdict
};

/// Ten locally Lipschitz instances with reference solutions.
std::vector<BatteryInstance> lipschitz_battery();

struct CompositeInstance {
  std::string name;
  CompositeProblem problem;
  bool expect_error_bound;
};

/// Ten composite-convex instances: polyhedral g with affine or quadratic
/// surjective psi.
std::vector<CompositeInstance> composite_battery();

struct HoffmanInstance {
  std::string name;
  Mat A;
  Vec b;
  Vec xbar;
  double constant;  // exact hoffman_constant(A, b)
};

/// Seeded homogeneous systems (b = 0, unit rows, n <= 3, m <= 5) whose local
/// modulus at the origin equals the global constant by 0-homogeneity.
/// Degenerate draws (constant > 25) are rejected and redrawn.
std::vector<HoffmanInstance> hoffman_battery(int count = 20, std::uint64_t seed = 20240917);

}  // namespace ebcert
