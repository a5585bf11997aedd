#pragma once

// Composite-convex machinery: surjectivity, chain-rule subdifferentials,
// the boundary condition bd(S_g) ⊆ g^{-1}(0), and metric-regularity
// constant estimation (exact for affine maps, sampled otherwise).

#include "ebcert/subdifferential.hpp"

namespace ebcert {

struct CompositeProblem {
  FuncPtr g;    // convex (validated at construction)
  MapPtr psi;   // smooth, affine/quadratic components
  Vec xbar;     // reference solution, (g∘psi)(xbar) <= 0
  FuncPtr f;    // the composition g∘psi

  static CompositeProblem make(FuncPtr g, MapPtr psi, Vec xbar);
};

/// (sigma_min(J) > tol_rank, sigma_min). False whenever codomain exceeds
/// domain dimension.
std::pair<bool, double> surjectivity_check(const SmoothMap& psi, const Vec& x);

/// Samples exterior points, projects them onto S_g and asserts |g| <= tol at
/// the resulting boundary points. Vacuously true when no exterior sample is
/// found. Throws EmptySet when S_g is empty.
bool boundary_condition_check(const FuncPtr& g, int n_samples, std::uint64_t seed,
                              Vec* witness = nullptr);

struct KappaEstimate {
  double kappa = 0.0;    // usable constant (raw max inflated by 10%, exact for affine)
  double raw_max = 0.0;  // best observed quotient
  int skipped = 0;       // samples where the preimage solve diverged
  bool exact = false;    // affine route
};

/// Metric-regularity constant for d(x, psi^{-1}(y)) <= kappa |y - psi(x)|
/// near (xbar, psi(xbar)).
KappaEstimate metric_regularity_kappa(const SmoothMap& psi, const Vec& xbar, double delta0,
                                      int n_samples, std::uint64_t seed);

/// Frechet chain-rule body J^T ∂g(psi(x)) with trivial singular part.
Subdifferential chain_subdiff(const CompositeProblem& p, const Vec& x);

}  // namespace ebcert
