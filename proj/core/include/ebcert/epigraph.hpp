#pragma once

// The tau-norm on X x R, epigraph distances, the functional
// Phi(u,r) = d_tau((u,r), epi f) + |r|, epigraph normal cones, and the
// verification of the epigraph normal-cone monotonicity inclusions,
// including the discontinuous counterexample where the limiting version
// fails with witness (0,-1).

#include <optional>

#include "ebcert/subdifferential.hpp"

namespace ebcert {

struct TauNorm {
  double tau;  // |(x,r)|_tau = |x|/tau + |r|
};

double tau_norm(const TauNorm& tn, const Vec& x, double r);

/// inf over (u,s) in epi f of |(u-x, s-r)|_tau. Exact zero for epigraph
/// points; otherwise multi-start pattern search over u with s = max(r, f(u)).
double epi_distance(const FuncExpr& f, const Vec& x, double r, const TauNorm& tn);

/// Phi(x, r) = epi_distance + |r|.
double phi(const FuncExpr& f, const Vec& x, double r, const TauNorm& tn);

/// Frechet normal cone to epi f at (z, r), in R^{n+1}. At r = f(z) the cone
/// is generated by (v,-1) over subdifferential vertices and (w,0) over
/// singular generators; at r > f(z) continuity gives the zero cone. The
/// hard-coded discontinuous builtins override this symbolically.
PolyhedralCone epi_frechet_normal_cone(const FuncExpr& f, const Vec& z, double r, int k_arc = 64);
PolyhedralCone epi_limiting_normal_cone(const FuncExpr& f, const Vec& z, double r, int k_arc = 64);

struct Lemma25Report {
  bool frechet_inclusion_holds = false;   // N^(epi f,(z,r)) ⊆ N^(epi f,(z,f(z)))
  bool limiting_inclusion_holds = false;  // same for the limiting cones
  bool continuous_at_z = true;
  std::optional<Vec> witness;  // (n+1)-dim generator violating the limiting inclusion
};

/// Generator-wise verification of the two epigraph inclusions at (z, r).
Lemma25Report check_lemma25(const FuncExpr& f, const Vec& z, double r);

struct Ineq411Report {
  int n_samples = 0;
  int n_violations = 0;
  double max_violation = 0.0;  // max over samples of d(x,S_f) - tau*Phi(x,r)
  Vec worst_x;
  double worst_r = 0.0;
};

/// Samples (x, r) in B(xbar, delta0) x [-1, 1] and checks
/// d(x, S_f) <= tau * Phi(x, r) + tol_cert.
Ineq411Report check_inequality_411(const FuncPtr& f, double tau, const Vec& xbar, double delta0,
                                   int n_samples, std::uint64_t seed);

}  // namespace ebcert
