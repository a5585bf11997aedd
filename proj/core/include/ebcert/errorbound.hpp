#pragma once

// Local error-bound detection and modulus estimation by multi-scale
// sampling, plus an exact enumeration baseline for linear systems.
//
// Levels use the dyadic shells of B(xbar, delta0): level j draws from the
// annulus delta_j/2 <= |x - xbar| <= delta_j with delta_j = delta0 * 2^-j,
// so scale-divergent ratios (no error bound) show up as sustained per-level
// growth instead of saturating at the membership-tolerance floor.

#include <vector>

#include "ebcert/functions.hpp"

namespace ebcert {

struct ModulusQuery {
  Vec xbar;
  double delta0 = 0.25;
  int levels = 8;
  int samples_per_level = 4096;
  std::uint64_t seed = 1;
  double rho = 4.0;  // divergence factor (> 1)
  int polish_iters = 24;
  int polish_candidates = 8;
};

enum class ModulusVerdict { HOLDS, FAILS, INCONCLUSIVE };

struct LevelStat {
  double delta = 0.0;
  double sup_ratio = 0.0;
  Vec argmax;
  bool empty = false;  // every sample landed in the solution set
};

struct ModulusEstimate {
  std::vector<LevelStat> per_level;
  double tau_hat = 0.0;  // max of the two finest non-empty levels; +inf on FAILS
  ModulusVerdict verdict = ModulusVerdict::INCONCLUSIVE;
};

const char* to_string(ModulusVerdict v);

/// Pointwise quotient d(x, S_f) / f_+(x). Throws PointInSolutionSet when
/// f_+(x) <= tol_membership.
double ratio(const FuncPtr& f, const Vec& x);

ModulusEstimate estimate_modulus(const FuncPtr& f, const ModulusQuery& q);

/// Validates d(x,S_f) <= tau * f_+(x) on fresh samples at the finest level;
/// returns the number of violations.
int aposteriori_violations(const FuncPtr& f, const Vec& xbar, double tau, double delta,
                           int n_samples, std::uint64_t seed);

/// Exact error-bound constant of {A x <= b} against the max-residual
/// f(x) = max_i (a_i . x - b_i): enumeration of realizable active sets with
/// a norm-maximization vertex subproblem per set. m, n <= 6.
double hoffman_constant(const Mat& A, const Vec& b);

}  // namespace ebcert
