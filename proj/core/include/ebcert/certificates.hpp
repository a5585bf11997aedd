#pragma once

// Deciders for the dual inclusion certificates relating normal cones of the
// solution set to scaled subdifferentials:
//   THM31: N(S_f, xbar) ⊆ [0,∞) ∂f(xbar) + ∂∞f(xbar)              (necessary)
//   THM32: fuzzy Frechet version with the eps-attentive neighborhood
//   THM33: N(S_f, xbar) ∩ B ⊆ [0,τ] ∂f(xbar) + ∂∞f(xbar)           (necessary)
//   THM34: N^(S, x) ∩ B ⊆ [0,τ] ∂^f(x) near xbar                   (composite:
//          characterization of the error bound)
// plus the tau* bisection and the composite/base equivalence harness.
//
// Set products [0,∞)S and [0,τ]S are realized through conic/star hulls of the
// stored bodies; non-convex limiting sets fall back to a per-piece ray
// coverage test at sampled resolution.

#include <optional>
#include <string>

#include "ebcert/composite.hpp"
#include "ebcert/errorbound.hpp"
#include "ebcert/subdifferential.hpp"

namespace ebcert {

enum class CertVerdict { HOLDS, FAILS, UNSUPPORTED };
const char* to_string(CertVerdict v);

struct CertificateReport {
  std::string condition_id;
  CertVerdict verdict = CertVerdict::UNSUPPORTED;
  std::optional<double> tau_used;
  std::vector<std::pair<Vec, double>> witnesses;  // (vector, membership residual)
  std::vector<std::string> notes;
};

enum class SliceRoute { Auto, Exact, Sampling };

/// Decides K ∩ unit-ball ⊆ C. Exact route (dim <= 3, bounded C): per-facet
/// support comparison sup_{K∩B} <c,.> = |Π_K(c)| vs the facet offset.
/// Sampling route: seeded unit directions in K tested for membership.
/// Returns the violating direction on failure.
std::pair<bool, std::optional<Vec>> cone_slice_in_body(const PolyhedralCone& K,
                                                       const ConvexBody& C,
                                                       SliceRoute route = SliceRoute::Auto,
                                                       int n_dirs = 10000,
                                                       std::uint64_t seed = 7070);

CertificateReport check_thm31(const FuncPtr& f, const Vec& xbar);
CertificateReport check_thm33(const FuncPtr& f, const Vec& xbar, double tau);
CertificateReport check_thm32(const FuncPtr& f, const Vec& xbar, double tau, double delta0,
                              double eps, int n_points, std::uint64_t seed);
CertificateReport check_thm34(const CompositeProblem& p, double tau, double delta, int n_points,
                              std::uint64_t seed);

/// Smallest tau in [2^-10, 2^10] with check_thm34 HOLDS; +inf marker if none.
double tau_star_search(const CompositeProblem& p, double delta, int n_points, std::uint64_t seed);

struct Equiv35Report {
  ModulusEstimate composite;  // modulus of g∘psi at xbar
  ModulusEstimate base;       // modulus of g at psi(xbar)
  KappaEstimate kappa;
  bool verdicts_agree = false;
  bool transfer_checked = false;  // both HOLDS
  bool transfer_ok = false;       // tau_f <= 1.25 * kappa * tau_g
};

Equiv35Report check_thm35(const CompositeProblem& p, const ModulusQuery& budget);

}  // namespace ebcert
