#include "ebcert/composite.hpp"

#include <algorithm>
#include <cmath>

namespace ebcert {

CompositeProblem CompositeProblem::make(FuncPtr g, MapPtr psi, Vec xbar) {
  CompositeProblem p;
  p.f = FuncExpr::compose(g, psi);
  p.g = std::move(g);
  p.psi = std::move(psi);
  if (xbar.size() != p.psi->domain_dim) throw DimensionMismatch("CompositeProblem: xbar");
  if (eval(*p.f, xbar) > tols().membership)
    throw PointNotInSolutionSet("CompositeProblem: (g∘psi)(xbar) must be <= 0");
  p.xbar = std::move(xbar);
  return p;
}

std::pair<bool, double> surjectivity_check(const SmoothMap& psi, const Vec& x) {
  Mat J = jacobian_unchecked(psi, x);
  if (J.rows() > J.cols()) return {false, 0.0};
  Eigen::JacobiSVD<Mat> svd(J);
  double smin = svd.singularValues()[svd.singularValues().size() - 1];
  return {smin > 1e-8, smin};
}

bool boundary_condition_check(const FuncPtr& g, int n_samples, std::uint64_t seed, Vec* witness) {
  SetPtr Sg = solution_set(g);
  const int m = g->dim();
  Vec anchor;
  {
    auto ps = project(*Sg, Vec::Zero(m));  // throws EmptySet when S_g is empty
    anchor = ps[0];
  }
  const double radius = 4.0 + anchor.norm();
  Rng rng(derive_seed(seed, 0xB0DC));
  for (int i = 0; i < n_samples; ++i) {
    Vec y = rng.in_ball(anchor, radius);
    if (eval(*g, y) <= 0) continue;  // want exterior points
    for (const auto& z : project(*Sg, y)) {
      if (std::abs(eval(*g, z)) > tols().membership * std::max(1.0, z.norm())) {
        if (witness) *witness = z;
        return false;
      }
    }
  }
  return true;
}

namespace {

// multistart damped Gauss-Newton solve of psi(u) = y; returns nearest found
std::optional<double> preimage_distance(const SmoothMap& psi, const Vec& x, const Vec& y,
                                        std::uint64_t seed) {
  const int n = psi.domain_dim;
  std::vector<Vec> starts{x};
  Rng rng(seed);
  for (int k = 0; k < 3; ++k) starts.push_back(x + 0.1 * rng.unit_vector(n));
  std::optional<double> best;
  for (auto u : starts) {
    bool ok = false;
    for (int it = 0; it < 80; ++it) {
      Vec r = y - eval_map(psi, u);
      if (r.norm() < 1e-12 * std::max(1.0, y.norm())) {
        ok = true;
        break;
      }
      Mat J = jacobian_unchecked(psi, u);
      Vec du = J.transpose() * (J * J.transpose()).completeOrthogonalDecomposition().solve(r);
      if (!du.allFinite() || du.norm() > 1e6) break;
      u += du;
    }
    if (!ok) continue;
    double d = (u - x).norm();
    if (!best || d < *best) best = d;
  }
  return best;
}

}  // namespace

KappaEstimate metric_regularity_kappa(const SmoothMap& psi, const Vec& xbar, double delta0,
                                      int n_samples, std::uint64_t seed) {
  auto [ok, smin] = surjectivity_check(psi, xbar);
  if (!ok) throw SurjectivityFailure("metric_regularity_kappa");

  KappaEstimate est;
  Mat W;
  Vec t;
  if (psi.affine_parts(W, t)) {
    est.kappa = est.raw_max = 1.0 / smin;
    est.exact = true;
    return est;
  }
  Vec ybar = eval_map(psi, xbar);
  Rng rng(derive_seed(seed, 0x4A99A));
  for (int i = 0; i < n_samples; ++i) {
    Vec x = rng.in_ball(xbar, delta0);
    Vec y = rng.in_ball(ybar, delta0);
    double denom = (y - eval_map(psi, x)).norm();
    if (denom < 1e-10) continue;
    auto d = preimage_distance(psi, x, y, derive_seed(seed, 0x63E, i));
    if (!d) {
      ++est.skipped;
      continue;
    }
    est.raw_max = std::max(est.raw_max, *d / denom);
  }
  est.kappa = 1.1 * est.raw_max;
  return est;
}

Subdifferential chain_subdiff(const CompositeProblem& p, const Vec& x) {
  auto [ok, smin] = surjectivity_check(*p.psi, x);
  if (!ok) throw SurjectivityFailure("chain_subdiff");
  Mat J = jacobian_unchecked(*p.psi, x);
  auto inner = frechet_subdiff(*p.g, eval_map(*p.psi, x));
  Subdifferential s;
  Mat V = J.transpose() * inner.body.vertices;
  Mat R = inner.body.rays.cols() ? Mat(J.transpose() * inner.body.rays)
                                 : Mat(p.psi->domain_dim, 0);
  s.body = {V, R};
  s.singular = Mat(p.psi->domain_dim, 0);
  s.kind = SubdiffKind::Frechet;
  return s;
}

}  // namespace ebcert
