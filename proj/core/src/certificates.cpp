#include "ebcert/certificates.hpp"

#include <algorithm>
#include <cmath>

namespace ebcert {

const char* to_string(CertVerdict v) {
  switch (v) {
    case CertVerdict::HOLDS: return "HOLDS";
    case CertVerdict::FAILS: return "FAILS";
    default: return "UNSUPPORTED";
  }
}

namespace {

// unit directions inside cone(K): generators plus seeded nonnegative mixes
std::vector<Vec> cone_unit_directions(const PolyhedralCone& K, int n_dirs, std::uint64_t seed) {
  std::vector<Vec> dirs;
  const int k = static_cast<int>(K.gens.cols());
  if (k == 0) return dirs;
  for (int c = 0; c < k; ++c) dirs.push_back(K.gens.col(c));
  Rng rng(derive_seed(seed, 0xD185));
  while (static_cast<int>(dirs.size()) < n_dirs) {
    Vec w(k);
    for (int i = 0; i < k; ++i) w[i] = -std::log(std::max(rng.uniform(), 1e-300));
    Vec d = K.gens * w;
    double nn = d.norm();
    if (nn > 1e-12) dirs.push_back(d / nn);
  }
  return dirs;
}

Vec lift(const Mat& basis, const Vec& reduced) { return basis * reduced; }

}  // namespace

std::pair<bool, std::optional<Vec>> cone_slice_in_body(const PolyhedralCone& K, const ConvexBody& C,
                                                       SliceRoute route, int n_dirs,
                                                       std::uint64_t seed) {
  const int dim = C.dim();
  if (K.dim != dim) throw DimensionMismatch("cone_slice_in_body");
  if (!C.contains(Vec::Zero(dim), tols().cert))
    throw OriginNotInBody("cone_slice_in_body: C must contain the origin");
  if (K.gens.cols() == 0) return {true, std::nullopt};

  const bool want_exact = route == SliceRoute::Exact ||
                          (route == SliceRoute::Auto && C.bounded() && dim <= 3);
  if (want_exact && C.bounded() && dim <= 3) {
    // reduce to the linear span of C (every direction of K must live there)
    Mat pts(dim, C.vertices.cols() + 1);
    pts.col(0) = Vec::Zero(dim);
    pts.rightCols(C.vertices.cols()) = C.vertices;
    Mat basis = affine_basis(pts);
    const int d2 = static_cast<int>(basis.cols());
    for (int c = 0; c < K.gens.cols(); ++c) {
      Vec g = K.gens.col(c);
      Vec res = g - basis * (basis.transpose() * g);
      if (res.norm() > tols().cert) return {false, g};
    }
    if (d2 == 0) return {true, std::nullopt};  // C = {0} and K ⊆ {0}
    Mat Kg = basis.transpose() * K.gens;
    Mat Cv = basis.transpose() * C.vertices;
    auto facets = polytope_facets(Cv);
    for (const auto& fct : facets) {
      Vec proj = cone_project_generators(Kg, fct.normal);
      double sup = proj.norm();  // sup over K ∩ B of <normal, .>
      if (sup > fct.offset + tols().cert) {
        Vec w = proj.norm() > 1e-12 ? Vec(proj / proj.norm()) : Vec(fct.normal);
        return {false, lift(basis, w)};
      }
    }
    return {true, std::nullopt};
  }

  // sampling route
  for (const auto& d : cone_unit_directions(K, n_dirs, seed)) {
    if (C.distance_to(d) > tols().cert) return {false, d};
  }
  return {true, std::nullopt};
}

namespace {

// conic-hull generators of a subdifferential: body vertices (and piece
// vertices when flagged non-convex) plus singular generators
Mat subdiff_cone_generators(const Subdifferential& sd) {
  const int n = sd.dim();
  std::vector<Vec> gens;
  auto add = [&](const Vec& v) {
    double nn = v.norm();
    if (nn < 1e-10) return;
    Vec u = v / nn;
    for (const auto& g : gens)
      if ((g - u).norm() < 1e-9) return;
    gens.push_back(u);
  };
  for (int c = 0; c < sd.body.vertices.cols(); ++c) add(sd.body.vertices.col(c));
  for (int c = 0; c < sd.body.rays.cols(); ++c) add(sd.body.rays.col(c));
  for (const auto& p : sd.pieces) {
    for (int c = 0; c < p.vertices.cols(); ++c) add(p.vertices.col(c));
    for (int c = 0; c < p.rays.cols(); ++c) add(p.rays.col(c));
  }
  for (int c = 0; c < sd.singular.cols(); ++c) add(sd.singular.col(c));
  Mat G(n, gens.size());
  for (size_t i = 0; i < gens.size(); ++i) G.col(i) = gens[i];
  return G;
}

// does the ray {rho d : rho >= rho_min} meet the body?
bool ray_meets_body(const ConvexBody& body, const Vec& d, double rho_min) {
  double rho_max = 0.0;
  for (int c = 0; c < body.vertices.cols(); ++c)
    rho_max = std::max(rho_max, body.vertices.col(c).norm());
  if (rho_max < rho_min - tols().cert) return false;
  const int steps = 48;
  for (int i = 0; i <= steps; ++i) {
    double rho = rho_min + (rho_max - rho_min) * i / steps;
    if (body.distance_to(rho * d) <= tols().cert) return true;
  }
  return false;
}

}  // namespace

CertificateReport check_thm31(const FuncPtr& f, const Vec& xbar) {
  CertificateReport rep;
  rep.condition_id = "THM31";
  if (plus_part(*f, xbar) > tols().membership)
    throw PointNotInSolutionSet("check_thm31: xbar not in S_f");
  if (!continuous_everywhere(*f)) rep.notes.push_back("ContinuityAssumed: f has a builtin discontinuity");

  SetPtr Sf = solution_set(f);
  PolyhedralCone lhs;
  Subdifferential sd;
  try {
    lhs = limiting_normal_cone(*Sf, xbar);
    sd = limiting_subdiff(*f, xbar);
  } catch (const UnsupportedStructure& e) {
    rep.verdict = CertVerdict::UNSUPPORTED;
    rep.notes.push_back(e.what());
    return rep;
  }
  PolyhedralCone rhs{subdiff_cone_generators(sd), f->dim(), true};

  rep.verdict = CertVerdict::HOLDS;
  for (int c = 0; c < lhs.gens.cols(); ++c) {
    Vec g = lhs.gens.col(c);
    double resid = rhs.gens.cols() ? nnls(rhs.gens, g).residual : g.norm();
    if (resid > tols().cert) {
      rep.verdict = CertVerdict::FAILS;
      rep.witnesses.push_back({g, resid});
    }
  }
  return rep;
}

CertificateReport check_thm33(const FuncPtr& f, const Vec& xbar, double tau) {
  CertificateReport rep;
  rep.condition_id = "THM33";
  rep.tau_used = tau;
  if (plus_part(*f, xbar) > tols().membership)
    throw PointNotInSolutionSet("check_thm33: xbar not in S_f");
  if (!continuous_everywhere(*f)) rep.notes.push_back("ContinuityAssumed: f has a builtin discontinuity");

  SetPtr Sf = solution_set(f);
  PolyhedralCone lhs;
  Subdifferential sd;
  try {
    lhs = limiting_normal_cone(*Sf, xbar);
    sd = limiting_subdiff(*f, xbar);
  } catch (const UnsupportedStructure& e) {
    rep.verdict = CertVerdict::UNSUPPORTED;
    rep.notes.push_back(e.what());
    return rep;
  }

  if (sd.convex) {
    ConvexBody rhs = scaled_union_hull(sd.body, tau);
    if (sd.singular.cols()) rhs.rays = sd.singular;
    auto [ok, wit] = cone_slice_in_body(lhs, rhs);
    rep.verdict = ok ? CertVerdict::HOLDS : CertVerdict::FAILS;
    if (wit) rep.witnesses.push_back({*wit, rhs.distance_to(*wit)});
    return rep;
  }

  // non-convex limiting body: ray coverage over the flagged pieces
  rep.notes.push_back("NonConvexLimitingBody: union-of-pieces coverage at sampled resolution");
  if (sd.singular.cols()) {
    rep.verdict = CertVerdict::UNSUPPORTED;
    rep.notes.push_back("nontrivial singular part with non-convex body");
    return rep;
  }
  std::vector<ConvexBody> scaled;
  for (const auto& p : sd.pieces)
    if (p.bounded()) scaled.push_back(p);
  rep.verdict = CertVerdict::HOLDS;
  const int fill = lhs.dim == 2 ? 720 : 2000;
  for (const auto& d : cone_unit_directions(lhs, fill, 31007)) {
    // need d ∈ [0,tau] * (∪ pieces): some rho >= 1/tau with rho*d in a piece
    bool covered = false;
    for (const auto& p : scaled)
      if (ray_meets_body(p, d, 1.0 / tau)) {
        covered = true;
        break;
      }
    if (!covered) {
      rep.verdict = CertVerdict::FAILS;
      rep.witnesses.push_back({d, 1.0});
      if (rep.witnesses.size() >= 8) break;
    }
  }
  return rep;
}

CertificateReport check_thm32(const FuncPtr& f, const Vec& xbar, double tau, double delta0,
                              double eps, int n_points, std::uint64_t seed) {
  CertificateReport rep;
  rep.condition_id = "THM32";
  rep.tau_used = tau;
  if (plus_part(*f, xbar) > tols().membership)
    throw PointNotInSolutionSet("check_thm32: xbar not in S_f");
  if (eps <= 0) throw Error("check_thm32: eps must be positive");
  rep.notes.push_back("union over u sampled: HOLDS means covered at sampled resolution");

  SetPtr Sf = solution_set(f);

  // sampled solution points near xbar (projections of ball samples)
  std::vector<Vec> xs{xbar};
  Rng rng(derive_seed(seed, 0x732));
  for (int i = 0; i < n_points; ++i) {
    Vec y = rng.in_ball(xbar, delta0);
    for (const auto& p : project(*Sf, y)) {
      if ((p - xbar).norm() > delta0) continue;
      bool dup = false;
      for (const auto& q : xs)
        if ((q - p).norm() < 1e-9) dup = true;
      if (!dup) xs.push_back(p);
      if (xs.size() >= 24) break;
    }
    if (xs.size() >= 24) break;
  }

  rep.verdict = CertVerdict::HOLDS;
  for (const auto& x : xs) {
    PolyhedralCone lhs;
    try {
      lhs = frechet_normal_cone(*Sf, x);
    } catch (const UnsupportedStructure& e) {
      rep.verdict = CertVerdict::UNSUPPORTED;
      rep.notes.push_back(e.what());
      return rep;
    }
    if (lhs.gens.cols() == 0) continue;  // vacuous at interior-like points

    // bodies at sampled u in B_f(x, eps)
    double fx = eval(*f, x);
    std::vector<ConvexBody> bodies;
    try {
      bodies.push_back(scaled_union_hull(frechet_subdiff(*f, x).body, (1 + eps) * tau));
    } catch (const Error&) {
    }
    Rng urng(derive_seed(seed, 0x732u + 1, hash_coords(x)));
    for (int s = 0; s < 256 && static_cast<int>(bodies.size()) < 64; ++s) {
      Vec u = urng.in_ball(x, eps);
      if (std::abs(eval(*f, u) - fx) >= eps) continue;
      try {
        bodies.push_back(scaled_union_hull(frechet_subdiff(*f, u).body, (1 + eps) * tau));
      } catch (const Error&) {
      }
    }
    for (int c = 0; c < lhs.gens.cols(); ++c) {
      Vec g = lhs.gens.col(c);
      double bestres = g.norm();
      for (const auto& b : bodies) bestres = std::min(bestres, b.distance_to(g));
      if (bestres > eps + tols().cert) {
        rep.verdict = CertVerdict::FAILS;
        rep.witnesses.push_back({g, bestres});
      }
    }
  }
  return rep;
}

CertificateReport check_thm34(const CompositeProblem& p, double tau, double delta, int n_points,
                              std::uint64_t seed) {
  CertificateReport rep;
  rep.condition_id = "THM34";
  rep.tau_used = tau;

  if (!boundary_condition_check(p.g, 800, derive_seed(seed, 0xBD)))
    throw BoundaryConditionFailure("check_thm34: bd(S_g) ⊄ g^{-1}(0)");
  auto [ok0, smin0] = surjectivity_check(*p.psi, p.xbar);
  if (!ok0) throw SurjectivityFailure("check_thm34: Jacobian at xbar");

  SetPtr Sg = solution_set(p.g);
  SetPtr S = solution_set(p.f);

  // sampled x in S ∩ B(xbar, delta)
  std::vector<Vec> xs{p.xbar};
  Rng rng(derive_seed(seed, 0x734));
  for (int i = 0; i < n_points && xs.size() < 16; ++i) {
    Vec y = rng.in_ball(p.xbar, delta);
    try {
      for (const auto& q : project(*S, y)) {
        if ((q - p.xbar).norm() > delta) continue;
        bool dup = false;
        for (const auto& z : xs)
          if ((z - q).norm() < 1e-9) dup = true;
        if (!dup) xs.push_back(q);
      }
    } catch (const EmptySet&) {
    }
  }

  rep.verdict = CertVerdict::HOLDS;
  for (const auto& x : xs) {
    auto [okx, sminx] = surjectivity_check(*p.psi, x);
    if (!okx) continue;  // hypothesis holds at xbar; skip degenerate samples
    Mat J = jacobian_unchecked(*p.psi, x);
    // N^(S, x) = J^T N^(S_g, psi(x)) under surjectivity
    PolyhedralCone Kg;
    try {
      Kg = frechet_normal_cone(*Sg, eval_map(*p.psi, x));
    } catch (const UnsupportedStructure& e) {
      rep.verdict = CertVerdict::UNSUPPORTED;
      rep.notes.push_back(e.what());
      return rep;
    }
    Mat gens = J.transpose() * Kg.gens;
    for (int c = 0; c < gens.cols(); ++c) {
      double nn = gens.col(c).norm();
      if (nn > 1e-12) gens.col(c) /= nn;
    }
    PolyhedralCone lhs{gens, p.psi->domain_dim, true};
    ConvexBody rhs = scaled_union_hull(chain_subdiff(p, x).body, tau);
    auto [ok, wit] = cone_slice_in_body(lhs, rhs);
    if (!ok) {
      rep.verdict = CertVerdict::FAILS;
      if (wit) rep.witnesses.push_back({*wit, rhs.distance_to(*wit)});
      return rep;
    }
  }
  return rep;
}

double tau_star_search(const CompositeProblem& p, double delta, int n_points, std::uint64_t seed) {
  auto holds = [&](double tau) {
    return check_thm34(p, tau, delta, n_points, seed).verdict == CertVerdict::HOLDS;
  };
  double lo = std::pow(2.0, -10), hi = std::pow(2.0, 10);
  if (!holds(hi)) return std::numeric_limits<double>::infinity();
  if (holds(lo)) return lo;
  for (int it = 0; it < 48; ++it) {
    double mid = std::sqrt(lo * hi);
    (holds(mid) ? hi : lo) = mid;
  }
  return hi;
}

Equiv35Report check_thm35(const CompositeProblem& p, const ModulusQuery& budget) {
  Equiv35Report rep;
  if (!boundary_condition_check(p.g, 800, derive_seed(budget.seed, 0xBD)))
    throw BoundaryConditionFailure("check_thm35: bd(S_g) ⊄ g^{-1}(0)");
  auto [ok0, smin0] = surjectivity_check(*p.psi, p.xbar);
  if (!ok0) throw SurjectivityFailure("check_thm35: Jacobian at xbar");

  ModulusQuery qf = budget;
  qf.xbar = p.xbar;
  rep.composite = estimate_modulus(p.f, qf);

  ModulusQuery qg = budget;
  qg.xbar = eval_map(*p.psi, p.xbar);
  rep.base = estimate_modulus(p.g, qg);

  rep.kappa = metric_regularity_kappa(*p.psi, p.xbar, budget.delta0, 2000,
                                      derive_seed(budget.seed, 0x4A));
  rep.verdicts_agree = rep.composite.verdict == rep.base.verdict;
  if (rep.composite.verdict == ModulusVerdict::HOLDS &&
      rep.base.verdict == ModulusVerdict::HOLDS) {
    rep.transfer_checked = true;
    rep.transfer_ok = rep.composite.tau_hat <= 1.25 * rep.kappa.kappa * rep.base.tau_hat;
  }
  return rep;
}

}  // namespace ebcert
