#include "ebcert/epigraph.hpp"

#include <algorithm>
#include <cmath>

namespace ebcert {

double tau_norm(const TauNorm& tn, const Vec& x, double r) {
  if (tn.tau <= 0) throw Error("tau_norm: tau must be positive");
  return x.norm() / tn.tau + std::abs(r);
}

double epi_distance(const FuncExpr& f, const Vec& x, double r, const TauNorm& tn) {
  if (tn.tau <= 0) throw Error("epi_distance: tau must be positive");
  const int n = f.dim();
  double fx = eval(f, x);
  if (fx <= r) return 0.0;

  // objective over u alone: h(u) = |u-x|/tau + (f(u)-r)_+
  auto h = [&](const Vec& u) { return (u - x).norm() / tn.tau + std::max(eval(f, u) - r, 0.0); };

  const double h0 = h(x);
  const double R = tn.tau * h0 * 1.01 + 1e-9;  // optimum lies in this ball

  std::vector<Vec> starts{x};
  for (int i = 0; i < n; ++i) {
    starts.push_back(x + 0.5 * R * Vec::Unit(n, i));
    starts.push_back(x - 0.5 * R * Vec::Unit(n, i));
  }
  Rng rng(derive_seed(0xEB1D, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r * 1e6)));
  for (int i = 0; i < 16; ++i) starts.push_back(x + rng.uniform(0.0, R) * rng.unit_vector(n));

  double best = h0;
  for (auto u : starts) {
    double val = h(u);
    double step = R / 4;
    while (step > 1e-11) {
      bool improved = false;
      for (int i = 0; i < n && !improved; ++i) {
        for (int sgn : {+1, -1}) {
          Vec cand = u + sgn * step * Vec::Unit(n, i);
          double cv = h(cand);
          if (cv < val - 1e-16) {
            val = cv;
            u = cand;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.6;
    }
    best = std::min(best, val);
  }
  return best;
}

double phi(const FuncExpr& f, const Vec& x, double r, const TauNorm& tn) {
  return epi_distance(f, x, r, tn) + std::abs(r);
}

namespace {

PolyhedralCone cone_from(std::vector<Vec> gens, int dim) {
  Mat G(dim, 0);
  for (const auto& g : gens) {
    double nn = g.norm();
    if (nn < 1e-12) continue;
    Vec u = g / nn;
    bool dup = false;
    for (int c = 0; c < G.cols(); ++c)
      if ((G.col(c) - u).norm() < 1e-9) dup = true;
    if (!dup) {
      G.conservativeResize(dim, G.cols() + 1);
      G.col(G.cols() - 1) = u;
    }
  }
  return {G, dim, true};
}

// symbolic cones of the two 1-D discontinuous builtins, entered by hand
PolyhedralCone builtin_epi_cone(BuiltinKind kind, double z, double r, bool limiting) {
  const double atol = tols().active;
  auto C = [&](std::vector<Vec> g) { return cone_from(std::move(g), 2); };
  if (kind == BuiltinKind::Lemma25Counterexample) {
    // f(x) = 1 (x > 0), x (x <= 0)
    if (z < -atol) {
      if (std::abs(r - z) <= atol) return C({make_vec({1, -1})});
      return PolyhedralCone::zero(2);
    }
    if (z > atol) {
      if (std::abs(r - 1) <= atol) return C({make_vec({0, -1})});
      return PolyhedralCone::zero(2);
    }
    // z = 0, f(z) = 0
    if (std::abs(r) <= atol) return C({make_vec({1, 0}), make_vec({1, -1})});
    if (r < 1 - atol) return C({make_vec({1, 0})});
    if (std::abs(r - 1) <= atol)
      return limiting ? C({make_vec({1, 0}), make_vec({0, -1})}) : PolyhedralCone::zero(2);
    return PolyhedralCone::zero(2);
  }
  // LscStep: f(x) = 1 (x > 0), -1 (x <= 0)
  if (z < -atol) {
    if (std::abs(r + 1) <= atol) return C({make_vec({0, -1})});
    return PolyhedralCone::zero(2);
  }
  if (z > atol) {
    if (std::abs(r - 1) <= atol) return C({make_vec({0, -1})});
    return PolyhedralCone::zero(2);
  }
  if (std::abs(r + 1) <= atol) return C({make_vec({1, 0}), make_vec({0, -1})});
  if (r < 1 - atol) return C({make_vec({1, 0})});
  if (std::abs(r - 1) <= atol)
    return limiting ? C({make_vec({1, 0}), make_vec({0, -1})}) : PolyhedralCone::zero(2);
  return PolyhedralCone::zero(2);
}

PolyhedralCone epi_cone_impl(const FuncExpr& f, const Vec& z, double r, int k_arc, bool limiting) {
  const int n = f.dim();
  double fz = eval(f, z);
  if (fz > r + tols().membership * std::max(1.0, std::abs(r)))
    throw PointNotInEpigraph("epi normal cone: f(z) > r");

  if (const auto* b = std::get_if<BuiltinFn>(&f.node()))
    return builtin_epi_cone(b->kind, z[0], r, limiting);

  const double atol = tols().active * std::max(1.0, std::abs(fz));
  if (r > fz + atol) {
    // continuous f: (z, r) is an epigraph interior point
    return PolyhedralCone::zero(n + 1);
  }
  Subdifferential sd = limiting ? limiting_subdiff(f, z, k_arc) : frechet_subdiff(f, z, k_arc);
  std::vector<Vec> gens;
  auto add_body = [&](const ConvexBody& body) {
    for (int c = 0; c < body.vertices.cols(); ++c) {
      Vec g(n + 1);
      g.head(n) = body.vertices.col(c);
      g[n] = -1.0;
      gens.push_back(g);
    }
    for (int c = 0; c < body.rays.cols(); ++c) {
      Vec g(n + 1);
      g.head(n) = body.rays.col(c);
      g[n] = 0.0;
      gens.push_back(g);
    }
  };
  if (sd.convex || sd.pieces.empty())
    add_body(sd.body);
  else
    for (const auto& p : sd.pieces) add_body(p);
  for (int c = 0; c < sd.singular.cols(); ++c) {
    Vec g(n + 1);
    g.head(n) = sd.singular.col(c);
    g[n] = 0.0;
    gens.push_back(g);
  }
  return cone_from(std::move(gens), n + 1);
}

}  // namespace

PolyhedralCone epi_frechet_normal_cone(const FuncExpr& f, const Vec& z, double r, int k_arc) {
  return epi_cone_impl(f, z, r, k_arc, false);
}

PolyhedralCone epi_limiting_normal_cone(const FuncExpr& f, const Vec& z, double r, int k_arc) {
  return epi_cone_impl(f, z, r, k_arc, true);
}

Lemma25Report check_lemma25(const FuncExpr& f, const Vec& z, double r) {
  Lemma25Report rep;
  double fz = eval(f, z);
  if (fz > r + tols().membership * std::max(1.0, std::abs(r)))
    throw PointNotInEpigraph("check_lemma25: (z,r) not in the epigraph");

  rep.continuous_at_z = continuous_everywhere(f) || z.cwiseAbs().maxCoeff() > tols().active;

  auto Fr = epi_frechet_normal_cone(f, z, r);
  auto F0 = epi_frechet_normal_cone(f, z, fz);
  rep.frechet_inclusion_holds = true;
  for (int c = 0; c < Fr.gens.cols(); ++c)
    if (!cone_membership(F0, Fr.gens.col(c))) {
      rep.frechet_inclusion_holds = false;
      rep.witness = Fr.gens.col(c);
      break;
    }

  auto Lr = epi_limiting_normal_cone(f, z, r);
  auto L0 = epi_limiting_normal_cone(f, z, fz);
  rep.limiting_inclusion_holds = true;
  for (int c = 0; c < Lr.gens.cols(); ++c)
    if (!cone_membership(L0, Lr.gens.col(c))) {
      rep.limiting_inclusion_holds = false;
      rep.witness = Lr.gens.col(c);
      break;
    }
  return rep;
}

Ineq411Report check_inequality_411(const FuncPtr& f, double tau, const Vec& xbar, double delta0,
                                   int n_samples, std::uint64_t seed) {
  if (tau <= 0) throw Error("check_inequality_411: tau must be positive");
  Ineq411Report rep;
  rep.worst_x = xbar;
  SetPtr Sf = solution_set(f);
  TauNorm tn{tau};
  Rng rng(derive_seed(seed, 0x411));
  for (int i = 0; i < n_samples; ++i) {
    Vec x = rng.in_ball(xbar, delta0);
    double r = rng.uniform(-1.0, 1.0);
    double lhs = distance(*Sf, x);
    double rhs = tau * phi(*f, x, r, tn);
    double viol = lhs - rhs;
    ++rep.n_samples;
    if (viol > tols().cert) ++rep.n_violations;
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.worst_x = x;
      rep.worst_r = r;
    }
  }
  return rep;
}

}  // namespace ebcert
