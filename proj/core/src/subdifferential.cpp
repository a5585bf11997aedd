#include "ebcert/subdifferential.hpp"

#include <algorithm>
#include <cmath>

namespace ebcert {

namespace {

ConvexBody map_body(const Mat& Jt, const ConvexBody& b) {
  Mat V = Jt * b.vertices;
  Mat R = b.rays.cols() ? Mat(Jt * b.rays) : Mat(Jt.rows(), 0);
  return {V, R};
}

ConvexBody scale_body(double c, const ConvexBody& b) {
  Mat V = c * b.vertices;
  Mat R = b.rays.cols() ? Mat(c * b.rays) : Mat(b.rays.rows(), 0);
  return {V, R};
}

Mat concat_cols(const Mat& a, const Mat& b) {
  if (a.cols() == 0) return b;
  if (b.cols() == 0) return a;
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Subdifferential point_subdiff(const Vec& g, SubdiffKind kind) {
  Subdifferential s;
  s.body = ConvexBody::point(g);
  s.singular = Mat(g.size(), 0);
  s.kind = kind;
  return s;
}

std::vector<const FuncExpr*> active_children(const MaxFn& m, const FuncExpr& f, const Vec& x) {
  double fx = eval(f, x);
  double atol = tols().active * std::max(1.0, std::abs(fx));
  std::vector<const FuncExpr*> out;
  for (const auto& c : m.children)
    if (std::abs(eval(*c, x) - fx) <= atol) out.push_back(c.get());
  return out;
}

Mat surjective_jacobian(const ComposeFn& comp, const Vec& x) {
  Mat J = jacobian_unchecked(*comp.psi, x);
  Eigen::JacobiSVD<Mat> svd(J);
  double smin = svd.singularValues()[svd.singularValues().size() - 1];
  if (J.rows() > J.cols() || smin <= 1e-8)
    throw SurjectivityFailure("compose: Jacobian rank below codomain dimension");
  return J;
}

}  // namespace

Subdifferential frechet_subdiff(const FuncExpr& f, const Vec& x, int k_arc) {
  if (x.size() != f.dim()) throw DimensionMismatch("frechet_subdiff");
  const int n = f.dim();

  return std::visit(
      [&](const auto& v) -> Subdifferential {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffineFn>) {
          return point_subdiff(v.a, SubdiffKind::Frechet);
        } else if constexpr (std::is_same_v<T, QuadraticFn>) {
          return point_subdiff(2.0 * (v.Q * x) + v.c, SubdiffKind::Frechet);
        } else if constexpr (std::is_same_v<T, DistToFn>) {
          double d = distance(*v.set, x);
          double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
          if (d > tols().membership * scale) {
            auto ps = project(*v.set, x);
            if (ps.size() == 1) return point_subdiff((x - ps[0]) / d, SubdiffKind::Frechet);
            // non-unique projection: return the limiting body, flagged
            Subdifferential s;
            std::vector<ConvexBody> pieces;
            for (const auto& p : ps) pieces.push_back(ConvexBody::point((x - p) / d));
            s.body = hull_of(pieces);
            s.singular = Mat(n, 0);
            s.kind = SubdiffKind::Limiting;
            s.convex = pieces.size() <= 1;
            s.pieces = std::move(pieces);
            return s;
          }
          auto K = frechet_normal_cone(*v.set, x);
          Subdifferential s;
          s.body = cone_ball_slice(K, k_arc);
          s.singular = Mat(n, 0);
          s.kind = SubdiffKind::Frechet;
          return s;
        } else if constexpr (std::is_same_v<T, MaxFn>) {
          auto act = active_children(v, f, x);
          std::vector<ConvexBody> bodies;
          for (const auto* c : act) bodies.push_back(frechet_subdiff(*c, x, k_arc).body);
          Subdifferential s;
          s.body = hull_of(bodies);
          s.singular = Mat(n, 0);
          s.kind = SubdiffKind::Frechet;
          return s;
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          Mat J = surjective_jacobian(v, x);
          auto inner = frechet_subdiff(*v.g, eval_map(*v.psi, x), k_arc);
          Subdifferential s;
          s.body = map_body(J.transpose(), inner.body);
          s.singular = Mat(n, 0);
          s.kind = inner.kind;
          s.convex = inner.convex;
          for (const auto& p : inner.pieces) s.pieces.push_back(map_body(J.transpose(), p));
          return s;
        } else if constexpr (std::is_same_v<T, NormScaledFn>) {
          double nn = x.norm();
          if (nn <= tols().membership) {
            Subdifferential s;
            s.body = scale_body(v.weight, cone_ball_slice(PolyhedralCone::full(n), k_arc));
            s.singular = Mat(n, 0);
            s.kind = SubdiffKind::Frechet;
            return s;
          }
          return point_subdiff(v.weight * x / nn, SubdiffKind::Frechet);
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          if (v.c >= 0) {
            auto inner = frechet_subdiff(*v.child, x, k_arc);
            Subdifferential s;
            s.body = scale_body(v.c, inner.body);
            s.singular = v.c > 0 ? Mat(v.c * inner.singular) : Mat(n, 0);
            s.kind = inner.kind;
            s.convex = inner.convex;
            for (const auto& p : inner.pieces) s.pieces.push_back(scale_body(v.c, p));
            return s;
          }
          // negative scaling flips only at smooth points
          return point_subdiff(v.c * gradient_unchecked(*v.child, x), SubdiffKind::Frechet);
        } else {
          if (std::abs(x[0]) > tols().membership) {
            Vec g(1);
            if (v.kind == BuiltinKind::Lemma25Counterexample)
              g[0] = x[0] > 0 ? 0.0 : 1.0;
            else
              g[0] = 0.0;
            return point_subdiff(g, SubdiffKind::Frechet);
          }
          Subdifferential s;
          Mat V(1, 1), R(1, 1), sing(1, 1);
          R << 1.0;
          sing << 1.0;
          V << (v.kind == BuiltinKind::Lemma25Counterexample ? 1.0 : 0.0);
          s.body = {V, R};  // [1,inf) resp. [0,inf)
          s.singular = sing;
          s.kind = SubdiffKind::Frechet;
          return s;
        }
      },
      f.node());
}

Subdifferential limiting_subdiff(const FuncExpr& f, const Vec& x, int k_arc) {
  if (x.size() != f.dim()) throw DimensionMismatch("limiting_subdiff");
  const int n = f.dim();

  auto finish = [&](std::vector<ConvexBody> pieces, Mat singular) {
    try {
      auto fr = frechet_subdiff(f, x, k_arc);
      pieces.push_back(fr.body);
      singular = concat_cols(singular, fr.singular);
    } catch (const Error&) {
    }
    Subdifferential s;
    s.body = hull_of(pieces);
    s.singular = singular;
    s.kind = SubdiffKind::Limiting;
    s.convex = pieces.size() <= 1;
    s.pieces = std::move(pieces);
    return s;
  };

  return std::visit(
      [&](const auto& v) -> Subdifferential {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffineFn>) {
          return point_subdiff(v.a, SubdiffKind::Limiting);
        } else if constexpr (std::is_same_v<T, QuadraticFn>) {
          return point_subdiff(2.0 * (v.Q * x) + v.c, SubdiffKind::Limiting);
        } else if constexpr (std::is_same_v<T, DistToFn>) {
          double d = distance(*v.set, x);
          double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
          std::vector<ConvexBody> pieces;
          if (d > tols().membership * scale) {
            for (const auto& p : project(*v.set, x))
              pieces.push_back(ConvexBody::point((x - p) / d));
            return finish(std::move(pieces), Mat(n, 0));
          }
          if (!v.set->piece_info())
            throw UnsupportedStructure("limiting_subdiff: set does not decompose");
          const double mtol = tols().membership * scale;
          for (const auto& e : v.set->piece_info()->entries) {
            if (e.empty) continue;
            bool touches =
                e.singleton ? ((x - *e.singleton).norm() <= mtol) : e.piece.feasible(x, mtol);
            if (!touches) continue;
            PolyhedralCone K{e.singleton ? PolyhedralCone::full(n).gens
                                         : e.piece.normal_cone_generators(x),
                             n, true};
            pieces.push_back(cone_ball_slice(K, k_arc));
          }
          return finish(std::move(pieces), Mat(n, 0));
        } else if constexpr (std::is_same_v<T, MaxFn>) {
          auto act = active_children(v, f, x);
          std::vector<ConvexBody> pieces;
          Mat singular(n, 0);
          std::vector<ConvexBody> child_hulls;
          for (const auto* c : act) {
            auto sub = limiting_subdiff(*c, x, k_arc);
            singular = concat_cols(singular, sub.singular);
            child_hulls.push_back(sub.body);
            if (sub.convex)
              pieces.push_back(sub.body);
            else
              for (const auto& p : sub.pieces) pieces.push_back(p);
          }
          if (act.size() >= 2) pieces.push_back(hull_of(child_hulls));  // mixture envelope
          return finish(std::move(pieces), singular);
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          Mat J = surjective_jacobian(v, x);
          auto inner = limiting_subdiff(*v.g, eval_map(*v.psi, x), k_arc);
          std::vector<ConvexBody> pieces;
          if (inner.convex)
            pieces.push_back(map_body(J.transpose(), inner.body));
          else
            for (const auto& p : inner.pieces) pieces.push_back(map_body(J.transpose(), p));
          Mat singular = inner.singular.cols() ? Mat(J.transpose() * inner.singular) : Mat(n, 0);
          return finish(std::move(pieces), singular);
        } else if constexpr (std::is_same_v<T, NormScaledFn>) {
          auto s = frechet_subdiff(f, x, k_arc);
          s.kind = SubdiffKind::Limiting;
          return s;
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          auto inner = limiting_subdiff(*v.child, x, k_arc);
          std::vector<ConvexBody> pieces;
          if (inner.convex)
            pieces.push_back(scale_body(v.c, inner.body));
          else
            for (const auto& p : inner.pieces) pieces.push_back(scale_body(v.c, p));
          Mat singular = inner.singular.cols() ? Mat(v.c * inner.singular) : Mat(n, 0);
          Subdifferential s;
          s.body = hull_of(pieces);
          s.singular = singular;
          s.kind = SubdiffKind::Limiting;
          s.convex = pieces.size() <= 1;
          s.pieces = std::move(pieces);
          return s;
        } else {
          if (std::abs(x[0]) > tols().membership) {
            auto s = frechet_subdiff(f, x, k_arc);
            s.kind = SubdiffKind::Limiting;
            return s;
          }
          // f-attentive limits at 0 add the left-side gradients
          std::vector<ConvexBody> pieces;
          pieces.push_back(ConvexBody::point(
              make_vec({v.kind == BuiltinKind::Lemma25Counterexample ? 1.0 : 0.0})));
          Mat sing(1, 1);
          sing << 1.0;
          return finish(std::move(pieces), sing);
        }
      },
      f.node());
}

bool subdiff_membership_oracle(const FuncExpr& f, const Vec& x, const Vec& v, double eta,
                               int n_samples, std::uint64_t seed, double delta0) {
  if (x.size() != f.dim() || v.size() != f.dim()) throw DimensionMismatch("subdiff oracle");
  if (!v.allFinite()) throw Error("subdiff oracle: v must be finite");
  const double fx = eval(f, x);
  const int shells = 12;
  const int per_shell = std::max(1, n_samples / shells);
  for (int j = 0; j < shells; ++j) {
    double r = delta0 * std::pow(2.0, -j);
    Rng rng(derive_seed(seed, 0x5D1FF, j));
    for (int s = 0; s < per_shell; ++s) {
      Vec u = x + r * std::pow(rng.uniform(), 1.0 / f.dim()) * rng.unit_vector(f.dim());
      double nu = (u - x).norm();
      if (nu < 1e-14) continue;
      if (eval(f, u) - fx - v.dot(u - x) < -eta * nu) return false;
    }
  }
  return true;
}

ConvexBody scaled_union_hull(const ConvexBody& body, double tau) {
  if (tau < 0) throw Error("scaled_union_hull: tau must be nonnegative");
  if (!body.bounded()) throw UnboundedBody("scaled_union_hull: body has rays");
  Mat V(body.vertices.rows(), body.vertices.cols() + 1);
  V.col(0) = Vec::Zero(body.vertices.rows());
  V.rightCols(body.vertices.cols()) = tau * body.vertices;
  auto out = ConvexBody::from_vertices(V);
  if (out.dim() == 2) return hull_of({out});  // prunes interior vertices
  return out;
}

}  // namespace ebcert
