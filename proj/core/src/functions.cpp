#include "ebcert/functions.hpp"

#include <algorithm>
#include <cmath>

namespace ebcert {

namespace {

void check_dim(const FuncExpr& f, const Vec& x) {
  if (x.size() != f.dim()) throw DimensionMismatch("function evaluation");
}

bool node_is_affine(const FuncExpr& f) { return std::holds_alternative<AffineFn>(f.node()); }
bool node_is_quadratic(const FuncExpr& f) { return std::holds_alternative<QuadraticFn>(f.node()); }

// collect affine leaves of nested maxima; returns false if non-affine found
bool collect_affine_rows(const FuncExpr& f, std::vector<std::pair<Vec, double>>& rows) {
  if (const auto* a = std::get_if<AffineFn>(&f.node())) {
    rows.push_back({a->a, a->b});
    return true;
  }
  if (const auto* m = std::get_if<MaxFn>(&f.node())) {
    for (const auto& c : m->children)
      if (!collect_affine_rows(*c, rows)) return false;
    return true;
  }
  return false;
}

}  // namespace

// ---- factories ---------------------------------------------------------------

FuncPtr FuncExpr::affine(Vec a, double b) {
  if (a.size() == 0) throw DimensionMismatch("affine: empty coefficient vector");
  int d = static_cast<int>(a.size());
  return std::shared_ptr<FuncExpr>(new FuncExpr(AffineFn{std::move(a), b}, d));
}

FuncPtr FuncExpr::quadratic(Mat Q, Vec c, double d) {
  if (Q.rows() != Q.cols() || Q.rows() != c.size())
    throw DimensionMismatch("quadratic: Q/c shapes");
  Mat Qs = 0.5 * (Q + Q.transpose());
  int n = static_cast<int>(c.size());
  return std::shared_ptr<FuncExpr>(new FuncExpr(QuadraticFn{std::move(Qs), std::move(c), d}, n));
}

FuncPtr FuncExpr::dist(SetPtr S) {
  if (!S) throw Error("dist: null set");
  int d = S->dim();
  return std::shared_ptr<FuncExpr>(new FuncExpr(DistToFn{std::move(S)}, d));
}

FuncPtr FuncExpr::max_of(std::vector<FuncPtr> children) {
  if (children.empty()) throw Error("max: empty list");
  int d = children[0]->dim();
  for (const auto& c : children)
    if (c->dim() != d) throw DimensionMismatch("max: children dims differ");
  return std::shared_ptr<FuncExpr>(new FuncExpr(MaxFn{std::move(children)}, d));
}

FuncPtr FuncExpr::compose(FuncPtr g, MapPtr psi, std::uint64_t check_seed) {
  if (!g || !psi) throw Error("compose: null argument");
  if (g->dim() != psi->codomain_dim) throw DimensionMismatch("compose: g dim vs psi codomain");
  if (!midpoint_convex_sampled(*g, check_seed))
    throw Error("compose: g failed the midpoint convexity check");
  int d = psi->domain_dim;
  return std::shared_ptr<FuncExpr>(new FuncExpr(ComposeFn{std::move(g), std::move(psi)}, d));
}

FuncPtr FuncExpr::norm_scaled(double weight, int dim) {
  if (weight <= 0) throw Error("norm_scaled: weight must be positive");
  if (dim <= 0) throw DimensionMismatch("norm_scaled: bad dim");
  return std::shared_ptr<FuncExpr>(new FuncExpr(NormScaledFn{weight}, dim));
}

FuncPtr FuncExpr::scale(double c, FuncPtr child) {
  if (!child) throw Error("scale: null child");
  int d = child->dim();
  return std::shared_ptr<FuncExpr>(new FuncExpr(ScaleFn{c, std::move(child)}, d));
}

FuncPtr FuncExpr::builtin(BuiltinKind kind) {
  return std::shared_ptr<FuncExpr>(new FuncExpr(BuiltinFn{kind}, 1));
}

MapPtr SmoothMap::make(std::vector<FuncPtr> components) {
  if (components.empty()) throw Error("SmoothMap: no components");
  int n = components[0]->dim();
  for (const auto& c : components) {
    if (c->dim() != n) throw DimensionMismatch("SmoothMap: component dims differ");
    if (!node_is_affine(*c) && !node_is_quadratic(*c))
      throw UnsupportedStructure("SmoothMap: components must be affine or quadratic");
  }
  auto m = std::make_shared<SmoothMap>();
  m->components = std::move(components);
  m->domain_dim = n;
  m->codomain_dim = static_cast<int>(m->components.size());
  return m;
}

MapPtr SmoothMap::identity(int n) {
  std::vector<FuncPtr> comps;
  for (int i = 0; i < n; ++i) comps.push_back(FuncExpr::affine(Vec::Unit(n, i), 0.0));
  return make(std::move(comps));
}

MapPtr SmoothMap::affine_map(Mat W, Vec t) {
  if (W.rows() != t.size()) throw DimensionMismatch("affine_map: W rows vs t");
  std::vector<FuncPtr> comps;
  for (int i = 0; i < W.rows(); ++i) comps.push_back(FuncExpr::affine(W.row(i).transpose(), t[i]));
  return make(std::move(comps));
}

bool SmoothMap::affine_parts(Mat& W, Vec& t) const {
  W = Mat(codomain_dim, domain_dim);
  t = Vec(codomain_dim);
  for (int i = 0; i < codomain_dim; ++i) {
    const auto* a = std::get_if<AffineFn>(&components[i]->node());
    if (!a) return false;
    W.row(i) = a->a.transpose();
    t[i] = a->b;
  }
  return true;
}

Vec eval_map(const SmoothMap& psi, const Vec& x) {
  if (x.size() != psi.domain_dim) throw DimensionMismatch("eval_map");
  Vec y(psi.codomain_dim);
  for (int i = 0; i < psi.codomain_dim; ++i) y[i] = eval(*psi.components[i], x);
  return y;
}

// ---- evaluation ----------------------------------------------------------------

double eval(const FuncExpr& f, const Vec& x) {
  check_dim(f, x);
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffineFn>) {
          return v.a.dot(x) + v.b;
        } else if constexpr (std::is_same_v<T, QuadraticFn>) {
          return x.dot(v.Q * x) + v.c.dot(x) + v.d;
        } else if constexpr (std::is_same_v<T, DistToFn>) {
          return distance(*v.set, x);
        } else if constexpr (std::is_same_v<T, MaxFn>) {
          double m = -std::numeric_limits<double>::infinity();
          for (const auto& c : v.children) m = std::max(m, eval(*c, x));
          return m;
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          return eval(*v.g, eval_map(*v.psi, x));
        } else if constexpr (std::is_same_v<T, NormScaledFn>) {
          return v.weight * x.norm();
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          return v.c * eval(*v.child, x);
        } else {
          return v.kind == BuiltinKind::Lemma25Counterexample ? (x[0] > 0 ? 1.0 : x[0])
                                                              : (x[0] > 0 ? 1.0 : -1.0);
        }
      },
      f.node());
}

double plus_part(const FuncExpr& f, const Vec& x) { return std::max(eval(f, x), 0.0); }

// ---- gradients ------------------------------------------------------------------

namespace {

Vec gradient_impl(const FuncExpr& f, const Vec& x) {
  return std::visit(
      [&](const auto& v) -> Vec {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffineFn>) {
          return v.a;
        } else if constexpr (std::is_same_v<T, QuadraticFn>) {
          return 2.0 * (v.Q * x) + v.c;
        } else if constexpr (std::is_same_v<T, DistToFn>) {
          double d = distance(*v.set, x);
          double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
          if (d <= tols().membership * scale) {
            // inside: gradient 0 when a ring around x stays in the set
            const double h = 2e-5;
            const int n = f.dim();
            for (int i = 0; i < n; ++i)
              for (int sgn : {+1, -1})
                if (!set_contains(*v.set, x + sgn * h * Vec::Unit(n, i), 1e-12))
                  throw NotDifferentiableHere("dist: boundary point");
            for (int k = 0; k < 8; ++k) {
              Rng rng(derive_seed(0xD15D, k));
              if (!set_contains(*v.set, x + h * rng.unit_vector(n), 1e-12))
                throw NotDifferentiableHere("dist: boundary point");
            }
            return Vec::Zero(n);
          }
          auto ps = project(*v.set, x);
          if (ps.size() != 1) throw NotDifferentiableHere("dist: non-unique projection");
          return (x - ps[0]) / d;
        } else if constexpr (std::is_same_v<T, MaxFn>) {
          double m = eval(f, x);
          double atol = tols().active * std::max(1.0, std::abs(m));
          const FuncExpr* active = nullptr;
          int n_active = 0;
          for (const auto& c : v.children)
            if (std::abs(eval(*c, x) - m) <= atol) {
              ++n_active;
              active = c.get();
            }
          if (n_active != 1) throw NotDifferentiableHere("max: ambiguous active piece");
          return gradient_impl(*active, x);
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          Vec y = eval_map(*v.psi, x);
          return jacobian_unchecked(*v.psi, x).transpose() * gradient_impl(*v.g, y);
        } else if constexpr (std::is_same_v<T, NormScaledFn>) {
          double n = x.norm();
          if (n < tols().active) throw NotDifferentiableHere("norm at the origin");
          return v.weight * x / n;
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          return v.c * gradient_impl(*v.child, x);
        } else {
          if (std::abs(x[0]) <= tols().active)
            throw NotDifferentiableHere("builtin: kink at the origin");
          Vec g(1);
          if (v.kind == BuiltinKind::Lemma25Counterexample)
            g[0] = x[0] > 0 ? 0.0 : 1.0;
          else
            g[0] = 0.0;
          return g;
        }
      },
      f.node());
}

}  // namespace

Vec gradient_unchecked(const FuncExpr& f, const Vec& x) {
  check_dim(f, x);
  return gradient_impl(f, x);
}

Vec gradient(const FuncExpr& f, const Vec& x) {
  check_dim(f, x);
  Vec g = gradient_impl(f, x);
  const double h = 1e-5;
  Vec fd(f.dim());
  for (int i = 0; i < f.dim(); ++i) {
    Vec e = Vec::Unit(f.dim(), i);
    fd[i] = (eval(f, x + h * e) - eval(f, x - h * e)) / (2 * h);
  }
  if ((g - fd).norm() > 1e-5 * std::max(1.0, g.norm()))
    throw NumericalInconsistency("gradient does not match central finite differences");
  return g;
}

Mat jacobian_unchecked(const SmoothMap& psi, const Vec& x) {
  if (x.size() != psi.domain_dim) throw DimensionMismatch("jacobian");
  Mat J(psi.codomain_dim, psi.domain_dim);
  for (int i = 0; i < psi.codomain_dim; ++i)
    J.row(i) = gradient_impl(*psi.components[i], x).transpose();
  return J;
}

Mat jacobian(const SmoothMap& psi, const Vec& x) {
  Mat J = jacobian_unchecked(psi, x);
  const double h = 1e-5;
  for (int i = 0; i < psi.codomain_dim; ++i) {
    for (int j = 0; j < psi.domain_dim; ++j) {
      Vec e = Vec::Unit(psi.domain_dim, j);
      double fd =
          (eval(*psi.components[i], x + h * e) - eval(*psi.components[i], x - h * e)) / (2 * h);
      if (std::abs(J(i, j) - fd) > 1e-5 * std::max(1.0, std::abs(J(i, j))))
        throw NumericalInconsistency("jacobian does not match finite differences");
    }
  }
  return J;
}

// ---- solution sets ----------------------------------------------------------------

namespace {

SetPtr full_space(int dim) { return SetExpr::halfspaces(Mat(0, dim), Vec(0)); }

std::optional<SetPtr> pullback_affine(const SetPtr& Sg, const Mat& W, const Vec& t);

std::optional<SetPtr> pullback_node(const SetExpr& Sg, const Mat& W, const Vec& t) {
  const int n = static_cast<int>(W.cols());
  return std::visit(
      [&](const auto& v) -> std::optional<SetPtr> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, HalfspaceSystem>) {
          std::vector<std::pair<Vec, double>> rows;
          for (int i = 0; i < v.A.rows(); ++i) {
            Vec r = W.transpose() * v.A.row(i).transpose();
            double rhs = v.b[i] - v.A.row(i).dot(t);
            if (r.norm() < 1e-12) {
              if (rhs < -1e-12) return SetExpr::empty(n);
              continue;  // vacuous row
            }
            rows.push_back({r, rhs});
          }
          if (rows.empty()) return full_space(n);
          Mat A(rows.size(), n);
          Vec b(rows.size());
          for (size_t i = 0; i < rows.size(); ++i) {
            A.row(i) = rows[i].first.transpose();
            b[i] = rows[i].second;
          }
          return SetExpr::halfspaces(A, b);
        } else if constexpr (std::is_same_v<T, BallSet>) {
          if (W.rows() != W.cols()) return std::nullopt;
          Mat WtW = W.transpose() * W;
          double s2 = WtW.trace() / W.cols();
          if ((WtW - s2 * Mat::Identity(W.cols(), W.cols())).norm() > 1e-10 || s2 <= 0)
            return std::nullopt;
          Vec x0 = W.transpose() * (v.center - t) / s2;
          if ((W * x0 + t - v.center).norm() > 1e-9) return SetExpr::empty(n);
          return SetExpr::ball(x0, v.radius / std::sqrt(s2));
        } else if constexpr (std::is_same_v<T, SingletonSet>) {
          if (W.rows() != W.cols()) return std::nullopt;
          Eigen::FullPivLU<Mat> lu(W);
          if (!lu.isInvertible()) return std::nullopt;
          return SetExpr::singleton(lu.solve(v.point - t));
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          std::vector<SetPtr> parts;
          for (const auto& c : v.parts) {
            auto p = pullback_affine(c, W, t);
            if (!p) return std::nullopt;
            parts.push_back(*p);
          }
          return SetExpr::unite(std::move(parts));
        } else if constexpr (std::is_same_v<T, IntersectionSet>) {
          std::vector<SetPtr> parts;
          for (const auto& c : v.parts) {
            auto p = pullback_affine(c, W, t);
            if (!p) return std::nullopt;
            parts.push_back(*p);
          }
          return SetExpr::intersect(std::move(parts));
        } else {
          return std::nullopt;
        }
      },
      Sg.node());
}

std::optional<SetPtr> pullback_affine(const SetPtr& Sg, const Mat& W, const Vec& t) {
  return pullback_node(*Sg, W, t);
}

}  // namespace

SetPtr solution_set(const FuncPtr& f) {
  if (!f) throw Error("solution_set: null function");
  const int n = f->dim();
  return std::visit(
      [&](const auto& v) -> SetPtr {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffineFn>) {
          if (v.a.norm() < 1e-12) return v.b <= 0 ? full_space(n) : SetExpr::empty(n);
          Mat A(1, n);
          A.row(0) = v.a.transpose();
          Vec b(1);
          b[0] = -v.b;
          return SetExpr::halfspaces(A, b);
        } else if constexpr (std::is_same_v<T, QuadraticFn>) {
          if (v.Q.norm() < 1e-14)
            return solution_set(FuncExpr::affine(v.c, v.d));
          if (n == 1) {
            double q = v.Q(0, 0), c = v.c[0], d = v.d;
            double disc = c * c - 4 * q * d;
            if (q > 0) {
              if (disc < 0) return SetExpr::empty(1);
              double r1 = (-c - std::sqrt(disc)) / (2 * q), r2 = (-c + std::sqrt(disc)) / (2 * q);
              if (r2 - r1 < 1e-14) return SetExpr::singleton(make_vec({(r1 + r2) / 2}));
              Mat A(2, 1);
              A << -1.0, 1.0;
              return SetExpr::halfspaces(A, make_vec({-r1, r2}));
            }
            // q < 0: complement of an open interval
            if (disc < 0) return full_space(1);
            double r1 = (-c + std::sqrt(disc)) / (2 * q), r2 = (-c - std::sqrt(disc)) / (2 * q);
            Mat A1(1, 1), A2(1, 1);
            A1 << 1.0;
            A2 << -1.0;
            return SetExpr::unite(
                {SetExpr::halfspaces(A1, make_vec({r1})), SetExpr::halfspaces(A2, make_vec({-r2}))});
          }
          double alpha = v.Q.trace() / n;
          if (alpha > 0 && (v.Q - alpha * Mat::Identity(n, n)).norm() < 1e-12) {
            Vec center = -v.c / (2 * alpha);
            double r2 = (v.c.squaredNorm() / (4 * alpha) - v.d) / alpha;
            if (r2 < 0) return SetExpr::empty(n);
            return SetExpr::ball(center, std::sqrt(r2));
          }
          return SetExpr::sublevel(f, 0.0);
        } else if constexpr (std::is_same_v<T, DistToFn>) {
          return v.set;
        } else if constexpr (std::is_same_v<T, MaxFn>) {
          std::vector<std::pair<Vec, double>> rows;
          if (collect_affine_rows(*f, rows)) {
            Mat A(rows.size(), n);
            Vec b(rows.size());
            for (size_t i = 0; i < rows.size(); ++i) {
              A.row(i) = rows[i].first.transpose();
              b[i] = -rows[i].second;
            }
            return SetExpr::halfspaces(A, b);
          }
          std::vector<SetPtr> parts;
          for (const auto& c : v.children) parts.push_back(solution_set(c));
          return SetExpr::intersect(std::move(parts));
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          Mat W;
          Vec t;
          if (v.psi->affine_parts(W, t)) {
            auto pb = pullback_affine(solution_set(v.g), W, t);
            if (pb) return *pb;
          }
          return SetExpr::sublevel(f, 0.0);
        } else if constexpr (std::is_same_v<T, NormScaledFn>) {
          return SetExpr::singleton(Vec::Zero(n));
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          if (v.c > 0) return solution_set(v.child);
          if (v.c == 0) return full_space(n);
          if (const auto* a = std::get_if<AffineFn>(&v.child->node())) {
            // {c*g <= 0} = {g >= 0}
            if (a->a.norm() < 1e-12) return a->b >= 0 ? full_space(n) : SetExpr::empty(n);
            Mat A(1, n);
            A.row(0) = -a->a.transpose();
            return SetExpr::halfspaces(A, make_vec({a->b}));
          }
          return SetExpr::sublevel(f, 0.0);
        } else {
          Mat A(1, 1);
          A << 1.0;
          return SetExpr::halfspaces(A, make_vec({0.0}));  // both builtins: {x <= 0}
        }
      },
      f->node());
}

bool continuous_everywhere(const FuncExpr& f) {
  return std::visit(
      [&](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, MaxFn>) {
          for (const auto& c : v.children)
            if (!continuous_everywhere(*c)) return false;
          return true;
        } else if constexpr (std::is_same_v<T, ComposeFn>) {
          return continuous_everywhere(*v.g);
        } else if constexpr (std::is_same_v<T, ScaleFn>) {
          return continuous_everywhere(*v.child);
        } else if constexpr (std::is_same_v<T, BuiltinFn>) {
          return false;
        } else {
          return true;
        }
      },
      f.node());
}

bool locally_lipschitz(const FuncExpr& f) { return continuous_everywhere(f); }

bool midpoint_convex_sampled(const FuncExpr& f, std::uint64_t seed, int n_pairs, double box) {
  const int n = f.dim();
  Rng rng(derive_seed(seed, 0xC0, n));
  for (int i = 0; i < n_pairs; ++i) {
    Vec a(n), b(n);
    for (int k = 0; k < n; ++k) {
      a[k] = rng.uniform(-box, box);
      b[k] = rng.uniform(-box, box);
    }
    double lhs = eval(f, 0.5 * (a + b));
    double rhs = 0.5 * (eval(f, a) + eval(f, b));
    if (lhs > rhs + tols().cert * std::max(1.0, std::abs(rhs))) return false;
  }
  return true;
}

}  // namespace ebcert
