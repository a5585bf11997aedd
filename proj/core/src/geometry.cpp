#include "ebcert/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

#include "ebcert/functions.hpp"

namespace ebcert {

namespace {

constexpr int kMaxPieceConstraints = 18;
constexpr int kMaxPieces = 96;

double piece_scale(const ConvexPiece& pc, const Vec& x) {
  double s = std::max(1.0, x.cwiseAbs().maxCoeff());
  if (pc.A.rows()) s = std::max(s, pc.b.cwiseAbs().maxCoeff());
  for (const auto& bl : pc.balls) s = std::max({s, bl.first.cwiseAbs().maxCoeff(), bl.second});
  return s;
}

// Solves the active-equality system {A_W u = b_W, |u-c_j| = r_j (j in Wb)}
// and returns all roots found. Closed forms for <=2 free parameters with
// balls, Newton multi-start beyond.
std::vector<Vec> equality_candidates(const ConvexPiece& pc, const std::vector<int>& Wl,
                                     const std::vector<int>& Wb, const Vec& anchor) {
  std::vector<Vec> out;
  const int n = pc.dim;
  const double tol = 1e-9 * piece_scale(pc, anchor);

  Mat Al(Wl.size(), n);
  Vec bl(Wl.size());
  for (size_t i = 0; i < Wl.size(); ++i) {
    Al.row(i) = pc.A.row(Wl[i]);
    bl[i] = pc.b[Wl[i]];
  }

  Vec p0;
  Mat N;  // null-space basis of Al
  if (Wl.empty()) {
    p0 = Vec::Zero(n);
    N = Mat::Identity(n, n);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Al);
    p0 = cod.solve(bl);
    if ((Al * p0 - bl).cwiseAbs().maxCoeff() > tol) return out;  // inconsistent
    Eigen::JacobiSVD<Mat> svd(Al, Eigen::ComputeFullV);
    double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()[i] > 1e-11 * std::max(1.0, smax)) ++rank;
    N = svd.matrixV().rightCols(n - rank);
  }
  const int q = static_cast<int>(N.cols());

  auto check_balls_from = [&](size_t start, const Vec& u) {
    for (size_t j = start; j < Wb.size(); ++j) {
      const auto& bll = pc.balls[Wb[j]];
      if (std::abs((u - bll.first).norm() - bll.second) > 10 * tol) return false;
    }
    return true;
  };

  if (q == 0) {
    if (check_balls_from(0, p0)) out.push_back(p0);
    return out;
  }
  if (Wb.empty()) return out;  // free directions remain: not a pinned system

  // ball j: |p0 + N t - c|^2 = r^2  ->  |t|^2 + 2 g.t + e = 0  (N orthonormal)
  auto ball_coeffs = [&](int j, Vec& g, double& e) {
    const auto& bll = pc.balls[Wb[j]];
    Vec w = p0 - bll.first;
    g = N.transpose() * w;
    e = w.squaredNorm() - bll.second * bll.second;
  };

  if (q == 1) {
    Vec g(1);
    double e;
    ball_coeffs(0, g, e);
    double disc = g[0] * g[0] - e;
    if (disc < -10 * tol * std::max(1.0, std::abs(e))) return out;
    disc = std::max(0.0, disc);
    for (double t : {-g[0] + std::sqrt(disc), -g[0] - std::sqrt(disc)}) {
      Vec u = p0 + N * Vec::Constant(1, t);
      if (check_balls_from(1, u)) out.push_back(u);
    }
    return out;
  }

  if (q == 2 && Wb.size() >= 2) {
    // subtract two sphere equations -> line in t, then quadratic
    Vec g1(2), g2(2);
    double e1, e2;
    ball_coeffs(0, g1, e1);
    ball_coeffs(1, g2, e2);
    Vec dg = 2.0 * (g1 - g2);
    double de = e1 - e2;  // dg.t + de = 0
    if (dg.norm() < tol) return out;
    Vec t0 = -de * dg / dg.squaredNorm();
    Vec dir(2);
    dir << -dg[1], dg[0];
    dir.normalize();
    // |t0 + s dir|^2 + 2 g1.(t0 + s dir) + e1 = 0
    double A = 1.0;
    double B = 2.0 * (t0.dot(dir) + g1.dot(dir));
    double C = t0.squaredNorm() + 2.0 * g1.dot(t0) + e1;
    double disc = B * B - 4 * A * C;
    if (disc < -10 * tol * std::max(1.0, std::abs(C))) return out;
    disc = std::max(0.0, disc);
    for (double s : {(-B + std::sqrt(disc)) / 2, (-B - std::sqrt(disc)) / 2}) {
      Vec u = p0 + N * (t0 + s * dir);
      if (check_balls_from(2, u)) out.push_back(u);
    }
    return out;
  }

  if (static_cast<int>(Wb.size()) < q) return out;  // underdetermined

  // Newton multi-start on the q-dim sphere system
  auto F = [&](const Vec& t) {
    Vec f(Wb.size());
    for (size_t j = 0; j < Wb.size(); ++j) {
      const auto& bll = pc.balls[Wb[j]];
      f[j] = (p0 + N * t - bll.first).squaredNorm() - bll.second * bll.second;
    }
    return f;
  };
  auto J = [&](const Vec& t) {
    Mat jm(Wb.size(), q);
    for (size_t j = 0; j < Wb.size(); ++j) {
      const auto& bll = pc.balls[Wb[j]];
      jm.row(j) = 2.0 * ((p0 + N * t - bll.first).transpose() * N);
    }
    return jm;
  };
  std::vector<Vec> starts;
  starts.push_back(N.transpose() * (anchor - p0));
  starts.push_back(Vec::Zero(q));
  for (int k = 0; k < q; ++k) {
    starts.push_back(Vec::Unit(q, k));
    starts.push_back(-Vec::Unit(q, k));
  }
  for (auto t : starts) {
    for (int it = 0; it < 80; ++it) {
      Vec f = F(t);
      if (f.cwiseAbs().maxCoeff() < 1e-13 * std::max(1.0, piece_scale(pc, anchor))) break;
      Mat jm = J(t);
      Vec dt = jm.completeOrthogonalDecomposition().solve(-f);
      if (!dt.allFinite()) break;
      t += dt;
    }
    Vec u = p0 + N * t;
    bool ok = true;
    if ((Al.rows() ? (Al * u - bl).cwiseAbs().maxCoeff() : 0.0) > 10 * tol) ok = false;
    if (ok && check_balls_from(0, u)) {
      bool dup = false;
      for (const auto& v : out)
        if ((v - u).norm() < 10 * tol) dup = true;
      if (!dup) out.push_back(u);
    }
  }
  return out;
}

struct KktCandidate {
  Vec u;
  bool dual_ok = false;
};

// least-squares duals for the stationarity system at a known point u;
// returns (solvable, all-signs-ok)
std::pair<bool, bool> stationarity_duals(const ConvexPiece& pc, const Vec& x, const Vec& u,
                                         const std::vector<int>& Wl, const std::vector<int>& Wb) {
  const int n = pc.dim;
  const int k = static_cast<int>(Wl.size() + Wb.size());
  if (k == 0) return {(u - x).norm() < 1e-9, true};
  Mat G(n, k);
  for (size_t i = 0; i < Wl.size(); ++i) G.col(i) = pc.A.row(Wl[i]).transpose();
  for (size_t j = 0; j < Wb.size(); ++j)
    G.col(Wl.size() + j) = 2.0 * (u - pc.balls[Wb[j]].first);
  Vec rhs = x - u;
  Vec lam = G.completeOrthogonalDecomposition().solve(rhs);
  if ((G * lam - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) return {false, false};
  bool ok = true;
  for (int i = 0; i < lam.size(); ++i)
    if (lam[i] < -1e-8) ok = false;
  return {true, ok};
}

// KKT candidates of min |u-x|^2 with the given active set, signed duals
// reported. Linear-only subsets are solved in closed form; ball subsets by
// damped Newton from deterministic starts.
std::vector<KktCandidate> projection_kkt_candidates(const ConvexPiece& pc, const Vec& x,
                                                    const std::vector<int>& Wl,
                                                    const std::vector<int>& Wb) {
  std::vector<KktCandidate> out;
  const int n = pc.dim;
  const double tol = 1e-9 * piece_scale(pc, x);

  // fully pinned active sets: equality roots plus post-hoc duals
  if (!Wb.empty() && static_cast<int>(Wl.size() + Wb.size()) >= n) {
    for (const auto& u : equality_candidates(pc, Wl, Wb, x)) {
      auto [solvable, ok] = stationarity_duals(pc, x, u, Wl, Wb);
      out.push_back({u, solvable && ok});
    }
    return out;
  }

  // single active sphere: closed form
  if (Wl.empty() && Wb.size() == 1) {
    const auto& bl = pc.balls[Wb[0]];
    Vec d = x - bl.first;
    double dn = d.norm();
    if (dn > 1e-12 && bl.second > 1e-13) {
      for (int sgn : {+1, -1}) {
        Vec u = bl.first + sgn * bl.second * d / dn;
        auto [solvable, ok] = stationarity_duals(pc, x, u, Wl, Wb);
        out.push_back({u, solvable && ok});
      }
      return out;
    }
  }

  if (Wb.empty()) {
    if (Wl.empty()) {
      out.push_back({x, true});
      return out;
    }
    Mat Al(Wl.size(), n);
    Vec bl(Wl.size());
    for (size_t i = 0; i < Wl.size(); ++i) {
      Al.row(i) = pc.A.row(Wl[i]);
      bl[i] = pc.b[Wl[i]];
    }
    Mat G = Al * Al.transpose();
    Vec rhs = Al * x - bl;
    Vec lam = G.completeOrthogonalDecomposition().solve(rhs);
    Vec u = x - Al.transpose() * lam;
    if ((Al * u - bl).cwiseAbs().maxCoeff() > tol) return out;  // inconsistent
    bool ok = true;
    for (int i = 0; i < lam.size(); ++i)
      if (lam[i] < -1e-9) ok = false;
    out.push_back({u, ok});
    return out;
  }

  // Newton on stationarity + equalities, unknowns (u, lam, mu)
  const int nl = static_cast<int>(Wl.size()), nb = static_cast<int>(Wb.size());
  const int nt = n + nl + nb;
  auto resid = [&](const Vec& z) {
    Vec u = z.head(n);
    Vec f = Vec::Zero(nt);
    Vec stat = u - x;
    for (int i = 0; i < nl; ++i) stat += z[n + i] * pc.A.row(Wl[i]).transpose();
    for (int j = 0; j < nb; ++j) stat += 2.0 * z[n + nl + j] * (u - pc.balls[Wb[j]].first);
    f.head(n) = stat;
    for (int i = 0; i < nl; ++i) f[n + i] = pc.A.row(Wl[i]).dot(u) - pc.b[Wl[i]];
    for (int j = 0; j < nb; ++j) {
      const auto& bl = pc.balls[Wb[j]];
      f[n + nl + j] = (u - bl.first).squaredNorm() - bl.second * bl.second;
    }
    return f;
  };
  auto jac = [&](const Vec& z) {
    Vec u = z.head(n);
    Mat jm = Mat::Zero(nt, nt);
    double musum = 0.0;
    for (int j = 0; j < nb; ++j) musum += z[n + nl + j];
    jm.topLeftCorner(n, n) = (1.0 + 2.0 * musum) * Mat::Identity(n, n);
    for (int i = 0; i < nl; ++i) {
      jm.block(0, n + i, n, 1) = pc.A.row(Wl[i]).transpose();
      jm.block(n + i, 0, 1, n) = pc.A.row(Wl[i]);
    }
    for (int j = 0; j < nb; ++j) {
      jm.block(0, n + nl + j, n, 1) = 2.0 * (u - pc.balls[Wb[j]].first);
      jm.block(n + nl + j, 0, 1, n) = 2.0 * (u - pc.balls[Wb[j]].first).transpose();
    }
    return jm;
  };

  std::vector<Vec> starts;
  {
    Vec z0 = Vec::Zero(nt);
    z0.head(n) = x;
    starts.push_back(z0);
    for (int j = 0; j < nb; ++j) {
      const auto& bl = pc.balls[Wb[j]];
      Vec d = x - bl.first;
      if (d.norm() < 1e-12) d = Vec::Unit(n, 0);
      d.normalize();
      Vec z(nt);
      z.setZero();
      z.head(n) = bl.first + bl.second * d;
      z[n + nl + j] = 0.1;
      starts.push_back(z);
      z.head(n) = bl.first - bl.second * d;
      starts.push_back(z);
    }
  }
  const double scale = piece_scale(pc, x);
  for (auto z : starts) {
    bool conv = false;
    double prev_res = std::numeric_limits<double>::infinity();
    int worse = 0;
    for (int it = 0; it < 60; ++it) {
      Vec f = resid(z);
      double res = f.cwiseAbs().maxCoeff();
      if (res < 1e-12 * scale) {
        conv = true;
        break;
      }
      worse = res > 0.9 * prev_res ? worse + 1 : 0;
      if (worse >= 6) break;  // stalled
      prev_res = res;
      Mat jm = jac(z);
      Eigen::PartialPivLU<Mat> lu(jm);
      Vec dz = lu.solve(-f);
      if (!dz.allFinite() || (jm * dz + f).norm() > 1e-6 * std::max(1.0, f.norm()))
        dz = jm.completeOrthogonalDecomposition().solve(-f);
      if (!dz.allFinite()) break;
      double step = 1.0;
      if (dz.cwiseAbs().maxCoeff() > 10 * scale) step = 10 * scale / dz.cwiseAbs().maxCoeff();
      z += step * dz;
    }
    if (!conv) continue;
    Vec u = z.head(n);
    bool dual_ok = true;
    for (int i = 0; i < nl + nb; ++i)
      if (z[n + i] < -1e-8) dual_ok = false;
    bool dup = false;
    for (const auto& c : out)
      if ((c.u - u).norm() < 10 * tol) dup = true;
    if (!dup) out.push_back({u, dual_ok});
  }
  // pinned roots (no stationarity) cover CQ-degenerate corners
  for (const auto& u : equality_candidates(pc, Wl, Wb, x)) {
    bool dup = false;
    for (const auto& c : out)
      if ((c.u - u).norm() < 10 * tol) dup = true;
    if (!dup) out.push_back({u, false});
  }
  return out;
}

void subsets_by_cardinality(int m, const std::function<bool(const std::vector<int>&)>& visit) {
  // visit returns true to stop
  for (int k = 0; k <= m; ++k) {
    std::vector<int> comb(k);
    std::iota(comb.begin(), comb.end(), 0);
    if (k == 0) {
      if (visit(comb)) return;
      continue;
    }
    if (k > m) break;
    while (true) {
      if (visit(comb)) return;
      int i = k - 1;
      while (i >= 0 && comb[i] == m - k + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
}

}  // namespace

bool ConvexPiece::feasible(const Vec& x, double tol) const {
  if (A.rows() && ((A * x - b).maxCoeff() > tol)) return false;
  for (const auto& bl : balls)
    if ((x - bl.first).norm() > bl.second + tol) return false;
  return true;
}

std::optional<Vec> ConvexPiece::project(const Vec& x) const {
  const int m = n_constraints();
  if (m > kMaxPieceConstraints) throw SizeLimitExceeded("convex piece too large");
  const double ftol = 1e-9 * piece_scale(*this, x);
  if (feasible(x, ftol)) return x;
  for (const auto& bl : balls)
    if (bl.second <= 1e-13) {  // zero-radius ball pins the point
      if (feasible(bl.first, ftol)) return bl.first;
      return std::nullopt;
    }

  const int ml = static_cast<int>(A.rows());
  std::optional<Vec> best;
  double best_d = std::numeric_limits<double>::infinity();
  std::optional<Vec> best_kkt;
  double best_kkt_d = std::numeric_limits<double>::infinity();

  subsets_by_cardinality(m, [&](const std::vector<int>& comb) {
    if (comb.empty()) return false;  // infeasible x: empty active set impossible
    std::vector<int> Wl, Wb;
    for (int c : comb)
      (c < ml ? Wl : Wb).push_back(c < ml ? c : c - ml);
    for (const auto& cand : projection_kkt_candidates(*this, x, Wl, Wb)) {
      if (!feasible(cand.u, 50 * ftol)) continue;
      double d = (cand.u - x).norm();
      if (cand.dual_ok && d < best_kkt_d) {
        best_kkt_d = d;
        best_kkt = cand.u;
      }
      if (d < best_d) {
        best_d = d;
        best = cand.u;
      }
    }
    // KKT-certified point is the exact projection: stop early
    return best_kkt.has_value();
  });

  if (best_kkt) return best_kkt;
  return best;  // degenerate geometry: best feasible stationary/pinned point
}

std::optional<double> ConvexPiece::support(const Vec& d) const {
  const int m = n_constraints();
  if (m > kMaxPieceConstraints) throw SizeLimitExceeded("convex piece too large");
  const int ml = static_cast<int>(A.rows());
  const int n = dim;
  const double dscale = std::max(1.0, d.norm());
  for (const auto& bl : balls)
    if (bl.second <= 1e-13) {
      if (feasible(bl.first, 1e-9 * piece_scale(*this, bl.first))) return d.dot(bl.first);
      throw EmptySet("support of empty piece");
    }

  if (balls.empty()) {
    // unbounded iff d has positive component over the recession cone
    if (ml == 0) return d.norm() < 1e-12 ? std::optional<double>(0.0) : std::nullopt;
    Mat G = A.transpose();  // columns are row-vectors
    if (nnls(G, d).residual > 1e-9 * dscale) return std::nullopt;
  }

  bool any = false;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::vector<int>, std::vector<int>>> all_subsets;
  subsets_by_cardinality(m, [&](const std::vector<int>& comb) {
    std::vector<int> Wl, Wb;
    for (int c : comb)
      (c < ml ? Wl : Wb).push_back(c < ml ? c : c - ml);
    all_subsets.emplace_back(Wl, Wb);
    return false;
  });

  const double ftol = 1e-9 * piece_scale(*this, Vec::Zero(n));
  for (const auto& [Wl, Wb] : all_subsets) {
    if (Wb.empty()) {
      if (Wl.empty()) continue;
      // face optimum requires d in rowspan(A_W); value is constant on face
      Mat Al(Wl.size(), n);
      Vec bl(Wl.size());
      for (size_t i = 0; i < Wl.size(); ++i) {
        Al.row(i) = A.row(Wl[i]);
        bl[i] = b[Wl[i]];
      }
      Vec lam = (Al * Al.transpose()).completeOrthogonalDecomposition().solve(Al * d);
      if ((Al.transpose() * lam - d).norm() > 1e-8 * dscale) continue;
      Vec p0 = Al.completeOrthogonalDecomposition().solve(bl);
      if ((Al * p0 - bl).cwiseAbs().maxCoeff() > ftol) continue;
      // feasibility of face ∩ piece via projection onto the equality-augmented piece
      ConvexPiece aug;
      aug.dim = n;
      aug.A = Mat(A.rows() + Wl.size(), n);
      aug.A.topRows(A.rows()) = A;
      aug.b = Vec(b.size() + Wl.size());
      aug.b.head(b.size()) = b;
      for (size_t i = 0; i < Wl.size(); ++i) {
        aug.A.row(A.rows() + i) = -Al.row(i);
        aug.b[b.size() + i] = -bl[i];
      }
      aug.balls = balls;
      if (aug.n_constraints() > kMaxPieceConstraints) continue;
      auto fp = aug.project(p0);
      if (!fp) continue;
      any = true;
      best = std::max(best, d.dot(*fp));
      continue;
    }
    // stationarity d = A_W^T lam + sum 2 mu_j (u - c_j), active equalities
    const int nl = static_cast<int>(Wl.size()), nb = static_cast<int>(Wb.size());
    const int nt = n + nl + nb;
    auto resid = [&](const Vec& z) {
      Vec u = z.head(n);
      Vec f = Vec::Zero(nt);
      Vec stat = -d;
      for (int i = 0; i < nl; ++i) stat += z[n + i] * A.row(Wl[i]).transpose();
      for (int j = 0; j < nb; ++j) stat += 2.0 * z[n + nl + j] * (u - balls[Wb[j]].first);
      f.head(n) = stat;
      for (int i = 0; i < nl; ++i) f[n + i] = A.row(Wl[i]).dot(u) - b[Wl[i]];
      for (int j = 0; j < nb; ++j) {
        const auto& bl = balls[Wb[j]];
        f[n + nl + j] = (u - bl.first).squaredNorm() - bl.second * bl.second;
      }
      return f;
    };
    auto jacm = [&](const Vec& z) {
      Vec u = z.head(n);
      Mat jm = Mat::Zero(nt, nt);
      double musum = 0.0;
      for (int j = 0; j < nb; ++j) musum += z[n + nl + j];
      jm.topLeftCorner(n, n) = 2.0 * musum * Mat::Identity(n, n);
      for (int i = 0; i < nl; ++i) {
        jm.block(0, n + i, n, 1) = A.row(Wl[i]).transpose();
        jm.block(n + i, 0, 1, n) = A.row(Wl[i]);
      }
      for (int j = 0; j < nb; ++j) {
        jm.block(0, n + nl + j, n, 1) = 2.0 * (u - balls[Wb[j]].first);
        jm.block(n + nl + j, 0, 1, n) = 2.0 * (u - balls[Wb[j]].first).transpose();
      }
      return jm;
    };
    std::vector<Vec> starts;
    for (int j = 0; j < nb; ++j) {
      const auto& bl = balls[Wb[j]];
      Vec dd = d.norm() > 1e-12 ? Vec(d.normalized()) : Vec(Vec::Unit(n, 0));
      Vec z = Vec::Zero(nt);
      z.head(n) = bl.first + bl.second * dd;
      z[n + nl + j] = std::max(0.5 * d.norm() / std::max(bl.second, 1e-6), 0.1);
      starts.push_back(z);
      z.head(n) = bl.first - bl.second * dd;
      z[n + nl + j] = -z[n + nl + j];
      starts.push_back(z);
    }
    const double scale = piece_scale(*this, Vec::Zero(n)) * dscale;
    for (auto z : starts) {
      bool conv = false;
      for (int it = 0; it < 80; ++it) {
        Vec f = resid(z);
        if (f.cwiseAbs().maxCoeff() < 1e-12 * scale) {
          conv = true;
          break;
        }
        Vec dz = jacm(z).completeOrthogonalDecomposition().solve(-f);
        if (!dz.allFinite()) break;
        z += dz;
      }
      if (!conv) continue;
      Vec u = z.head(n);
      if (!feasible(u, 50 * ftol)) continue;
      any = true;
      best = std::max(best, d.dot(u));
    }
    for (const auto& u : equality_candidates(*this, Wl, Wb, Vec::Zero(n))) {
      if (!feasible(u, 50 * ftol)) continue;
      any = true;
      best = std::max(best, d.dot(u));
    }
  }
  if (!any) throw EmptySet("support of empty piece");
  return best;
}

bool ConvexPiece::is_singleton_at(const Vec& a) const {
  const double tol = 1e-8 * piece_scale(*this, a);
  if (!feasible(a, tol)) return false;
  for (int i = 0; i < dim; ++i) {
    for (int sgn : {+1, -1}) {
      Vec d = sgn * Vec::Unit(dim, i);
      auto s = support(d);
      if (!s) return false;
      if (*s - d.dot(a) > tol) return false;
    }
  }
  return true;
}

Mat ConvexPiece::normal_cone_generators(const Vec& a) const {
  const double atol = tols().active * piece_scale(*this, a);
  if (is_singleton_at(a)) {
    Mat G(dim, 2 * dim);
    for (int i = 0; i < dim; ++i) {
      G.col(2 * i) = Vec::Unit(dim, i);
      G.col(2 * i + 1) = -Vec::Unit(dim, i);
    }
    return G;
  }
  std::vector<Vec> gens;
  for (int i = 0; i < A.rows(); ++i)
    if (std::abs(A.row(i).dot(a) - b[i]) <= atol) gens.push_back(A.row(i).normalized());
  for (const auto& bl : balls) {
    double r = (a - bl.first).norm();
    if (std::abs(r - bl.second) <= atol && r > 1e-12) gens.push_back((a - bl.first) / r);
  }
  Mat G(dim, gens.size());
  for (size_t i = 0; i < gens.size(); ++i) G.col(i) = gens[i];
  return G;
}

// ---- SetExpr construction ---------------------------------------------------

namespace {

std::optional<std::vector<ConvexPiece>> decompose(const SetExpr::Node& node, int dim);

std::optional<std::vector<ConvexPiece>> decompose_set(const SetExpr& S) {
  if (S.piece_info()) {
    std::vector<ConvexPiece> out;
    for (const auto& e : S.piece_info()->entries) out.push_back(e.piece);
    return out;
  }
  return std::nullopt;
}

std::optional<std::vector<ConvexPiece>> decompose(const SetExpr::Node& node, int dim) {
  using R = std::optional<std::vector<ConvexPiece>>;
  return std::visit(
      [&](const auto& v) -> R {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, HalfspaceSystem>) {
          ConvexPiece pc;
          pc.A = v.A;
          pc.b = v.b;
          pc.dim = dim;
          return std::vector<ConvexPiece>{pc};
        } else if constexpr (std::is_same_v<T, BallSet>) {
          ConvexPiece pc;
          pc.A = Mat(0, dim);
          pc.b = Vec(0);
          pc.balls = {{v.center, v.radius}};
          pc.dim = dim;
          return std::vector<ConvexPiece>{pc};
        } else if constexpr (std::is_same_v<T, SingletonSet>) {
          ConvexPiece pc;
          pc.A = Mat(0, dim);
          pc.b = Vec(0);
          pc.balls = {{v.point, 0.0}};
          pc.dim = dim;
          return std::vector<ConvexPiece>{pc};
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          std::vector<ConvexPiece> out;
          for (const auto& c : v.parts) {
            auto sub = decompose_set(*c);
            if (!sub) return std::nullopt;
            for (auto& p : *sub) out.push_back(std::move(p));
          }
          if (static_cast<int>(out.size()) > kMaxPieces) return std::nullopt;
          return out;
        } else if constexpr (std::is_same_v<T, IntersectionSet>) {
          std::vector<ConvexPiece> acc{ConvexPiece{Mat(0, dim), Vec(0), {}, dim}};
          for (const auto& c : v.parts) {
            auto sub = decompose_set(*c);
            if (!sub) return std::nullopt;
            std::vector<ConvexPiece> next;
            for (const auto& a : acc)
              for (const auto& bp : *sub) {
                ConvexPiece m;
                m.dim = dim;
                m.A = Mat(a.A.rows() + bp.A.rows(), dim);
                m.b = Vec(a.b.size() + bp.b.size());
                if (a.A.rows()) {
                  m.A.topRows(a.A.rows()) = a.A;
                  m.b.head(a.b.size()) = a.b;
                }
                if (bp.A.rows()) {
                  m.A.bottomRows(bp.A.rows()) = bp.A;
                  m.b.tail(bp.b.size()) = bp.b;
                }
                m.balls = a.balls;
                for (const auto& bl : bp.balls) m.balls.push_back(bl);
                if (m.n_constraints() > kMaxPieceConstraints) return std::nullopt;
                next.push_back(std::move(m));
              }
            acc = std::move(next);
            if (static_cast<int>(acc.size()) > kMaxPieces) return std::nullopt;
          }
          return acc;
        } else {
          return std::nullopt;  // SublevelSetNode
        }
      },
      node);
}

std::shared_ptr<const PieceInfo> analyze_pieces(const SetExpr::Node& node, int dim) {
  auto dec = decompose(node, dim);
  if (!dec) return nullptr;
  auto info = std::make_shared<PieceInfo>();
  for (auto& pc : *dec) {
    PieceEntry e{std::move(pc), false, std::nullopt};
    auto anchor = e.piece.project(Vec::Zero(dim));
    if (!anchor) {
      e.empty = true;
    } else if (e.piece.is_singleton_at(*anchor)) {
      e.singleton = *anchor;
    }
    info->entries.push_back(std::move(e));
  }
  return info;
}

void validate_dim(int dim) {
  if (dim <= 0) throw DimensionMismatch("dimension must be positive");
}

}  // namespace

SetPtr SetExpr::finish(Node node, int dim) {
  auto s = std::shared_ptr<SetExpr>(new SetExpr(std::move(node), dim));
  s->pieces_ = analyze_pieces(s->node_, dim);
  return s;
}

SetPtr SetExpr::halfspaces(Mat A, Vec b) {
  if (A.rows() != b.size()) throw DimensionMismatch("halfspaces: A rows vs b");
  validate_dim(static_cast<int>(A.cols()));
  for (int i = 0; i < A.rows(); ++i)
    if (A.row(i).norm() < 1e-12) throw Error("halfspaces: zero row");
  int dim = static_cast<int>(A.cols());
  return finish(HalfspaceSystem{std::move(A), std::move(b)}, dim);
}

SetPtr SetExpr::ball(Vec center, double radius) {
  if (radius < 0) throw Error("ball: negative radius");
  validate_dim(static_cast<int>(center.size()));
  int dim = static_cast<int>(center.size());
  return finish(BallSet{std::move(center), radius}, dim);
}

SetPtr SetExpr::singleton(Vec point) {
  validate_dim(static_cast<int>(point.size()));
  int dim = static_cast<int>(point.size());
  return finish(SingletonSet{std::move(point)}, dim);
}

SetPtr SetExpr::unite(std::vector<SetPtr> parts) {
  if (parts.empty()) throw Error("union: empty list");
  int dim = parts[0]->dim();
  for (const auto& p : parts)
    if (p->dim() != dim) throw DimensionMismatch("union: children dims differ");
  return finish(UnionSet{std::move(parts)}, dim);
}

SetPtr SetExpr::intersect(std::vector<SetPtr> parts) {
  if (parts.empty()) throw Error("intersection: empty list");
  int dim = parts[0]->dim();
  for (const auto& p : parts)
    if (p->dim() != dim) throw DimensionMismatch("intersection: children dims differ");
  return finish(IntersectionSet{std::move(parts)}, dim);
}

SetPtr SetExpr::sublevel(FuncPtr f, double level) {
  if (!f) throw Error("sublevel: null function");
  int dim = f->dim();
  return finish(SublevelSetNode{std::move(f), level}, dim);
}

SetPtr SetExpr::empty(int dim) {
  validate_dim(dim);
  Mat A = Mat::Zero(2, dim);
  A(0, 0) = 1.0;
  A(1, 0) = -1.0;
  Vec b(2);
  b << 0.0, -1.0;
  return halfspaces(A, b);
}

std::optional<std::vector<ConvexPiece>> convex_pieces(const SetExpr& S) {
  return decompose_set(S);
}

// ---- cones and bodies -------------------------------------------------------

PolyhedralCone PolyhedralCone::full(int d) {
  Mat G(d, 2 * d);
  for (int i = 0; i < d; ++i) {
    G.col(2 * i) = Vec::Unit(d, i);
    G.col(2 * i + 1) = -Vec::Unit(d, i);
  }
  return {G, d, true};
}

ConvexBody ConvexBody::point(const Vec& p) {
  Mat V(p.size(), 1);
  V.col(0) = p;
  return {V, Mat(p.size(), 0)};
}

ConvexBody ConvexBody::from_vertices(Mat V) {
  if (V.cols() == 0) throw Error("ConvexBody: needs at least one vertex");
  return {std::move(V), Mat(0, 0)};
}

namespace {

Mat dedupe_cols(const Mat& M, double tol = 1e-10) {
  Mat out(M.rows(), 0);
  for (int c = 0; c < M.cols(); ++c) {
    bool dup = false;
    for (int k = 0; k < out.cols(); ++k)
      if ((out.col(k) - M.col(c)).norm() < tol) dup = true;
    if (!dup) {
      out.conservativeResize(M.rows(), out.cols() + 1);
      out.col(out.cols() - 1) = M.col(c);
    }
  }
  return out;
}

Mat prune_hull_2d(const Mat& V) {
  if (V.rows() != 2 || V.cols() <= 3) return V;
  auto facets = polytope_facets(V);
  // keep vertices lying on some facet boundary
  std::vector<int> keep;
  for (int c = 0; c < V.cols(); ++c) {
    for (const auto& f : facets)
      if (std::abs(f.normal.dot(V.col(c)) - f.offset) < 1e-9 * std::max(1.0, std::abs(f.offset))) {
        keep.push_back(c);
        break;
      }
  }
  if (keep.empty()) return V;
  Mat out(2, keep.size());
  for (size_t i = 0; i < keep.size(); ++i) out.col(i) = V.col(keep[i]);
  return dedupe_cols(out);
}

}  // namespace

ConvexBody hull_of(const std::vector<ConvexBody>& bodies) {
  if (bodies.empty()) throw Error("hull_of: empty list");
  int d = bodies[0].dim();
  Mat V(d, 0), R(d, 0);
  for (const auto& b : bodies) {
    if (b.dim() != d) throw DimensionMismatch("hull_of: dims differ");
    Mat nv(d, V.cols() + b.vertices.cols());
    nv << V, b.vertices;
    V = nv;
    if (b.rays.cols()) {
      Mat nr(d, R.cols() + b.rays.cols());
      nr << R, b.rays;
      R = nr;
    }
  }
  V = dedupe_cols(V);
  if (d == 2 && R.cols() == 0) V = prune_hull_2d(V);
  return {V, R};
}

bool cone_membership(const PolyhedralCone& K, const Vec& v, double tol) {
  if (v.size() != K.dim) throw DimensionMismatch("cone_membership");
  if (v.norm() < tol) return true;
  if (K.gens.cols() == 0) return v.norm() <= tol;
  return nnls(K.gens, v).residual <= tol;
}

PolyhedralCone cone_intersection(const std::vector<PolyhedralCone>& cones, int dim) {
  if (dim > 4) throw UnsupportedStructure("cone intersection beyond dimension 4");
  if (cones.empty()) return PolyhedralCone::full(dim);
  Mat H(0, dim);
  for (const auto& K : cones) {
    Mat M = cone_v_to_h(K.gens, dim);
    Mat nh(H.rows() + M.rows(), dim);
    if (H.rows()) nh.topRows(H.rows()) = H;
    if (M.rows()) nh.bottomRows(M.rows()) = M;
    H = nh;
  }
  Mat G = cone_h_to_v(H, dim);
  return {G, dim, true};
}

ConvexBody cone_ball_slice(const PolyhedralCone& K, int k_arc) {
  const int d = K.dim;
  if (K.gens.cols() == 0) return ConvexBody::point(Vec::Zero(d));

  if (d == 1) {
    bool pos = false, neg = false;
    for (int c = 0; c < K.gens.cols(); ++c) (K.gens(0, c) > 0 ? pos : neg) = true;
    Mat V(1, 0);
    auto add = [&](double x) {
      V.conservativeResize(1, V.cols() + 1);
      V(0, V.cols() - 1) = x;
    };
    add(0.0);
    if (pos) add(1.0);
    if (neg) add(-1.0);
    return {V, Mat(1, 0)};
  }

  if (d == 2) {
    Mat M = cone_v_to_h(K.gens, 2);
    auto inside = [&](double th) {
      Vec v(2);
      v << std::cos(th), std::sin(th);
      return M.rows() == 0 || (M * v).maxCoeff() <= 1e-10;
    };
    const int probes = 1024;
    std::vector<bool> in(probes);
    int in_count = 0;
    for (int i = 0; i < probes; ++i) {
      in[i] = inside(2 * M_PI * i / probes);
      in_count += in[i];
    }
    std::vector<Vec> verts;
    verts.push_back(Vec::Zero(2));
    auto push_angle = [&](double th) {
      Vec v(2);
      v << std::cos(th), std::sin(th);
      verts.push_back(v);
    };
    if (in_count == probes) {
      for (int i = 0; i < k_arc; ++i) push_angle(2 * M_PI * i / k_arc);
    } else if (in_count > 0) {
      // collect maximal arcs of inside-probes and refine their endpoints
      for (int i = 0; i < probes; ++i) {
        int prev = (i + probes - 1) % probes;
        if (in[i] && !in[prev]) {
          // arc starts near i: bisect [prev, i] for the start angle
          double lo = 2 * M_PI * prev / probes, hi = 2 * M_PI * i / probes;
          for (int it = 0; it < 60; ++it) {
            double mid = (lo + hi) / 2;
            (inside(mid) ? hi : lo) = mid;
          }
          double start = hi;
          // walk to the arc end
          int j = i;
          while (in[(j + 1) % probes]) {
            j = (j + 1) % probes;
            if (j == i) break;
          }
          double lo2 = 2 * M_PI * j / probes, hi2 = 2 * M_PI * (j + 1) / probes;
          for (int it = 0; it < 60; ++it) {
            double mid = (lo2 + hi2) / 2;
            (inside(mid) ? lo2 : hi2) = mid;
          }
          double end = lo2;
          if (end < start) end += 2 * M_PI;
          int steps = std::max(1, static_cast<int>(std::ceil((end - start) / (2 * M_PI) * k_arc)));
          for (int s = 0; s <= steps; ++s) push_angle(start + (end - start) * s / steps);
        }
      }
      for (int c = 0; c < K.gens.cols(); ++c) verts.push_back(K.gens.col(c).normalized());
    }
    Mat V(2, verts.size());
    for (size_t i = 0; i < verts.size(); ++i) V.col(i) = verts[i];
    return {prune_hull_2d(dedupe_cols(V)), Mat(2, 0)};
  }

  // d >= 3: generators, their pairwise mid-directions and filtered sphere probes
  std::vector<Vec> verts;
  verts.push_back(Vec::Zero(d));
  for (int c = 0; c < K.gens.cols(); ++c) verts.push_back(K.gens.col(c).normalized());
  for (int a = 0; a < K.gens.cols(); ++a)
    for (int b2 = a + 1; b2 < K.gens.cols(); ++b2) {
      Vec m = (K.gens.col(a) + K.gens.col(b2));
      if (m.norm() > 1e-9) verts.push_back(m.normalized());
    }
  Rng rng(derive_seed(0xC05EBA11, d, K.gens.cols()));
  for (int i = 0; i < 40 * k_arc; ++i) {
    Vec v = rng.unit_vector(d);
    if (nnls(K.gens, v).residual <= 1e-9) verts.push_back(v);
  }
  Mat V(d, verts.size());
  for (size_t i = 0; i < verts.size(); ++i) V.col(i) = verts[i];
  return {dedupe_cols(V), Mat(d, 0)};
}

// ---- distances and projections ----------------------------------------------

namespace {

std::uint64_t hash_vec(const Vec& x) { return hash_coords(x); }

// Gauss-Newton projection for sublevel sets of composite functions g(psi(u)):
// repeatedly project psi(u) onto the (decomposable) solution set of g and pull
// the correction back through the Jacobian, then pattern-polish the distance.
std::optional<double> composite_sublevel_distance(const SublevelSetNode& sl, const Vec& x,
                                                  Vec* argmin) {
  const auto* comp = std::get_if<ComposeFn>(&sl.f->node());
  if (!comp) return std::nullopt;
  if (std::abs(sl.level) > 1e-12) return std::nullopt;
  SetPtr Sg = solution_set(comp->g);
  if (!Sg->piece_info()) return std::nullopt;

  const auto& psi = *comp->psi;
  auto feas = [&](const Vec& u) { return eval(*sl.f, u) <= sl.level; };

  auto gn_restore = [&](Vec u) -> std::optional<Vec> {
    for (int it = 0; it < 60; ++it) {
      Vec y = eval_map(psi, u);
      if (eval(*comp->g, y) <= sl.level) return u;
      auto ps = project(*Sg, y);
      if (ps.empty()) return std::nullopt;
      Vec z = ps[0];
      Mat J = jacobian_unchecked(psi, u);
      Vec du = J.transpose() * (J * J.transpose())
                                   .completeOrthogonalDecomposition()
                                   .solve(1.02 * (z - y));
      if (!du.allFinite()) return std::nullopt;
      u += du;
      if (du.norm() < 1e-15) break;
    }
    return feas(u) ? std::optional<Vec>(u) : std::nullopt;
  };

  if (feas(x)) {
    if (argmin) *argmin = x;
    return 0.0;
  }
  auto u0 = gn_restore(x);
  if (!u0) return std::nullopt;
  Vec best = *u0;
  double best_d = (best - x).norm();

  const int n = static_cast<int>(x.size());
  double step = std::max(best_d / 2, 1e-6);
  while (step > 1e-11) {
    bool improved = false;
    for (int i = 0; i < n && !improved; ++i) {
      for (int sgn : {+1, -1}) {
        Vec cand = best + sgn * step * Vec::Unit(n, i);
        auto cr = feas(cand) ? std::optional<Vec>(cand) : gn_restore(cand);
        if (cr && (*cr - x).norm() < best_d - 1e-15) {
          best = *cr;
          best_d = (best - x).norm();
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  if (argmin) *argmin = best;
  return best_d;
}

}  // namespace

double oracle_distance(const std::function<double(const Vec&)>& merit, const Vec& x,
                       std::uint64_t seed, double scan_limit, Vec* argmin) {
  if (merit(x) <= 0) {
    if (argmin) *argmin = x;
    return 0.0;
  }
  const int n = static_cast<int>(x.size());
  const double inf = std::numeric_limits<double>::infinity();

  // nearest merit <= 0 point along the ray x + t d
  auto ray_root = [&](const Vec& d) -> double {
    const double t0 = 1e-7;
    std::vector<double> ts{0.0};
    for (double t = t0; t <= scan_limit; t *= 1.22) ts.push_back(t);
    double prev_t = 0.0, prev_m = merit(x);
    double best_dip_t = -1, best_dip_m = inf, dip_lo = 0, dip_hi = 0;
    for (size_t i = 1; i < ts.size(); ++i) {
      double t = ts[i];
      double m = merit(x + t * d);
      if (m <= 0) {
        double lo = prev_t, hi = t;
        for (int it = 0; it < 100; ++it) {
          double mid = (lo + hi) / 2;
          (merit(x + mid * d) <= 0 ? hi : lo) = mid;
        }
        return hi;
      }
      if (m < best_dip_m) {
        best_dip_m = m;
        best_dip_t = t;
        dip_lo = prev_t;
        dip_hi = std::min(t * 1.22, scan_limit);
      }
      prev_t = t;
      prev_m = m;
    }
    (void)prev_m;
    if (best_dip_t < 0) return inf;
    // golden-section the dip: the ladder may have stepped over a thin slab
    double a = dip_lo, b = dip_hi;
    const double gr = 0.6180339887498949;
    double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
    double f1 = merit(x + c1 * d), f2 = merit(x + c2 * d);
    for (int it = 0; it < 80; ++it) {
      if (f1 <= 0 || f2 <= 0) break;
      if (f1 < f2) {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - gr * (b - a);
        f1 = merit(x + c1 * d);
      } else {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + gr * (b - a);
        f2 = merit(x + c2 * d);
      }
    }
    double tin = f1 <= 0 ? c1 : (f2 <= 0 ? c2 : -1);
    if (tin < 0) return inf;
    double lo = a, hi = tin;
    for (int it = 0; it < 100; ++it) {
      double mid = (lo + hi) / 2;
      (merit(x + mid * d) <= 0 ? hi : lo) = mid;
    }
    return hi;
  };

  Rng rng(derive_seed(seed, 0xFACADE, hash_vec(x)));
  std::vector<Vec> dirs;
  for (int i = 0; i < n; ++i) {
    dirs.push_back(Vec::Unit(n, i));
    dirs.push_back(-Vec::Unit(n, i));
  }
  for (int i = 0; i < 48; ++i) dirs.push_back(rng.unit_vector(n));

  std::vector<std::pair<double, Vec>> ranked;
  for (const auto& d : dirs) {
    double v = ray_root(d);
    if (std::isfinite(v)) ranked.push_back({v, d});
  }
  if (ranked.empty()) throw EmptySet("oracle_distance: no feasible point found within scan limit");
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double best = ranked[0].first;
  Vec best_dir = ranked[0].second;
  const int starts = std::min<size_t>(4, ranked.size());
  for (int s = 0; s < starts; ++s) {
    Vec d = ranked[s].second;
    double val = ranked[s].first;
    double sigma = 0.5;
    Rng prng(derive_seed(seed, 0xBEE5, s));
    for (int it = 0; it < 100 && sigma > 1e-10; ++it) {
      Vec cand = d + sigma * prng.unit_vector(n);
      cand.normalize();
      double cv = ray_root(cand);
      if (cv < val) {
        val = cv;
        d = cand;
        sigma *= 1.4;
      } else {
        sigma *= 0.75;
      }
    }
    if (val < best) {
      best = val;
      best_dir = d;
    }
  }
  if (argmin) *argmin = x + best * best_dir;
  return best;
}

double distance(const SetExpr& S, const Vec& x) {
  if (x.size() != S.dim()) throw DimensionMismatch("distance");

  if (const PieceInfo* info = S.piece_info()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& e : info->entries) {
      if (e.empty) continue;
      if (e.singleton) {
        best = std::min(best, (x - *e.singleton).norm());
        continue;
      }
      auto p = e.piece.project(x);
      if (p) best = std::min(best, (x - *p).norm());
    }
    if (!std::isfinite(best)) throw EmptySet("distance: set is empty");
    return best;
  }

  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, UnionSet>) {
          double best = std::numeric_limits<double>::infinity();
          for (const auto& c : v.parts) {
            try {
              best = std::min(best, distance(*c, x));
            } catch (const EmptySet&) {
            }
          }
          if (!std::isfinite(best)) throw EmptySet("distance: union of empty sets");
          return best;
        } else if constexpr (std::is_same_v<T, IntersectionSet>) {
          auto merit = [&](const Vec& u) -> double {
            double worst = -1.0;
            for (const auto& c : v.parts) worst = std::max(worst, distance(*c, u));
            return worst - tols().membership;
          };
          return oracle_distance(merit, x, hash_vec(x));
        } else if constexpr (std::is_same_v<T, SublevelSetNode>) {
          if (auto d = composite_sublevel_distance(v, x, nullptr)) return *d;
          auto merit = [&](const Vec& u) { return eval(*v.f, u) - v.level; };
          return oracle_distance(merit, x, hash_vec(x));
        } else {
          throw UnsupportedStructure("distance: unexpected undecomposed node");
        }
      },
      S.node());
}

std::vector<Vec> project(const SetExpr& S, const Vec& x) {
  if (x.size() != S.dim()) throw DimensionMismatch("project");

  if (const PieceInfo* info = S.piece_info()) {
    std::vector<std::pair<double, Vec>> cands;
    for (const auto& e : info->entries) {
      if (e.empty) continue;
      if (e.singleton) {
        cands.push_back({(x - *e.singleton).norm(), *e.singleton});
        continue;
      }
      auto p = e.piece.project(x);
      if (p) cands.push_back({(x - *p).norm(), *p});
    }
    if (cands.empty()) throw EmptySet("project: set is empty");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [d, p] : cands) best = std::min(best, d);
    std::vector<Vec> out;
    for (const auto& [d, p] : cands) {
      if (d > best + 10 * tols().dist) continue;
      bool dup = false;
      for (const auto& q : out)
        if ((q - p).norm() < 1e-8) dup = true;
      if (!dup) out.push_back(p);
    }
    return out;
  }

  return std::visit(
      [&](const auto& v) -> std::vector<Vec> {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, UnionSet>) {
          std::vector<std::pair<double, Vec>> cands;
          for (const auto& c : v.parts) {
            try {
              for (const auto& p : project(*c, x)) cands.push_back({(x - p).norm(), p});
            } catch (const EmptySet&) {
            }
          }
          if (cands.empty()) throw EmptySet("project: union of empty sets");
          double best = std::numeric_limits<double>::infinity();
          for (const auto& [d, p] : cands) best = std::min(best, d);
          std::vector<Vec> out;
          for (const auto& [d, p] : cands) {
            if (d > best + 10 * tols().dist) continue;
            bool dup = false;
            for (const auto& q : out)
              if ((q - p).norm() < 1e-8) dup = true;
            if (!dup) out.push_back(p);
          }
          return out;
        } else if constexpr (std::is_same_v<T, IntersectionSet>) {
          auto merit = [&](const Vec& u) -> double {
            double worst = -1.0;
            for (const auto& c : v.parts) worst = std::max(worst, distance(*c, u));
            return worst - tols().membership;
          };
          Vec arg;
          oracle_distance(merit, x, hash_vec(x), 64.0, &arg);
          return {arg};
        } else if constexpr (std::is_same_v<T, SublevelSetNode>) {
          Vec arg;
          if (composite_sublevel_distance(v, x, &arg)) return {arg};
          auto merit = [&](const Vec& u) { return eval(*v.f, u) - v.level; };
          oracle_distance(merit, x, hash_vec(x), 64.0, &arg);
          return {arg};
        } else {
          throw UnsupportedStructure("project: unexpected undecomposed node");
        }
      },
      S.node());
}

bool set_contains(const SetExpr& S, const Vec& x, double tol) {
  if (x.size() != S.dim()) throw DimensionMismatch("set_contains");
  return std::visit(
      [&](const auto& v) -> bool {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, HalfspaceSystem>) {
          return v.A.rows() == 0 || (v.A * x - v.b).maxCoeff() <= tol;
        } else if constexpr (std::is_same_v<T, BallSet>) {
          return (x - v.center).norm() <= v.radius + tol;
        } else if constexpr (std::is_same_v<T, SingletonSet>) {
          return (x - v.point).norm() <= tol;
        } else if constexpr (std::is_same_v<T, UnionSet>) {
          for (const auto& c : v.parts)
            if (set_contains(*c, x, tol)) return true;
          return false;
        } else if constexpr (std::is_same_v<T, IntersectionSet>) {
          for (const auto& c : v.parts)
            if (!set_contains(*c, x, tol)) return false;
          return true;
        } else {
          return eval(*v.f, x) <= v.level + tol;
        }
      },
      S.node());
}

// ---- normal cones -----------------------------------------------------------

namespace {

Mat normalize_and_dedupe(const std::vector<Vec>& gens) {
  Mat out(gens.empty() ? 0 : gens[0].size(), 0);
  for (const auto& g : gens) {
    double n = g.norm();
    if (n < 1e-12) continue;
    Vec u = g / n;
    bool dup = false;
    for (int c = 0; c < out.cols(); ++c)
      if ((out.col(c) - u).norm() < 1e-9) dup = true;
    if (!dup) {
      out.conservativeResize(u.size(), out.cols() + 1);
      out.col(out.cols() - 1) = u;
    }
  }
  return out;
}

std::vector<const PieceEntry*> pieces_containing(const SetExpr& S, const Vec& a) {
  std::vector<const PieceEntry*> out;
  const PieceInfo* info = S.piece_info();
  if (!info) return out;
  const double tol = tols().membership * std::max(1.0, a.cwiseAbs().maxCoeff());
  for (const auto& e : info->entries) {
    if (e.empty) continue;
    if (e.singleton) {
      if ((a - *e.singleton).norm() <= tol) out.push_back(&e);
      continue;
    }
    if (e.piece.feasible(a, tol)) out.push_back(&e);
  }
  return out;
}

PolyhedralCone piece_normal_cone(const PieceEntry& e, const Vec& a) {
  const int d = e.piece.dim;
  if (e.singleton) return PolyhedralCone::full(d);
  Mat G = e.piece.normal_cone_generators(a);
  std::vector<Vec> gens;
  for (int c = 0; c < G.cols(); ++c) gens.push_back(G.col(c));
  return {normalize_and_dedupe(gens), d, true};
}

}  // namespace

PolyhedralCone frechet_normal_cone(const SetExpr& S, const Vec& a) {
  if (a.size() != S.dim()) throw DimensionMismatch("frechet_normal_cone");
  if (!set_contains(S, a)) throw PointNotInSet("frechet_normal_cone: a not in S");

  if (S.piece_info()) {
    auto pcs = pieces_containing(S, a);
    if (pcs.empty()) throw PointNotInSet("frechet_normal_cone: no piece contains a");
    if (pcs.size() == 1) return piece_normal_cone(*pcs[0], a);
    std::vector<PolyhedralCone> cones;
    for (const auto* e : pcs) cones.push_back(piece_normal_cone(*e, a));
    return cone_intersection(cones, S.dim());
  }
  throw UnsupportedStructure("frechet_normal_cone: set does not decompose into convex pieces");
}

PolyhedralCone limiting_normal_cone(const SetExpr& S, const Vec& a) {
  if (a.size() != S.dim()) throw DimensionMismatch("limiting_normal_cone");
  if (!set_contains(S, a)) throw PointNotInSet("limiting_normal_cone: a not in S");

  if (S.piece_info()) {
    auto pcs = pieces_containing(S, a);
    if (pcs.empty()) throw PointNotInSet("limiting_normal_cone: no piece contains a");
    std::vector<Vec> gens;
    for (const auto* e : pcs) {
      PolyhedralCone K = piece_normal_cone(*e, a);
      for (int c = 0; c < K.gens.cols(); ++c) gens.push_back(K.gens.col(c));
    }
    return {normalize_and_dedupe(gens), S.dim(), true};
  }
  throw UnsupportedStructure("limiting_normal_cone: set does not decompose into convex pieces");
}

bool sampled_normal_test(const SetExpr& S, const Vec& a, const Vec& v, double eps, int n_samples,
                         std::uint64_t seed, double delta0) {
  if (a.size() != S.dim() || v.size() != S.dim()) throw DimensionMismatch("sampled_normal_test");
  if (v.norm() < 1e-12) return true;

  const int shells = 12;
  const int per_shell = std::max(1, n_samples / shells);
  const double tol = tols().cert;
  for (int j = 0; j < shells; ++j) {
    double r = delta0 * std::pow(2.0, -j);
    if (r < tols().dist) break;
    Rng rng(derive_seed(seed, 0x5A3B1E, j));
    for (int s = 0; s < per_shell; ++s) {
      Vec y = a + r * rng.unit_vector(S.dim());
      std::vector<Vec> ps;
      try {
        ps = project(S, y);
      } catch (const EmptySet&) {
        return true;  // no set points to violate with
      }
      for (const auto& p : ps) {
        double nrm = (p - a).norm();
        if (nrm < 1e-12 || nrm > 2 * delta0) continue;
        if (v.dot(p - a) > (eps + tol) * nrm) return false;
      }
    }
  }
  return true;
}

}  // namespace ebcert
