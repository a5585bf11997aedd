#include "ebcert/errorbound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ebcert/smallqp.hpp"

namespace ebcert {

const char* to_string(ModulusVerdict v) {
  switch (v) {
    case ModulusVerdict::HOLDS: return "HOLDS";
    case ModulusVerdict::FAILS: return "FAILS";
    default: return "INCONCLUSIVE";
  }
}

double ratio(const FuncPtr& f, const Vec& x) {
  double fp = plus_part(*f, x);
  if (fp <= tols().membership) throw PointInSolutionSet("ratio: f_+(x) below tolerance");
  return distance(*solution_set(f), x) / fp;
}

namespace {

struct RatioEnv {
  const FuncExpr& f;
  const SetExpr& Sf;

  // -1 when the point is (numerically) in the solution set
  double operator()(const Vec& x) const {
    double fp = plus_part(f, x);
    if (fp <= tols().membership) return -1.0;
    double d = distance(Sf, x);
    if (d <= tols().membership) return -1.0;
    return d / fp;
  }
};

Vec clamp_to_shell(const Vec& xbar, const Vec& x, double r_lo, double r_hi) {
  Vec d = x - xbar;
  double n = d.norm();
  if (n < 1e-300) return xbar + Vec::Unit(xbar.size(), 0) * r_lo;
  double r = std::clamp(n, r_lo, r_hi);
  return xbar + (r / n) * d;
}

}  // namespace

ModulusEstimate estimate_modulus(const FuncPtr& f, const ModulusQuery& q) {
  if (q.xbar.size() != f->dim()) throw DimensionMismatch("estimate_modulus");
  if (plus_part(*f, q.xbar) > tols().membership)
    throw PointNotInSolutionSet("estimate_modulus: xbar must satisfy f(xbar) <= 0");
  if (q.levels < 2) throw Error("estimate_modulus: needs at least two levels");

  SetPtr Sf = solution_set(f);
  RatioEnv env{*f, *Sf};
  const int n = f->dim();

  ModulusEstimate out;
  for (int j = 0; j < q.levels; ++j) {
    LevelStat st;
    st.delta = q.delta0 * std::pow(2.0, -j);
    st.argmax = q.xbar;
    const double r_lo = st.delta / 2, r_hi = st.delta;

    std::vector<std::pair<double, Vec>> top;
    Rng rng(derive_seed(q.seed, 0x13E1u, j));
    for (int s = 0; s < q.samples_per_level; ++s) {
      Vec x = rng.in_shell(q.xbar, r_lo, r_hi);
      double v = env(x);
      if (v < 0) continue;
      top.push_back({v, x});
    }
    if (top.empty()) {
      st.empty = true;
      out.per_level.push_back(st);
      continue;
    }
    std::sort(top.begin(), top.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    if (static_cast<int>(top.size()) > q.polish_candidates) top.resize(q.polish_candidates);

    // local ascent polish: seeded pattern proposals inside the shell
    double sup = top[0].first;
    Vec arg = top[0].second;
    for (size_t c = 0; c < top.size(); ++c) {
      Vec x = top[c].second;
      double val = top[c].first;
      double sigma = 0.25 * st.delta;
      Rng prng(derive_seed(q.seed, 0x9011, j * 100 + c));
      for (int it = 0; it < q.polish_iters && sigma > 1e-12 * st.delta; ++it) {
        bool improved = false;
        for (int probe = 0; probe < 2 * n; ++probe) {
          Vec cand = clamp_to_shell(q.xbar, x + sigma * prng.unit_vector(n), r_lo, r_hi);
          double cv = env(cand);
          if (cv > val) {
            val = cv;
            x = cand;
            improved = true;
            break;
          }
        }
        sigma *= improved ? 1.3 : 0.6;
      }
      if (val > sup) {
        sup = val;
        arg = x;
      }
    }
    st.sup_ratio = sup;
    st.argmax = arg;
    out.per_level.push_back(st);
  }

  // collect non-empty levels in refinement order
  std::vector<const LevelStat*> act;
  for (const auto& st : out.per_level)
    if (!st.empty) act.push_back(&st);
  if (act.size() < 2) {
    out.verdict = ModulusVerdict::INCONCLUSIVE;
    out.tau_hat = act.empty() ? 0.0 : act.back()->sup_ratio;
    return out;
  }

  // divergence: a monotone growth window of >= 2 steps with total factor rho
  bool fails = false;
  for (size_t i = 0; i + 2 < act.size() && !fails; ++i) {
    double a = act[i]->sup_ratio, b = act[i + 1]->sup_ratio, c = act[i + 2]->sup_ratio;
    if (b > a && c > b && c >= q.rho * a) fails = true;
  }
  if (fails) {
    out.verdict = ModulusVerdict::FAILS;
    out.tau_hat = std::numeric_limits<double>::infinity();
    return out;
  }

  double last = act[act.size() - 1]->sup_ratio;
  double prev = act[act.size() - 2]->sup_ratio;
  out.tau_hat = std::max(last, prev);
  double rel = std::abs(last - prev) / std::max(1e-300, std::max(last, prev));
  out.verdict = rel < 0.10 ? ModulusVerdict::HOLDS : ModulusVerdict::INCONCLUSIVE;
  return out;
}

int aposteriori_violations(const FuncPtr& f, const Vec& xbar, double tau, double delta,
                           int n_samples, std::uint64_t seed) {
  SetPtr Sf = solution_set(f);
  Rng rng(derive_seed(seed, 0xA905));
  int viols = 0;
  for (int i = 0; i < n_samples; ++i) {
    Vec x = rng.in_ball(xbar, delta);
    double fp = plus_part(*f, x);
    double d = distance(*Sf, x);
    if (d > tau * fp + tols().cert) ++viols;
  }
  return viols;
}

// ---- Hoffman constant ---------------------------------------------------------

namespace {

// Gordan check: exists v with (rows) v < 0  <=>  0 not in conv(rows)
bool strictly_solvable(const Mat& rows) {
  if (rows.rows() == 0) return true;
  Mat V = rows.transpose();
  return body_distance(V, Mat(V.rows(), 0), Vec::Zero(V.rows())).dist > 1e-9;
}

// max |w| over {w : R w <= r} (assumed bounded), by vertex enumeration
double max_norm_over_polyhedron(const Mat& R, const Vec& r, int n) {
  double best = 0.0;
  const int mr = static_cast<int>(R.rows());
  if (mr < n) return best;
  std::vector<int> comb(n);
  std::iota(comb.begin(), comb.end(), 0);
  while (true) {
    Mat S(n, n);
    Vec rs(n);
    for (int i = 0; i < n; ++i) {
      S.row(i) = R.row(comb[i]);
      rs[i] = r[comb[i]];
    }
    Eigen::FullPivLU<Mat> lu(S);
    if (lu.isInvertible()) {
      Vec w = lu.solve(rs);
      if ((R * w - r).maxCoeff() <= 1e-8 * std::max(1.0, r.cwiseAbs().maxCoeff()))
        best = std::max(best, w.norm());
    }
    int i = n - 1;
    while (i >= 0 && comb[i] == mr - n + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < n; ++j) comb[j] = comb[j - 1] + 1;
  }
  return best;
}

}  // namespace

double hoffman_constant(const Mat& A, const Vec& b) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  if (m > 6 || n > 6) throw SizeLimitExceeded("hoffman_constant: m, n <= 6");
  if (m == 0) return 0.0;

  {
    ConvexPiece pc{A, b, {}, n};
    if (!pc.project(Vec::Zero(n))) throw InfeasibleSystem("hoffman_constant: A x <= b infeasible");
  }

  double H = 0.0;
  for (int mask = 1; mask < (1 << m); ++mask) {
    std::vector<int> J, Jc;
    for (int i = 0; i < m; ++i) ((mask >> i) & 1 ? J : Jc).push_back(i);

    Mat Aj(J.size(), n);
    Vec bj(J.size());
    for (size_t i = 0; i < J.size(); ++i) {
      Aj.row(i) = A.row(J[i]);
      bj[i] = b[J[i]];
    }

    // realizability: exists p with A_J p = b_J and A_Jc p < b_Jc
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(Aj);
    Vec p0 = cod.solve(bj);
    if ((Aj * p0 - bj).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, bj.cwiseAbs().maxCoeff()))
      continue;
    if (!Jc.empty()) {
      Eigen::JacobiSVD<Mat> svd(Aj, Eigen::ComputeFullV);
      double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
      int rank = 0;
      for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-11 * std::max(1.0, smax)) ++rank;
      Mat Z = svd.matrixV().rightCols(n - rank);
      Mat G(Jc.size() + 1, Z.cols() + 1);
      for (size_t i = 0; i < Jc.size(); ++i) {
        G.block(i, 0, 1, Z.cols()) = A.row(Jc[i]) * Z;
        G(i, Z.cols()) = -(b[Jc[i]] - A.row(Jc[i]).dot(p0));
      }
      G.row(Jc.size()).setZero();
      G(Jc.size(), Z.cols()) = -1.0;
      if (!strictly_solvable(G)) continue;
    }

    // 1/gamma_J = max{ |w| : w in cone(a_J), A_J w <= 1 }
    Mat gens(n, J.size());
    for (size_t i = 0; i < J.size(); ++i) gens.col(i) = A.row(J[i]).transpose();
    Mat C = cone_v_to_h(gens, n);
    Mat R(C.rows() + J.size(), n);
    Vec r(C.rows() + J.size());
    if (C.rows()) {
      R.topRows(C.rows()) = C;
      r.head(C.rows()).setZero();
    }
    R.bottomRows(J.size()) = Aj;
    r.tail(J.size()).setOnes();
    H = std::max(H, max_norm_over_polyhedron(R, r, n));
  }
  return H;
}

}  // namespace ebcert
