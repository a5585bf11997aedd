#include "ebcert/smallqp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ebcert {

NnlsResult nnls(const Mat& G, const Vec& v) {
  const int m = static_cast<int>(G.cols());
  NnlsResult out;
  out.lambda = Vec::Zero(m);
  if (m == 0 || G.rows() == 0) {
    out.fitted = Vec::Zero(v.size());
    out.residual = v.norm();
    return out;
  }

  std::vector<bool> passive(m, false);
  Vec lambda = Vec::Zero(m);
  Vec resid = v;
  const double wtol = 1e-12 * std::max(1.0, v.norm()) * std::max(1.0, G.norm());

  auto solve_passive = [&](const std::vector<int>& idx) -> Vec {
    Mat Gp(G.rows(), idx.size());
    for (size_t k = 0; k < idx.size(); ++k) Gp.col(k) = G.col(idx[k]);
    return Gp.colPivHouseholderQr().solve(v);
  };

  const int max_outer = 3 * m + 10;
  for (int outer = 0; outer < max_outer; ++outer) {
    Vec w = G.transpose() * resid;
    int best = -1;
    double bestw = wtol;
    for (int i = 0; i < m; ++i)
      if (!passive[i] && w[i] > bestw) { bestw = w[i]; best = i; }
    if (best < 0) break;
    passive[best] = true;

    for (int inner = 0; inner < max_outer; ++inner) {
      std::vector<int> idx;
      for (int i = 0; i < m; ++i)
        if (passive[i]) idx.push_back(i);
      if (idx.empty()) break;
      Vec z = solve_passive(idx);
      bool all_pos = true;
      for (int k = 0; k < z.size(); ++k)
        if (z[k] <= 0.0) { all_pos = false; break; }
      if (all_pos) {
        lambda.setZero();
        for (size_t k = 0; k < idx.size(); ++k) lambda[idx[k]] = z[k];
        break;
      }
      // step toward z, dropping the first coordinate that hits zero
      double alpha = 1.0;
      for (size_t k = 0; k < idx.size(); ++k) {
        if (z[k] <= 0.0) {
          double lk = lambda[idx[k]];
          double a = lk / (lk - z[k] + 1e-300);
          alpha = std::min(alpha, a);
        }
      }
      for (size_t k = 0; k < idx.size(); ++k) {
        double nv = lambda[idx[k]] + alpha * (z[k] - lambda[idx[k]]);
        lambda[idx[k]] = std::max(0.0, nv);
        if (lambda[idx[k]] <= 1e-14) passive[idx[k]] = false;
      }
    }
    resid = v - G * lambda;
  }

  out.lambda = lambda;
  out.fitted = G * lambda;
  out.residual = (v - out.fitted).norm();
  return out;
}

Vec cone_project_generators(const Mat& G, const Vec& v) {
  if (G.cols() == 0) return Vec::Zero(v.size());
  return nnls(G, v).fitted;
}

namespace {

void append_unique_direction(Mat& gens, const Vec& d, double tol = 1e-9) {
  double n = d.norm();
  if (n < tol) return;
  Vec u = d / n;
  for (int c = 0; c < gens.cols(); ++c)
    if ((gens.col(c) - u).norm() < tol) return;
  gens.conservativeResize(d.size(), gens.cols() + 1);
  gens.col(gens.cols() - 1) = u;
}

}  // namespace

Mat cone_h_to_v(const Mat& A, int dim) {
  Mat gens(dim, 0);
  const int m = static_cast<int>(A.rows());
  if (m == 0) {
    for (int i = 0; i < dim; ++i) {
      append_unique_direction(gens, Vec::Unit(dim, i));
      append_unique_direction(gens, -Vec::Unit(dim, i));
    }
    return gens;
  }

  // lineality space: null(A)
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  const double rank_tol = 1e-11 * std::max(1.0, smax);
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > rank_tol) ++rank;
  Mat null_basis = svd.matrixV().rightCols(dim - rank);
  for (int c = 0; c < null_basis.cols(); ++c) {
    append_unique_direction(gens, null_basis.col(c));
    append_unique_direction(gens, -null_basis.col(c));
  }
  if (rank == 0) return gens;  // whole space handled by lineality

  // pointed part lives in the row space; enumerate (rank-1)-subsets of rows
  Mat row_basis = svd.matrixV().leftCols(rank);  // dim x rank, orthonormal
  Mat Ar = A * row_basis;                        // m x rank
  const double feas_tol = 1e-9 * std::max(1.0, A.cwiseAbs().maxCoeff());

  auto try_dir = [&](const Vec& dr) {
    if (dr.norm() < 1e-12) return;
    for (int sgn : {+1, -1}) {
      Vec d = sgn * dr;
      if ((Ar * d).maxCoeff() <= feas_tol) append_unique_direction(gens, row_basis * d);
    }
  };

  if (rank == 1) {
    try_dir(Vec::Ones(1));
    return gens;
  }

  std::vector<int> subset(rank - 1);
  std::vector<int> rows(m);
  std::iota(rows.begin(), rows.end(), 0);
  // iterate over all (rank-1)-subsets of rows
  std::vector<int> comb(rank - 1);
  for (int i = 0; i < rank - 1; ++i) comb[i] = i;
  if (m < rank - 1) return gens;
  while (true) {
    Mat S(rank - 1, rank);
    for (int i = 0; i < rank - 1; ++i) S.row(i) = Ar.row(comb[i]);
    Eigen::JacobiSVD<Mat> ssvd(S, Eigen::ComputeFullV);
    int srank = 0;
    double ssmax = ssvd.singularValues().size() ? ssvd.singularValues()[0] : 0.0;
    for (int i = 0; i < ssvd.singularValues().size(); ++i)
      if (ssvd.singularValues()[i] > 1e-11 * std::max(1.0, ssmax)) ++srank;
    if (srank == rank - 1) try_dir(ssvd.matrixV().col(rank - 1));
    // next combination
    int i = rank - 2;
    while (i >= 0 && comb[i] == m - (rank - 1) + i) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < rank - 1; ++j) comb[j] = comb[j - 1] + 1;
  }
  return gens;
}

Mat cone_v_to_h(const Mat& G, int dim) {
  if (G.cols() == 0) {
    // cone {0}: every halfspace through 0 holds; represent with +/- axes
    Mat M(2 * dim, dim);
    for (int i = 0; i < dim; ++i) {
      M.row(2 * i) = Vec::Unit(dim, i).transpose();
      M.row(2 * i + 1) = -Vec::Unit(dim, i).transpose();
    }
    return M;
  }
  Mat polar_gens = cone_h_to_v(G.transpose(), dim);
  return polar_gens.transpose();  // rows are polar generators
}

std::vector<Facet> polytope_facets(const Mat& pts) {
  const int dim = static_cast<int>(pts.rows());
  const int n = static_cast<int>(pts.cols());
  std::vector<Facet> out;
  if (n == 0) return out;
  const double tol = 1e-9 * std::max(1.0, pts.cwiseAbs().maxCoeff());

  if (dim == 1) {
    double lo = pts.row(0).minCoeff(), hi = pts.row(0).maxCoeff();
    out.push_back({make_vec({1.0}), hi});
    out.push_back({make_vec({-1.0}), -lo});
    return out;
  }

  if (dim == 2) {
    // Andrew monotone chain
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (pts(0, a) != pts(0, b)) return pts(0, a) < pts(0, b);
      return pts(1, a) < pts(1, b);
    });
    auto cross = [&](int o, int a, int b) {
      return (pts(0, a) - pts(0, o)) * (pts(1, b) - pts(1, o)) -
             (pts(1, a) - pts(1, o)) * (pts(0, b) - pts(0, o));
    };
    std::vector<int> hull;
    for (int i : idx) {
      while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= tol) hull.pop_back();
      hull.push_back(i);
    }
    size_t lower = hull.size() + 1;
    for (int k = n - 2; k >= 0; --k) {
      int i = idx[k];
      while (hull.size() >= lower && cross(hull[hull.size() - 2], hull.back(), i) <= tol)
        hull.pop_back();
      hull.push_back(i);
    }
    hull.pop_back();
    if (hull.size() < 3) {
      // degenerate (segment/point): band facets along the segment
      Vec a = pts.col(hull.front()), b = pts.col(hull.back());
      Vec d = b - a;
      if (d.norm() < tol) {  // single point
        for (int i = 0; i < 2; ++i) {
          out.push_back({Vec::Unit(2, i), a[i]});
          out.push_back({-Vec::Unit(2, i), -a[i]});
        }
        return out;
      }
      d.normalize();
      Vec nperp = make_vec({-d[1], d[0]});
      double lo = 1e300, hi = -1e300;
      for (int c = 0; c < n; ++c) {
        double t = d.dot(pts.col(c));
        lo = std::min(lo, t);
        hi = std::max(hi, t);
      }
      out.push_back({d, hi});
      out.push_back({-d, -lo});
      out.push_back({nperp, nperp.dot(a)});
      out.push_back({-nperp, -nperp.dot(a)});
      return out;
    }
    for (size_t k = 0; k < hull.size(); ++k) {
      Vec a = pts.col(hull[k]);
      Vec b = pts.col(hull[(k + 1) % hull.size()]);
      Vec e = b - a;
      Vec nrm = make_vec({e[1], -e[0]});  // outward for ccw hull
      double nn = nrm.norm();
      if (nn < tol) continue;
      nrm /= nn;
      out.push_back({nrm, nrm.dot(a)});
    }
    return out;
  }

  if (dim == 3) {
    // brute-force facet search over triples; fine for the small bodies here
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
          Vec e1 = pts.col(j) - pts.col(i), e2 = pts.col(k) - pts.col(i);
          Vec nrm(3);
          nrm << e1[1] * e2[2] - e1[2] * e2[1], e1[2] * e2[0] - e1[0] * e2[2],
              e1[0] * e2[1] - e1[1] * e2[0];
          double nn = nrm.norm();
          if (nn < tol) continue;
          nrm /= nn;
          double off = nrm.dot(pts.col(i));
          double mx = -1e300, mn = 1e300;
          for (int c = 0; c < n; ++c) {
            double t = nrm.dot(pts.col(c));
            mx = std::max(mx, t);
            mn = std::min(mn, t);
          }
          Vec fn;
          double fo;
          if (mx <= off + tol) {
            fn = nrm;
            fo = off;
          } else if (mn >= off - tol) {
            fn = -nrm;
            fo = -off;
          } else {
            continue;
          }
          bool dup = false;
          for (const auto& f : out)
            if ((f.normal - fn).norm() < 1e-7 && std::abs(f.offset - fo) < 1e-7) {
              dup = true;
              break;
            }
          if (!dup) out.push_back({fn, fo});
        }
    return out;
  }

  throw UnsupportedStructure("polytope_facets: dimension > 3");
}

Vec project_simplex(const Vec& w) {
  const int n = static_cast<int>(w.size());
  std::vector<double> u(w.data(), w.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  for (int i = 0; i < n; ++i) {
    css += u[i];
    double t = (css - 1.0) / (i + 1);
    if (u[i] - t > 0) theta = t;
  }
  Vec out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(0.0, w[i] - theta);
  return out;
}

BodyDistResult body_distance(const Mat& V, const Mat& R, const Vec& p, int iters) {
  const int nv = static_cast<int>(V.cols());
  const int nr = static_cast<int>(R.cols());
  if (nv == 0) throw EmptySet("body_distance: no vertices");

  Mat M(V.rows(), nv + nr);
  M.leftCols(nv) = V;
  if (nr) M.rightCols(nr) = R;
  double L = (M.transpose() * M).operatorNorm() + 1e-12;

  Vec w = Vec::Zero(nv + nr);
  w.head(nv).setConstant(1.0 / nv);
  Vec y = w, w_prev = w;
  double t_prev = 1.0;

  auto proj = [&](Vec z) {
    Vec out(nv + nr);
    out.head(nv) = project_simplex(z.head(nv));
    for (int i = 0; i < nr; ++i) out[nv + i] = std::max(0.0, z[nv + i]);
    return out;
  };

  for (int it = 0; it < iters; ++it) {
    Vec grad = M.transpose() * (M * y - p);
    Vec w_new = proj(y - grad / L);
    double t = (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev)) / 2.0;
    y = w_new + ((t_prev - 1.0) / t) * (w_new - w_prev);
    // restart on non-monotone step
    if ((M * w_new - p).squaredNorm() > (M * w_prev - p).squaredNorm()) y = w_new;
    w_prev = w_new;
    t_prev = t;
  }
  BodyDistResult out;
  out.point = M * w_prev;
  out.dist = (out.point - p).norm();
  return out;
}

Mat affine_basis(const Mat& pts, double tol) {
  if (pts.cols() <= 1) return Mat(pts.rows(), 0);
  Mat D(pts.rows(), pts.cols() - 1);
  for (int c = 1; c < pts.cols(); ++c) D.col(c - 1) = pts.col(c) - pts.col(0);
  Eigen::JacobiSVD<Mat> svd(D, Eigen::ComputeFullU);
  double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol * std::max(1.0, smax)) ++rank;
  return svd.matrixU().leftCols(rank);
}

}  // namespace ebcert
