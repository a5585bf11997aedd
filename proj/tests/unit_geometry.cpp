#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ebcert/functions.hpp"
#include "ebcert/geometry.hpp"

using namespace ebcert;

namespace {

// Remark-style fixtures used across the suite.
SetPtr make_A1() {
  // (R_- x R_+) ∪ {x1 + x2 = 0, x1 >= 0}
  Mat Aq(2, 2);
  Aq << 1, 0, 0, -1;
  auto quadrant = SetExpr::halfspaces(Aq, make_vec({0, 0}));
  Mat Al(3, 2);
  Al << 1, 1, -1, -1, -1, 0;
  auto halfline = SetExpr::halfspaces(Al, make_vec({0, 0, 0}));
  return SetExpr::unite({quadrant, halfline});
}

SetPtr make_A2() {
  Mat Aq(2, 2);
  Aq << -1, 0, 0, -1;
  auto quadrant = SetExpr::halfspaces(Aq, make_vec({0, 0}));
  auto b1 = SetExpr::ball(make_vec({1, 0}), 1.0);
  auto b2 = SetExpr::ball(make_vec({0, 1}), 1.0);
  return SetExpr::intersect({quadrant, b1, b2});
}

Vec xk(int k) {
  double x1 = 1.0 / k;
  double x2 = std::sqrt(2.0 / k - 1.0 / (k * (double)k));
  return make_vec({x1, x2});
}

}  // namespace

TEST_CASE("distance: singleton, ball, halfspaces") {
  auto S = SetExpr::singleton(make_vec({0, 0}));
  CHECK(distance(*S, make_vec({3, 4})) == doctest::Approx(5.0).epsilon(1e-12));

  auto B = SetExpr::ball(make_vec({0, 0}), 1.0);
  CHECK(distance(*B, make_vec({2, 0})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(distance(*B, make_vec({0.5, 0})) == doctest::Approx(0.0));

  Mat A(1, 2);
  A << 1, 1;
  auto H = SetExpr::halfspaces(A, make_vec({0}));
  CHECK(distance(*H, make_vec({1, 1})) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("projection onto halfspace and ball") {
  Mat A(1, 2);
  A << 1, 0;
  auto H = SetExpr::halfspaces(A, make_vec({0}));
  auto ps = project(*H, make_vec({1, 5}));
  REQUIRE(ps.size() == 1);
  CHECK((ps[0] - make_vec({0, 5})).norm() < 1e-10);

  auto B = SetExpr::ball(make_vec({0, 0}), 1.0);
  ps = project(*B, make_vec({2, 0}));
  REQUIRE(ps.size() == 1);
  CHECK((ps[0] - make_vec({1, 0})).norm() < 1e-10);
}

TEST_CASE("Remark 3.1 distances are exact") {
  auto A1 = make_A1();
  auto A2 = make_A2();
  auto Sf = SetExpr::intersect({A1, A2});

  for (int k : {2, 4, 16, 64, 100}) {
    Vec x = xk(k);
    CHECK(distance(*A1, x) == doctest::Approx(1.0 / k).epsilon(1e-11));
    CHECK(distance(*A2, x) == doctest::Approx(0.0).epsilon(1e-11));
    CHECK(distance(*Sf, x) == doctest::Approx(std::sqrt(2.0 / k)).epsilon(1e-11));
  }
}

TEST_CASE("multi-projection across a union") {
  auto twoballs =
      SetExpr::unite({SetExpr::ball(make_vec({-2, 0}), 1.0), SetExpr::ball(make_vec({2, 0}), 1.0)});
  auto ps = project(*twoballs, make_vec({0, 0}));
  CHECK(ps.size() == 2);
}

TEST_CASE("frechet normal cone: quadrant, A2 corner, singleton intersection") {
  Mat A(2, 2);
  A << 1, 0, 0, 1;
  auto quad = SetExpr::halfspaces(A, make_vec({0, 0}));
  auto K = frechet_normal_cone(*quad, make_vec({0, 0}));
  CHECK(cone_membership(K, make_vec({1, 0})));
  CHECK(cone_membership(K, make_vec({0, 1})));
  CHECK(cone_membership(K, make_vec({2, 3})));
  CHECK_FALSE(cone_membership(K, make_vec({-1, 0})));

  auto A2 = make_A2();
  auto K2 = frechet_normal_cone(*A2, make_vec({0, 0}));
  CHECK(cone_membership(K2, make_vec({-1, 0})));
  CHECK(cone_membership(K2, make_vec({0, -1})));
  CHECK(cone_membership(K2, make_vec({-0.5, -0.5})));
  CHECK_FALSE(cone_membership(K2, make_vec({0.1, -1})));

  auto Sf = SetExpr::intersect({make_A1(), A2});
  auto K3 = frechet_normal_cone(*Sf, make_vec({0, 0}));
  // S_f = {0}: the cone is all of R^2
  CHECK(cone_membership(K3, make_vec({0.3, 0.9})));
  CHECK(cone_membership(K3, make_vec({-1, 2})));
  CHECK(cone_membership(K3, make_vec({0, -5})));
}

TEST_CASE("frechet cone of a union intersects the children cones") {
  Mat H1(1, 2), H2(1, 2);
  H1 << -1, 0;  // {x1 >= 0}
  H2 << 0, -1;  // {x2 >= 0}
  auto U = SetExpr::unite({SetExpr::halfspaces(H1, make_vec({0})), SetExpr::halfspaces(H2, make_vec({0}))});
  auto K = frechet_normal_cone(*U, make_vec({0, 0}));
  CHECK(K.is_zero());

  auto L = limiting_normal_cone(*U, make_vec({0, 0}));
  CHECK(cone_membership(L, make_vec({-1, 0})));
  CHECK(cone_membership(L, make_vec({0, -1})));
}

TEST_CASE("limiting cone contains the frechet cone (A1 at origin)") {
  auto A1 = make_A1();
  const Vec origin = make_vec({0, 0});
  auto F = frechet_normal_cone(*A1, origin);
  CHECK(F.is_zero());
  auto L = limiting_normal_cone(*A1, origin);
  CHECK(cone_membership(L, make_vec({1, 0})));
  CHECK(cone_membership(L, make_vec({0, -1})));
  // normals of the line piece x1+x2=0
  double s = std::sqrt(0.5);
  CHECK(cone_membership(L, make_vec({s, s})));
}

TEST_CASE("sampled normal test on halfplane and A1") {
  Mat A(1, 2);
  A << 1, 0;
  auto H = SetExpr::halfspaces(A, make_vec({0}));
  const Vec origin = make_vec({0, 0});
  CHECK(sampled_normal_test(*H, origin, make_vec({1, 0}), 0.0, 600, 7));
  CHECK_FALSE(sampled_normal_test(*H, origin, make_vec({1, 1}), 0.0, 600, 7));

  auto A1 = make_A1();
  double s = std::sqrt(0.5);
  CHECK_FALSE(sampled_normal_test(*A1, origin, make_vec({s, s}), 0.0, 600, 7));
}

TEST_CASE("cone membership tolerances") {
  Mat G(2, 1);
  G.col(0) = make_vec({1, 1}).normalized();
  PolyhedralCone K{G, 2, true};
  Vec v = make_vec({1, 1.0000001});
  CHECK_FALSE(cone_membership(K, v, 1e-9));
  CHECK(cone_membership(K, v, 1e-6));
}

TEST_CASE("cone membership agrees with 2-D angular sweep") {
  int disagreements = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Rng rng(derive_seed(42, trial));
    int ngen = 1 + rng.uniform_int(0, 2);
    Mat G(2, ngen);
    for (int c = 0; c < ngen; ++c) G.col(c) = rng.unit_vector(2);
    PolyhedralCone K{G, 2, true};
    Vec v = rng.unit_vector(2) * rng.uniform(0.1, 2.0);

    // oracle: exhaustive angular sweep of nonnegative 2-generator combos
    auto in_sweep = [&]() {
      double vn = v.norm();
      if (vn < 1e-12) return true;
      for (int a = 0; a < ngen; ++a)
        for (int b = 0; b < ngen; ++b) {
          // v = s*g_a + t*g_b with s,t >= 0 ?
          Mat M(2, 2);
          M.col(0) = G.col(a);
          M.col(1) = G.col(b);
          Eigen::FullPivLU<Mat> lu(M);
          if (lu.rank() < 2) {
            // colinear: check along the single direction
            double t = G.col(a).dot(v);
            if (t >= 0 && (t * G.col(a) - v).norm() < 1e-9) return true;
            continue;
          }
          Vec st = lu.solve(v);
          if (st[0] >= -1e-9 && st[1] >= -1e-9) return true;
        }
      return false;
    };
    bool mine = cone_membership(K, v, 1e-7);
    bool theirs = in_sweep();
    if (mine != theirs) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("distance zero iff membership, projections land in the set") {
  auto A1 = make_A1();
  auto A2 = make_A2();
  std::vector<SetPtr> sets = {A1, A2, SetExpr::intersect({A1, A2}),
                              SetExpr::ball(make_vec({0.5, 0.5}), 0.25)};
  Rng rng(99);
  for (const auto& S : sets) {
    for (int i = 0; i < 60; ++i) {
      Vec x = make_vec({rng.uniform(-2, 2), rng.uniform(-2, 2)});
      double d = distance(*S, x);
      bool member = set_contains(*S, x, tols().membership);
      if (d <= tols().membership) CHECK(member);
      if (member) CHECK(d <= 10 * tols().membership);
      for (const auto& p : project(*S, x)) {
        CHECK((x - p).norm() == doctest::Approx(d).epsilon(1e-8));
        CHECK(distance(*S, p) <= 10 * tols().dist);
      }
    }
  }
}

TEST_CASE("convex set: frechet generators satisfy the support inequality") {
  auto A2 = make_A2();
  std::vector<Vec> pts = {make_vec({0, 0}), xk(4), make_vec({1, 1})};
  Rng rng(5);
  for (const auto& a : pts) {
    auto K = frechet_normal_cone(*A2, a);
    for (int c = 0; c < K.gens.cols(); ++c) {
      Vec g = K.gens.col(c);
      for (int i = 0; i < 200; ++i) {
        Vec y = make_vec({rng.uniform(-1, 2), rng.uniform(-1, 2)});
        if (!set_contains(*A2, y)) continue;
        CHECK(g.dot(y - a) <= tols().cert * std::max(1.0, (y - a).norm()));
      }
    }
  }
}

TEST_CASE("frechet cone generators pass the sampled normal test") {
  auto A1 = make_A1();
  auto A2 = make_A2();
  std::vector<std::pair<SetPtr, Vec>> cases = {
      {A2, make_vec({0, 0})}, {A2, xk(4)}, {A1, make_vec({-1, 0})}, {A1, make_vec({0.5, -0.5})}};
  for (const auto& [S, a] : cases) {
    auto K = frechet_normal_cone(*S, a);
    for (int c = 0; c < K.gens.cols(); ++c)
      CHECK(sampled_normal_test(*S, a, K.gens.col(c), 0.0, 400, 1234));
  }
}

TEST_CASE("frechet subset of limiting, generator-wise") {
  auto A1 = make_A1();
  auto A2 = make_A2();
  std::vector<std::pair<SetPtr, Vec>> cases = {
      {A1, make_vec({0, 0})}, {A2, make_vec({0, 0})}, {A1, make_vec({0.5, -0.5})}};
  for (const auto& [S, a] : cases) {
    auto F = frechet_normal_cone(*S, a);
    auto L = limiting_normal_cone(*S, a);
    for (int c = 0; c < F.gens.cols(); ++c) CHECK(cone_membership(L, F.gens.col(c), 1e-6));
  }
}

TEST_CASE("sublevel-set distance via the oracle fallback") {
  // f(x) = x^2 in 1-D: S = {0}
  auto f = FuncExpr::quadratic(Mat::Identity(1, 1), Vec::Zero(1), 0.0);
  auto S = SetExpr::sublevel(f, 0.0);
  CHECK(distance(*S, make_vec({0.5})) == doctest::Approx(0.5).epsilon(1e-6));

  // nonconvex 2-D sublevel: f = |x|^2 - 1 (annulus complement -> unit disk)
  auto g = FuncExpr::quadratic(Mat::Identity(2, 2), Vec::Zero(2), -1.0);
  auto Sg = SetExpr::sublevel(g, 0.0);
  CHECK(distance(*Sg, make_vec({3, 0})) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("empty sets raise EmptySet") {
  auto E = SetExpr::empty(2);
  CHECK_THROWS_AS(distance(*E, make_vec({0, 0})), EmptySet);
  Mat A(1, 2);
  A << 1, 0;
  auto H = SetExpr::halfspaces(A, make_vec({0}));
  CHECK_THROWS_AS(distance(*SetExpr::intersect({H, E}), make_vec({0, 0})), EmptySet);
}

TEST_CASE("dimension mismatches are fatal") {
  auto B = SetExpr::ball(make_vec({0, 0}), 1.0);
  CHECK_THROWS_AS(distance(*B, make_vec({1, 2, 3})), DimensionMismatch);
}
