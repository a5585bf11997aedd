#include "ebcert/builtins.hpp"

#include <algorithm>
#include <cmath>

#include "ebcert/subdifferential.hpp"

namespace ebcert {

TwoSetInstance TwoSetInstance::make() {
  TwoSetInstance inst;
  Mat Aq(2, 2);
  Aq << 1, 0, 0, -1;  // x1 <= 0, x2 >= 0
  auto quadrant = SetExpr::halfspaces(Aq, make_vec({0, 0}));
  Mat Al(3, 2);
  Al << 1, 1, -1, -1, -1, 0;  // x1+x2 = 0, x1 >= 0
  auto halfline = SetExpr::halfspaces(Al, make_vec({0, 0, 0}));
  inst.A1 = SetExpr::unite({quadrant, halfline});

  Mat Ap(2, 2);
  Ap << -1, 0, 0, -1;  // first quadrant
  auto quad_pos = SetExpr::halfspaces(Ap, make_vec({0, 0}));
  inst.A2 = SetExpr::intersect(
      {quad_pos, SetExpr::ball(make_vec({1, 0}), 1.0), SetExpr::ball(make_vec({0, 1}), 1.0)});

  inst.Sf = SetExpr::intersect({inst.A1, inst.A2});
  inst.f = FuncExpr::max_of({FuncExpr::dist(inst.A1), FuncExpr::dist(inst.A2)});
  inst.xbar = make_vec({0, 0});
  return inst;
}

Vec TwoSetInstance::xk(int k) const {
  double kk = k;
  return make_vec({1.0 / kk, std::sqrt(2.0 / kk - 1.0 / (kk * kk))});
}

double TwoSetInstance::derived_epsilon() const {
  auto sd = limiting_subdiff(*f, xbar);
  auto facets = polytope_facets(sd.body.vertices);
  double inr = std::numeric_limits<double>::infinity();
  for (const auto& fc : facets) inr = std::min(inr, fc.offset / fc.normal.norm());
  if (!(inr > 0)) throw NumericalInconsistency("derived_epsilon: origin not interior to the hull");
  return inr;
}

double TwoSetInstance::derived_tau() const { return 1.0 / (0.95 * derived_epsilon()); }

FuncPtr lemma25_function() { return FuncExpr::builtin(BuiltinKind::Lemma25Counterexample); }
FuncPtr step_function() { return FuncExpr::builtin(BuiltinKind::LscStep); }

std::vector<BatteryInstance> lipschitz_battery() {
  std::vector<BatteryInstance> out;

  const Vec z1 = Vec::Zero(1);
  const Vec z2 = Vec::Zero(2);

  // 1: |x|
  out.push_back({"abs1d",
                 FuncExpr::max_of({FuncExpr::affine(make_vec({1}), 0), FuncExpr::affine(make_vec({-1}), 0)}),
                 z1, true});
  // 2: x
  out.push_back({"linear1d", FuncExpr::affine(make_vec({1}), 0), z1, true});
  // 3: 2x
  out.push_back({"scaled1d", FuncExpr::affine(make_vec({2}), 0), z1, true});
  // 4: max(x1+x2, -x1)
  out.push_back({"hinge2d",
                 FuncExpr::max_of({FuncExpr::affine(make_vec({1, 1}), 0), FuncExpr::affine(make_vec({-1, 0}), 0)}),
                 z2, true});
  // 5: max(x1, x2)
  out.push_back({"maxxy",
                 FuncExpr::max_of({FuncExpr::affine(make_vec({1, 0}), 0), FuncExpr::affine(make_vec({0, 1}), 0)}),
                 z2, true});
  // 6: d(., unit ball) at a boundary point
  out.push_back({"distball", FuncExpr::dist(SetExpr::ball(z2, 1.0)), make_vec({1, 0}), true});
  // 7: d(., halfplane)
  {
    Mat A(1, 2);
    A << 1, 0;
    out.push_back({"disthalf", FuncExpr::dist(SetExpr::halfspaces(A, make_vec({0}))), z2, true});
  }
  // 8: d(., union of two halfplanes)
  {
    Mat H1(1, 2), H2(1, 2);
    H1 << -1, 0;
    H2 << 0, -1;
    auto U = SetExpr::unite(
        {SetExpr::halfspaces(H1, make_vec({0})), SetExpr::halfspaces(H2, make_vec({0}))});
    out.push_back({"distunion", FuncExpr::dist(U), z2, true});
  }
  // 9: max(y1, y2) composed with an invertible affine map
  {
    auto g = FuncExpr::max_of(
        {FuncExpr::affine(make_vec({1, 0}), 0), FuncExpr::affine(make_vec({0, 1}), 0)});
    Mat W(2, 2);
    W << 1, 1, 1, -1;
    out.push_back({"comp2d", FuncExpr::compose(g, SmoothMap::affine_map(W, Vec::Zero(2))), z2, true});
  }
  // 10: |x| (euclidean norm)
  out.push_back({"norm2d", FuncExpr::norm_scaled(1.0, 2), z2, true});

  return out;
}

std::vector<CompositeInstance> composite_battery() {
  std::vector<CompositeInstance> out;
  const Vec z1 = Vec::Zero(1);
  const Vec z2 = Vec::Zero(2);

  auto max2 = FuncExpr::max_of(
      {FuncExpr::affine(make_vec({1, 0}), 0), FuncExpr::affine(make_vec({0, 1}), 0)});
  auto hinge = FuncExpr::max_of(
      {FuncExpr::affine(make_vec({1, 1}), 0), FuncExpr::affine(make_vec({-1, 0}), 0)});
  auto lin1 = FuncExpr::affine(make_vec({1}), 0);
  auto tri = FuncExpr::max_of({FuncExpr::affine(make_vec({1, 0}), 0),
                               FuncExpr::affine(make_vec({0, 1}), 0),
                               FuncExpr::affine(make_vec({0.6, 0.6}), 0)});
  auto quad_g = FuncExpr::quadratic(Mat::Identity(1, 1), Vec::Zero(1), 0.0);  // y^2: no EB at 0

  Mat W1(2, 2);
  W1 << 1, 0, 0, 1;
  Mat W2(2, 2);
  W2 << 2, 0, 0, 2;
  Mat W3(2, 2);
  W3 << 1, 1, 0, 1;
  Mat W4(2, 2);
  W4 << 1, 1, 1, -1;
  Mat W5(2, 2);
  W5 << 0.5, 0.2, -0.1, 1.5;

  out.push_back({"max2-id", CompositeProblem::make(max2, SmoothMap::affine_map(W1, Vec::Zero(2)), z2), true});
  out.push_back({"max2-2x", CompositeProblem::make(max2, SmoothMap::affine_map(W2, Vec::Zero(2)), z2), true});
  out.push_back({"max2-shear", CompositeProblem::make(max2, SmoothMap::affine_map(W3, Vec::Zero(2)), z2), true});
  out.push_back({"hinge-rot", CompositeProblem::make(hinge, SmoothMap::affine_map(W4, Vec::Zero(2)), z2), true});
  out.push_back({"tri-gen", CompositeProblem::make(tri, SmoothMap::affine_map(W5, Vec::Zero(2)), z2), true});
  out.push_back({"lin-id1d",
                 CompositeProblem::make(lin1, SmoothMap::identity(1), z1), true});
  {
    Mat W(1, 1);
    W << 2;
    out.push_back({"lin-2x",
                   CompositeProblem::make(lin1, SmoothMap::affine_map(W, Vec::Zero(1)), z1), true});
  }
  // quadratic psi components (surjective at 0): psi(x) = (x1 + 0.2 x1^2, x2 - 0.1 x2^2)
  {
    Mat Q1 = Mat::Zero(2, 2), Q2 = Mat::Zero(2, 2);
    Q1(0, 0) = 0.2;
    Q2(1, 1) = -0.1;
    auto c1 = FuncExpr::quadratic(Q1, make_vec({1, 0}), 0.0);
    auto c2 = FuncExpr::quadratic(Q2, make_vec({0, 1}), 0.0);
    out.push_back({"max2-quad",
                   CompositeProblem::make(max2, SmoothMap::make({c1, c2}), z2), true});
  }
  {
    Mat Q = Mat::Zero(1, 1);
    Q(0, 0) = 0.3;
    auto c = FuncExpr::quadratic(Q, make_vec({1}), 0.0);  // x + 0.3 x^2
    out.push_back({"lin-quad1d",
                   CompositeProblem::make(lin1, SmoothMap::make({c}), z1), true});
  }
  // y^2 composed with the identity: no local error bound at 0
  out.push_back({"square-id", CompositeProblem::make(quad_g, SmoothMap::identity(1), z1), false});

  return out;
}

std::vector<HoffmanInstance> hoffman_battery(int count, std::uint64_t seed) {
  std::vector<HoffmanInstance> out;
  int draw = 0;
  while (static_cast<int>(out.size()) < count) {
    Rng rng(derive_seed(seed, 0x40FF, draw++));
    int n = 2 + (static_cast<int>(out.size()) % 2);  // alternate 2-D / 3-D
    int m = rng.uniform_int(2, 5);
    Mat A(m, n);
    for (int i = 0; i < m; ++i) A.row(i) = rng.unit_vector(n).transpose();
    Vec b = Vec::Zero(m);
    double H;
    try {
      H = hoffman_constant(A, b);
    } catch (const Error&) {
      continue;
    }
    if (!(H >= 0.9) || H > 25.0) continue;  // reject ill-conditioned draws
    HoffmanInstance inst;
    inst.name = "hoffman-" + std::to_string(out.size());
    inst.A = A;
    inst.b = b;
    inst.xbar = Vec::Zero(n);
    inst.constant = H;
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace ebcert
