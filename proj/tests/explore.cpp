// scratch exploration binary (not a test): prints derived quantities
#include <cstdio>

#include "ebcert/builtins.hpp"
#include "ebcert/certificates.hpp"
#include "ebcert/epigraph.hpp"

using namespace ebcert;

int main() {
  // hoffman examples
  {
    Mat A(1, 1);
    A << 1;
    printf("hoffman([1],0)            = %.12f\n", hoffman_constant(A, Vec::Zero(1)));
  }
  {
    Mat A = Mat::Identity(2, 2);
    printf("hoffman(I2,0)             = %.12f (sqrt2=%.12f)\n", hoffman_constant(A, Vec::Zero(2)),
           std::sqrt(2.0));
  }
  {
    Mat A(2, 2);
    A << 1, 0, 1, 0.1;
    printf("hoffman([[1,0],[1,.1]],0) = %.12f\n", hoffman_constant(A, Vec::Zero(2)));
  }

  // two-set instance
  auto ts = TwoSetInstance::make();
  printf("derived_epsilon           = %.12f\n", ts.derived_epsilon());
  printf("derived_tau               = %.12f\n", ts.derived_tau());
  for (int k : {4, 16, 64, 100}) {
    Vec x = ts.xk(k);
    printf("k=%3d  d(x,Sf)=%.12e  (target %.12e)  f=%.12e  ratio=%.6f (target %.6f)\n", k,
           distance(*ts.Sf, x), std::sqrt(2.0 / k), eval(*ts.f, x), ratio(ts.f, x),
           std::sqrt(2.0 * k));
  }

  // modulus on remark31
  {
    ModulusQuery q;
    q.xbar = ts.xbar;
    q.samples_per_level = 1024;
    auto est = estimate_modulus(ts.f, q);
    printf("remark31 modulus verdict  = %s\n", to_string(est.verdict));
    for (const auto& st : est.per_level)
      printf("  delta=%.5f sup=%.4f%s\n", st.delta, st.sup_ratio, st.empty ? " EMPTY" : "");
  }

  // thm31 / thm33 on remark31
  {
    auto r31 = check_thm31(ts.f, ts.xbar);
    printf("remark31 thm31            = %s\n", to_string(r31.verdict));
    auto r33 = check_thm33(ts.f, ts.xbar, ts.derived_tau());
    printf("remark31 thm33(tau=%.3f) = %s (witnesses %zu)\n", ts.derived_tau(),
           to_string(r33.verdict), r33.witnesses.size());
  }

  // tau_star for max2 ∘ id
  auto cb = composite_battery();
  {
    const auto& ci = cb[0];
    double ts34 = tau_star_search(ci.problem, 0.25, 40, 5);
    printf("tau_star(max2,id)         = %.9f (sqrt2=%.9f)\n", ts34, std::sqrt(2.0));
    auto r_fail = check_thm34(ci.problem, 1.0, 0.25, 40, 5);
    printf("thm34(max2,id,tau=1.0)    = %s\n", to_string(r_fail.verdict));
    auto r_ok = check_thm34(ci.problem, 1.5, 0.25, 40, 5);
    printf("thm34(max2,id,tau=1.5)    = %s\n", to_string(r_ok.verdict));
  }
  {
    const auto& ci = cb[1];  // psi = 2x
    double t2 = tau_star_search(ci.problem, 0.25, 40, 5);
    printf("tau_star(max2,2x)         = %.9f (sqrt2/2=%.9f)\n", t2, std::sqrt(2.0) / 2);
  }

  // epi distance example
  {
    auto absf = FuncExpr::max_of(
        {FuncExpr::affine(make_vec({1}), 0), FuncExpr::affine(make_vec({-1}), 0)});
    TauNorm tn{1.0};
    printf("epi_dist(|x|,(1,0),tau=1) = %.9f\n", epi_distance(*absf, make_vec({1}), 0.0, tn));
    printf("epi_dist(|x|,(0,-1))      = %.9f\n", epi_distance(*absf, make_vec({0}), -1.0, tn));
    printf("phi(|x|,(0,-1))           = %.9f\n", phi(*absf, make_vec({0}), -1.0, tn));
  }

  // lemma25 counterexample cones
  {
    auto f25 = lemma25_function();
    auto N01 = epi_limiting_normal_cone(*f25, make_vec({0}), 1.0);
    auto N00 = epi_limiting_normal_cone(*f25, make_vec({0}), 0.0);
    Vec w = make_vec({0, -1});
    printf("(0,-1) in N(epi,(0,1))    = %d ; in N(epi,(0,0)) = %d\n",
           cone_membership(N01, w), cone_membership(N00, w));
    auto rep = check_lemma25(*f25, make_vec({0}), 1.0);
    printf("lemma25 (2.4)=%d (2.5)=%d cont=%d witness=%s\n", rep.frechet_inclusion_holds,
           rep.limiting_inclusion_holds, rep.continuous_at_z,
           rep.witness ? "yes" : "no");
  }

  // battery moduli
  for (const auto& bi : lipschitz_battery()) {
    ModulusQuery q;
    q.xbar = bi.xbar;
    q.samples_per_level = 1024;
    auto est = estimate_modulus(bi.f, q);
    printf("battery %-10s verdict=%-12s tau_hat=%.6f\n", bi.name.c_str(), to_string(est.verdict),
           est.tau_hat);
  }

  // hoffman battery head
  auto hb = hoffman_battery(6);
  for (const auto& hi : hb)
    printf("%s: n=%ld m=%ld H=%.6f\n", hi.name.c_str(), hi.A.cols(), hi.A.rows(), hi.constant);

  return 0;
}
