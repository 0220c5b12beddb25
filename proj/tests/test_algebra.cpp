#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "toda/algebra.hpp"

using namespace toda;

namespace {

struct Sym {
  Context ctx;
  VarId g;
  Scalar gamma;
  Sym() {
    g = ctx.add("g", VarKind::Coupling);
    gamma = scalar_gamma(g);
  }
  Weight weight(const std::string& base) {
    return {Scalar::var(ctx.add(base + "1", VarKind::Param)),
            Scalar::var(ctx.add(base + "2", VarKind::Param))};
  }
  bool zero(const Scalar& s) { return check_zero(s, ctx).zero; }
};

}  // namespace

TEST_CASE("pairing reproduces the Cartan matrix") {
  auto e1 = simple_root<Scalar>(1), e2 = simple_root<Scalar>(2);
  CHECK(inner(e1, e1).equals(Scalar::constant(2)));
  CHECK(inner(e2, e2).equals(Scalar::constant(2)));
  CHECK(inner(e1, e2).equals(Scalar::constant(-1)));
  CHECK(inner(e2, e1).equals(Scalar::constant(-1)));
}

TEST_CASE("fundamental weights are dual to the simple roots") {
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j) {
      Scalar want = Scalar::constant(i == j ? 1 : 0);
      CHECK(inner(fundamental_weight<Scalar>(i), simple_root<Scalar>(j)).equals(want));
    }
  CHECK(inner(fundamental_weight<Scalar>(1), fundamental_weight<Scalar>(1))
            .equals(Scalar::constant(Rat(2, 3))));
}

TEST_CASE("weyl vector pairs to one with each simple root") {
  auto rho = weyl_vector<Scalar>();
  CHECK(inner(rho, simple_root<Scalar>(1)).equals(Scalar::constant(1)));
  CHECK(inner(rho, simple_root<Scalar>(2)).equals(Scalar::constant(1)));
}

TEST_CASE("h functionals: values, sum rule, and weight realizations") {
  Sym s;
  auto e1 = simple_root<Scalar>(1);
  CHECK(h(1, e1).equals(Scalar::constant(1)));
  CHECK(h(2, e1).equals(Scalar::constant(-1)));
  CHECK(h(3, e1).equals(Scalar::constant(0)));
  CHECK_THROWS_AS((void)h(4, e1), std::invalid_argument);

  Weight u = s.weight("u");
  CHECK(s.zero(h(1, u) + h(2, u) + h(3, u)));
  // h1 acts as pairing with omega1, h3 as pairing with -omega2
  CHECK(s.zero(h(1, u) - inner(fundamental_weight<Scalar>(1), u)));
  CHECK(s.zero(h(3, u) + inner(fundamental_weight<Scalar>(2), u)));
}

TEST_CASE("bform concrete value and bilinearity") {
  Sym s;
  auto e1 = simple_root<Scalar>(1);
  CHECK(bform(e1, e1).equals(Scalar::constant(-2)));
  CHECK(bform(Weight{}, e1).is_zero());
  CHECK(bform(e1, Weight{}).is_zero());

  Weight u = s.weight("u"), v = s.weight("v"), w = s.weight("w");
  Scalar a = Scalar::var(s.ctx.add("a", VarKind::Param));
  Scalar b = Scalar::var(s.ctx.add("b", VarKind::Param));
  Weight combo = u.scaled(a) + v.scaled(b);
  CHECK(s.zero(bform(combo, w) - (a * bform(u, w) + b * bform(v, w))));
  CHECK(s.zero(bform(w, combo) - (a * bform(w, u) + b * bform(w, v))));
}

TEST_CASE("cform is cyclic and trilinear, csigma symmetrizes the tail") {
  Sym s;
  Weight u = s.weight("u"), v = s.weight("v"), w = s.weight("w");
  CHECK(s.zero(cform(u, v, w) - cform(v, w, u)));
  CHECK(s.zero(cform(u, v, w) - cform(w, u, v)));
  CHECK(s.zero(csigma(u, v, w) - cform(u, v, w) - cform(u, w, v)));
  CHECK(cform(Weight{}, v, w).is_zero());

  Scalar a = Scalar::var(s.ctx.add("a", VarKind::Param));
  Weight combo = u.scaled(a);
  CHECK(s.zero(cform(combo, v, w) - a * cform(u, v, w)));
}

TEST_CASE("rooted cform evaluation matches the closed form") {
  Sym s;
  Weight g1 = simple_root<Scalar>(1).scaled(s.gamma);
  Weight g2 = simple_root<Scalar>(2).scaled(s.gamma);
  Scalar lhs = cform(g1, g2, g2);
  CHECK(lhs.equals(-(s.gamma * s.gamma * s.gamma)));
  CHECK(s.zero(lhs + s.gamma * h(2, simple_root<Scalar>(1)) * inner(g1, g2)));
  // and with the roles of the roots exchanged
  Scalar lhs2 = cform(g2, g1, g1);
  CHECK(s.zero(lhs2 + s.gamma * h(2, simple_root<Scalar>(2)) * inner(g2, g1)));
}

TEST_CASE("background charge is q times the weyl vector") {
  Sym s;
  Scalar q = q_constant(s.gamma);
  Weight Q = background_charge(s.gamma);
  CHECK(s.zero(Q.a1 - q));
  CHECK(s.zero(Q.a2 - q));
  CHECK(s.zero(inner(Q, simple_root<Scalar>(1)) - q));
  // numeric limit check at the top of the coupling range
  double qd = q_constant(std::sqrt(2.0));
  CHECK(qd == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("conformal weight closed form at reference charges") {
  Sym s;
  CHECK(delta_alpha(Weight{}, s.gamma).is_zero());
  Weight g1 = simple_root<Scalar>(1).scaled(s.gamma);
  Weight g2 = simple_root<Scalar>(2).scaled(s.gamma);
  CHECK(delta_alpha(g1, s.gamma).equals(Scalar::constant(1)));
  CHECK(delta_alpha(g2, s.gamma).equals(Scalar::constant(1)));
  Weight Q = background_charge(s.gamma);
  CHECK(s.zero(delta_alpha(Q, s.gamma) - inner(Q, Q).mul_rat(Rat(1, 4))));
}

TEST_CASE("spin-3 weight closed form against independent expansion") {
  Sym s;
  CHECK(w_alpha(Weight{}, s.gamma).is_zero());
  // alpha = e1/2: h1 = 1/2, h2 = -1/2, h3 = 0 gives
  // B(a,a) = (h2-h1)h1 + (h3-h2)h3 = -1/2 and C(a,a,a) = 3 h1 h2 h3 = 0,
  // so w = q^2/2 - q/4.
  Weight a = simple_root<Scalar>(1).scaled(Rat(1, 2));
  Scalar q = q_constant(s.gamma);
  Scalar expect = q * q * Scalar::constant(Rat(1, 2)) - q * Scalar::constant(Rat(1, 4));
  CHECK(s.zero(w_alpha(a, s.gamma) - expect));
}

TEST_CASE("dual pairs trace the identity") {
  Sym s;
  Weight u = s.weight("u");
  Scalar trace;
  for (const auto& [e, w] : dual_pairs<Scalar>()) trace = trace + inner(u, e) * inner(w, u);
  // sum_k <u,e_k><omega_k,u> reassembles <u,u>
  CHECK(s.zero(trace - inner(u, u)));
}
