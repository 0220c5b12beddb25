#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "toda/fieldsim.hpp"

#include <cmath>
#include <complex>
#include <vector>

using namespace toda::sim;
using cplx = std::complex<double>;

namespace {

McParams small_params() {
  McParams p;
  p.samples = 4000;
  p.chains = 4;
  p.seed = 7;
  p.grid.nx = 12;
  p.grid.ny = 6;
  p.grid.nb = 24;
  p.batch = 128;
  return p;
}

// One bulk and one boundary insertion with every screening bound satisfied.
Model small_model() {
  Model m;
  m.gamma = 0.6;
  m.bulk.push_back({{0.1, 0.4}, scale(rho(), 3.0)});
  m.boundary.push_back({0.35, scale(rho(), 3.0)});
  m.mu_bulk = {0.6, 0.8};
  m.mu_boundary[0] = {{0.5, 0.0}};
  m.mu_boundary[1] = {{0.3, 0.0}};
  return m;
}

// Exact stress-tensor one-point value of the free field: every bulk charge
// enters twice, at its position and at the mirror image, plus the boundary
// charges, each contributing a double pole and the log-derivative pole.
cplx chiral_stress_value(const Model& m, double t) {
  struct Ext {
    cplx x;
    Wt a;
  };
  std::vector<Ext> ext;
  for (const auto& b : m.bulk) {
    ext.push_back({b.z, b.alpha});
    ext.push_back({std::conj(b.z), b.alpha});
  }
  for (const auto& b : m.boundary) ext.push_back({{b.s, 0.0}, b.beta});
  const double q = m.q();
  cplx out = 0.0;
  for (std::size_t e = 0; e < ext.size(); ++e) {
    cplx dte = cplx(t, 0.0) - ext[e].x;
    cplx dlog = 0.0;
    for (std::size_t f = 0; f < ext.size(); ++f) {
      if (f == e) continue;
      dlog += -0.5 * inner(ext[e].a, ext[f].a) / (ext[e].x - ext[f].x);
    }
    out += delta_of(ext[e].a, q) / (dte * dte) + dlog / dte;
  }
  return out;
}

}  // namespace

TEST_CASE("cartan numerics") {
  Wt e1{1.0, 0.0}, e2{0.0, 1.0};
  CHECK(inner(e1, e1) == doctest::Approx(2.0));
  CHECK(inner(e1, e2) == doctest::Approx(-1.0));
  CHECK(inner(rho(), e1) == doctest::Approx(1.0));
  CHECK(inner(rho(), e2) == doctest::Approx(1.0));
  CHECK(norm2(rho()) == doctest::Approx(2.0));

  std::vector<Wt> ws = {e1, e2, rho(), {0.3, -1.2}, {2.5, 0.7}};
  for (const auto& u : ws)
    for (const auto& v : ws)
      CHECK(inner(u, v) ==
            doctest::Approx(frame1(u) * frame1(v) + frame2(u) * frame2(v))
                .epsilon(1e-14));

  Model m;
  m.gamma = 0.6;
  const double q = m.q();
  CHECK(q == doctest::Approx(0.6 + 2.0 / 0.6));
  Wt u = scale(e1, m.gamma);
  Wt half = scale(u, 0.5);
  CHECK(delta_of(u, q) ==
        doctest::Approx(inner(half, add(scale(rho(), q), scale(half, -1.0)))));
  // Chaos-weight vertices are dimension-one markers of the two interactions:
  // delta(gamma e_i) = gamma q / 2 - gamma^2 / 2 ... times <e_i, rho> = 1.
  CHECK(delta_of(u, q) ==
        doctest::Approx(m.gamma * q / 2.0 * 2.0 * 0.5 -
                        0.25 * norm2(u)));
}

TEST_CASE("neumann kernel values") {
  // Frozen value: G(i, 2i) = -ln 1 - ln 3 + 0 + 2 ln 2 = ln(4/3).
  CHECK(green({0.0, 1.0}, {0.0, 2.0}) ==
        doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-14));
  // Boundary points outside the unit disk pick up the metric terms.
  CHECK(green({2.0, 0.0}, {3.0, 0.0}) ==
        doctest::Approx(std::log(36.0)).epsilon(1e-14));
  // Inside the unit disk the kernel is the pure Neumann pair.
  cplx x{0.1, 0.3}, y{-0.2, 0.25};
  CHECK(green(x, y) == doctest::Approx(-std::log(std::abs(x - y)) -
                                       std::log(std::abs(x - std::conj(y)))));
  CHECK(green(x, y) == doctest::Approx(green(y, x)).epsilon(1e-14));

  // Floored kernel agrees away from the floor and clamps below it.
  CHECK(green_r(x, y, 0.01) == doctest::Approx(green(x, y)).epsilon(1e-14));
  CHECK(green_r({0.5, 0.0}, {0.5, 0.0}, 0.05) ==
        doctest::Approx(-2.0 * std::log(0.05)).epsilon(1e-14));
  CHECK(green_r({0.5, 0.0}, {0.5, 0.0}, 0.05, 4.0, 1.0) ==
        doctest::Approx(-2.0 * std::log(0.05 * 2.0)).epsilon(1e-14));

  // Exact shift identity under a boundary-preserving Mobius map with local
  // scales: G_r(psi x, psi y; |psi'| s) = G_r(x, y; s) + 2 phi(x) + 2 phi(y),
  // phi = ln_+|psi x| - ln_+|x| - (1/2) ln|psi'(x)|.
  auto phi = [](const Mobius& psi, cplx w) {
    auto lp = [](double a) { return std::log(std::max(a, 1.0)); };
    return lp(std::abs(psi.apply(w))) - lp(std::abs(w)) -
           0.5 * std::log(psi.dabs(w));
  };
  Mobius two_z = normalize(std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0));
  Mobius shift = normalize(1.0, 1.0, 0.0, 1.0);
  const double r = 0.05;
  std::vector<std::pair<cplx, cplx>> pairs = {
      {{0.1, 0.3}, {-0.2, 0.25}},    // separated bulk pair
      {{0.5, 0.2}, {0.52, 0.21}},    // bulk pair inside the floor
      {{0.5, 0.0}, {1.7, 0.0}},      // boundary pair straddling |x| = 1
      {{0.4, 0.7}, {0.4, 0.7}},      // diagonal
      {{-1.4, 0.9}, {0.3, 0.0}},     // mixed bulk/boundary
  };
  for (const auto& psi : {two_z, shift}) {
    for (const auto& [a, b] : pairs) {
      double lhs = green_r(psi.apply(a), psi.apply(b), r, psi.dabs(a), psi.dabs(b));
      double rhs = green_r(a, b, r) + 2.0 * phi(psi, a) + 2.0 * phi(psi, b);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
  CHECK(std::abs(two_z.apply({1.0, 1.0}) - cplx{2.0, 2.0}) < 1e-12);
  CHECK(two_z.dabs({1.0, 1.0}) == doctest::Approx(2.0));
  CHECK(shift.dabs({1.0, 1.0}) == doctest::Approx(1.0));
}

TEST_CASE("zero mode integral against gamma-function values") {
  // With B = 0 the substitution u = muA e^{gamma v} gives
  // I = Gamma(sig/gamma) muA^{-sig/gamma} / gamma.
  auto exact = [](double sig, double g, double muA) {
    return std::tgamma(sig / g) * std::pow(muA, -sig / g) / g;
  };
  ZeroMode a = zero_mode_integral(1.2, 0.6, 0.7, 0.0, 24, 4.0, false);
  CHECK(a.i0.real() == doctest::Approx(exact(1.2, 0.6, 0.7)).epsilon(1e-10));
  CHECK(a.i0.imag() == doctest::Approx(0.0));
  CHECK(a.tail < 1e-10);

  ZeroMode b = zero_mode_integral(1.8, 0.6, 0.5, 0.0, 24, 4.0, false);
  CHECK(b.i0.real() == doctest::Approx(26.666666666666668).epsilon(1e-10));

  // Tilted integrals are the same integral at shifted exponent.
  ZeroMode c = zero_mode_integral(1.2, 0.6, 0.7, 0.0, 24, 4.0, true);
  CHECK(c.ig.real() == doctest::Approx(exact(1.8, 0.6, 0.7)).epsilon(1e-10));
  CHECK(c.ih.real() == doctest::Approx(exact(1.5, 0.6, 0.7)).epsilon(1e-10));

  // Complex boundary mass against a brute-force long-double Riemann sum.
  const double sig = 0.9, g = 0.6, muA = 0.8;
  const cplx B{0.4, 0.3};
  std::complex<long double> ref = 0.0L;
  const long double lo = -60.0L, hi = 25.0L;
  const int n = 400000;
  const long double dv = (hi - lo) / n;
  for (int k = 0; k < n; ++k) {
    long double v = lo + (k + 0.5L) * dv;
    long double t = std::exp(0.3L * v);
    long double ex = 0.9L * v - 0.8L * t * t - 0.4L * t;
    long double ph = -0.3L * t;
    ref += std::complex<long double>(std::exp(ex) * std::cos(ph),
                                     std::exp(ex) * std::sin(ph)) *
           dv;
  }
  ZeroMode d = zero_mode_integral(sig, g, muA, B, 24, 4.0, true);
  CHECK(d.i0.real() == doctest::Approx((double)ref.real()).epsilon(1e-8));
  CHECK(d.i0.imag() == doctest::Approx((double)ref.imag()).epsilon(1e-8));

  // Monotone in the chaos mass.
  ZeroMode e = zero_mode_integral(1.2, 0.6, 1.4, 0.0, 24, 4.0, false);
  CHECK(e.i0.real() < a.i0.real());
}

TEST_CASE("deterministic rng") {
  Rng r1(42), r2(42);
  for (int i = 0; i < 100; ++i) CHECK(r1.next_u64() == r2.next_u64());
  std::vector<std::uint64_t> seeds;
  for (int c = 0; c < 16; ++c) seeds.push_back(chain_seed(1, c));
  for (int i = 0; i < 16; ++i)
    for (int j = i + 1; j < 16; ++j) CHECK(seeds[i] != seeds[j]);

  Rng g(123);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = g.next_gauss();
    sum += x;
    sq += x * x;
  }
  double mean = sum / n;
  double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt((double)n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("cloud construction invariants") {
  Model m = small_model();
  McParams p = small_params();
  PointCloud c = build_cloud(m, p);
  const double dx = (p.grid.x1 - p.grid.x0) / p.grid.nx;
  const double dy = (p.grid.y1 - p.delta) / p.grid.ny;
  const double db = (p.grid.b1 - p.grid.b0) / p.grid.nb;
  CHECK(c.nbulk > 0);
  CHECK(c.size() > c.nbulk);
  CHECK(c.nbulk <= (std::size_t)(p.grid.nx * p.grid.ny));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i < c.nbulk) {
      CHECK(c.pt[i].imag() >= p.delta);
      CHECK(c.weight[i] == doctest::Approx(dx * dy));
    } else {
      CHECK(c.pt[i].imag() == 0.0);
      CHECK(c.weight[i] == doctest::Approx(db));
    }
    CHECK(c.scl[i] == 1.0);
    for (const auto& b : m.bulk)
      if (i < c.nbulk) CHECK(std::abs(c.pt[i] - b.z) >= p.epsilon);
    for (const auto& b : m.boundary)
      if (i >= c.nbulk) CHECK(std::abs(c.pt[i].real() - b.s) >= p.epsilon);
  }
  // The exclusion balls removed something.
  std::size_t nb_expected = 0;
  for (int i = 0; i < p.grid.nb; ++i) {
    double s = p.grid.b0 + (i + 0.5) * db;
    bool out = false;
    for (const auto& b : m.boundary)
      if (std::abs(s - b.s) < p.epsilon) out = true;
    if (!out) ++nb_expected;
  }
  CHECK(c.size() - c.nbulk == nb_expected);
}

TEST_CASE("covariance factorization and empirical covariance") {
  Model m;  // no insertions: plain window
  McParams p;
  p.grid.nx = 10;
  p.grid.ny = 5;
  p.grid.nb = 0;
  PointCloud c = build_cloud(m, p);
  REQUIRE(c.size() == 50);
  Eigen::MatrixXd K = covariance_matrix(c, p.cutoff_r);
  CHECK(K.isApprox(K.transpose()));
  Factorization f = factor_covariance(K);
  CHECK(f.jitter <= 1e-9 * K.diagonal().maxCoeff());
  CHECK(f.residual < 1e-8 * K.diagonal().maxCoeff());
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) CHECK(f.L(i, j) == 0.0);

  const int cols = 2000;  // both components used as iid draws: 4000 samples
  Eigen::MatrixXd x(50, 2 * cols);
  Rng rng(chain_seed(11, 0));
  sample_field(f, rng, x);
  const int nsamp = 2 * cols;
  Eigen::MatrixXd emp = x * x.transpose() / (double)nsamp;
  int worst_count = 0;
  for (int i = 0; i < 50; ++i) {
    for (int j = i; j < 50; ++j) {
      double se = std::sqrt((K(i, i) * K(j, j) + K(i, j) * K(i, j)) / nsamp);
      if (std::abs(emp(i, j) - K(i, j)) > 5.0 * se) ++worst_count;
    }
  }
  CHECK(worst_count == 0);
}

TEST_CASE("screening bounds raise typed errors") {
  McParams p = small_params();
  {
    Model m = small_model();
    m.gamma = 1.5;
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("gamma"),
                         SeibergError);
  }
  {
    Model m;  // no insertions: charge defect is -Q
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("<s,omega_1>"),
                         SeibergError);
  }
  {
    Model m = small_model();
    m.bulk[0].alpha = scale(rho(), 4.0);  // above the screening line
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("alpha - Q"),
                         SeibergError);
  }
  {
    Model m = small_model();
    m.mu_bulk[0] = -1.0;
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("mu_bulk"),
                         SeibergError);
  }
  {
    Model m = small_model();
    m.mu_boundary[1] = {{-0.2, 0.1}};
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("Re mu"),
                         SeibergError);
  }
  {
    Model m = small_model();
    m.boundary.push_back({0.30, scale(rho(), 0.1)});  // out of order
    CHECK_THROWS_WITH_AS(check_seiberg(m),
                         doctest::Contains("strictly increasing"), SeibergError);
  }
  {
    Model m = small_model();
    m.bulk[0].z = {0.1, -0.4};
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("Im z"),
                         SeibergError);
  }
  {
    Model m = small_model();  // couplings off but charges not neutral
    m.mu_bulk = {0.0, 0.0};
    m.mu_boundary[0].clear();
    m.mu_boundary[1].clear();
    CHECK(m.free_field());
    CHECK_THROWS_WITH_AS(check_seiberg(m), doctest::Contains("free-field"),
                         SeibergError);
  }
  {
    // Neutral free-field configuration passes.
    Model m;
    m.gamma = 0.6;
    m.mu_bulk = {0.0, 0.0};
    m.bulk.push_back({{-0.2, 0.45}, scale(rho(), 2.0)});
    m.boundary.push_back({0.35, scale(rho(), 2.0 * (m.q() - 2.0))});
    CHECK(m.free_field());
    CHECK_NOTHROW(check_seiberg(m));
  }
  (void)p;
}

TEST_CASE("correlator determinism, threads, coupling monotonicity") {
  Model m = small_model();
  McParams p = small_params();
  p.samples = 2000;
  CorrelatorResult r1 = estimate_correlator(m, p);
  CorrelatorResult r2 = estimate_correlator(m, p);
  CHECK(r1.corr.value == r2.corr.value);
  CHECK(r1.corr.se_re == r2.corr.se_re);
  REQUIRE(r1.rows.size() == r2.rows.size());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].value == r2.rows[i].value);
    CHECK(r1.rows[i].se == r2.rows[i].se);
  }
  McParams pt = p;
  pt.threads = 3;
  CorrelatorResult r3 = estimate_correlator(m, pt);
  CHECK(r3.corr.value == r1.corr.value);

  McParams ps = p;
  ps.seed = 99;
  CorrelatorResult r4 = estimate_correlator(m, ps);
  CHECK(r4.corr.value != r1.corr.value);

  CHECK(r1.corr.value.real() > 0.0);
  CHECK(r1.corr.ess == doctest::Approx(2000.0));
  CHECK(r1.corr.tail < p.zm_tol);
  CHECK(r1.diag.cloud_points > 0);

  // Heavier couplings shrink the correlator sample by sample.
  Model m_bulk = m;
  m_bulk.mu_bulk = {1.2, 1.6};
  CorrelatorResult rb = estimate_correlator(m_bulk, p);
  CHECK(rb.corr.value.real() < r1.corr.value.real());
  Model m_bdry = m;
  m_bdry.mu_boundary[0] = {{1.0, 0.0}};
  m_bdry.mu_boundary[1] = {{0.6, 0.0}};
  CorrelatorResult rd = estimate_correlator(m_bdry, p);
  CHECK(rd.corr.value.real() < r1.corr.value.real());
}

TEST_CASE("coupling shift identity closes pathwise") {
  Model m = small_model();
  McParams p = small_params();
  KpzResult k = kpz_residual(m, p);
  for (int i = 0; i < 2; ++i) {
    double floor = 1e-12 * std::abs(k.scale[i]);
    CHECK(std::abs(k.residual[i].value) <=
          3.0 * k.residual[i].se() + floor);
    CHECK(std::abs(k.scale[i]) > 0.0);
  }
  CHECK(k.corr.value.real() > 0.0);
  KpzResult k2 = kpz_residual(m, p);
  CHECK(k2.residual[0].value == k.residual[0].value);
  CHECK(k2.corr.value == k.corr.value);

  Model ff = m;
  ff.mu_bulk = {0.0, 0.0};
  ff.mu_boundary[0].clear();
  ff.mu_boundary[1].clear();
  CHECK_THROWS_AS(kpz_residual(ff, p), SeibergError);
}

TEST_CASE("mobius-mapped discretization reproduces the covariance factor") {
  Model m = small_model();
  McParams p = small_params();
  p.samples = 2000;
  Mobius two_z = normalize(std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0));

  PointCloud base = build_cloud(m, p);
  PointCloud mapped = map_cloud(base, two_z);
  for (std::size_t i = 0; i < base.size(); ++i) {
    bool bulk = i < base.nbulk;
    CHECK(mapped.weight[i] ==
          doctest::Approx(base.weight[i] * (bulk ? 4.0 : 2.0)));
    CHECK(mapped.scl[i] == doctest::Approx(2.0));
    CHECK(std::abs(mapped.pt[i] - 2.0 * base.pt[i]) < 1e-12);
  }
  Model mm = map_model(m, two_z);
  CHECK(std::abs(mm.bulk[0].z - 2.0 * m.bulk[0].z) < 1e-12);
  CHECK(mm.bulk[0].scl == doctest::Approx(2.0));
  CHECK(mm.boundary[0].s == doctest::Approx(2.0 * m.boundary[0].s));

  CovarianceResult cv = covariance_residual(m, two_z, p);
  double manual = std::pow(2.0, -2.0 * delta_of(m.bulk[0].alpha, m.q())) *
                  std::pow(2.0, -delta_of(m.boundary[0].beta, m.q()));
  CHECK(cv.factor == doctest::Approx(manual).epsilon(1e-12));
  double floor = 1e-10 * std::abs(cv.factor * cv.base.value);
  CHECK(std::abs(cv.residual.value) <= 4.0 * cv.residual.se() + floor);
  CHECK(cv.base.value.real() > 0.0);
  CHECK(cv.mapped.value.real() > 0.0);

  CovarianceResult cv2 = covariance_residual(m, two_z, p);
  CHECK(cv2.residual.value == cv.residual.value);
}

TEST_CASE("fusion ladder mechanics") {
  Model m;
  m.gamma = 0.6;
  m.bulk.push_back({{0.1, 0.4}, scale(rho(), 3.0)});
  m.boundary.push_back({-0.35, scale(rho(), 1.5)});
  m.boundary.push_back({0.2, scale(rho(), 1.5)});
  m.mu_bulk = {1.0, 1.0};
  m.mu_boundary[0] = {{0.5, 0.0}, {0.25, 0.0}};
  m.mu_boundary[1] = {{0.35, 0.0}, {0.6, 0.0}};
  McParams p = small_params();
  p.samples = 1200;
  FusionResult f = fusion_exponent(m, 0, 1, 0.1, 0.4, 3, p);
  CHECK(f.target ==
        doctest::Approx(-0.5 * inner(m.boundary[0].beta, m.boundary[1].beta)));
  CHECK(f.target == doctest::Approx(-2.25));
  REQUIRE(f.points.size() == 3);
  CHECK(f.points.front().d == doctest::Approx(0.1));
  CHECK(f.points.back().d == doctest::Approx(0.4));
  CHECK(std::isfinite(f.slope));
  CHECK(f.slope_se > 0.0);
  CHECK(f.slope < 0.0);  // insertions attract: the correlator grows as d drops
  CHECK_THROWS_AS(fusion_exponent(m, 0, 0, 0.1, 0.4, 3, p),
                  std::invalid_argument);
}

TEST_CASE("stress tensor probe matches the chiral formula at zero coupling") {
  Model m;
  m.gamma = 0.6;
  m.mu_bulk = {0.0, 0.0};
  m.bulk.push_back({{-0.2, 0.45}, scale(rho(), 2.0)});
  m.boundary.push_back({0.35, scale(rho(), 58.0 / 15.0)});
  REQUIRE(m.free_field());
  McParams p = small_params();
  p.grid.nx = 24;
  p.grid.ny = 12;
  p.grid.nb = 48;
  p.samples = 4000;
  p.chains = 8;
  const double t = -0.6;
  WardTResult w = ward_T_mc(m, t, p);

  // All chain values of the base correlator must coincide: it is exact here.
  double P = 0.0;
  for (const auto& row : w.rows)
    if (row.term == "corr_v0") {
      if (P == 0.0) P = row.value.real();
      CHECK(row.value.real() == doctest::Approx(P).epsilon(1e-13));
      CHECK(row.se <= 1e-9 * std::abs(row.value));
    }
  REQUIRE(P > 0.0);

  cplx t_exact = chiral_stress_value(m, t);
  cplx lhs_norm = w.lhs.value / P;
  double se_norm = w.lhs.se() / P;
  CHECK(std::abs(lhs_norm - t_exact) <= 3.0 * se_norm);
  // The correlator is steeply exponential in the positions, so the raw
  // finite differences keep a visible truncation gap; the extrapolated
  // residual must still close at statistical accuracy.
  CHECK(std::abs(w.residual.value) <=
        3.0 * w.residual.se() + 1e-4 * w.rel_scale);
  CHECK(w.fd_check < 2e-2 * w.rel_scale);
  CHECK(w.rel_scale > 0.0);
}

TEST_CASE("stress tensor probe with couplings on") {
  // The boundary potential near the probe carries the leading regularization
  // error, a hole-edge term of order density/epsilon, so it is kept small;
  // the bulk sector needs the fine grid with a floor below the cell spacing.
  Model m;
  m.gamma = 0.6;
  m.bulk.push_back({{-0.2, 0.45}, scale(rho(), 3.0)});
  m.boundary.push_back({0.35, scale(rho(), 3.0)});
  m.mu_bulk = {0.6, 0.8};
  m.mu_boundary[0] = {{0.05, 0.0}};
  m.mu_boundary[1] = {{0.03, 0.0}};
  McParams p;
  p.samples = 20000;
  p.chains = 8;
  p.threads = 4;
  p.seed = 7;
  p.grid.nx = 64;
  p.grid.ny = 32;
  p.grid.nb = 128;
  p.cutoff_r = 0.0125;
  WardTResult w = ward_T_mc(m, -0.6, p);
  CHECK(w.rel_scale > 0.0);
  CHECK(std::abs(w.residual.value) <=
        std::max(3.0 * w.residual.se(), 0.08 * w.rel_scale));
  CHECK(w.fd_check < 2e-2 * w.rel_scale);

  CHECK_THROWS_AS(ward_T_mc(m, m.boundary[0].s, p), std::invalid_argument);
  Model low = m;
  low.bulk[0].z = {-0.62, 0.1};
  CHECK_THROWS_AS(ward_T_mc(low, -0.6, p), std::invalid_argument);
  McParams tight = p;
  tight.epsilon = 0.02;
  CHECK_THROWS_AS(ward_T_mc(m, -0.6, tight), std::invalid_argument);
}

TEST_CASE("stress tensor probe runs are reproducible") {
  Model m = small_model();
  m.bulk[0].z = {-0.2, 0.45};
  McParams p = small_params();
  p.grid.nx = 24;
  p.grid.ny = 12;
  p.grid.nb = 48;
  p.samples = 2000;
  p.chains = 4;
  WardTResult w = ward_T_mc(m, -0.6, p);
  WardTResult w2 = ward_T_mc(m, -0.6, p);
  CHECK(w2.residual.value == w.residual.value);
  CHECK(w2.lhs.value == w.lhs.value);
  CHECK(w2.rhs.value == w.rhs.value);
}

TEST_CASE("stress tensor probe decays like the inverse fourth power far out") {
  Model m;
  m.gamma = 0.6;
  m.mu_bulk = {0.0, 0.0};
  m.bulk.push_back({{-0.2, 0.45}, scale(rho(), 2.0)});
  m.boundary.push_back({0.35, scale(rho(), 58.0 / 15.0)});
  REQUIRE(m.free_field());
  McParams p = small_params();
  p.grid.nx = 24;
  p.grid.ny = 12;
  p.grid.nb = 48;
  p.chains = 8;
  p.threads = 4;

  // Far probes also exercise the metric drift terms, active outside the
  // unit disk.
  const std::array<double, 3> probes = {10.0, 20.0, 40.0};
  std::array<double, 3> mag{};
  for (std::size_t k = 0; k < probes.size(); ++k) {
    cplx te = chiral_stress_value(m, probes[k]);
    mag[k] = std::abs(te);
    WardTResult w = ward_T_mc(m, probes[k], p);
    double P = 0.0;
    for (const auto& row : w.rows)
      if (row.term == "corr_v0") {
        P = row.value.real();
        break;
      }
    REQUIRE(P > 0.0);
    CHECK(std::abs(w.lhs.value / P - te) <= 3.0 * w.lhs.se() / P);
  }
  // Doubling the distance costs a factor of sixteen up to curvature
  // corrections, still large at these distances.
  for (int k : {1, 2}) {
    CHECK(mag[k] / mag[k - 1] > 1.0 / 32.0);
    CHECK(mag[k] / mag[k - 1] < 1.0 / 8.0);
  }
}

TEST_CASE("every chaos cell mass matches its lognormal expectation") {
  Model m = small_model();
  McParams p = small_params();
  p.samples = 8000;
  p.chains = 8;
  // A generous floor keeps the per-cell lognormal variance moderate, so the
  // chain-scatter standard errors are trustworthy at this sample count.
  p.cutoff_r = 0.25;
  auto rows = chaos_cells_mc(m, p);
  REQUIRE(rows.size() > 40);
  int live = 0, tail3 = 0;
  for (const auto& row : rows) {
    if (row.exact == 0.0) {
      // Cells masked by the insertion exclusions never contribute.
      CHECK(row.mean == 0.0);
      continue;
    }
    ++live;
    REQUIRE(row.se > 0.0);
    const double z = std::abs(row.mean - row.exact) / row.se;
    CHECK(z <= 5.0);
    if (z > 3.0) ++tail3;
  }
  // The draws are shared across cells, so outliers cluster; demand the bulk
  // of the cloud inside the three-sigma band rather than every single cell.
  CHECK(live >= 40);
  CHECK(tail3 <= live / 10);
}
