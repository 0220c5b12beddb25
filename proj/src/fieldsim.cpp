#include "toda/fieldsim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace toda::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kInvSqrt3 = 0.57735026918962576451;
constexpr double kDeadLog = -1e30;  // log-weight of a row that must not contribute

double log_plus(double a) { return std::log(std::max(a, 1.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// Cartan data
// ---------------------------------------------------------------------------

double inner(const Wt& a, const Wt& b) {
  return 2.0 * a.u1 * b.u1 - a.u1 * b.u2 - a.u2 * b.u1 + 2.0 * a.u2 * b.u2;
}

double frame1(const Wt& u) { return (2.0 * u.u1 - u.u2) / std::sqrt(2.0); }
double frame2(const Wt& u) { return std::sqrt(1.5) * u.u2; }

double delta_of(const Wt& u, double q) {
  Wt half = scale(u, 0.5);
  return inner(half, add(scale(rho(), q), scale(half, -1.0)));
}

Wt Model::svec() const {
  Wt s{0.0, 0.0};
  for (const auto& b : bulk) s = add(s, b.alpha);
  for (const auto& b : boundary) s = add(s, scale(b.beta, 0.5));
  return add(s, scale(Qvec(), -1.0));
}

bool Model::free_field() const {
  if (mu_bulk[0] != 0.0 || mu_bulk[1] != 0.0) return false;
  for (int i = 0; i < 2; ++i)
    for (const auto& v : mu_boundary[i])
      if (v != std::complex<double>(0.0, 0.0)) return false;
  return true;
}

void check_seiberg(const Model& m) {
  std::ostringstream os;
  if (!(m.gamma > 0.0 && m.gamma < std::sqrt(2.0))) {
    os << "gamma = " << m.gamma << " violates 0 < gamma < sqrt(2)";
    throw SeibergError(os.str());
  }
  for (std::size_t l = 1; l < m.boundary.size(); ++l) {
    if (!(m.boundary[l - 1].s < m.boundary[l].s))
      throw SeibergError("boundary insertion points must be strictly increasing");
  }
  for (const auto& b : m.bulk) {
    if (!(b.z.imag() > 0.0))
      throw SeibergError("bulk insertion points must satisfy Im z > 0");
  }
  Wt s = m.svec();
  if (m.free_field()) {
    if (std::abs(s.u1) > 1e-9 || std::abs(s.u2) > 1e-9) {
      os << "free-field mode requires zero charge defect; <s,omega_i> = ("
         << s.u1 << ", " << s.u2 << ")";
      throw SeibergError(os.str());
    }
    return;
  }
  const double sig[2] = {s.u1, s.u2};
  for (int i = 0; i < 2; ++i) {
    if (!(sig[i] > 0.0)) {
      os << "<s,omega_" << i + 1 << "> = " << sig[i] << " violates <s,omega_i> > 0";
      throw SeibergError(os.str());
    }
    if (!(m.mu_bulk[i] > 0.0)) {
      os << "mu_bulk[" << i << "] = " << m.mu_bulk[i] << " violates mu_bulk > 0";
      throw SeibergError(os.str());
    }
    for (const auto& v : m.mu_boundary[i]) {
      if (v.real() < 0.0) {
        os << "Re mu_boundary[" << i << "] = " << v.real()
           << " violates Re mu >= 0";
        throw SeibergError(os.str());
      }
    }
  }
  Wt Q = m.Qvec();
  Wt e1{1.0, 0.0}, e2{0.0, 1.0};
  for (const auto& b : m.bulk) {
    Wt d = add(b.alpha, scale(Q, -1.0));
    if (!(inner(d, e1) < 0.0 && inner(d, e2) < 0.0)) {
      os << "bulk weight violates <alpha - Q, e_i> < 0";
      throw SeibergError(os.str());
    }
  }
  for (const auto& b : m.boundary) {
    Wt d = add(b.beta, scale(Q, -1.0));
    if (!(inner(d, e1) < 0.0 && inner(d, e2) < 0.0)) {
      os << "boundary weight violates <beta - Q, e_i> < 0";
      throw SeibergError(os.str());
    }
  }
}

// ---------------------------------------------------------------------------
// Covariance kernel
// ---------------------------------------------------------------------------

double green(std::complex<double> x, std::complex<double> y) {
  double d1 = std::abs(x - y);
  double d2 = std::abs(x - std::conj(y));
  return -std::log(d1) - std::log(d2) + 2.0 * log_plus(std::abs(x)) +
         2.0 * log_plus(std::abs(y));
}

double green_r(std::complex<double> x, std::complex<double> y, double r,
               double sx, double sy) {
  double floor = r * std::sqrt(sx * sy);
  double d1 = std::max(std::abs(x - y), floor);
  double d2 = std::max(std::abs(x - std::conj(y)), floor);
  return -std::log(d1) - std::log(d2) + 2.0 * log_plus(std::abs(x)) +
         2.0 * log_plus(std::abs(y));
}

PointCloud build_cloud(const Model& m, const McParams& p,
                       const std::vector<std::complex<double>>& holes) {
  PointCloud c;
  const Grid& g = p.grid;
  auto in_hole = [&](std::complex<double> z) {
    for (const auto& h : holes)
      if (std::abs(z - h) < p.epsilon) return true;
    return false;
  };
  double dx = (g.x1 - g.x0) / g.nx;
  double dy = (g.y1 - p.delta) / g.ny;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      std::complex<double> z(g.x0 + (i + 0.5) * dx, p.delta + (j + 0.5) * dy);
      bool excluded = in_hole(z);
      for (const auto& b : m.bulk)
        if (std::abs(z - b.z) < p.epsilon) excluded = true;
      if (excluded) continue;
      c.pt.push_back(z);
      c.weight.push_back(dx * dy);
      c.scl.push_back(1.0);
    }
  }
  c.nbulk = c.pt.size();
  double db = (g.b1 - g.b0) / g.nb;
  for (int i = 0; i < g.nb; ++i) {
    double s = g.b0 + (i + 0.5) * db;
    bool excluded = in_hole({s, 0.0});
    for (const auto& b : m.boundary)
      if (std::abs(s - b.s) < p.epsilon) excluded = true;
    if (excluded) continue;
    c.pt.push_back({s, 0.0});
    c.weight.push_back(db);
    c.scl.push_back(1.0);
  }
  return c;
}

Eigen::MatrixXd covariance_matrix(const PointCloud& cloud, double r) {
  const std::size_t n = cloud.size();
  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double v = green_r(cloud.pt[i], cloud.pt[j], r, cloud.scl[i], cloud.scl[j]);
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

Factorization factor_covariance(const Eigen::MatrixXd& K) {
  Factorization f;
  const double scale = K.diagonal().maxCoeff();
  double jit = 1e-12 * scale;
  const double cap = 1e-6 * scale;
  Eigen::MatrixXd work;
  for (f.attempts = 1;; ++f.attempts) {
    work = K;
    work.diagonal().array() += jit;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      f.L = llt.matrixL();
      f.jitter = jit;
      f.residual = (f.L * f.L.transpose() - work).cwiseAbs().maxCoeff();
      return f;
    }
    if (jit >= cap)
      throw NumericError(
          "covariance factorization failed at the maximal diagonal shift");
    jit *= 10.0;
  }
}

// ---------------------------------------------------------------------------
// RNG
// ---------------------------------------------------------------------------

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::next_u01() {
  // (0,1]: take 53 bits and offset by one ulp so log() stays finite.
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double Rng::next_gauss() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = next_u01();
  double u2 = next_u01();
  double rad = std::sqrt(-2.0 * std::log(u1));
  double ang = 2.0 * kPi * u2;
  spare_ = rad * std::sin(ang);
  have_spare_ = true;
  return rad * std::cos(ang);
}

std::uint64_t chain_seed(std::uint64_t master, int chain) {
  Rng g(master);
  std::uint64_t s = 0;
  for (int i = 0; i <= chain; ++i) s = g.next_u64();
  return s;
}

void sample_field(const Factorization& fac, Rng& rng, Eigen::MatrixXd& out) {
  const auto n = fac.L.rows();
  Eigen::MatrixXd z(n, out.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.next_gauss();
  out.noalias() = fac.L.triangularView<Eigen::Lower>() * z;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre rule
// ---------------------------------------------------------------------------

namespace {

struct GlRule {
  std::vector<double> x, w;
};

GlRule gauss_legendre(int n) {
  GlRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
      }
      dp = n * (t * p0 - p1) / (t * t - 1.0);
      double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    r.x[i] = -t;
    r.x[n - 1 - i] = t;
    double wi = 2.0 / ((1.0 - t * t) * dp * dp);
    r.w[i] = wi;
    r.w[n - 1 - i] = wi;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Zero-mode integral: I(sig) = int exp(sig v - muA e^{g v} - B e^{g v/2}) dv
// with muA > 0, Re B >= 0, sig > 0.  Also returns the integrals tilted by
// e^{g v} and e^{g v / 2}, which arise when one extra chaos charge is added.
// ---------------------------------------------------------------------------

struct ZmVal {
  std::complex<double> i0{0.0, 0.0}, ig{0.0, 0.0}, ih{0.0, 0.0};
  double tail = 0.0;
};

ZmVal zero_mode(double sig, double g, double muA, std::complex<double> B,
                const GlRule& rule, double panel, bool tilts) {
  if (!(muA > 0.0) || !std::isfinite(muA))
    throw NumericError("zero-mode integral needs a positive bulk chaos mass");
  const double rb = std::max(B.real(), 0.0);
  const double ib = B.imag();

  // Peak of the |integrand| in w = e^{g v / 2}: quadratic stationarity.
  const double wstar =
      (-rb * g / 2.0 + std::sqrt(rb * rb * g * g / 4.0 + 4.0 * muA * g * sig)) /
      (2.0 * muA * g);
  const double vstar = 2.0 * std::log(wstar) / g;
  const double lpk = sig * vstar - muA * std::exp(g * vstar) - rb * wstar;
  if (lpk > 600.0)
    throw NumericError("zero-mode integral overflows the double range");

  double vhi = std::log(60.0 / muA) / g;
  for (int it = 0; it < 3; ++it)
    vhi = std::log((60.0 + sig * std::max(vhi, 0.0)) / muA) / g;
  const double sig_max = sig + (tilts ? g : 0.0);
  while (muA * g * std::exp(g * vhi) <= sig_max + 1.0) vhi += 1.0;

  double vlo = std::min(vstar - 1.0, (lpk + std::log(sig) - 34.5) / sig);

  // Analytic truncation bounds (|e^{-B w}| <= 1 is used above vhi).
  auto upper = [&](double s) {
    return std::exp(s * vhi - muA * std::exp(g * vhi) - lpk) /
           (muA * g * std::exp(g * vhi) - s);
  };
  auto lower = [&](double s) { return std::exp(s * vlo - lpk) / s; };

  ZmVal out;
  const int npanel = std::max(1, (int)std::ceil((vhi - vlo) / panel));
  const double pw = (vhi - vlo) / npanel;
  std::complex<double> i0 = 0.0, igl = 0.0, ihl = 0.0;
  for (int pnl = 0; pnl < npanel; ++pnl) {
    const double a = vlo + pnl * pw;
    const double mid = a + 0.5 * pw, half = 0.5 * pw;
    for (std::size_t k = 0; k < rule.x.size(); ++k) {
      const double v = mid + half * rule.x[k];
      const double t = std::exp(0.5 * g * v);
      const double ex = sig * v - muA * t * t - rb * t - lpk;
      if (ex < -745.0) continue;
      const double mag = std::exp(ex) * half * rule.w[k];
      std::complex<double> val;
      if (ib == 0.0) {
        val = mag;
      } else {
        const double ph = -ib * t;
        val = std::complex<double>(mag * std::cos(ph), mag * std::sin(ph));
      }
      i0 += val;
      if (tilts) {
        igl += val * (t * t);
        ihl += val * t;
      }
    }
  }
  const double scl = std::exp(lpk);
  out.i0 = i0 * scl;
  out.ig = igl * scl;
  out.ih = ihl * scl;
  double tail = (lower(sig) + upper(sig)) / (std::abs(i0) + 1e-300);
  if (tilts) {
    tail = std::max(tail, (lower(sig + g) + upper(sig + g)) /
                              (std::abs(igl) + 1e-300));
    tail = std::max(tail, (lower(sig + 0.5 * g) + upper(sig + 0.5 * g)) /
                              (std::abs(ihl) + 1e-300));
  }
  out.tail = tail;
  return out;
}

// ---------------------------------------------------------------------------
// Unified charge list and scene assembly
// ---------------------------------------------------------------------------

struct Charge {
  std::complex<double> x;
  Wt hat;       // Girsanov charge: alpha for bulk, beta/2 for boundary
  double scl = 1.0;
  bool bulk = true;
};

std::vector<Charge> charge_list(const Model& m) {
  std::vector<Charge> ch;
  for (const auto& b : m.bulk) ch.push_back({b.z, b.alpha, b.scl, true});
  for (const auto& b : m.boundary)
    ch.push_back({{b.s, 0.0}, scale(b.beta, 0.5), b.scl, false});
  return ch;
}

// log of the deterministic insertion prefactor: pairwise covariance terms,
// per-vertex cutoff normalization (the short-distance scale cancels exactly
// against the diagonal of the floored kernel), and the metric drift.
double log_prefactor(const std::vector<Charge>& ch, const Wt& Q, double r) {
  double lp = 0.0;
  for (std::size_t j = 0; j < ch.size(); ++j) {
    for (std::size_t k = j + 1; k < ch.size(); ++k)
      lp += inner(ch[j].hat, ch[k].hat) *
            green_r(ch[j].x, ch[k].x, r, ch[j].scl, ch[k].scl);
    const double n2 = norm2(ch[j].hat);
    const double kappa = ch[j].bulk ? 0.5 * n2 : n2;
    lp += kappa * std::log(r * ch[j].scl);
    lp += 0.5 * n2 * green_r(ch[j].x, ch[j].x, r, ch[j].scl, ch[j].scl);
    lp += -2.0 * inner(ch[j].hat, Q) * log_plus(std::abs(ch[j].x));
  }
  return lp;
}

struct Scene {
  double logP = 0.0;
  std::array<double, 2> sigma{0.0, 0.0};
  // Per cloud row, per component: chaos weight vectors folded with the
  // deterministic cell factors.  pvec picks out bulk rows (real), qvec the
  // boundary rows with their piecewise couplings (complex).
  std::array<Eigen::ArrayXd, 2> pvec;
  std::array<Eigen::ArrayXcd, 2> qvec;
};

struct Plan {
  Model model;
  McParams prm;
  PointCloud cloud;
  Factorization fac;
  std::array<Eigen::ArrayXd, 2> a1, a2;  // frame couplings per row
  std::array<Eigen::ArrayXd, 2> c0;      // baseline log-weights per row
  std::vector<Scene> scenes;
  std::vector<Eigen::VectorXd> lin;  // linear probes dotted into each sample
  GlRule rule;
  bool free_field = false;
  RunDiagnostics diag;

  std::size_t nrows() const { return cloud.size(); }
  std::size_t nchaos() const { return cloud.size(); }
};

// Chaos log-weight rows for one insertion configuration.
std::array<Eigen::ArrayXd, 2> chaos_logw(const Model& m, const McParams& p,
                                         const PointCloud& cloud,
                                         std::size_t nchaos,
                                         const std::vector<Charge>& ch) {
  const double g = m.gamma;
  const double q = m.q();
  std::array<Eigen::ArrayXd, 2> c;
  const Wt ei[2] = {{1.0, 0.0}, {0.0, 1.0}};
  for (int i = 0; i < 2; ++i) {
    c[i].resize(cloud.size());
    c[i].setConstant(kDeadLog);
    Wt gi = scale(ei[i], g);
    for (std::size_t rix = 0; rix < nchaos; ++rix) {
      const bool bulk = rix < cloud.nbulk;
      const double half = bulk ? 1.0 : 0.5;
      double h = 0.0;
      for (const auto& cc : ch)
        h += inner(gi, cc.hat) *
             green_r(cloud.pt[rix], cc.x, p.cutoff_r, cloud.scl[rix], cc.scl);
      const double gq = g * q;
      double v = std::log(cloud.weight[rix]) +
                 (bulk ? g * g : 0.5 * g * g) *
                     std::log(p.cutoff_r * cloud.scl[rix]) +
                 half * h - (bulk ? 2.0 * gq : gq) * log_plus(std::abs(cloud.pt[rix]));
      c[i][rix] = v;
    }
  }
  return c;
}

Eigen::ArrayXcd boundary_couplings(const Model& m, const PointCloud& cloud,
                                   std::size_t nchaos, int comp) {
  Eigen::ArrayXcd mu(cloud.size());
  mu.setZero();
  const auto& entries = m.mu_boundary[comp];
  const std::size_t M = m.boundary.size();
  for (std::size_t rix = cloud.nbulk; rix < nchaos; ++rix) {
    if (entries.empty()) continue;
    double s = cloud.pt[rix].real();
    std::size_t idx = 0;
    while (idx < M && m.boundary[idx].s < s) ++idx;
    if (idx >= entries.size()) idx = 0;  // beyond the last point: wrap to entry 0
    mu[rix] = entries[idx];
  }
  return mu;
}

Scene make_scene(const Plan& plan, const Model& mv) {
  Scene sc;
  const auto ch = charge_list(mv);
  sc.logP = log_prefactor(ch, mv.Qvec(), plan.prm.cutoff_r);
  Wt s = mv.svec();
  sc.sigma = {s.u1, s.u2};
  auto c = chaos_logw(mv, plan.prm, plan.cloud, plan.nchaos(), ch);
  for (int i = 0; i < 2; ++i) {
    Eigen::ArrayXd shift = c[i] - plan.c0[i];  // relative to the baseline rows
    if ((shift > 700.0).any())
      throw NumericError("variant chaos weight overflows the double range");
    Eigen::ArrayXd ratio = shift.exp();
    Eigen::ArrayXd bulkmask = Eigen::ArrayXd::Zero(plan.nrows());
    for (std::size_t rix = 0; rix < plan.cloud.nbulk; ++rix) bulkmask[rix] = 1.0;
    sc.pvec[i] = bulkmask * ratio;
    sc.qvec[i] = boundary_couplings(mv, plan.cloud, plan.nchaos(), i) *
                 ratio.cast<std::complex<double>>();
  }
  return sc;
}

Plan make_plan(const Model& m, const McParams& p,
               const std::vector<Model>& variants,
               const PointCloud* cloud_override = nullptr) {
  check_seiberg(m);
  for (const auto& mv : variants) check_seiberg(mv);
  Plan plan;
  plan.model = m;
  plan.prm = p;
  plan.free_field = m.free_field();
  plan.cloud = cloud_override ? *cloud_override : build_cloud(m, p);
  if (plan.nchaos() == 0) throw NumericError("the chaos grid is empty");

  Eigen::MatrixXd K = covariance_matrix(plan.cloud, p.cutoff_r);
  plan.fac = factor_covariance(K);
  plan.diag.jitter = plan.fac.jitter;
  plan.diag.factor_residual = plan.fac.residual;
  plan.diag.cloud_points = plan.nchaos();

  const Wt ei[2] = {{1.0, 0.0}, {0.0, 1.0}};
  for (int i = 0; i < 2; ++i) {
    const double g = m.gamma;
    const double f1 = g * frame1(ei[i]);
    const double f2 = g * frame2(ei[i]);
    plan.a1[i].resize(plan.nrows());
    plan.a2[i].resize(plan.nrows());
    for (std::size_t rix = 0; rix < plan.nrows(); ++rix) {
      const double half = (rix < plan.cloud.nbulk) ? 1.0 : 0.5;
      plan.a1[i][rix] = f1 * half;
      plan.a2[i][rix] = f2 * half;
    }
  }
  plan.c0 = chaos_logw(m, p, plan.cloud, plan.nchaos(), charge_list(m));
  plan.scenes.push_back(make_scene(plan, m));
  for (const auto& mv : variants) plan.scenes.push_back(make_scene(plan, mv));
  plan.rule = gauss_legendre(std::max(4, p.zm_nodes));
  return plan;
}

// ---------------------------------------------------------------------------
// Chain runner
// ---------------------------------------------------------------------------

struct BatchData {
  int bsize = 0;
  // [scene][component]: chaos masses per sample
  std::vector<std::array<Eigen::ArrayXd, 2>> A;
  std::vector<std::array<Eigen::ArrayXcd, 2>> B;
  Eigen::MatrixXd lin1, lin2;  // linear probes dotted into each field component
  // Raw per-cell chaos weights for the base normalization, cells x batch.
  const std::array<Eigen::ArrayXXd, 2>* cells = nullptr;
};

struct ChainAcc {
  std::vector<std::complex<long double>> sum;
  std::vector<long double> s2re, s2im;
  std::int64_t n = 0;
  double maxtail = 0.0;

  explicit ChainAcc(std::size_t nterms)
      : sum(nterms, {0.0L, 0.0L}), s2re(nterms, 0.0L), s2im(nterms, 0.0L) {}
  void add(std::size_t term, std::complex<double> v) {
    sum[term] += std::complex<long double>(v.real(), v.imag());
    s2re[term] += (long double)v.real() * v.real();
    s2im[term] += (long double)v.imag() * v.imag();
  }
};

struct ChainStats {
  std::vector<std::complex<double>> mean;
  std::vector<double> se;  // within-chain standard error magnitude
  double maxtail = 0.0;
  std::int64_t n = 0;
};

using BatchFn = std::function<void(const BatchData&, ChainAcc&)>;

std::vector<ChainStats> run_chains(const Plan& plan, std::size_t nterms,
                                   const BatchFn& fn) {
  const int chains = std::max(1, plan.prm.chains);
  const std::int64_t per_chain =
      std::max<std::int64_t>(1, plan.prm.samples / chains);
  const int nthreads =
      std::max(1, std::min(plan.prm.threads, chains));
  const std::size_t n = plan.nrows();
  const int V = (int)plan.scenes.size();
  const int nlin = (int)plan.lin.size();

  std::vector<ChainAcc> acc(chains, ChainAcc(nterms));
  std::vector<std::exception_ptr> errs(chains);

  Eigen::MatrixXd U(n, std::max(nlin, 1));
  for (int l = 0; l < nlin; ++l) U.col(l) = plan.lin[l];

  // Stacked scene weight matrices for fast mass reduction.
  std::array<Eigen::MatrixXd, 2> PW;
  std::array<Eigen::MatrixXd, 2> QWre, QWim;
  for (int i = 0; i < 2; ++i) {
    PW[i].resize(n, V);
    QWre[i].resize(n, V);
    QWim[i].resize(n, V);
    for (int v = 0; v < V; ++v) {
      PW[i].col(v) = plan.scenes[v].pvec[i].matrix();
      QWre[i].col(v) = plan.scenes[v].qvec[i].real().matrix();
      QWim[i].col(v) = plan.scenes[v].qvec[i].imag().matrix();
    }
  }

  auto worker = [&](int chain) {
    try {
      Rng rng(chain_seed(plan.prm.seed, chain));
      const int bmax = std::max(1, plan.prm.batch);
      Eigen::MatrixXd z1(n, bmax), z2(n, bmax), g1(n, bmax), g2(n, bmax);
      std::array<Eigen::ArrayXXd, 2> E;
      BatchData bd;
      bd.A.resize(V);
      bd.B.resize(V);
      bd.cells = &E;
      std::int64_t done = 0;
      while (done < per_chain) {
        const int b = (int)std::min<std::int64_t>(bmax, per_chain - done);
        for (int j = 0; j < b; ++j)
          for (std::size_t rix = 0; rix < n; ++rix) z1(rix, j) = rng.next_gauss();
        for (int j = 0; j < b; ++j)
          for (std::size_t rix = 0; rix < n; ++rix) z2(rix, j) = rng.next_gauss();
        g1.leftCols(b).noalias() =
            plan.fac.L.triangularView<Eigen::Lower>() * z1.leftCols(b);
        g2.leftCols(b).noalias() =
            plan.fac.L.triangularView<Eigen::Lower>() * z2.leftCols(b);
        bd.bsize = b;
        if (nlin > 0) {
          bd.lin1.noalias() = U.leftCols(nlin).transpose() * g1.leftCols(b);
          bd.lin2.noalias() = U.leftCols(nlin).transpose() * g2.leftCols(b);
        }
        for (int i = 0; i < 2; ++i) {
          E[i] = ((g1.leftCols(b).array().colwise() * plan.a1[i]) +
                  (g2.leftCols(b).array().colwise() * plan.a2[i]))
                     .colwise() +
                 plan.c0[i];
          E[i] = E[i].exp();
          Eigen::MatrixXd Am = PW[i].transpose() * E[i].matrix();    // V x b
          Eigen::MatrixXd Bre = QWre[i].transpose() * E[i].matrix();
          Eigen::MatrixXd Bim = QWim[i].transpose() * E[i].matrix();
          for (int v = 0; v < V; ++v) {
            bd.A[v][i] = Am.row(v).array().transpose();
            bd.B[v][i] =
                Bre.row(v).array().transpose().cast<std::complex<double>>() +
                std::complex<double>(0.0, 1.0) *
                    Bim.row(v).array().transpose().cast<std::complex<double>>();
          }
        }
        fn(bd, acc[chain]);
        acc[chain].n += b;
        done += b;
      }
    } catch (...) {
      errs[chain] = std::current_exception();
    }
  };

  if (nthreads == 1) {
    for (int c = 0; c < chains; ++c) worker(c);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t)
      pool.emplace_back([&, t]() {
        for (int c = t; c < chains; c += nthreads) worker(c);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);

  std::vector<ChainStats> out(chains);
  for (int c = 0; c < chains; ++c) {
    out[c].mean.resize(nterms);
    out[c].se.resize(nterms);
    out[c].n = acc[c].n;
    const auto nn = (long double)acc[c].n;
    for (std::size_t t = 0; t < nterms; ++t) {
      std::complex<long double> mu = acc[c].sum[t] / nn;
      out[c].mean[t] = {(double)mu.real(), (double)mu.imag()};
      long double vre = acc[c].s2re[t] / nn - mu.real() * mu.real();
      long double vim = acc[c].s2im[t] / nn - mu.imag() * mu.imag();
      vre = std::max(vre, 0.0L);
      vim = std::max(vim, 0.0L);
      out[c].se[t] = std::sqrt((double)((vre + vim) / nn));
    }
    out[c].maxtail = acc[c].maxtail;
  }
  return out;
}

Estimate pool_chains(const std::vector<ChainStats>& cs, std::size_t term,
                     double tail) {
  Estimate e;
  const int C = (int)cs.size();
  std::int64_t samples = 0;
  std::complex<double> mu(0.0, 0.0);
  for (const auto& c : cs) {
    mu += c.mean[term];
    samples += c.n;
  }
  mu /= (double)C;
  e.value = mu;
  if (C > 1) {
    double vre = 0.0, vim = 0.0;
    for (const auto& c : cs) {
      vre += (c.mean[term].real() - mu.real()) * (c.mean[term].real() - mu.real());
      vim += (c.mean[term].imag() - mu.imag()) * (c.mean[term].imag() - mu.imag());
    }
    e.se_re = std::sqrt(vre / (C * (C - 1.0)));
    e.se_im = std::sqrt(vim / (C * (C - 1.0)));
  }
  e.ess = (double)samples;
  e.tail = tail;
  return e;
}

std::vector<ChainRow> chain_rows(const std::vector<ChainStats>& cs,
                                 const std::vector<std::string>& names) {
  std::vector<ChainRow> rows;
  for (std::size_t t = 0; t < names.size(); ++t)
    for (std::size_t c = 0; c < cs.size(); ++c)
      rows.push_back({names[t], (int)c, cs[c].mean[t], cs[c].se[t]});
  return rows;
}

double max_tail(const std::vector<ChainStats>& cs) {
  double t = 0.0;
  for (const auto& c : cs) t = std::max(t, c.maxtail);
  return t;
}

}  // namespace

double Estimate::se() const { return std::sqrt(se_re * se_re + se_im * se_im); }

ZeroMode zero_mode_integral(double sig, double gamma, double muA,
                            std::complex<double> B, int nodes, double panel,
                            bool tilts) {
  GlRule rule = gauss_legendre(std::max(4, nodes));
  ZmVal v = zero_mode(sig, gamma, muA, B, rule, panel, tilts);
  return {v.i0, v.ig, v.ih, v.tail};
}

// ---------------------------------------------------------------------------
// Correlator estimate
// ---------------------------------------------------------------------------

namespace {

CorrelatorResult correlator_on_plan(Plan& plan) {
  const Model& m = plan.model;
  const McParams& p = plan.prm;
  CorrelatorResult out;
  out.diag = plan.diag;
  if (plan.free_field) {
    out.corr.value = std::exp(plan.scenes[0].logP);
    out.corr.ess = (double)p.samples;
    out.rows.push_back({"corr", 0, out.corr.value, 0.0});
    return out;
  }
  const double P = std::exp(plan.scenes[0].logP);
  const double g = m.gamma;
  const auto& sc = plan.scenes[0];
  auto fn = [&](const BatchData& bd, ChainAcc& acc) {
    for (int b = 0; b < bd.bsize; ++b) {
      ZmVal z1 = zero_mode(sc.sigma[0], g, m.mu_bulk[0] * bd.A[0][0][b],
                           bd.B[0][0][b], plan.rule, p.zm_panel, false);
      ZmVal z2 = zero_mode(sc.sigma[1], g, m.mu_bulk[1] * bd.A[0][1][b],
                           bd.B[0][1][b], plan.rule, p.zm_panel, false);
      acc.maxtail = std::max(acc.maxtail, std::max(z1.tail, z2.tail));
      acc.add(0, P * kInvSqrt3 * z1.i0 * z2.i0);
    }
  };
  auto cs = run_chains(plan, 1, fn);
  double tail = max_tail(cs);
  if (tail > p.zm_tol)
    throw NumericError("zero-mode truncation bound exceeds the tolerance");
  out.corr = pool_chains(cs, 0, tail);
  out.diag.max_tail = tail;
  out.rows = chain_rows(cs, {"corr"});
  return out;
}

}  // namespace

CorrelatorResult estimate_correlator(const Model& m, const McParams& p) {
  Plan plan = make_plan(m, p, {});
  return correlator_on_plan(plan);
}

// ---------------------------------------------------------------------------
// Shift relation in the cosmological couplings
// ---------------------------------------------------------------------------

KpzResult kpz_residual(const Model& m, const McParams& p) {
  Plan plan = make_plan(m, p, {});
  if (plan.free_field)
    throw SeibergError("the shift relation needs positive bulk couplings");
  KpzResult out;
  out.diag = plan.diag;
  const double P = std::exp(plan.scenes[0].logP);
  const double g = m.gamma;
  const auto& sc = plan.scenes[0];
  // terms: res1, res2, corr
  auto fn = [&](const BatchData& bd, ChainAcc& acc) {
    for (int b = 0; b < bd.bsize; ++b) {
      ZmVal z[2];
      for (int i = 0; i < 2; ++i)
        z[i] = zero_mode(sc.sigma[i], g, m.mu_bulk[i] * bd.A[0][i][b],
                         bd.B[0][i][b], plan.rule, p.zm_panel, true);
      acc.maxtail = std::max(acc.maxtail, std::max(z[0].tail, z[1].tail));
      const std::complex<double> ii = z[0].i0 * z[1].i0;
      for (int i = 0; i < 2; ++i) {
        const int j = 1 - i;
        std::complex<double> r =
            sc.sigma[i] * ii -
            g * m.mu_bulk[i] * bd.A[0][i][b] * z[i].ig * z[j].i0 -
            0.5 * g * bd.B[0][i][b] * z[i].ih * z[j].i0;
        acc.add(i, P * kInvSqrt3 * r);
      }
      acc.add(2, P * kInvSqrt3 * ii);
    }
  };
  auto cs = run_chains(plan, 3, fn);
  double tail = max_tail(cs);
  if (tail > p.zm_tol)
    throw NumericError("zero-mode truncation bound exceeds the tolerance");
  out.diag.max_tail = tail;
  out.residual[0] = pool_chains(cs, 0, tail);
  out.residual[1] = pool_chains(cs, 1, tail);
  out.corr = pool_chains(cs, 2, tail);
  out.scale[0] = sc.sigma[0] * out.corr.value;
  out.scale[1] = sc.sigma[1] * out.corr.value;
  out.rows = chain_rows(cs, {"res1", "res2", "corr"});
  return out;
}

// ---------------------------------------------------------------------------
// Conformal covariance under a mapped discretization
// ---------------------------------------------------------------------------

std::complex<double> Mobius::apply(std::complex<double> z) const {
  return (a * z + b) / (c * z + d);
}

double Mobius::dabs(std::complex<double> z) const {
  std::complex<double> den = c * z + d;
  return 1.0 / std::norm(den);
}

Mobius normalize(double a, double b, double c, double d) {
  double det = a * d - b * c;
  if (!(det > 0.0))
    throw std::invalid_argument("mobius map must have positive determinant");
  double s = std::sqrt(det);
  return {a / s, b / s, c / s, d / s};
}

Model map_model(const Model& m, const Mobius& psi) {
  Model out = m;
  for (auto& b : out.bulk) {
    b.scl = b.scl * psi.dabs(b.z);
    b.z = psi.apply(b.z);
  }
  for (auto& b : out.boundary) {
    b.scl = b.scl * psi.dabs({b.s, 0.0});
    b.s = psi.apply({b.s, 0.0}).real();
  }
  return out;
}

PointCloud map_cloud(const PointCloud& cloud, const Mobius& psi) {
  PointCloud out = cloud;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    double dp = psi.dabs(cloud.pt[i]);
    bool bulk = i < cloud.nbulk;
    out.pt[i] = psi.apply(cloud.pt[i]);
    if (!bulk) out.pt[i] = {out.pt[i].real(), 0.0};
    out.weight[i] = cloud.weight[i] * (bulk ? dp * dp : dp);
    out.scl[i] = cloud.scl[i] * dp;
  }
  return out;
}

namespace {

CorrelatorResult correlator_on_cloud(const Model& m, const McParams& p,
                                     const PointCloud& cloud) {
  Plan plan = make_plan(m, p, {}, &cloud);
  return correlator_on_plan(plan);
}

}  // namespace

CovarianceResult covariance_residual(const Model& m, const Mobius& psi,
                                     const McParams& p) {
  CovarianceResult out;
  const double q = m.q();
  out.factor = 1.0;
  for (const auto& b : m.bulk)
    out.factor *= std::pow(psi.dabs(b.z), -2.0 * delta_of(b.alpha, q));
  for (const auto& b : m.boundary)
    out.factor *= std::pow(psi.dabs({b.s, 0.0}), -delta_of(b.beta, q));

  PointCloud base_cloud = build_cloud(m, p);
  CorrelatorResult base = correlator_on_cloud(m, p, base_cloud);
  Model mapped = map_model(m, psi);
  PointCloud mapped_cloud = map_cloud(base_cloud, psi);
  CorrelatorResult map = correlator_on_cloud(mapped, p, mapped_cloud);

  out.base = base.corr;
  out.mapped = map.corr;
  out.diag = map.diag;
  out.diag.jitter = std::max(map.diag.jitter, base.diag.jitter);
  out.diag.max_tail = std::max(map.diag.max_tail, base.diag.max_tail);

  // Per-chain residuals: both runs consume identical normal streams.
  std::vector<std::complex<double>> res;
  std::size_t C = base.rows.size();
  if (map.rows.size() != C || C == 0) throw NumericError("chain row mismatch");
  Estimate e;
  std::complex<double> mu(0.0, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    std::complex<double> rc = map.rows[c].value - out.factor * base.rows[c].value;
    res.push_back(rc);
    mu += rc;
  }
  mu /= (double)C;
  e.value = mu;
  if (C > 1) {
    double vre = 0.0, vim = 0.0;
    for (const auto& rc : res) {
      vre += (rc.real() - mu.real()) * (rc.real() - mu.real());
      vim += (rc.imag() - mu.imag()) * (rc.imag() - mu.imag());
    }
    e.se_re = std::sqrt(vre / (C * (C - 1.0)));
    e.se_im = std::sqrt(vim / (C * (C - 1.0)));
  }
  e.ess = (double)p.samples;
  e.tail = out.diag.max_tail;
  out.residual = e;

  for (const auto& r : base.rows) out.rows.push_back({"base", r.chain, r.value, r.se});
  for (const auto& r : map.rows) out.rows.push_back({"mapped", r.chain, r.value, r.se});
  for (std::size_t c = 0; c < C; ++c)
    out.rows.push_back({"residual", (int)c, res[c], 0.0});
  return out;
}

// ---------------------------------------------------------------------------
// Boundary fusion exponent
// ---------------------------------------------------------------------------

FusionResult fusion_exponent(const Model& m, int anchor, int mover,
                             double dmin, double dmax, int steps,
                             const McParams& p) {
  if (anchor < 0 || mover < 0 || anchor == mover ||
      anchor >= (int)m.boundary.size() || mover >= (int)m.boundary.size())
    throw std::invalid_argument("fusion needs two distinct boundary insertions");
  if (!(dmin > 0.0 && dmax > dmin) || steps < 2)
    throw std::invalid_argument("fusion ladder needs 0 < dmin < dmax, steps >= 2");
  FusionResult out;
  out.target = -0.5 * inner(m.boundary[anchor].beta, m.boundary[mover].beta);
  std::vector<double> xs, ys, ws;
  for (int k = 0; k < steps; ++k) {
    double f = (steps == 1) ? 0.0 : (double)k / (steps - 1);
    double d = dmin * std::pow(dmax / dmin, f);
    Model mk = m;
    mk.boundary[mover].s = mk.boundary[anchor].s + d;
    CorrelatorResult r = estimate_correlator(mk, p);
    FusionPoint pt;
    pt.d = d;
    pt.corr = r.corr;
    out.points.push_back(pt);
    for (const auto& row : r.rows) {
      std::ostringstream nm;
      nm << "corr_d" << k;
      out.rows.push_back({nm.str(), row.chain, row.value, row.se});
    }
    double av = std::abs(r.corr.value);
    if (!(av > 0.0)) throw NumericError("fusion correlator vanished");
    double se_abs =
        std::sqrt(r.corr.value.real() * r.corr.value.real() * r.corr.se_re *
                      r.corr.se_re +
                  r.corr.value.imag() * r.corr.value.imag() * r.corr.se_im *
                      r.corr.se_im) /
        av;
    double se_ln = std::max(se_abs / av, 1e-12);
    xs.push_back(std::log(d));
    ys.push_back(std::log(av));
    ws.push_back(1.0 / (se_ln * se_ln));
  }
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sw += ws[k];
    sx += ws[k] * xs[k];
    sy += ws[k] * ys[k];
  }
  sx /= sw;
  sy /= sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += ws[k] * (xs[k] - sx) * (xs[k] - sx);
    sxy += ws[k] * (xs[k] - sx) * (ys[k] - sy);
  }
  out.slope = sxy / sxx;
  out.slope_se = std::sqrt(1.0 / sxx);
  return out;
}

// ---------------------------------------------------------------------------
// Stress-tensor insertion at a boundary probe
// ---------------------------------------------------------------------------

namespace {

// Complex z-derivatives at a real boundary point of the covariance pairing
// with a charge at x (mirror charge included), and of the metric drift.
double dgreen(double t, std::complex<double> x, bool bulk) {
  double drift = (std::abs(t) > 1.0) ? 1.0 / t : 0.0;
  if (bulk) {
    std::complex<double> inv = 1.0 / (std::complex<double>(t, 0.0) - x);
    return -inv.real() + drift;
  }
  return -1.0 / (t - x.real()) + drift;
}

double ddgreen(double t, std::complex<double> x, bool bulk) {
  double drift = (std::abs(t) > 1.0) ? -1.0 / (t * t) : 0.0;
  if (bulk) {
    std::complex<double> inv = 1.0 / (std::complex<double>(t, 0.0) - x);
    return (inv * inv).real() + drift;
  }
  double inv = 1.0 / (t - x.real());
  return inv * inv + drift;
}

}  // namespace

WardTResult ward_T_mc(const Model& m, double probe, const McParams& p) {
  const double h = p.fd_h;
  const double g = m.gamma;
  const double q = m.q();
  const Wt Q = m.Qvec();
  const std::size_t N = m.bulk.size();
  const std::size_t M = m.boundary.size();
  for (const auto& b : m.bulk)
    if (std::abs(b.z - std::complex<double>(probe, 0.0)) < p.epsilon)
      throw std::invalid_argument("probe sits on top of a bulk insertion");
  for (const auto& b : m.boundary)
    if (std::abs(b.s - probe) < p.epsilon)
      throw std::invalid_argument("probe sits on top of a boundary insertion");
  if (p.epsilon < p.fd_h + 2.0 * p.cutoff_r - 1e-12)
    throw std::invalid_argument(
        "the exclusion radius must cover the step plus twice the floor");

  // Position-shift variants for the insertion derivatives, at steps h and h/2.
  std::vector<Model> variants;
  auto shift_bulk = [&](std::size_t k, double dx, double dy) {
    Model mv = m;
    mv.bulk[k].z += std::complex<double>(dx, dy);
    return mv;
  };
  auto shift_bdry = [&](std::size_t l, double ds) {
    Model mv = m;
    mv.boundary[l].s += ds;
    return mv;
  };
  for (std::size_t k = 0; k < N; ++k) {
    for (double step : {h, 0.5 * h}) {
      variants.push_back(shift_bulk(k, step, 0.0));
      variants.push_back(shift_bulk(k, -step, 0.0));
      variants.push_back(shift_bulk(k, 0.0, step));
      variants.push_back(shift_bulk(k, 0.0, -step));
    }
  }
  for (std::size_t l = 0; l < M; ++l) {
    for (double step : {h, 0.5 * h}) {
      variants.push_back(shift_bdry(l, step));
      variants.push_back(shift_bdry(l, -step));
    }
  }
  PointCloud cloud = build_cloud(m, p, {{probe, 0.0}});
  Plan plan = make_plan(m, p, variants, &cloud);
  const int V = (int)plan.scenes.size();
  const bool ff = plan.free_field;

  // Analytic derivative data of the deterministic field part at the probe,
  // in orthonormal frame coordinates.
  const auto ch = charge_list(m);
  Wt A1{0.0, 0.0}, A2{0.0, 0.0};
  for (const auto& cc : ch) {
    A1 = add(A1, scale(cc.hat, dgreen(probe, cc.x, cc.bulk)));
    A2 = add(A2, scale(cc.hat, ddgreen(probe, cc.x, cc.bulk)));
  }
  if (std::abs(probe) > 1.0) {
    A1 = add(A1, scale(Q, -1.0 / probe));
    A2 = add(A2, scale(Q, 1.0 / (probe * probe)));
  }
  const double a1f[2] = {frame1(A1), frame2(A1)};
  const double a2f[2] = {frame1(A2), frame2(A2)};
  const double qf[2] = {frame1(Q), frame2(Q)};
  const double qa2 = qf[0] * a2f[0] + qf[1] * a2f[1];
  const double a1a1 = a1f[0] * a1f[0] + a1f[1] * a1f[1];

  // Conditional derivatives of the sampled field: linear probes u = K^{-1} c
  // whose covariance with every cell row is the analytic pairing c exactly.
  // All cells stay epsilon away from the probe, so c is smooth there.
  const std::size_t n = plan.nrows();
  Eigen::VectorXd c1(n), c2(n);
  for (std::size_t rix = 0; rix < n; ++rix) {
    const bool bulk = rix < plan.cloud.nbulk;
    c1[rix] = dgreen(probe, plan.cloud.pt[rix], bulk);
    c2[rix] = ddgreen(probe, plan.cloud.pt[rix], bulk);
  }
  auto solve = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd u = plan.fac.L.triangularView<Eigen::Lower>().solve(c);
    return Eigen::VectorXd(
        plan.fac.L.transpose().triangularView<Eigen::Upper>().solve(u));
  };
  plan.lin = {solve(c1), solve(c2)};
  const double d2v = c1.dot(plan.lin[0]);  // Wick constant per component

  const double P = std::exp(plan.scenes[0].logP);
  // terms: 0 lhs, 1..V correlators (scene order)
  const std::size_t nterms = 1 + V;
  auto fn = [&](const BatchData& bd, ChainAcc& acc) {
    for (int b = 0; b < bd.bsize; ++b) {
      std::vector<std::complex<double>> corr(V);
      if (ff) {
        for (int v = 0; v < V; ++v) corr[v] = 1.0;
      } else {
        for (int v = 0; v < V; ++v) {
          ZmVal z1 = zero_mode(plan.scenes[v].sigma[0], g,
                               m.mu_bulk[0] * bd.A[v][0][b], bd.B[v][0][b],
                               plan.rule, p.zm_panel, false);
          ZmVal z2 = zero_mode(plan.scenes[v].sigma[1], g,
                               m.mu_bulk[1] * bd.A[v][1][b], bd.B[v][1][b],
                               plan.rule, p.zm_panel, false);
          acc.maxtail = std::max(acc.maxtail, std::max(z1.tail, z2.tail));
          corr[v] = kInvSqrt3 * z1.i0 * z2.i0;
        }
      }
      const double s1[2] = {bd.lin1(0, b), bd.lin2(0, b)};
      const double s2[2] = {bd.lin1(1, b), bd.lin2(1, b)};
      const double qs2 = qf[0] * s2[0] + qf[1] * s2[1];
      const double a1s1 = a1f[0] * s1[0] + a1f[1] * s1[1];
      const double s1s1 = s1[0] * s1[0] + s1[1] * s1[1];
      const double that =
          qa2 + qs2 - (a1a1 + 2.0 * a1s1 + s1s1 - 2.0 * d2v);
      acc.add(0, that * P * corr[0]);
      for (int v = 0; v < V; ++v)
        acc.add(1 + v, std::exp(plan.scenes[v].logP) * corr[v]);
    }
  };
  auto cs = run_chains(plan, nterms, fn);
  double tail = max_tail(cs);
  if (!ff && tail > p.zm_tol)
    throw NumericError("zero-mode truncation bound exceeds the tolerance");

  // Assemble per-chain lhs/rhs/residual (all terms share the sample stream).
  const int C = (int)cs.size();
  std::vector<std::complex<double>> lhs_c(C), rhs_c(C), rhs_raw_h(C),
      rhs_raw_h2(C), res_c(C);
  for (int c = 0; c < C; ++c) {
    std::complex<double> lhs = cs[c].mean[0];
    std::complex<double> f0 = cs[c].mean[1];
    auto rhs_at = [&](int which) {  // 0: step h, 1: step h/2, 2: extrapolated
      std::complex<double> rhs(0.0, 0.0);
      int v = 2;
      const std::complex<double> tc(probe, 0.0);
      for (std::size_t k = 0; k < N; ++k) {
        std::complex<double> fxp_h = cs[c].mean[v + 0], fxm_h = cs[c].mean[v + 1];
        std::complex<double> fyp_h = cs[c].mean[v + 2], fym_h = cs[c].mean[v + 3];
        std::complex<double> fxp_g = cs[c].mean[v + 4], fxm_g = cs[c].mean[v + 5];
        std::complex<double> fyp_g = cs[c].mean[v + 6], fym_g = cs[c].mean[v + 7];
        v += 8;
        auto deriv = [&](std::complex<double> xp, std::complex<double> xm,
                         std::complex<double> yp, std::complex<double> ym,
                         double step) {
          std::complex<double> fx = (xp - xm) / (2.0 * step);
          std::complex<double> fy = (yp - ym) / (2.0 * step);
          std::complex<double> dz = 0.5 * (fx - std::complex<double>(0, 1) * fy);
          std::complex<double> dzb = 0.5 * (fx + std::complex<double>(0, 1) * fy);
          return std::make_pair(dz, dzb);
        };
        auto dh = deriv(fxp_h, fxm_h, fyp_h, fym_h, h);
        auto dg2 = deriv(fxp_g, fxm_g, fyp_g, fym_g, 0.5 * h);
        std::complex<double> dz, dzb;
        if (which == 0) {
          dz = dh.first;
          dzb = dh.second;
        } else if (which == 1) {
          dz = dg2.first;
          dzb = dg2.second;
        } else {
          dz = (4.0 * dg2.first - dh.first) / 3.0;
          dzb = (4.0 * dg2.second - dh.second) / 3.0;
        }
        const std::complex<double> z = m.bulk[k].z;
        const double dk = delta_of(m.bulk[k].alpha, q);
        rhs += dz / (tc - z) + dzb / (tc - std::conj(z));
        rhs += dk * (1.0 / ((tc - z) * (tc - z)) +
                     1.0 / ((tc - std::conj(z)) * (tc - std::conj(z)))) *
               f0;
      }
      for (std::size_t l = 0; l < M; ++l) {
        std::complex<double> fp_h = cs[c].mean[v + 0], fm_h = cs[c].mean[v + 1];
        std::complex<double> fp_g = cs[c].mean[v + 2], fm_g = cs[c].mean[v + 3];
        v += 4;
        std::complex<double> ds_h = (fp_h - fm_h) / (2.0 * h);
        std::complex<double> ds_g = (fp_g - fm_g) / h;
        std::complex<double> ds;
        if (which == 0)
          ds = ds_h;
        else if (which == 1)
          ds = ds_g;
        else
          ds = (4.0 * ds_g - ds_h) / 3.0;
        const double s = m.boundary[l].s;
        const double dl = delta_of(m.boundary[l].beta, q);
        rhs += ds / (probe - s) + dl / ((probe - s) * (probe - s)) * f0;
      }
      return rhs;
    };
    rhs_c[c] = rhs_at(2);
    lhs_c[c] = lhs;
    res_c[c] = lhs - rhs_c[c];
    rhs_raw_h[c] = rhs_at(0);
    rhs_raw_h2[c] = rhs_at(1);
  }

  auto pool_vec = [&](const std::vector<std::complex<double>>& vals) {
    Estimate e;
    std::complex<double> mu(0.0, 0.0);
    for (const auto& vv : vals) mu += vv;
    mu /= (double)C;
    e.value = mu;
    if (C > 1) {
      double vre = 0.0, vim = 0.0;
      for (const auto& vv : vals) {
        vre += (vv.real() - mu.real()) * (vv.real() - mu.real());
        vim += (vv.imag() - mu.imag()) * (vv.imag() - mu.imag());
      }
      e.se_re = std::sqrt(vre / (C * (C - 1.0)));
      e.se_im = std::sqrt(vim / (C * (C - 1.0)));
    }
    e.ess = (double)p.samples;
    e.tail = tail;
    return e;
  };

  WardTResult out;
  out.lhs = pool_vec(lhs_c);
  out.rhs = pool_vec(rhs_c);
  out.residual = pool_vec(res_c);
  out.rel_scale = std::max(std::abs(out.lhs.value), std::abs(out.rhs.value));
  std::complex<double> rh(0.0, 0.0), rh2(0.0, 0.0);
  for (int c = 0; c < C; ++c) {
    rh += rhs_raw_h[c];
    rh2 += rhs_raw_h2[c];
  }
  out.fd_check = std::abs(rh - rh2) / (double)C;
  out.diag = plan.diag;
  out.diag.max_tail = tail;
  std::vector<std::string> names = {"lhs"};
  for (int v = 0; v < V; ++v) {
    std::ostringstream nm;
    nm << "corr_v" << v;
    names.push_back(nm.str());
  }
  out.rows = chain_rows(cs, names);
  for (int c = 0; c < C; ++c) {
    out.rows.push_back({"rhs", c, rhs_c[c], 0.0});
    out.rows.push_back({"residual", c, res_c[c], 0.0});
  }
  return out;
}

std::vector<ChaosCellRow> chaos_cells_mc(const Model& m, const McParams& p) {
  Plan plan = make_plan(m, p, {});
  const std::size_t n = plan.nrows();
  auto cs = run_chains(plan, 2 * n, [&](const BatchData& bd, ChainAcc& acc) {
    for (int j = 0; j < bd.bsize; ++j)
      for (int i = 0; i < 2; ++i) {
        const Eigen::ArrayXXd& E = (*bd.cells)[i];
        for (std::size_t rix = 0; rix < n; ++rix)
          acc.add(i * n + rix, E(rix, j));
      }
  });
  std::vector<ChaosCellRow> out;
  out.reserve(2 * n);
  for (int i = 0; i < 2; ++i)
    for (std::size_t rix = 0; rix < n; ++rix) {
      ChaosCellRow row;
      row.pt = plan.cloud.pt[rix];
      row.bulk = rix < plan.cloud.nbulk;
      row.comp = i;
      const auto r = (Eigen::Index)rix;
      const double kdiag = plan.fac.L.row(r).squaredNorm();
      const double a1 = plan.a1[i][r];
      const double a2 = plan.a2[i][r];
      const double lw = plan.c0[i][r];
      row.exact =
          lw < -1e29 ? 0.0 : std::exp(lw + 0.5 * (a1 * a1 + a2 * a2) * kdiag);
      Estimate e = pool_chains(cs, i * n + rix, 0.0);
      row.mean = e.value.real();
      row.se = e.se();
      out.push_back(row);
    }
  return out;
}

}  // namespace toda::sim
