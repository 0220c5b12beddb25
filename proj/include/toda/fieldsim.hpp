#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Monte Carlo engine for boundary Toda correlation functions on the upper
// half-plane at fixed desk-scale regularization: a lattice Neumann free field
// with covariance floored at a short-distance cutoff, multiplicative chaos
// masses for the bulk and boundary interaction terms, and an exactly
// factorized zero-mode integral.  Estimators share one Gaussian sample stream
// across all terms of an identity, so structural identities (shift relations
// in the cosmological constants, conformal covariance under a mapped
// discretization) hold at the level of the regularized model itself and the
// Monte Carlo residuals are pure noise plus quadrature-level bias.

namespace toda::sim {

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Numeric Cartan data for sl3 in simple-root coordinates: u = u1 e1 + u2 e2,
// Gram matrix [[2,-1],[-1,2]].
// ---------------------------------------------------------------------------
struct Wt {
  double u1 = 0.0;
  double u2 = 0.0;
};

double inner(const Wt& a, const Wt& b);
inline double norm2(const Wt& a) { return inner(a, a); }
inline Wt add(const Wt& a, const Wt& b) { return {a.u1 + b.u1, a.u2 + b.u2}; }
inline Wt scale(const Wt& a, double c) { return {c * a.u1, c * a.u2}; }
inline Wt rho() { return {1.0, 1.0}; }

// Coordinates of <u, X> against the orthonormal field frame: the field is
// sampled as two iid scalar components xi1, xi2 and <u, X(x)> =
// frame1(u) xi1(x) + frame2(u) xi2(x).
double frame1(const Wt& u);
double frame2(const Wt& u);

// Scaling dimension of a weight-u vertex: <u/2, Q - u/2>.
double delta_of(const Wt& u, double q);

// ---------------------------------------------------------------------------
// Model configuration
// ---------------------------------------------------------------------------
struct BulkIns {
  std::complex<double> z;  // Im z > 0
  Wt alpha;
  double scl = 1.0;  // local cutoff scale carried by a mapped configuration
};

struct BdryIns {
  double s;
  Wt beta;
  double scl = 1.0;
};

struct Model {
  double gamma = 0.6;
  std::vector<BulkIns> bulk;
  std::vector<BdryIns> boundary;
  std::array<double, 2> mu_bulk{1.0, 1.0};
  // Piecewise boundary couplings: entry l applies on (s_l, s_{l+1}) with
  // s_0 = -inf; the interval beyond the last insertion wraps to entry 0.
  std::array<std::vector<std::complex<double>>, 2> mu_boundary;

  double q() const { return gamma + 2.0 / gamma; }
  Wt Qvec() const { return scale(rho(), q()); }
  // Total charge defect s = sum alpha_k + (1/2) sum beta_l - Q.
  Wt svec() const;
  bool free_field() const;  // all cosmological couplings vanish
};

class SeibergError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws SeibergError naming the first violated inequality.
void check_seiberg(const Model& m);

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------
struct Grid {
  int nx = 64, ny = 32;  // bulk cells
  int nb = 128;          // boundary cells
  double x0 = -6.0, x1 = 6.0, y1 = 6.0;  // bulk window above delta
  double b0 = -6.0, b1 = 6.0;            // boundary segment
};

struct McParams {
  std::int64_t samples = 20000;
  int chains = 8;
  std::uint64_t seed = 1;
  Grid grid;
  double delta = 0.05;    // bulk strip offset
  double epsilon = 0.15;  // exclusion radius around insertions
  double cutoff_r = 0.05; // covariance floor distance
  int zm_nodes = 24;      // Gauss-Legendre nodes per zero-mode panel
  double zm_panel = 4.0;  // zero-mode panel width
  double zm_tol = 1e-8;   // max tolerated zero-mode tail ratio
  double fd_h = 0.01;     // step for insertion-position finite differences
  int batch = 256;
  int threads = 1;        // chains run on this many OS threads
};

struct PointCloud {
  std::vector<std::complex<double>> pt;  // bulk cells first, then boundary
  std::vector<double> weight;            // cell area resp. segment length
  std::vector<double> scl;               // local cutoff scale per point
  std::size_t nbulk = 0;
  std::size_t size() const { return pt.size(); }
};

// Cell centers of the bulk strip and the boundary segment, with epsilon-balls
// removed around the matching insertions and around every point in `holes`
// (holes exclude both bulk and boundary cells; used for derivative probes).
PointCloud build_cloud(const Model& m, const McParams& p,
                       const std::vector<std::complex<double>>& holes = {});

// ---------------------------------------------------------------------------
// Half-plane Neumann covariance
// ---------------------------------------------------------------------------
double green(std::complex<double> x, std::complex<double> y);
// Floored kernel: both distance factors are floored at r*sqrt(sx*sy).
double green_r(std::complex<double> x, std::complex<double> y, double r,
               double sx = 1.0, double sy = 1.0);

Eigen::MatrixXd covariance_matrix(const PointCloud& cloud, double r);

struct Factorization {
  Eigen::MatrixXd L;
  double jitter = 0.0;    // diagonal shift that made the factorization succeed
  double residual = 0.0;  // max |L L^T - (K + jitter I)|
  int attempts = 0;
};

// Cholesky with an escalating diagonal shift: starts at 1e-12 * max diagonal
// and multiplies by 10 up to 1e-6 * max diagonal before failing.
Factorization factor_covariance(const Eigen::MatrixXd& K);

// ---------------------------------------------------------------------------
// Deterministic RNG: splitmix64 stream + Box-Muller pairs.  Chain c draws its
// seed as the (c+1)-th output of a splitmix64 stream seeded with the master.
// ---------------------------------------------------------------------------
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next_u64();
  double next_u01();     // uniform on (0,1]
  double next_gauss();   // standard normal
 private:
  double spare_ = 0.0;
  bool have_spare_ = false;
};

std::uint64_t chain_seed(std::uint64_t master, int chain);

// Fills a (n x 2*cols) matrix whose left block is component 1 and right block
// component 2: columns are iid N(0, L L^T) vectors.
void sample_field(const Factorization& fac, Rng& rng, Eigen::MatrixXd& out);

// ---------------------------------------------------------------------------
// Zero-mode integral
// ---------------------------------------------------------------------------
// I = int_R exp(sig v - muA e^{gamma v} - B e^{gamma v / 2}) dv for sig > 0,
// muA > 0, Re B >= 0, by panelled Gauss-Legendre quadrature around the peak.
// ig and ih are the same integral tilted by e^{gamma v} and e^{gamma v / 2}
// (filled when tilts is set); tail is an analytic bound on the truncated mass
// relative to the computed value.
struct ZeroMode {
  std::complex<double> i0{0.0, 0.0}, ig{0.0, 0.0}, ih{0.0, 0.0};
  double tail = 0.0;
};

ZeroMode zero_mode_integral(double sig, double gamma, double muA,
                            std::complex<double> B, int nodes, double panel,
                            bool tilts);

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------
struct ChainRow {
  std::string term;
  int chain = 0;
  std::complex<double> value{0.0, 0.0};
  double se = 0.0;  // within-chain standard error of the chain mean (|.|)
};

struct Estimate {
  std::complex<double> value{0.0, 0.0};
  double se_re = 0.0;
  double se_im = 0.0;
  double ess = 0.0;   // independent samples behind the estimate
  double tail = 0.0;  // worst zero-mode truncation ratio encountered
  double se() const;  // combined standard error magnitude
};

struct RunDiagnostics {
  double jitter = 0.0;
  double factor_residual = 0.0;
  double max_tail = 0.0;
  std::size_t cloud_points = 0;
};

struct CorrelatorResult {
  Estimate corr;
  RunDiagnostics diag;
  std::vector<ChainRow> rows;
};

CorrelatorResult estimate_correlator(const Model& m, const McParams& p);

// Shift relation in the cosmological couplings: for each i the combination
//   <s,w_i> <PV> - gamma mu_i Int_bulk <V_{gamma e_i}(x) PV> dx
//             - (gamma/2) Int_bdry <V_{gamma e_i}(x) PV> mu_i(dx)
// vanishes for the regularized model; all three terms share one sample
// stream, so the residual is quadrature-level.
struct KpzResult {
  std::array<Estimate, 2> residual;
  std::array<std::complex<double>, 2> scale;  // <s,w_i> <PV> reference scale
  Estimate corr;
  RunDiagnostics diag;
  std::vector<ChainRow> rows;
};

KpzResult kpz_residual(const Model& m, const McParams& p);

// ---------------------------------------------------------------------------
// Conformal covariance under a boundary-preserving Mobius map
// ---------------------------------------------------------------------------
struct Mobius {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;  // normalized to ad - bc = 1
  std::complex<double> apply(std::complex<double> z) const;
  double dabs(std::complex<double> z) const;  // |psi'(z)|
};

Mobius normalize(double a, double b, double c, double d);
Model map_model(const Model& m, const Mobius& psi);
PointCloud map_cloud(const PointCloud& cloud, const Mobius& psi);

struct CovarianceResult {
  Estimate mapped;    // correlator of the mapped configuration
  Estimate base;      // correlator of the base configuration
  double factor = 0;  // prod |psi'(z_k)|^{-2 Delta_k} prod |psi'(s_l)|^{-Delta_l}
  Estimate residual;  // mapped - factor * base
  RunDiagnostics diag;
  std::vector<ChainRow> rows;
};

CovarianceResult covariance_residual(const Model& m, const Mobius& psi,
                                     const McParams& p);

// ---------------------------------------------------------------------------
// Boundary fusion exponent
// ---------------------------------------------------------------------------
struct FusionPoint {
  double d = 0.0;
  Estimate corr;
};

struct FusionResult {
  double slope = 0.0;
  double slope_se = 0.0;
  double target = 0.0;  // -<beta_a, beta_b>/2
  std::vector<FusionPoint> points;
  std::vector<ChainRow> rows;
};

// Moves boundary insertion `mover` to distance d of boundary insertion
// `anchor` over a log-spaced ladder and fits the log-log slope.
FusionResult fusion_exponent(const Model& m, int anchor, int mover,
                             double dmin, double dmax, int steps,
                             const McParams& p);

// ---------------------------------------------------------------------------
// Stress-tensor insertion at a boundary probe
// ---------------------------------------------------------------------------
// The probe derivatives are conditional derivatives of the sampled field:
// linear functionals u = K^{-1} c with analytic pairing vectors c, so their
// covariance against every cell is exact and the Wick constant is c.u.  The
// right-hand side differentiates the correlator in the insertion positions
// by Richardson-extrapolated central differences of step fd_h.
struct WardTResult {
  Estimate lhs;       // < :T(t): PV >
  Estimate rhs;       // sum_k [ d_{z_k}/(t-z_k) + Delta_k/(t-z_k)^2 ] < PV >
  Estimate residual;  // lhs - rhs, common random numbers
  double rel_scale = 0.0;  // max(|lhs|, |rhs|)
  double fd_check = 0.0;   // rhs shift between step h and h/2
  RunDiagnostics diag;
  std::vector<ChainRow> rows;
};

WardTResult ward_T_mc(const Model& m, double probe, const McParams& p);

// ---------------------------------------------------------------------------
// Chaos normalization diagnostic
// ---------------------------------------------------------------------------
// Empirical mean chaos mass of every cell against its exact lognormal value,
// the quadrature weight times the insertion-shift density.  Exercises the
// factorization, the Gaussian sampler, and the cell prefactors end to end.
struct ChaosCellRow {
  std::complex<double> pt;
  bool bulk = true;
  int comp = 0;
  double mean = 0.0;   // empirical mean cell mass
  double exact = 0.0;  // lognormal expectation; 0 for masked cells
  double se = 0.0;     // pooled standard error across chains
};

std::vector<ChaosCellRow> chaos_cells_mc(const Model& m, const McParams& p);

}  // namespace toda::sim
