#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "toda/fieldsim.hpp"

// Configuration ingestion, command runners, and deterministic report emission
// for the exact and Monte Carlo suites.  Reports are value objects: the exit
// status of a run is a pure function of the report contents, and the JSON and
// CSV artifacts contain no timestamps, so identical seeds reproduce byte-equal
// files.

namespace toda::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double sigmas = 3.0;      // statistical band in standard errors
  double rel = 0.05;        // relative band for the stress-tensor residual
  double slope_rel = 0.15;  // relative band for the fusion slope
};

struct RunConfig {
  std::string engine = "mc";  // "mc" | "symbolic"
  sim::Model model;           // numeric insertions (mc engine)
  int sym_bulk = 1;           // insertion counts for symbolic scenes
  int sym_boundary = 1;
  sim::McParams params;
  Tolerances tol;
  std::string out_csv = "report.csv";
  std::string out_json = "report.json";
  int verbosity = 1;
  nlohmann::json resolved;  // every setting, defaults made explicit
};

// Builds a validated RunConfig.  Unknown keys are rejected with their full
// path, weights must be exact rational pairs in the e-basis, gamma must lie
// in (0, sqrt 2), boundary insertions must be strictly increasing, and the
// mc engine additionally runs the screening checks.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig parse_config(const std::string& path);

struct CheckRow {
  std::string name;
  bool pass = false;
  bool informational = false;  // reported but never fatal
  std::string detail;
};

struct Report {
  std::string command;
  std::uint64_t seed = 0;
  nlohmann::json resolved;
  std::vector<sim::ChainRow> table;  // bulk numeric rows, written as CSV
  std::vector<CheckRow> checks;
  nlohmann::json estimates;  // headline values keyed by term
  bool pass() const;
};

Report run_algebra_selftest();
Report run_ward_free(const RunConfig& cfg, int level, bool spin3, bool solve);
Report run_ward_global(const RunConfig& cfg);
Report run_identity_conformance();
Report run_mc_correlator(const RunConfig& cfg);
Report run_mc_kpz(const RunConfig& cfg);
Report run_mc_covariance(const RunConfig& cfg, double a, double b, double c,
                         double d);
Report run_mc_fusion(const RunConfig& cfg, int anchor, int mover, double dmin,
                     double dmax, int steps);
Report run_mc_ward_t(const RunConfig& cfg, double probe);

// Deterministic renderings; the writers emit through a temporary file and an
// atomic rename.
std::string render_csv(const std::vector<sim::ChainRow>& rows);
std::string render_json(const Report& r);
void write_file_atomic(const std::string& path, const std::string& text);

// Full command dispatcher; returns the process exit code: 0 all checks pass,
// 1 a check failed, 2 invalid input, 3 numeric failure.
int main_impl(const std::vector<std::string>& args);

}  // namespace toda::cli
