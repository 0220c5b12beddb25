#include "toda/cli_support.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "toda/algebra.hpp"
#include "toda/ward.hpp"

namespace toda::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok) fail("unknown key: " + join_path(path, it.key()));
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path + " must be a number");
  return j.get<double>();
}

std::int64_t as_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path + " must be an integer");
  return j.get<std::int64_t>();
}

// gamma travels either as a decimal or as an exact [numerator, denominator].
double rational_or_number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number_integer() &&
      j[1].is_number_integer()) {
    const double den = j[1].get<double>();
    if (den == 0.0) fail(path + " has denominator zero");
    return j[0].get<double>() / den;
  }
  fail(path + " must be a number or a [numerator, denominator] pair");
}

// Weights are exact rational pairs in the e-basis:
// [[n1, d1], [n2, d2]] meaning (n1/d1) e1 + (n2/d2) e2.
sim::Wt weight_of(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2)
    fail(path + " must be two [numerator, denominator] pairs");
  double u[2];
  for (int i = 0; i < 2; ++i) {
    const json& c = j[i];
    if (!c.is_array() || c.size() != 2 || !c[0].is_number_integer() ||
        !c[1].is_number_integer())
      fail(path + " must be two [numerator, denominator] integer pairs");
    const double den = c[1].get<double>();
    if (den == 0.0) fail(path + " has denominator zero");
    u[i] = c[0].get<double>() / den;
  }
  return {u[0], u[1]};
}

std::complex<double> complex_of(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  fail(path + " must be a number or an [re, im] pair");
}

void parse_grid(const json& j, sim::Grid& g) {
  reject_unknown(j, "params.grid",
                 {"nx", "ny", "nb", "x0", "x1", "y1", "b0", "b1"});
  if (j.contains("nx")) g.nx = (int)as_int(j["nx"], "params.grid.nx");
  if (j.contains("ny")) g.ny = (int)as_int(j["ny"], "params.grid.ny");
  if (j.contains("nb")) g.nb = (int)as_int(j["nb"], "params.grid.nb");
  if (j.contains("x0")) g.x0 = as_number(j["x0"], "params.grid.x0");
  if (j.contains("x1")) g.x1 = as_number(j["x1"], "params.grid.x1");
  if (j.contains("y1")) g.y1 = as_number(j["y1"], "params.grid.y1");
  if (j.contains("b0")) g.b0 = as_number(j["b0"], "params.grid.b0");
  if (j.contains("b1")) g.b1 = as_number(j["b1"], "params.grid.b1");
  if (g.nx < 1 || g.ny < 1 || g.nb < 1)
    fail("params.grid cell counts must be at least 1");
  if (!(g.x0 < g.x1)) fail("params.grid needs x0 < x1");
  if (!(g.b0 < g.b1)) fail("params.grid needs b0 < b1");
  if (!(g.y1 > 0.0)) fail("params.grid needs y1 > 0");
}

void parse_params(const json& j, sim::McParams& p) {
  reject_unknown(j, "params",
                 {"samples", "chains", "seed", "threads", "batch", "delta",
                  "epsilon", "cutoff_r", "fd_h", "zm_nodes", "zm_panel",
                  "zm_tol", "grid"});
  if (j.contains("samples"))
    p.samples = as_int(j["samples"], "params.samples");
  if (j.contains("chains")) p.chains = (int)as_int(j["chains"], "params.chains");
  if (j.contains("seed")) {
    const std::int64_t s = as_int(j["seed"], "params.seed");
    if (s < 0) fail("params.seed must be nonnegative");
    p.seed = (std::uint64_t)s;
  }
  if (j.contains("threads"))
    p.threads = (int)as_int(j["threads"], "params.threads");
  if (j.contains("batch")) p.batch = (int)as_int(j["batch"], "params.batch");
  if (j.contains("delta")) p.delta = as_number(j["delta"], "params.delta");
  if (j.contains("epsilon"))
    p.epsilon = as_number(j["epsilon"], "params.epsilon");
  if (j.contains("cutoff_r"))
    p.cutoff_r = as_number(j["cutoff_r"], "params.cutoff_r");
  if (j.contains("fd_h")) p.fd_h = as_number(j["fd_h"], "params.fd_h");
  if (j.contains("zm_nodes"))
    p.zm_nodes = (int)as_int(j["zm_nodes"], "params.zm_nodes");
  if (j.contains("zm_panel"))
    p.zm_panel = as_number(j["zm_panel"], "params.zm_panel");
  if (j.contains("zm_tol")) p.zm_tol = as_number(j["zm_tol"], "params.zm_tol");
  if (j.contains("grid")) parse_grid(j["grid"], p.grid);
  if (p.samples < 1) fail("params.samples must be positive");
  if (p.chains < 1) fail("params.chains must be positive");
  if (p.threads < 1) fail("params.threads must be positive");
  if (p.batch < 1) fail("params.batch must be positive");
  if (!(p.delta > 0.0)) fail("params.delta must be positive");
  if (!(p.epsilon > 0.0)) fail("params.epsilon must be positive");
  if (!(p.cutoff_r > 0.0)) fail("params.cutoff_r must be positive");
  if (!(p.fd_h > 0.0)) fail("params.fd_h must be positive");
  if (p.zm_nodes < 4) fail("params.zm_nodes must be at least 4");
  if (!(p.zm_panel > 0.0)) fail("params.zm_panel must be positive");
  if (!(p.zm_tol > 0.0)) fail("params.zm_tol must be positive");
}

json grid_json(const sim::Grid& g) {
  return json{{"nx", g.nx}, {"ny", g.ny}, {"nb", g.nb}, {"x0", g.x0},
              {"x1", g.x1}, {"y1", g.y1}, {"b0", g.b0}, {"b1", g.b1}};
}

json params_json(const sim::McParams& p) {
  return json{{"samples", p.samples},   {"chains", p.chains},
              {"seed", p.seed},         {"threads", p.threads},
              {"batch", p.batch},       {"delta", p.delta},
              {"epsilon", p.epsilon},   {"cutoff_r", p.cutoff_r},
              {"fd_h", p.fd_h},         {"zm_nodes", p.zm_nodes},
              {"zm_panel", p.zm_panel}, {"zm_tol", p.zm_tol},
              {"grid", grid_json(p.grid)}};
}

json est_json(const sim::Estimate& e) {
  return json{{"value_re", e.value.real()},
              {"value_im", e.value.imag()},
              {"stderr", e.se()},
              {"ess", e.ess},
              {"tail", e.tail}};
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_est(const sim::Estimate& e) {
  std::string s = fmt(e.value.real());
  if (e.value.imag() != 0.0) s += " + " + fmt(e.value.imag()) + "i";
  return s + " (se " + fmt(e.se()) + ")";
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig cfg;
  if (!j.is_object()) fail("configuration root must be a JSON object");
  reject_unknown(j, "",
                 {"engine", "gamma", "bulk", "boundary", "mu_bulk",
                  "mu_boundary", "params", "tolerances", "output",
                  "verbosity"});

  if (j.contains("engine")) {
    if (!j["engine"].is_string()) fail("engine must be a string");
    cfg.engine = j["engine"].get<std::string>();
    if (cfg.engine != "mc" && cfg.engine != "symbolic")
      fail("engine must be \"mc\" or \"symbolic\"");
  }

  json gamma_raw = 0.6;
  if (j.contains("gamma")) {
    cfg.model.gamma = rational_or_number(j["gamma"], "gamma");
    gamma_raw = j["gamma"];
  } else {
    cfg.model.gamma = 0.6;
  }
  if (!(cfg.model.gamma > 0.0) || cfg.model.gamma * cfg.model.gamma >= 2.0)
    fail("gamma = " + fmt(cfg.model.gamma) +
         " is outside the open interval (0, sqrt 2)");

  json bulk_res = json::array();
  if (j.contains("bulk")) {
    const json& b = j["bulk"];
    if (b.is_number_integer()) {
      cfg.sym_bulk = (int)b.get<std::int64_t>();
      if (cfg.sym_bulk < 0) fail("bulk count must be nonnegative");
      if (cfg.engine == "mc")
        fail("bulk must be an insertion array for the mc engine");
      bulk_res = b;
    } else if (b.is_array()) {
      for (std::size_t k = 0; k < b.size(); ++k) {
        const std::string path = "bulk[" + std::to_string(k) + "]";
        reject_unknown(b[k], path, {"z", "weight"});
        if (!b[k].contains("z") || !b[k].contains("weight"))
          fail(path + " needs z and weight");
        std::complex<double> z = complex_of(b[k]["z"], path + ".z");
        if (!(z.imag() > 0.0)) fail(path + ".z must satisfy Im z > 0");
        sim::Wt w = weight_of(b[k]["weight"], path + ".weight");
        cfg.model.bulk.push_back({z, w, 1.0});
        bulk_res.push_back(
            json{{"z", {z.real(), z.imag()}}, {"weight", b[k]["weight"]}});
      }
      cfg.sym_bulk = (int)cfg.model.bulk.size();
    } else {
      fail("bulk must be an insertion array or a count");
    }
  }

  json bdry_res = json::array();
  if (j.contains("boundary")) {
    const json& b = j["boundary"];
    if (b.is_number_integer()) {
      cfg.sym_boundary = (int)b.get<std::int64_t>();
      if (cfg.sym_boundary < 0) fail("boundary count must be nonnegative");
      if (cfg.engine == "mc")
        fail("boundary must be an insertion array for the mc engine");
      bdry_res = b;
    } else if (b.is_array()) {
      for (std::size_t k = 0; k < b.size(); ++k) {
        const std::string path = "boundary[" + std::to_string(k) + "]";
        reject_unknown(b[k], path, {"s", "weight"});
        if (!b[k].contains("s") || !b[k].contains("weight"))
          fail(path + " needs s and weight");
        const double s = as_number(b[k]["s"], path + ".s");
        sim::Wt w = weight_of(b[k]["weight"], path + ".weight");
        if (!cfg.model.boundary.empty() && s <= cfg.model.boundary.back().s)
          fail("boundary insertions out of order: s[" + std::to_string(k) +
               "] = " + fmt(s) + " does not exceed its predecessor");
        cfg.model.boundary.push_back({s, w, 1.0});
        bdry_res.push_back(json{{"s", s}, {"weight", b[k]["weight"]}});
      }
      cfg.sym_boundary = (int)cfg.model.boundary.size();
    } else {
      fail("boundary must be an insertion array or a count");
    }
  }

  if (j.contains("mu_bulk")) {
    const json& mb = j["mu_bulk"];
    if (!mb.is_array() || mb.size() != 2)
      fail("mu_bulk must hold one value per component");
    for (int i = 0; i < 2; ++i)
      cfg.model.mu_bulk[i] =
          as_number(mb[i], "mu_bulk[" + std::to_string(i) + "]");
  }

  if (j.contains("mu_boundary")) {
    const json& mbd = j["mu_boundary"];
    if (!mbd.is_array() || mbd.size() != 2)
      fail("mu_boundary must hold one entry list per component");
    for (int i = 0; i < 2; ++i) {
      const std::string path = "mu_boundary[" + std::to_string(i) + "]";
      if (!mbd[i].is_array()) fail(path + " must be an array of couplings");
      for (std::size_t k = 0; k < mbd[i].size(); ++k)
        cfg.model.mu_boundary[i].push_back(
            complex_of(mbd[i][k], path + "[" + std::to_string(k) + "]"));
    }
  }

  if (j.contains("params")) parse_params(j["params"], cfg.params);

  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    reject_unknown(t, "tolerances", {"sigmas", "rel", "slope_rel"});
    if (t.contains("sigmas"))
      cfg.tol.sigmas = as_number(t["sigmas"], "tolerances.sigmas");
    if (t.contains("rel")) cfg.tol.rel = as_number(t["rel"], "tolerances.rel");
    if (t.contains("slope_rel"))
      cfg.tol.slope_rel = as_number(t["slope_rel"], "tolerances.slope_rel");
    if (!(cfg.tol.sigmas > 0.0) || !(cfg.tol.rel > 0.0) ||
        !(cfg.tol.slope_rel > 0.0))
      fail("tolerances must be positive");
  }

  if (j.contains("output")) {
    const json& o = j["output"];
    reject_unknown(o, "output", {"csv", "json"});
    if (o.contains("csv")) {
      if (!o["csv"].is_string()) fail("output.csv must be a string");
      cfg.out_csv = o["csv"].get<std::string>();
    }
    if (o.contains("json")) {
      if (!o["json"].is_string()) fail("output.json must be a string");
      cfg.out_json = o["json"].get<std::string>();
    }
  }

  if (j.contains("verbosity")) {
    const std::int64_t v = as_int(j["verbosity"], "verbosity");
    if (v < 0 || v > 2) fail("verbosity must be 0, 1, or 2");
    cfg.verbosity = (int)v;
  }

  if (cfg.engine == "mc") sim::check_seiberg(cfg.model);

  json mu_bdry = json::array();
  for (int i = 0; i < 2; ++i) {
    json comp = json::array();
    for (const auto& c : cfg.model.mu_boundary[i])
      comp.push_back({c.real(), c.imag()});
    mu_bdry.push_back(comp);
  }
  cfg.resolved =
      json{{"engine", cfg.engine},
           {"gamma", gamma_raw},
           {"bulk", cfg.engine == "symbolic" && bulk_res.is_number()
                        ? json(cfg.sym_bulk)
                        : bulk_res},
           {"boundary", cfg.engine == "symbolic" && bdry_res.is_number()
                            ? json(cfg.sym_boundary)
                            : bdry_res},
           {"mu_bulk", {cfg.model.mu_bulk[0], cfg.model.mu_bulk[1]}},
           {"mu_boundary", mu_bdry},
           {"params", params_json(cfg.params)},
           {"tolerances",
            {{"sigmas", cfg.tol.sigmas},
             {"rel", cfg.tol.rel},
             {"slope_rel", cfg.tol.slope_rel}}},
           {"output", {{"csv", cfg.out_csv}, {"json", cfg.out_json}}},
           {"verbosity", cfg.verbosity}};
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open config: " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    // the message carries line and column of the offending byte
    fail(std::string("config ") + path + ": " + e.what());
  }
  return config_from_json(j);
}

bool Report::pass() const {
  for (const auto& c : checks)
    if (!c.informational && !c.pass) return false;
  return true;
}

std::string render_csv(const std::vector<sim::ChainRow>& rows) {
  std::string out = "term,chain,value_re,value_im,stderr\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%d,%.17g,%.17g,%.17g\n", r.chain,
                  r.value.real(), r.value.imag(), r.se);
    out += r.term;
    out += buf;
  }
  return out;
}

std::string render_json(const Report& r) {
  json doc;
  doc["schema_version"] = 1;
  doc["tool_version"] = sim::kVersion;
  doc["command"] = r.command;
  doc["seed"] = r.seed;
  doc["config"] = r.resolved.is_null() ? json::object() : r.resolved;
  doc["estimates"] = r.estimates.is_null() ? json::object() : r.estimates;
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back(json{{"name", c.name},
                          {"pass", c.pass},
                          {"informational", c.informational},
                          {"detail", c.detail}});
  doc["checks"] = checks;
  doc["pass"] = r.pass();
  return doc.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp);
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

// ---------------------------------------------------------------------------
// Symbolic commands
// ---------------------------------------------------------------------------

Report run_algebra_selftest() {
  Report rep;
  rep.command = "algebra-selftest";

  Context ctx;
  VarId g = ctx.add("g", VarKind::Coupling);
  Scalar gamma = scalar_gamma(g);
  auto weight = [&](const std::string& base) -> Weight {
    return {Scalar::var(ctx.add(base + "1", VarKind::Param)),
            Scalar::var(ctx.add(base + "2", VarKind::Param))};
  };
  auto zero = [&](const Scalar& s) { return check_zero(s, ctx).zero; };
  auto push = [&](const std::string& name, bool ok, const std::string& why) {
    rep.checks.push_back({name, ok, false, ok ? "" : why});
    rep.table.push_back({name, 0, {ok ? 1.0 : 0.0, 0.0}, 0.0});
  };

  {
    bool ok = true;
    for (int i = 1; i <= 2 && ok; ++i)
      for (int j2 = 1; j2 <= 2 && ok; ++j2)
        ok = inner(fundamental_weight<Scalar>(i), simple_root<Scalar>(j2))
                 .equals(Scalar::constant(i == j2 ? 1 : 0));
    push("fundamental weights dual to simple roots", ok,
         "a pairing <omega_i, e_j> missed delta_ij");
  }
  {
    Weight u = weight("u");
    push("h functionals sum to zero", zero(h(1, u) + h(2, u) + h(3, u)),
         "h1 + h2 + h3 did not vanish on a generic weight");
  }
  {
    auto rhov = weyl_vector<Scalar>();
    bool ok = inner(rhov, simple_root<Scalar>(1)).equals(Scalar::constant(1)) &&
              inner(rhov, simple_root<Scalar>(2)).equals(Scalar::constant(1));
    push("weyl vector pairs to one with each root", ok,
         "<rho, e_i> differs from 1");
  }
  {
    Weight u = weight("a"), v = weight("b"), w = weight("c");
    bool ok = zero(cform(u, v, w) - cform(v, w, u)) &&
              zero(cform(u, v, w) - cform(w, u, v));
    push("cubic form cyclic invariance", ok,
         "C(u,v,w) changed under a cyclic shift");
  }
  {
    Weight g1 = simple_root<Scalar>(1).scaled(gamma);
    Weight g2 = simple_root<Scalar>(2).scaled(gamma);
    bool ok =
        zero(cform(g1, g2, g2) +
             gamma * h(2, simple_root<Scalar>(1)) * inner(g1, g2)) &&
        zero(cform(g2, g1, g1) +
             gamma * h(2, simple_root<Scalar>(2)) * inner(g2, g1));
    push("rooted cubic form closed form", ok,
         "C(gamma e_i, gamma e_j, gamma e_j) missed its closed form");
  }
  {
    Weight u = weight("t");
    Scalar trace;
    for (const auto& [e, w] : dual_pairs<Scalar>())
      trace = trace + inner(u, e) * inner(w, u);
    push("dual pairs trace the identity", zero(trace - inner(u, u)),
         "sum_k <u,e_k><omega_k,u> differs from <u,u>");
  }
  {
    bool ok =
        delta_alpha(simple_root<Scalar>(1).scaled(gamma), gamma)
            .equals(Scalar::constant(1)) &&
        delta_alpha(simple_root<Scalar>(2).scaled(gamma), gamma)
            .equals(Scalar::constant(1));
    push("chaos vertices have dimension one", ok,
         "delta(gamma e_i) differs from 1");
  }

  rep.estimates = json{{"identities", (int)rep.checks.size()}};
  return rep;
}

namespace {

void fill_ward_report(Report& rep, const WardReport& wr) {
  rep.checks.push_back({wr.identity + " on " + wr.configuration, wr.holds,
                        false, wr.holds ? "" : wr.witness});
  rep.table.push_back(
      {wr.identity, 0, {wr.holds ? 1.0 : 0.0, 0.0}, 0.0});
  json solved = json::object();
  for (const auto& s : wr.solved) {
    rep.checks.push_back({"solved " + s.name + " matches the closed form",
                          s.matches, false, s.value});
    rep.table.push_back(
        {"solved " + s.name, 0, {s.matches ? 1.0 : 0.0, 0.0}, 0.0});
    solved[s.name] = json{{"value", s.value}, {"matches", s.matches}};
  }
  rep.estimates = json{{"identity", wr.identity},
                       {"configuration", wr.configuration},
                       {"holds", wr.holds},
                       {"solved", solved}};
}

}  // namespace

Report run_ward_free(const RunConfig& cfg, int level, bool spin3, bool solve) {
  if (spin3 && level < 3)
    fail("the spin-3 identity needs --level at least 3");
  if (!spin3 && level < 2) fail("the conformal identity needs --level at least 2");
  Report rep;
  rep.command = "ward-free";
  rep.resolved = cfg.resolved;
  Scene sc = make_scene(cfg.sym_bulk, cfg.sym_boundary, true);
  WardReport wr = spin3 ? verify_spin3_ff(level, sc, solve)
                        : verify_conformal_ff(level, sc, solve);
  fill_ward_report(rep, wr);
  return rep;
}

Report run_ward_global(const RunConfig& cfg) {
  Report rep;
  rep.command = "ward-global";
  rep.resolved = cfg.resolved;
  Scene sc = make_scene(cfg.sym_bulk, cfg.sym_boundary, false);
  json all = json::array();
  for (const WardReport& wr : verify_global_ff(sc)) {
    rep.checks.push_back({wr.identity + " on " + wr.configuration, wr.holds,
                          false, wr.holds ? "" : wr.witness});
    rep.table.push_back(
        {wr.identity, 0, {wr.holds ? 1.0 : 0.0, 0.0}, 0.0});
    all.push_back(json{{"identity", wr.identity}, {"holds", wr.holds}});
  }
  rep.estimates = json{{"identities", all}};
  return rep;
}

Report run_identity_conformance() {
  Report rep;
  rep.command = "identity-conformance";
  int info = 0;
  for (const ConformanceEntry& e : identity_conformance()) {
    rep.checks.push_back({e.name, e.holds, e.informational,
                          e.holds ? "" : e.witness});
    rep.table.push_back({e.name, 0, {e.holds ? 1.0 : 0.0, 0.0}, 0.0});
    info += e.informational ? 1 : 0;
  }
  rep.estimates = json{{"entries", (int)rep.checks.size()},
                       {"informational", info}};
  return rep;
}

// ---------------------------------------------------------------------------
// Monte Carlo commands
// ---------------------------------------------------------------------------

namespace {

void require_mc(const RunConfig& cfg, const std::string& cmd) {
  if (cfg.engine != "mc") fail(cmd + " needs engine \"mc\"");
}

bool finite_est(const sim::Estimate& e) {
  return std::isfinite(e.value.real()) && std::isfinite(e.value.imag()) &&
         std::isfinite(e.se());
}

}  // namespace

Report run_mc_correlator(const RunConfig& cfg) {
  require_mc(cfg, "mc-correlator");
  Report rep;
  rep.command = "mc-correlator";
  rep.seed = cfg.params.seed;
  rep.resolved = cfg.resolved;
  sim::CorrelatorResult r = sim::estimate_correlator(cfg.model, cfg.params);
  rep.table = r.rows;
  rep.estimates = json{{"corr", est_json(r.corr)}};
  rep.checks.push_back({"estimate is finite", finite_est(r.corr), false,
                        fmt_est(r.corr)});
  rep.checks.push_back({"zero-mode tail bounded",
                        r.corr.tail <= cfg.params.zm_tol, false,
                        "tail " + fmt(r.corr.tail)});
  return rep;
}

Report run_mc_kpz(const RunConfig& cfg) {
  require_mc(cfg, "mc-kpz");
  Report rep;
  rep.command = "mc-kpz";
  rep.seed = cfg.params.seed;
  rep.resolved = cfg.resolved;
  sim::KpzResult r = sim::kpz_residual(cfg.model, cfg.params);
  rep.table = r.rows;
  rep.estimates = json{{"residual_1", est_json(r.residual[0])},
                       {"residual_2", est_json(r.residual[1])},
                       {"corr", est_json(r.corr)}};
  for (int i = 0; i < 2; ++i) {
    const sim::Estimate& e = r.residual[i];
    const bool ok = finite_est(e) &&
                    std::abs(e.value) <= cfg.tol.sigmas * e.se();
    rep.checks.push_back(
        {"shift relation component " + std::to_string(i + 1), ok, false,
         fmt_est(e) + " against scale " + fmt(std::abs(r.scale[i]))});
  }
  return rep;
}

Report run_mc_covariance(const RunConfig& cfg, double a, double b, double c,
                         double d) {
  require_mc(cfg, "mc-covariance");
  Report rep;
  rep.command = "mc-covariance";
  rep.seed = cfg.params.seed;
  rep.resolved = cfg.resolved;
  sim::Mobius psi = sim::normalize(a, b, c, d);
  sim::CovarianceResult r = sim::covariance_residual(cfg.model, psi, cfg.params);
  rep.table = r.rows;
  rep.estimates = json{{"mapped", est_json(r.mapped)},
                       {"base", est_json(r.base)},
                       {"factor", r.factor},
                       {"residual", est_json(r.residual)}};
  const bool ok = finite_est(r.residual) &&
                  std::abs(r.residual.value) <=
                      cfg.tol.sigmas * r.residual.se();
  rep.checks.push_back({"conformal covariance residual", ok, false,
                        fmt_est(r.residual)});
  return rep;
}

Report run_mc_fusion(const RunConfig& cfg, int anchor, int mover, double dmin,
                     double dmax, int steps) {
  require_mc(cfg, "mc-fusion");
  const int M = (int)cfg.model.boundary.size();
  if (anchor < 0 || anchor >= M || mover < 0 || mover >= M || anchor == mover)
    fail("--pair must name two distinct boundary insertions");
  if (!(dmin > 0.0) || !(dmax > dmin)) fail("need 0 < dmin < dmax");
  if (steps < 2) fail("--steps must be at least 2");
  Report rep;
  rep.command = "mc-fusion";
  rep.seed = cfg.params.seed;
  rep.resolved = cfg.resolved;
  sim::FusionResult r =
      sim::fusion_exponent(cfg.model, anchor, mover, dmin, dmax, steps,
                           cfg.params);
  rep.table = r.rows;
  json pts = json::array();
  for (const auto& pt : r.points)
    pts.push_back(json{{"d", pt.d}, {"corr", est_json(pt.corr)}});
  rep.estimates = json{{"slope", r.slope},
                       {"slope_se", r.slope_se},
                       {"target", r.target},
                       {"points", pts}};
  const bool ok = std::isfinite(r.slope) &&
                  std::abs(r.slope - r.target) <=
                      cfg.tol.slope_rel * std::abs(r.target);
  rep.checks.push_back({"fusion slope within band", ok, false,
                        "slope " + fmt(r.slope) + " (se " + fmt(r.slope_se) +
                            ") target " + fmt(r.target)});
  return rep;
}

Report run_mc_ward_t(const RunConfig& cfg, double probe) {
  require_mc(cfg, "mc-ward-t");
  Report rep;
  rep.command = "mc-ward-t";
  rep.seed = cfg.params.seed;
  rep.resolved = cfg.resolved;
  sim::WardTResult r = sim::ward_T_mc(cfg.model, probe, cfg.params);
  rep.table = r.rows;
  rep.estimates = json{{"lhs", est_json(r.lhs)},
                       {"rhs", est_json(r.rhs)},
                       {"residual", est_json(r.residual)},
                       {"rel_scale", r.rel_scale},
                       {"fd_check", r.fd_check}};
  const double band =
      std::max(cfg.tol.sigmas * r.residual.se(), cfg.tol.rel * r.rel_scale);
  const bool ok = finite_est(r.residual) && std::abs(r.residual.value) <= band;
  rep.checks.push_back({"stress tensor residual", ok, false,
                        fmt_est(r.residual) + " band " + fmt(band)});
  rep.checks.push_back({"insertion-derivative extrapolation steady",
                        r.fd_check <= 0.05 * r.rel_scale, false,
                        "half-step shift " + fmt(r.fd_check)});
  return rep;
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

int main_impl(const std::vector<std::string>& args) {
  CLI::App app{"exact and sampled verification suites for the rank-two boundary model"};
  app.name("toda");
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration");

  int level = 3;
  bool spin3 = false, solve = false;
  std::string mobius_s, pair_s;
  double dmin = 0.05, dmax = 0.5, probe = 0.0;
  int steps = 6;

  CLI::App* alg = app.add_subcommand("algebra-selftest",
                                     "exact Cartan-data identities");
  CLI::App* wf = app.add_subcommand("ward-free",
                                    "exact Ward identity at one level");
  wf->add_option("--level", level, "descendant level")->required();
  wf->add_flag("--spin3", spin3, "verify the spin-3 identity");
  wf->add_flag("--solve-weights", solve,
               "solve the weights from top pole coefficients");
  CLI::App* wg = app.add_subcommand("ward-global", "global Ward identities");
  CLI::App* ic = app.add_subcommand("identity-conformance",
                                    "re-verify the identity catalog");
  CLI::App* corr = app.add_subcommand("mc-correlator", "correlator estimate");
  CLI::App* kpz = app.add_subcommand("mc-kpz", "shift relation residuals");
  CLI::App* cov = app.add_subcommand("mc-covariance",
                                     "conformal covariance residual");
  cov->add_option("--mobius", mobius_s, "map coefficients a,b,c,d")->required();
  CLI::App* fus = app.add_subcommand("mc-fusion", "boundary fusion exponent");
  fus->add_option("--pair", pair_s, "anchor,mover boundary indices")
      ->required();
  fus->add_option("--dmin", dmin, "smallest separation")->required();
  fus->add_option("--dmax", dmax, "largest separation")->required();
  fus->add_option("--steps", steps, "ladder rungs")->required();
  CLI::App* wt = app.add_subcommand("mc-ward-t", "stress tensor probe");
  wt->add_option("--probe", probe, "boundary probe position")->required();

  std::vector<const char*> argv;
  argv.push_back("toda");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse((int)argv.size(), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty()
                        ? config_from_json(nlohmann::json::object())
                        : parse_config(config_path);
    if (const char* t = std::getenv("TODA_THREADS")) {
      const int n = std::atoi(t);
      if (n >= 1) cfg.params.threads = n;
    }

    Report rep;
    if (alg->parsed()) {
      rep = run_algebra_selftest();
      rep.resolved = cfg.resolved;
    } else if (wf->parsed()) {
      rep = run_ward_free(cfg, level, spin3, solve);
    } else if (wg->parsed()) {
      rep = run_ward_global(cfg);
    } else if (ic->parsed()) {
      rep = run_identity_conformance();
      rep.resolved = cfg.resolved;
    } else if (corr->parsed()) {
      rep = run_mc_correlator(cfg);
    } else if (kpz->parsed()) {
      rep = run_mc_kpz(cfg);
    } else if (cov->parsed()) {
      double a, b, c, d;
      if (std::sscanf(mobius_s.c_str(), "%lf,%lf,%lf,%lf", &a, &b, &c, &d) !=
          4)
        fail("--mobius needs four comma-separated numbers");
      rep = run_mc_covariance(cfg, a, b, c, d);
    } else if (fus->parsed()) {
      int anchor, mover;
      if (std::sscanf(pair_s.c_str(), "%d,%d", &anchor, &mover) != 2)
        fail("--pair needs two comma-separated indices");
      rep = run_mc_fusion(cfg, anchor, mover, dmin, dmax, steps);
    } else {
      rep = run_mc_ward_t(cfg, probe);
    }

    write_file_atomic(cfg.out_csv, render_csv(rep.table));
    write_file_atomic(cfg.out_json, render_json(rep));
    if (cfg.verbosity >= 1) {
      for (const auto& c : rep.checks) {
        const char* tag = c.pass ? "[PASS]" : (c.informational ? "[INFO]" : "[FAIL]");
        std::printf("%s %s%s%s\n", tag, c.name.c_str(),
                    c.detail.empty() ? "" : ": ", c.detail.c_str());
      }
      std::printf("%s\n", rep.pass() ? "PASS" : "FAIL");
    }
    return rep.pass() ? 0 : 1;
  } catch (const sim::SeibergError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ChargeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const sim::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace toda::cli
