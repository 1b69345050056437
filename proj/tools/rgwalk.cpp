// rgwalk: command-line driver. Every subcommand resolves a config (file, then
// flag overrides), validates it, writes `config.txt` next to its outputs and
// exits nonzero with an error object on stderr on any failure.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rgwalk/acceptance.hpp"
#include "rgwalk/config.hpp"
#include "rgwalk/cumulant.hpp"
#include "rgwalk/environment.hpp"
#include "rgwalk/error.hpp"
#include "rgwalk/parallel.hpp"
#include "rgwalk/rg_engine.hpp"
#include "rgwalk/rng.hpp"
#include "rgwalk/scaling.hpp"
#include "rgwalk/walker.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rgwalk;

namespace {

constexpr int kFormatVersion = 1;

// Files written so far by this run; reported as partial outputs on failure.
std::vector<std::string> g_written;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  g_written.push_back(path.string());
}

void write_json(const fs::path& path, json j) {
  j["format_version"] = kFormatVersion;
  write_file(path, j.dump(2) + "\n");
}

Kernel base_kernel(const ExperimentConfig& c) {
  PresetParams p;
  p.hold = c.hold;
  const BasePreset preset = parse_preset(c.preset);
  if (preset == BasePreset::custom) {
    std::ifstream in(c.custom_kernel);
    if (!in) throw Error(ErrorCode::IoError, "cannot read kernel file " + c.custom_kernel);
    std::stringstream ss;
    ss << in.rdbuf();
    const Kernel k = kernel_from_json(ss.str());
    for (std::size_t i = 0; i < k.size(); ++i) p.custom.push_back({k.offset(i), k.masses()[i]});
  }
  return make_base_kernel(preset, c.dim, p);
}

EnvParams env_params(const ExperimentConfig& c) {
  EnvParams e;
  e.model = parse_model(c.model);
  e.epsilon = c.epsilon;
  e.lambda = c.lambda;
  e.time_extent = c.time_extent;
  e.box_radius = c.box_radius;
  e.seed = c.seed;
  e.coupling = c.coupling;
  e.cml_gamma = c.cml_gamma;
  e.cml_nonlinearity = c.cml_nonlinearity;
  e.burn_in = c.burn_in;
  return e;
}

FlowConfig flow_config(const ExperimentConfig& c) {
  FlowConfig f;
  f.base = base_kernel(c);
  f.env = env_params(c);
  f.L = c.L;
  f.levels = c.levels;
  f.replicas = c.replicas;
  f.sources = c.sources;
  f.blocks = c.blocks;
  f.antithetic = c.antithetic;
  f.zeta.k_max = c.zeta_kmax;
  return f;
}

// A plot manifest names data files and the columns to draw; rendering is left to any plotting tool.
void write_manifest(const fs::path& dir, const std::vector<json>& plots) {
  json j;
  j["plots"] = plots;
  write_json(dir / "plots.json", j);
}

json plot(const std::string& title, const std::string& file, const std::string& x, std::vector<std::string> y,
          const std::string& scale = "linear") {
  return json{{"title", title}, {"data", file}, {"x", x}, {"y", y}, {"yscale", scale}};
}

int cmd_env_gen(const ExperimentConfig& c, const fs::path& out) {
  const EnvField env = gen_environment(base_kernel(c), env_params(c));
  write_env(env, (out / "env.bin").string());
  g_written.push_back((out / "env.bin").string());
  double sup = 0.0;
  for (double v : env.raw()) sup = std::max(sup, std::abs(v));
  json j{{"model", c.model}, {"epsilon", c.epsilon}, {"lambda", c.lambda}, {"dim", c.dim},
         {"time_extent", c.time_extent}, {"box_radius", c.box_radius}, {"seed", c.seed}, {"b_sup", sup}};
  write_json(out / "env.json", j);
  std::cout << "wrote " << (out / "env.bin").string() << "\n";
  return 0;
}

EnvField walk_environment(const ExperimentConfig& c, const std::string& env_file, std::uint64_t seed) {
  if (!env_file.empty()) return read_env(env_file);
  EnvParams e = env_params(c);
  e.time_extent = c.T;
  e.box_radius = std::max(c.box_radius, c.T + base_kernel(c).radius() + 1);
  e.seed = seed;
  return gen_environment(base_kernel(c), e);
}

int cmd_walk(const ExperimentConfig& c, const fs::path& out, const std::string& env_file) {
  const EnvField env = walk_environment(c, env_file, c.seed);
  WalkOptions wo;
  wo.L = c.L;
  const std::uint64_t walk_seed = derive_seed(c.seed, 1);
  const WalkEnsemble w = sample_walks(env, c.T, static_cast<std::size_t>(c.paths), walk_seed, wo);
  const DiffusionEstimate d = estimate_diffusion(w);
  const RescaledPaths rp = rescale_paths(w);

  std::ostringstream csv;
  csv << "t";
  for (int k = 0; k < c.dim; ++k) csv << ",mean_x" << k << ",var_x" << k;
  csv << "\n";
  for (int t : w.checkpoints) {
    const double tt = static_cast<double>(t) / c.T;
    csv << num(tt);
    for (int k = 0; k < c.dim; ++k) {
      const auto m = rp.marginal(tt, k);
      csv << "," << num(stats::mean(m)) << "," << num(stats::variance(m));
    }
    csv << "\n";
  }
  write_file(out / "walk_moments.csv", csv.str());

  std::vector<json> plots{plot("rescaled variance", "walk_moments.csv", "t", {"var_x0"})};
  if (c.dump_paths > 0) {
    // Path i uses the stream derive_seed(seed, i), so these coincide with the first paths above.
    WalkOptions full = wo;
    full.full_paths = true;
    const WalkEnsemble p = sample_walks(env, c.T, static_cast<std::size_t>(c.dump_paths), walk_seed, full);
    std::ostringstream pc;
    pc << "path,step" << (c.dim == 1 ? ",x0\n" : ",x0,x1\n");
    for (std::size_t i = 0; i < p.count(); ++i)
      for (std::size_t s = 0; s < p.checkpoints.size(); ++s) {
        const Offset x = p.at(i, s);
        pc << i << "," << p.checkpoints[s] << "," << x[0];
        if (c.dim == 2) pc << "," << x[1];
        pc << "\n";
      }
    write_file(out / "walks.csv", pc.str());
    plots.push_back(plot("sample paths", "walks.csv", "step", {"x0"}));
  }
  json j{{"T", c.T}, {"paths", c.paths}, {"D", d.D}, {"D_stderr", d.stderr_},
         {"D_ci", {d.ci.lo, d.ci.hi}}, {"max_excursion", w.max_excursion}, {"level", w.level}};
  write_json(out / "walk.json", j);
  write_manifest(out, plots);
  std::cout << "D = " << num(d.D) << " +- " << num(d.stderr_) << "\n";
  return 0;
}

int cmd_flow(const ExperimentConfig& c, const fs::path& out) {
  const FlowResult flow = run_flow(flow_config(c));
  std::ostringstream csv;
  csv << "level,D,D_stderr,D_moment,rho,delta,zeta,zeta_stderr,zeta_fit_stderr,increment,increment_stderr,"
         "b_sup,fixpoint_err,identity_err,symmetry_z\n";
  for (const auto& l : flow.levels)
    csv << l.level << "," << num(l.D) << "," << num(l.D_stderr) << "," << num(l.D_moment) << "," << num(l.rho) << ","
        << num(l.delta) << "," << num(l.zeta) << "," << num(l.zeta_stderr) << "," << num(l.zeta_fit_stderr) << ","
        << num(l.increment) << "," << num(l.increment_stderr) << "," << num(l.b_sup) << "," << num(l.fixpoint_err)
        << "," << num(l.identity_err) << "," << num(l.symmetry_z) << "\n";
  write_file(out / "flow.csv", csv.str());

  json j{{"D_limit", flow.D_limit}, {"D_limit_stderr", flow.D_limit_stderr},
         {"jackknife_blocks", flow.jackknife_blocks}};
  if (flow.levels.size() >= 3) {
    const ConvergenceReport rep = convergence_report(flow, c.epsilon);
    json rows = json::array();
    for (const auto& r : rep.rows)
      rows.push_back({{"level", r.level}, {"D", r.D}, {"increment", r.increment}, {"sup_err", r.sup_err},
                      {"delta", r.delta}, {"ratio", r.ratio}, {"fixpoint_err", r.fixpoint_err}});
    j["convergence"] = {{"D0", rep.D0}, {"shift_over_eps2", rep.shift_over_eps2}, {"max_ratio", rep.max_ratio},
                        {"cauchy", rep.cauchy}, {"rows", rows}};
  }
  write_json(out / "flow.json", j);
  write_manifest(out, {plot("diffusion constant", "flow.csv", "level", {"D"}),
                       plot("fixed-point distance", "flow.csv", "level", {"fixpoint_err"}, "log"),
                       plot("zeta", "flow.csv", "level", {"zeta"})});
  std::cout << "D_limit = " << num(flow.D_limit) << " +- " << num(flow.D_limit_stderr) << "\n";
  return 0;
}

int cmd_cumulants(const ExperimentConfig& c, const fs::path& out) {
  EnvParams e = env_params(c);
  e.time_extent = 1;
  e.box_radius = 1;
  const EnvField proto = gen_environment(base_kernel(c), e);
  DecayScanConfig cfg;
  cfg.level = c.level;
  cfg.L = c.L;
  cfg.orders = c.orders;
  cfg.max_sep = c.max_sep;
  cfg.replicas = c.cumulant_replicas;
  cfg.anchors = c.anchors;
  cfg.n0 = c.n0;
  const DecayScan scan = decay_scan(proto, cfg);

  std::ostringstream csv;
  csv << "order,separation,tau,estimate,stderr,weighted,weighted_stderr,resolved\n";
  for (const auto& r : scan.rows)
    csv << r.order << "," << r.separation << "," << num(r.estimate.tau) << "," << num(r.estimate.value.value) << ","
        << num(r.estimate.value.stderr_) << "," << num(r.estimate.weighted) << "," << num(r.estimate.weighted_stderr)
        << "," << (r.resolved ? 1 : 0) << "\n";
  write_file(out / "cumulants.csv", csv.str());

  json fits = json::object();
  for (const auto& [order, f] : scan.fits)
    fits[std::to_string(order)] = {{"rate", std::isfinite(f.rate) ? json(f.rate) : json("inf")},
                                   {"rate_stderr", f.rate_stderr}, {"eps_hat", f.eps_hat}, {"points", f.points},
                                   {"super_exponential", f.super_exponential},
                                   {"log_inv_delta", f.log_inv_delta}};
  write_json(out / "cumulants.json", {{"level", scan.level}, {"lambda", scan.lambda}, {"replicas", scan.replicas},
                                      {"integrated_norm", scan.integrated_norm},
                                      {"integrated_norm_stderr", scan.integrated_norm_stderr}, {"fits", fits}});
  write_manifest(out, {plot("weighted cumulants", "cumulants.csv", "separation", {"weighted"}, "log")});
  return 0;
}

int cmd_scaling(const ExperimentConfig& c, const fs::path& out) {
  const Kernel base = base_kernel(c);
  double D = physical_second_moment(base);
  if (c.epsilon > 0.0) D = run_flow(flow_config(c)).D_limit;
  json reports = json::array();
  std::ostringstream csv;
  csv << "env_seed,test,t0,t1,coordinate,statistic,p_value,pass\n";
  bool all = true;
  for (int s = 0; s < c.env_seeds; ++s) {
    const std::uint64_t seed = derive_seed(c.seed, 100 + static_cast<std::uint64_t>(s));
    const EnvField env = walk_environment(c, "", seed);
    WalkOptions wo;
    wo.L = c.L;
    for (double t : c.times) wo.checkpoints.push_back(static_cast<int>(std::lround(t * c.T)));
    const WalkEnsemble w = sample_walks(env, c.T, static_cast<std::size_t>(c.paths), derive_seed(seed, 1), wo);
    const FddReport rep = fdd_compare(rescale_paths(w), D, c.times, c.alpha);
    for (const auto& t : rep.tests)
      csv << s << "," << t.name << "," << num(t.t0) << "," << num(t.t1) << "," << t.coordinate << ","
          << num(t.statistic) << "," << num(t.p_value) << "," << (t.pass ? 1 : 0) << "\n";
    json corr = json::array();
    for (const auto& r : rep.correlations)
      corr.push_back({{"t0", r.t0}, {"t1", r.t1}, {"t2", r.t2}, {"coordinate", r.coordinate}, {"r", r.r},
                      {"bound", r.bound}, {"pass", r.pass}});
    reports.push_back({{"env_seed", s}, {"pass", rep.pass}, {"alpha_per_test", rep.alpha_per_test},
                       {"count", rep.count}, {"correlations", corr}});
    all = all && rep.pass;
  }
  write_file(out / "scaling.csv", csv.str());
  write_json(out / "scaling.json", {{"D_reference", D}, {"times", c.times}, {"alpha", c.alpha}, {"pass", all},
                                    {"reports", reports}});
  write_manifest(out, {plot("p-values", "scaling.csv", "env_seed", {"p_value"}, "log")});
  std::cout << (all ? "pass" : "FAIL") << "\n";
  return all ? 0 : 1;
}

int cmd_reproduce(const ExperimentConfig& c, const fs::path& out, const std::string& suite) {
  AcceptanceOptions opts;
  opts.seed = c.seed;
  opts.log = [](const std::string& s) { std::cerr << s << "\n"; };
  std::vector<CriterionResult> results;
  bool all = true;
  for (int id : suite_criteria(suite)) {
    results.push_back(run_criterion(id, opts));
    std::cout << format_result(results.back()) << std::endl;
    all = all && results.back().pass;
  }
  write_file(out / "acceptance.json", results_to_json(results) + "\n");
  std::cout << (all ? "ALL PASS" : "FAILED") << "\n";
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Renormalization-group and Monte Carlo experiments for random walks in random environments"};
  app.require_subcommand(1);
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::vector<std::string> sets;
  app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "override as key=value (repeatable)");
  for (const auto& key : config_keys())
    app.add_option("--" + key, overrides[key], "override config key " + key);

  std::string env_file, suite = "all";
  auto* env_gen = app.add_subcommand("env-gen", "generate one environment realization");
  auto* walk = app.add_subcommand("walk", "sample quenched walks");
  walk->add_option("--env", env_file, "environment file from env-gen");
  auto* flow = app.add_subcommand("flow", "run the RG flow and its diagnostics");
  auto* cum = app.add_subcommand("cumulants", "cumulant decay scan");
  auto* scaling = app.add_subcommand("scaling", "finite-dimensional distribution tests");
  auto* reproduce = app.add_subcommand("reproduce", "run acceptance criteria");
  reproduce->add_option("--suite", suite, "b0, disorder, calibration or all")
      ->check(CLI::IsMember({"b0", "disorder", "calibration", "all"}));
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // Unknown flags are unknown config keys as far as callers are concerned.
    std::cerr << json{{"error", "SchemaError"}, {"message", e.what()}, {"partial_outputs", json::array()}}.dump()
              << std::endl;
    return 2;
  }

  fs::path out;
  try {
    ExperimentConfig cfg = config_file.empty() ? ExperimentConfig{} : load_config(config_file);
    for (const auto& [key, value] : overrides)
      if (app.count("--" + key) > 0) set_config_value(cfg, key, value);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::SchemaError, "--set expects key=value, got '" + s + "'");
      set_config_value(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    validate_config(cfg);
    if (cfg.threads > 0) set_worker_count(static_cast<std::size_t>(cfg.threads));

    out = cfg.out_dir;
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + out.string());
    write_file(out / "config.txt", config_to_text(cfg));

    if (*env_gen) return cmd_env_gen(cfg, out);
    if (*walk) return cmd_walk(cfg, out, env_file);
    if (*flow) return cmd_flow(cfg, out);
    if (*cum) return cmd_cumulants(cfg, out);
    if (*scaling) return cmd_scaling(cfg, out);
    if (*reproduce) return cmd_reproduce(cfg, out, suite);
  } catch (const std::exception& e) {
    json err;
    if (const auto* re = dynamic_cast<const Error*>(&e)) {
      err["error"] = std::string(re->name());
    } else if (dynamic_cast<const std::invalid_argument*>(&e) != nullptr) {
      err["error"] = "InvalidArgument";
    } else {
      err["error"] = "InternalError";
    }
    err["message"] = e.what();
    err["partial_outputs"] = g_written;
    std::cerr << err.dump() << std::endl;
    if (!out.empty() && !g_written.empty()) {
      std::ofstream(out / "INCOMPLETE.json") << err.dump(2) << "\n";
    }
    return 2;
  }
  return 0;
}
