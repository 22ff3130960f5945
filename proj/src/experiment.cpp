#include "fmm/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "fmm/error.hpp"
#include "fmm/green.hpp"
#include "fmm/lyapunov.hpp"
#include "fmm/moments.hpp"
#include "fmm/selftest.hpp"

#ifndef FMM_GIT_DESCRIBE
#define FMM_GIT_DESCRIBE "unknown"
#endif

namespace fmm {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Keys whose values are replaced wholesale rather than merged key by key.
const std::set<std::string> kLeafKeys{"coupling", "energies", "distances", "fit_window", "epsilon", "pairs",
                                      "volume",   "suites"};

[[noreturn]] void schema(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::SchemaViolation, path + ": " + what);
}

void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) schema(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) schema(where, "unknown key");
    json& slot = base[key];
    if (slot.is_object() && !kLeafKeys.count(key)) {
      merge(slot, value, where);
    } else {
      slot = value;
    }
  }
}

template <class T>
T get(const json& node, const std::string& key, const std::string& path) {
  if (!node.contains(key)) schema(path + "." + key, "missing");
  try {
    return node.at(key).get<T>();
  } catch (const json::exception&) {
    schema(path + "." + key, "wrong type");
  }
}

double number(const json& node, const std::string& key, const std::string& path) {
  if (!node.contains(key) || !node.at(key).is_number()) schema(path + "." + key, "expected a number");
  return node.at(key).get<double>();
}

long integer(const json& node, const std::string& key, const std::string& path) {
  if (!node.contains(key) || !node.at(key).is_number_integer()) schema(path + "." + key, "expected an integer");
  return node.at(key).get<long>();
}

std::vector<double> energy_grid(const json& node, const std::string& path) {
  if (node.is_array()) {
    std::vector<double> out;
    for (const auto& v : node) {
      if (!v.is_number()) schema(path, "energies must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (!node.is_object()) schema(path, "expected a list or {from, to, points}");
  for (const auto& [k, v] : node.items()) {
    if (k != "from" && k != "to" && k != "points") schema(path + "." + k, "unknown key");
  }
  const double from = number(node, "from", path), to = number(node, "to", path);
  const long points = integer(node, "points", path);
  if (points < 1) schema(path + ".points", "must be positive");
  std::vector<double> out;
  for (long i = 0; i < points; ++i) out.push_back(points == 1 ? from : from + (to - from) * double(i) / double(points - 1));
  return out;
}

std::vector<int> distance_grid(const json& node, const std::string& path) {
  std::vector<int> out;
  if (node.is_array()) {
    for (const auto& v : node) {
      if (!v.is_number_integer()) schema(path, "distances must be integers");
      out.push_back(v.get<int>());
    }
    return out;
  }
  if (!node.is_object()) schema(path, "expected a list or {from, to}");
  for (const auto& [k, v] : node.items()) {
    if (k != "from" && k != "to") schema(path + "." + k, "unknown key");
  }
  const long from = integer(node, "from", path), to = integer(node, "to", path);
  for (long d = from; d <= to; ++d) out.push_back(static_cast<int>(d));
  return out;
}

Volume volume_of(const json& node, const std::string& path) {
  if (!node.is_array() || node.size() != 2 || !node[0].is_number_integer() || !node[1].is_number_integer()) {
    schema(path, "expected [a, b] with integers");
  }
  return {node[0].get<int>(), node[1].get<int>()};
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
    if (!out_) throw Error(ErrorKind::InvalidSpec, "cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::string f(double v) { return format_double(v); }
std::string f(long v) { return std::to_string(v); }
std::string f(int v) { return std::to_string(v); }

struct Context {
  const json& config;
  ModelSpec spec;
  std::uint64_t seed;
  unsigned workers;
  fs::path dir;
  std::string name;
  std::ostream* progress;
  RunResult result;
  json flagged = json::object();
  json summary = json::object();

  fs::path output(const std::string& suffix) {
    result.outputs.push_back(dir / (name + suffix));
    return result.outputs.back();
  }
  void log(const std::string& line) const {
    if (progress) *progress << "[" << name << "] " << line << std::endl;
  }
};

void write_fit(Context& ctx, const DecayFit& fit) {
  CsvWriter csv(ctx.output(".fit.csv"), {"eta_hat", "eta_stderr", "C_hat", "r_squared", "window_lo", "window_hi",
                                         "n_points", "cov_logC_logC", "cov_logC_eta", "cov_eta_eta"});
  csv.row({f(fit.eta_hat), f(fit.eta_std_error), f(fit.C_hat), f(fit.r_squared), f(fit.window_lo), f(fit.window_hi),
           f(fit.n_points), f(fit.covariance(0, 0)), f(fit.covariance(0, 1)), f(fit.covariance(1, 1))});
  ctx.summary["fit"] = {{"eta_hat", fit.eta_hat}, {"eta_stderr", fit.eta_std_error}, {"C_hat", fit.C_hat},
                        {"r_squared", fit.r_squared}};
}

DecayFit fit_in_window(const CurveStats& curve, const json& window, const std::string& path) {
  if (window.is_null()) return fit_decay(curve);
  if (!window.is_array() || window.size() != 2 || !window[0].is_number_integer() || !window[1].is_number_integer()) {
    schema(path, "expected null or [lo, hi]");
  }
  return fit_decay(curve, window[0].get<int>(), window[1].get<int>());
}

void run_lyapunov(Context& ctx) {
  const json& c = ctx.config.at("lyapunov");
  const auto energies = energy_grid(c.at("energies"), "lyapunov.energies");
  const long steps = integer(c, "steps", "lyapunov");
  LyapunovOptions options;
  options.batch_size = static_cast<int>(integer(c, "batch_size", "lyapunov"));
  CsvWriter csv(ctx.output(".csv"), {"E", "gamma", "stderr", "steps"});
  for (std::size_t i = 0; i < energies.size(); ++i) {
    // one independent product per grid energy
    options.realization_index = i;
    const auto est = lyapunov_estimate(ctx.spec, energies[i], steps, ctx.seed, options);
    csv.row({f(est.energy), f(est.gamma), f(est.std_error), f(est.steps)});
    ctx.log("E=" + f(est.energy) + " gamma=" + f(est.gamma));
  }
}

void run_floquet(Context& ctx) {
  const json& c = ctx.config.at("floquet");
  const auto energies = energy_grid(c.at("energies"), "floquet.energies");
  const double eta = number(c, "eta", "floquet");
  CsvWriter csv(ctx.output(".csv"), {"E", "eta", "D", "class", "rho_re", "rho_im", "rho_abs"});
  for (double e : energies) {
    const auto fl = floquet(ctx.spec, e, eta);
    csv.row({f(e), f(eta), f(fl.discriminant), to_string(fl.classification), f(fl.rho.real()), f(fl.rho.imag()),
             f(std::abs(fl.rho))});
  }
}

void run_moments(Context& ctx) {
  const json& c = ctx.config.at("moments");
  const Volume volume = volume_of(c.at("volume"), "moments.volume");
  const auto distances = distance_grid(c.at("distances"), "moments.distances");
  MomentOptions options;
  options.workers = ctx.workers;
  if (!c.at("epsilon").is_null()) options.epsilon = number(c, "epsilon", "moments");
  const auto direction = get<std::string>(c, "direction", "moments");
  if (direction != "right" && direction != "left") schema("moments.direction", "expected \"right\" or \"left\"");
  options.direction = direction == "right" ? Direction::Right : Direction::Left;
  options.check_phase_splitting = get<bool>(c, "check_phase_splitting", "moments");
  const int n = static_cast<int>(integer(c, "n_realizations", "moments"));
  ctx.log("sampling " + std::to_string(n) + " realizations");
  const auto curve = fractional_moment_curve(ctx.spec, volume, number(c, "energy", "moments"), number(c, "s", "moments"),
                                             static_cast<int>(integer(c, "anchor", "moments")), distances, n, ctx.seed,
                                             options);
  CsvWriter csv(ctx.output(".csv"), {"distance", "y", "mean", "stderr"});
  const int sign = options.direction == Direction::Right ? 1 : -1;
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    csv.row({f(curve.distances[i]), f(curve.anchor + sign * curve.distances[i]), f(curve.means[i]),
             f(curve.std_errors[i])});
  }
  ctx.flagged = {{"flagged_realizations", curve.flagged_count},
                 {"used_realizations", curve.n_used},
                 {"n_realizations", curve.n_realizations}};
  ctx.summary["reliable"] = curve.reliable;
  ctx.summary["median_of_means"] = curve.median_of_means;
  if (ctx.spec.flavor == Flavor::Continuum) {
    ctx.summary["max_wronskian_spread"] = curve.max_wronskian_spread;
    if (options.check_phase_splitting) ctx.summary["max_phase_split_error"] = curve.max_phase_split_error;
  }
  write_fit(ctx, fit_in_window(curve, c.at("fit_window"), "moments.fit_window"));
}

void run_apriori(Context& ctx) {
  const json& c = ctx.config.at("apriori");
  std::vector<double> energies;
  if (!c.at("energies").is_null()) energies = energy_grid(c.at("energies"), "apriori.energies");
  const auto scan = apriori_bound_scan(ctx.spec, volume_of(c.at("volume"), "apriori.volume"), number(c, "s", "apriori"),
                                       energies, static_cast<int>(integer(c, "n_realizations", "apriori")), ctx.seed,
                                       ctx.workers);
  CsvWriter csv(ctx.output(".csv"),
                {"E", "diag_mean", "diag_stderr", "neighbor_mean", "neighbor_stderr", "flagged"});
  int flagged = 0;
  for (const auto& r : scan.rows) {
    csv.row({f(r.energy), f(r.diagonal_mean), f(r.diagonal_std_error), f(r.neighbor_mean), f(r.neighbor_std_error),
             f(r.flagged)});
    flagged += r.flagged;
  }
  ctx.flagged = {{"flagged_samples", flagged}, {"n_realizations", scan.n_realizations}};
  ctx.summary["max_mean"] = scan.max_mean;
  ctx.summary["max_stderr"] = scan.max_std_error;
  ctx.summary["max_energy"] = scan.max_energy;
  ctx.summary["site"] = scan.site;
}

void run_correlator(Context& ctx) {
  const json& c = ctx.config.at("correlator");
  const auto curve = correlator_curve(ctx.spec, volume_of(c.at("volume"), "correlator.volume"),
                                      number(c, "cutoff", "correlator"),
                                      static_cast<int>(integer(c, "anchor", "correlator")),
                                      distance_grid(c.at("distances"), "correlator.distances"),
                                      static_cast<int>(integer(c, "n_realizations", "correlator")), ctx.seed,
                                      ctx.workers);
  CsvWriter csv(ctx.output(".csv"), {"distance", "mean", "stderr"});
  for (std::size_t i = 0; i < curve.distances.size(); ++i) {
    csv.row({f(curve.distances[i]), f(curve.means[i]), f(curve.std_errors[i])});
  }
  write_fit(ctx, fit_in_window(curve, c.at("fit_window"), "correlator.fit_window"));
}

void run_green_probe(Context& ctx) {
  const json& c = ctx.config.at("green_probe");
  const Volume v = volume_of(c.at("volume"), "green_probe.volume");
  const double energy = number(c, "energy", "green_probe");
  const auto index = static_cast<std::uint64_t>(integer(c, "realization_index", "green_probe"));
  std::vector<std::pair<int, int>> pairs;
  for (const auto& p : c.at("pairs")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      schema("green_probe.pairs", "expected [[x, y], ...]");
    }
    pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
  }
  if (ctx.spec.flavor == Flavor::Discrete) {
    const auto r = sample_realization(ctx.spec, v.a, v.b + 1, ctx.seed, index);
    const auto direct = discrete_green_solve(r, v.a, v.b, energy);
    CsvWriter csv(ctx.output(".csv"), {"x", "y", "direct", "solution_form", "krein", "max_rel_diff"});
    double worst = 0.0;
    for (auto [x, y] : pairs) {
      const int lo = std::min(x, y), hi = std::max(x, y);
      const double d = direct(lo, hi);
      // G_[a,b](lo,hi) = [1 + G(lo, lo-1)] G_[lo,b](lo,hi)
      const auto tail = discrete_green_solution_form(r, lo, v.b, energy, hi);
      const double sol = (lo > v.a ? 1.0 + direct(lo, lo - 1) : 1.0) * tail.value;
      const double k = krein_entry(r, v.a, v.b, energy, lo, hi);
      const double diff = std::max(std::abs(sol - d), std::abs(k - d)) / std::abs(d);
      worst = std::max(worst, diff);
      csv.row({f(x), f(y), f(d), f(sol), f(k), f(diff)});
    }
    ctx.summary["max_rel_diff"] = worst;
  } else {
    const auto r = sample_realization(ctx.spec, v.a, v.b, ctx.seed, index);
    const ContinuumGreen g(ctx.spec, r, energy);
    CsvWriter csv(ctx.output(".csv"), {"x", "y", "G_mid", "hs_block", "hs_bound", "wronskian_spread", "status"});
    for (auto [x, y] : pairs) {
      csv.row({f(x), f(y), f(g.value(x + 0.5, y + 0.5)), f(g.hs_block_norm(x, y)), f(g.hs_block_bound(x, y)),
               f(g.wronskian_spread()), g.status() == GreenStatus::Ok ? "Ok" : "NearEigenvalue"});
    }
    ctx.flagged = {{"near_eigenvalue", g.status() == GreenStatus::Ok ? 0 : 1}};
  }
}

void run_selftest(Context& ctx) {
  const json& c = ctx.config.at("selftest");
  std::vector<std::string> names = get<std::vector<std::string>>(c, "suites", "selftest");
  if (names.empty()) names = selftest_suite_names();
  const int trials = static_cast<int>(integer(c, "trials", "selftest"));
  CsvWriter csv(ctx.output(".csv"), {"suite", "checks", "failures", "status"});
  json failures = json::object();
  int failed = 0;
  for (const auto& name : names) {
    const auto res = run_selftest_suite(name, ctx.spec, ctx.seed, trials);
    csv.row({name, f(res.checks), f(res.failures), res.passed() ? "pass" : "FAIL"});
    ctx.log(name + ": " + std::to_string(res.checks) + " checks, " + std::to_string(res.failures) + " failures");
    if (!res.passed()) {
      ++failed;
      failures[name] = res.messages;
    }
  }
  ctx.summary["failed_suites"] = failed;
  if (failed) ctx.summary["failures"] = failures;
}

}  // namespace

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"lyapunov", "floquet",     "moments", "apriori",
                                              "correlator", "green-probe", "selftest"};
  return names;
}

json default_config() {
  return json::parse(R"({
    "schema_version": 1,
    "master_seed": 1,
    "workers": 1,
    "output_name": "",
    "model": {
      "flavor": "continuum",
      "subcells_per_unit": 1,
      "background": [0.0],
      "single_site": [1.0],
      "coupling": {"type": "uniform", "min": 0.0, "max": 1.0}
    },
    "lyapunov": {"energies": {"from": -1.0, "to": 5.0, "points": 20}, "steps": 100000, "batch_size": 100},
    "floquet": {"energies": {"from": -2.0, "to": 40.0, "points": 100}, "eta": 0.5},
    "moments": {
      "volume": [0, 60], "energy": 2.0, "epsilon": null, "s": 0.3, "anchor": 10,
      "distances": {"from": 5, "to": 40}, "direction": "right", "n_realizations": 2000,
      "fit_window": null, "check_phase_splitting": true
    },
    "apriori": {"volume": [0, 100], "s": 0.3, "energies": null, "n_realizations": 4000},
    "correlator": {
      "volume": [0, 60], "cutoff": 10.0, "anchor": 10, "distances": {"from": 0, "to": 40},
      "n_realizations": 50, "fit_window": null
    },
    "green_probe": {"volume": [0, 40], "energy": 0.5, "realization_index": 0, "pairs": [[5, 5], [5, 20], [10, 30]]},
    "selftest": {"suites": [], "trials": 50}
  })");
}

json resolve_config(const json& user) {
  json cfg = default_config();
  if (!user.is_null()) merge(cfg, user, "");
  if (integer(cfg, "schema_version", "<root>") != kSchemaVersion) schema("schema_version", "unsupported version");
  if (integer(cfg, "master_seed", "<root>") < 0 && !cfg.at("master_seed").is_number_unsigned()) {
    schema("master_seed", "must be a non-negative 64-bit integer");
  }
  if (integer(cfg, "workers", "<root>") < 1) schema("workers", "must be at least 1");
  get<std::string>(cfg, "output_name", "<root>");
  model_from_json(cfg.at("model"));
  return cfg;
}

ModelSpec model_from_json(const json& m) {
  ModelSpec spec;
  const auto flavor = get<std::string>(m, "flavor", "model");
  if (flavor != "continuum" && flavor != "discrete") schema("model.flavor", "expected \"continuum\" or \"discrete\"");
  spec.flavor = flavor == "continuum" ? Flavor::Continuum : Flavor::Discrete;
  spec.subcells_per_unit = static_cast<int>(integer(m, "subcells_per_unit", "model"));
  spec.background = get<std::vector<double>>(m, "background", "model");
  spec.single_site = get<std::vector<double>>(m, "single_site", "model");
  const json& c = m.at("coupling");
  if (!c.is_object()) schema("model.coupling", "expected an object");
  const auto type = get<std::string>(c, "type", "model.coupling");
  auto only = [&](std::set<std::string> keys) {
    for (const auto& [k, v] : c.items()) {
      if (!keys.count(k)) schema("model.coupling." + k, "unknown key");
    }
  };
  if (type == "uniform") {
    only({"type", "min", "max"});
    spec.coupling = Uniform{number(c, "min", "model.coupling"), number(c, "max", "model.coupling")};
  } else if (type == "piecewise") {
    only({"type", "breakpoints", "densities"});
    spec.coupling = PiecewiseConstantDensity{get<std::vector<double>>(c, "breakpoints", "model.coupling"),
                                             get<std::vector<double>>(c, "densities", "model.coupling")};
  } else {
    schema("model.coupling.type", "expected \"uniform\" or \"piecewise\"");
  }
  if (spec.flavor == Flavor::Continuum) spec.validate();
  return spec;
}

json model_to_json(const ModelSpec& spec) {
  json c;
  if (const auto* u = std::get_if<Uniform>(&spec.coupling.law())) {
    c = {{"type", "uniform"}, {"min", u->min}, {"max", u->max}};
  } else {
    const auto& p = std::get<PiecewiseConstantDensity>(spec.coupling.law());
    c = {{"type", "piecewise"}, {"breakpoints", p.breakpoints}, {"densities", p.densities}};
  }
  return {{"flavor", spec.flavor == Flavor::Continuum ? "continuum" : "discrete"},
          {"subcells_per_unit", spec.subcells_per_unit},
          {"background", spec.background},
          {"single_site", spec.single_site},
          {"coupling", c}};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json error_record(const std::string& kind, const std::string& message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

RunResult run_experiment(const std::string& subcommand, const json& config, const fs::path& out_dir,
                         std::ostream* progress) {
  const auto start = std::chrono::steady_clock::now();
  const json cfg = resolve_config(config);
  Context ctx{cfg,
              model_from_json(cfg.at("model")),
              cfg.at("master_seed").get<std::uint64_t>(),
              static_cast<unsigned>(cfg.at("workers").get<long>()),
              out_dir,
              cfg.at("output_name").get<std::string>().empty() ? subcommand : cfg.at("output_name").get<std::string>(),
              progress,
              {}};
  fs::create_directories(out_dir);

  if (subcommand == "lyapunov") {
    run_lyapunov(ctx);
  } else if (subcommand == "floquet") {
    run_floquet(ctx);
  } else if (subcommand == "moments") {
    run_moments(ctx);
  } else if (subcommand == "apriori") {
    run_apriori(ctx);
  } else if (subcommand == "correlator") {
    run_correlator(ctx);
  } else if (subcommand == "green-probe") {
    run_green_probe(ctx);
  } else if (subcommand == "selftest") {
    run_selftest(ctx);
  } else {
    schema("subcommand", "unknown subcommand '" + subcommand + "'");
  }

  json outputs = json::array();
  for (const auto& p : ctx.result.outputs) outputs.push_back(p.filename().string());
  const fs::path manifest_path = out_dir / (ctx.name + ".manifest.json");
  ctx.result.manifest = {
      {"schema_version", kSchemaVersion},
      {"subcommand", subcommand},
      {"config", cfg},
      {"git_describe", FMM_GIT_DESCRIBE},
      {"wall_time_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()},
      {"master_seed", ctx.seed},
      {"workers", ctx.workers},
      {"flagged", ctx.flagged},
      {"summary", ctx.summary},
      {"outputs", outputs},
  };
  std::ofstream(manifest_path, std::ios::binary) << ctx.result.manifest.dump(2) << '\n';
  ctx.result.outputs.push_back(manifest_path);
  return ctx.result;
}

}  // namespace fmm
