#include "cli.hpp"

#include <tbmeta/endemic.hpp>
#include <tbmeta/errors.hpp>
#include <tbmeta/integrate.hpp>
#include <tbmeta/io.hpp>
#include <tbmeta/ngm.hpp>
#include <tbmeta/sweep.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace tbmeta::cli {

namespace {

struct Globals {
  std::string params_path;
  std::string network_path;
  std::string out_path;
  std::string format;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::vector<std::string> sets;
  std::optional<double> beta, delta, eta, diffusion;
  std::string kind = "standard";
};

Params load_params(const Globals& g) {
  Params p = g.params_path.empty() ? Params::table1() : params_from_json(read_json_file(g.params_path));
  std::vector<std::string> bad;
  for (const auto& s : g.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      bad.push_back("--set expects name=value, got '" + s + "'");
      continue;
    }
    const std::string name = s.substr(0, eq);
    const auto& names = Params::names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      bad.push_back("unknown parameter '" + name + "'");
      continue;
    }
    try {
      std::size_t pos = 0;
      const double v = std::stod(s.substr(eq + 1), &pos);
      if (pos != s.size() - eq - 1) throw std::invalid_argument(name);
      p.set(name, v);
    } catch (const std::exception&) {
      bad.push_back(name + ": malformed number");
    }
  }
  if (g.beta) p.beta = *g.beta;
  if (g.delta) p.delta = *g.delta;
  if (g.eta) p.eta = *g.eta;
  if (g.diffusion) p = p.with_diffusion(*g.diffusion);
  for (auto& v : p.violations()) bad.push_back(std::move(v));
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return p;
}

/// Without --network the power law p(k) ~ k^-3 on 3..100 is used.
NetworkConfig load_network(const Globals& g) {
  if (g.network_path.empty()) return {build_truncated_power_law(3.0, 3, 100), std::nullopt};
  return network_from_json(read_json_file(g.network_path));
}

/// Writes to --out when given, stdout otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : fallback_(fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ValidationError("cannot open '" + path + "' for writing");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : fallback_; }

 private:
  std::ofstream file_;
  std::ostream& fallback_;
};

void emit_json(const Globals& g, std::ostream& out, const Json& j) {
  Sink sink(g.out_path, out);
  sink.stream() << j.dump(2) << '\n';
}

int cmd_net(const Globals& g, std::ostream& out, std::optional<double> exponent, std::optional<int> k_min,
            std::optional<int> k_max, std::optional<double> target_mean) {
  NetworkConfig net = [&]() -> NetworkConfig {
    if (!exponent && !k_min && !k_max) return load_network(g);
    return {build_truncated_power_law(exponent.value_or(3.0), k_min.value_or(3), k_max.value_or(100)),
            std::nullopt};
  }();
  Json extra = Json::object();
  if (target_mean) {
    const auto cal = calibrate_mean_degree(*target_mean, exponent.value_or(3.0), k_min.value_or(3),
                                           k_max.value_or(100), g.tol.value_or(1e-6));
    extra = {{"target_mean", *target_mean}, {"exponent", cal.exponent}, {"k_max", cal.k_max},
             {"achieved_mean", cal.achieved_mean}, {"reached", cal.reached}};
    net = {cal.dist, std::nullopt};
  }
  const MixingKernel kernel = net.kernel ? *net.kernel : uncorrelated_kernel(net.dist);
  const Matrix c = connectivity_matrix(net.dist, kernel);
  if (g.format == "csv") {
    Sink sink(g.out_path, out);
    write_matrix_csv(sink.stream(), c);
    return kExitOk;
  }
  Json j = to_json(net.dist, net.kernel);
  Json violations = Json::array();
  for (const auto& v : validate_consistency(net.dist, kernel)) violations.push_back(to_string(v));
  j["violations"] = violations;
  if (!extra.empty()) j["calibration"] = extra;
  emit_json(g, out, j);
  return kExitOk;
}

int cmd_r0(const Globals& g, std::ostream& out, bool coefficients) {
  const Params p = load_params(g);
  const NetworkConfig net = load_network(g);
  if (!net.uncorrelated()) throw ValidationError("R0 analysis is defined for the uncorrelated closure only");
  const IncidenceKind kind = parse_incidence(g.kind);

  R0Report report;
  if (kind == IncidenceKind::StandardIncidence) {
    report = r0_numeric(p, net.dist, kind);
  } else {
    report = r0_mass_structured(p, net.dist, CoefficientSource::Modal);
    report.certificates = instability_certificates(p, net.dist);
    if (!report.bounds) report.bounds = r0_bounds_mass(p, net.dist);
  }
  try {
    report.discrepancy = closed_form_discrepancy(p, net.dist, kind);
  } catch (const NumericalError&) {
    // printed chain degenerate for these parameters; the numeric value stands on its own
  }

  if (g.format == "json") {
    Json j = to_json(report);
    j["kind"] = std::string(to_string(kind));
    if (coefficients) {
      try {
        j["coefficients"] = to_json(ngm_coefficients(p));
      } catch (const NumericalError& e) {
        j["coefficients"] = {{"error", e.what()}};
      }
      const auto m = modal_coefficients(p);
      j["modal_coefficients"] = {{"a8", m.a8}, {"b8", m.b8}};
    }
    emit_json(g, out, j);
  } else if (g.format == "csv") {
    Sink sink(g.out_path, out);
    sink.stream() << "method,value\n" << to_string(report.method) << ',' << format_number(report.value) << '\n';
    if (report.discrepancy) {
      sink.stream() << "ClosedForm," << format_number(report.discrepancy->printed) << '\n';
    }
  } else {
    Sink sink(g.out_path, out);
    sink.stream() << format_number(report.value) << '\n';
  }
  return kExitOk;
}

MetapopState initial_state(const Globals& g, const Params& p, const DegreeDistribution& dist,
                           const std::string& init, double fraction) {
  if (init == "dfe") return dfe(p, dist);
  if (init == "perturbed") return perturbed_dfe(p, dist, fraction, g.seed);
  throw ValidationError("--init must be dfe or perturbed");
}

ModelRhs make_rhs(const Params& p, const NetworkConfig& net, const ModelOptions& options) {
  if (net.kernel && !net.kernel->uncorrelated()) return ModelRhs(p, net.dist, *net.kernel, options);
  return ModelRhs(p, net.dist, options);
}

int cmd_simulate(const Globals& g, std::ostream& out, double t_end, double cadence, const std::string& init,
                 double fraction, bool no_reinfection) {
  const Params p = load_params(g);
  const NetworkConfig net = load_network(g);
  const ModelOptions options{parse_incidence(g.kind), !no_reinfection};
  const ModelRhs rhs = make_rhs(p, net, options);
  IntegratorControls controls;
  if (g.tol) controls.rtol = *g.tol;
  const Trajectory traj = integrate(rhs, initial_state(g, p, net.dist, init, fraction), t_end, cadence, controls);
  if (g.format == "json") {
    emit_json(g, out, to_json(traj, net.dist));
  } else {
    Sink sink(g.out_path, out);
    write_trajectory_csv(sink.stream(), traj, net.dist);
  }
  return kExitOk;
}

int cmd_endemic(const Globals& g, std::ostream& out, int starts, double damping, int max_iter,
                const std::string& scan, bool history) {
  const Params p = load_params(g);
  const NetworkConfig net = load_network(g);
  if (!net.uncorrelated()) throw ValidationError("the endemic solver is defined for the uncorrelated closure only");

  if (!scan.empty()) {
    const SweepAxis a = parse_axis("c:" + scan);
    const auto curve = h_curve(p, net.dist, a.min, a.max, a.steps);
    if (g.format == "json") {
      Json j = Json::array();
      for (const auto& pt : curve) j.push_back({{"c", pt.c}, {"H", pt.h}});
      emit_json(g, out, {{"h_curve", j}, {"h_limit_zero", h_limit_zero(p, net.dist)}});
    } else {
      Sink sink(g.out_path, out);
      write_h_curve_csv(sink.stream(), curve);
    }
    return kExitOk;
  }

  EndemicOptions opts;
  opts.damping = damping;
  opts.max_iter = max_iter;
  if (g.tol) opts.tol = *g.tol;
  const double r0 = r0_mass_structured(p, net.dist).value;

  Json j;
  j["r0"] = r0;
  j["h_limit_zero"] = h_limit_zero(p, net.dist);
  int code = kExitOk;
  if (starts <= 1) {
    const EndemicSystem sys(p, net.dist);
    const Vector init = 0.01 * p.beta * sys.x0() + Vector::Constant(sys.size(), kIterateFloor);
    const EndemicSolution s = solve_endemic(sys, init, opts);
    j["solution"] = to_json(s, history);
    if (s.status == EndemicStatus::NotConverged) code = kExitNumerical;
  } else {
    const auto sols = multi_start_scan(p, net.dist, starts, g.seed.value_or(0), opts);
    Json arr = Json::array();
    for (const auto& s : sols) arr.push_back(to_json(s, history));
    j["solutions"] = arr;
  }
  emit_json(g, out, j);
  return code;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("malformed number '" + item + "' in list");
    }
  }
  return v;
}

int cmd_sweep(const Globals& g, std::ostream& out, const std::vector<std::string>& axes, const std::string& migration,
              double check_fraction, double exponent, int k_min, bool no_reinfection) {
  const Params p = load_params(g);
  if (!migration.empty()) {
    const NetworkConfig net = load_network(g);
    if (!net.uncorrelated()) throw ValidationError("migration sweeps use the uncorrelated closure");
    SettleOptions settle;
    if (g.tol) settle.controls.rtol = *g.tol;
    const auto rows = sweep_migration(parse_list(migration), p, net.dist,
                                      {parse_incidence(g.kind), !no_reinfection}, settle);
    if (g.format == "json") {
      emit_json(g, out, to_json(rows));
    } else {
      Sink sink(g.out_path, out);
      write_migration_csv(sink.stream(), rows);
    }
    return std::all_of(rows.begin(), rows.end(), [](const MigrationRow& r) { return r.settled; }) ? kExitOk
                                                                                                : kExitNumerical;
  }

  if (axes.size() != 2) throw ValidationError("a phase sweep needs exactly two --axis options");
  SweepSpec spec;
  spec.x = parse_axis(axes[0]);
  spec.y = parse_axis(axes[1]);
  spec.kind = parse_incidence(g.kind);
  spec.base = p;
  spec.check_fraction = check_fraction;
  spec.seed = g.seed.value_or(0);
  spec.network.exponent = exponent;
  spec.network.k_min = k_min;
  if (spec.x.name != "k_max" && spec.y.name != "k_max") {
    const NetworkConfig net = load_network(g);
    if (!net.uncorrelated()) throw ValidationError("R0 sweeps use the uncorrelated closure");
    spec.fixed = net.dist;
  }
  const SweepResult r = sweep_r0_phase(spec);
  if (g.format == "json") {
    emit_json(g, out, to_json(r, spec));
  } else {
    Sink sink(g.out_path, out);
    write_sweep_csv(sink.stream(), r, spec);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TB metapopulation model on degree-structured networks", "tbmeta"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--params", g.params_path, "Parameter JSON (flat object keyed by symbol)");
  app.add_option("--network", g.network_path, "Network JSON");
  app.add_option("--out", g.out_path, "Output file (default: stdout)");
  app.add_option("--format", g.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--tol", g.tol, "Tolerance (integrator rtol, solver tol or calibration tol)")
      ->check(CLI::PositiveNumber);
  app.add_option("--set", g.sets, "Override a parameter, name=value (repeatable)");
  app.add_option("--beta", g.beta, "Override beta");
  app.add_option("--delta", g.delta, "Override delta");
  app.add_option("--eta", g.eta, "Override eta");
  app.add_option("--diffusion", g.diffusion, "Set D_S = D_E = D_I = D_R");
  app.add_option("--kind", g.kind, "Incidence: standard or mass")->check(CLI::IsMember({"standard", "mass"}));

  auto* net = app.add_subcommand("net", "Build or validate a degree distribution and kernel");
  std::optional<double> exponent, target_mean;
  std::optional<int> k_min, k_max;
  net->add_option("--exponent", exponent, "Power-law exponent");
  net->add_option("--k-min", k_min, "Smallest degree");
  net->add_option("--k-max", k_max, "Largest degree (upper limit when calibrating)");
  net->add_option("--target-mean", target_mean, "Calibrate k_max, then the exponent, towards this <k>");

  auto* r0 = app.add_subcommand("r0", "Basic reproduction number");
  bool coefficients = false;
  r0->add_flag("--coefficients", coefficients, "Include the coefficient chain (json output)");

  auto* sim = app.add_subcommand("simulate", "Integrate the model and export the trajectory");
  double t_end = 100.0, cadence = 1.0, fraction = 0.01;
  std::string init = "perturbed";
  bool no_reinfection = false;
  sim->add_option("--t-end", t_end, "Final time, years")->check(CLI::PositiveNumber);
  sim->add_option("--cadence", cadence, "Sampling interval, years")->check(CLI::PositiveNumber);
  sim->add_option("--init", init, "dfe or perturbed")->check(CLI::IsMember({"dfe", "perturbed"}));
  sim->add_option("--fraction", fraction, "Infectious fraction of the perturbed start");
  sim->add_flag("--no-reinfection", no_reinfection, "Drop re-infection of recovered");

  auto* end = app.add_subcommand("endemic", "Endemic equilibrium of the mass-action model");
  int starts = 1, max_iter = 100000;
  double damping = 0.5;
  std::string scan;
  bool history = false;
  end->add_option("--starts", starts, "Number of random starts (1: deterministic start)");
  end->add_option("--damping", damping, "Damping in (0, 1]");
  end->add_option("--max-iter", max_iter, "Iteration cap");
  end->add_option("--scan-h", scan, "H-curve c_min:c_max:steps[:log]; emits (c, H(c 1))");
  end->add_flag("--history", history, "Include the residual history");

  auto* sweep = app.add_subcommand("sweep", "R0 phase sweeps and migration sweeps");
  std::vector<std::string> axes;
  std::string migration;
  double check_fraction = 0.05, sweep_exponent = 3.0;
  int sweep_k_min = 3;
  bool sweep_no_reinfection = false;
  sweep->add_option("--axis", axes, "name:min:max:steps[:log] (twice)");
  sweep->add_option("--migration", migration, "Comma-separated diffusion values");
  sweep->add_option("--check-fraction", check_fraction, "Share of cells checked against rho(F V^-1)");
  sweep->add_option("--exponent", sweep_exponent, "Power-law exponent when k_max is an axis");
  sweep->add_option("--k-min", sweep_k_min, "k_min when k_max is an axis");
  sweep->add_flag("--no-reinfection", sweep_no_reinfection, "Drop re-infection in migration sweeps");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (*net) return cmd_net(g, out, exponent, k_min, k_max, target_mean);
    if (*r0) return cmd_r0(g, out, coefficients);
    if (*sim) return cmd_simulate(g, out, t_end, cadence, init, fraction, no_reinfection);
    if (*end) return cmd_endemic(g, out, starts, damping, max_iter, scan, history);
    if (*sweep) {
      return cmd_sweep(g, out, axes, migration, check_fraction, sweep_exponent, sweep_k_min, sweep_no_reinfection);
    }
  } catch (const ValidationError& e) {
    for (const auto& msg : e.problems()) err << "error: " << msg << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitValidation;
}

}  // namespace tbmeta::cli
