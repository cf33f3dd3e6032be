#include "tbmeta/io.hpp"

#include "tbmeta/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>

namespace tbmeta {

Params params_from_json(const Json& j, const Params& defaults) {
  if (!j.is_object()) throw ValidationError("params must be a JSON object");
  Params p = defaults;
  std::vector<std::string> bad;
  const auto& names = Params::names();
  for (const auto& [key, value] : j.items()) {
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      bad.push_back("unknown parameter '" + key + "'");
    } else if (!value.is_number()) {
      bad.push_back(key + " must be a number");
    } else {
      p.set(key, value.get<double>());
    }
  }
  for (auto& v : p.violations()) bad.push_back(std::move(v));
  if (!bad.empty()) throw ValidationError(std::move(bad));
  return p;
}

Json to_json(const Params& p) {
  Json j = Json::object();
  for (auto name : Params::names()) j[std::string(name)] = p.get(name);
  return j;
}

NetworkConfig network_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("network must be a JSON object");
  if (j.contains("power_law")) {
    const Json& pl = j.at("power_law");
    std::vector<std::string> bad;
    if (!pl.is_object()) throw ValidationError("power_law must be an object");
    if (!pl.contains("exponent") || !pl["exponent"].is_number()) bad.push_back("power_law.exponent must be a number");
    if (!pl.contains("k_min") || !pl["k_min"].is_number_integer()) bad.push_back("power_law.k_min must be an integer");
    if (!pl.contains("k_max") || !pl["k_max"].is_number_integer()) bad.push_back("power_law.k_max must be an integer");
    if (!bad.empty()) throw ValidationError(std::move(bad));
    return {build_truncated_power_law(pl["exponent"].get<double>(), pl["k_min"].get<int>(), pl["k_max"].get<int>()),
            std::nullopt};
  }

  std::vector<std::string> bad;
  std::vector<int> degrees;
  std::vector<double> probs;
  if (!j.contains("degrees") || !j["degrees"].is_array()) {
    bad.push_back("degrees must be an array of integers");
  } else {
    for (const auto& d : j["degrees"]) {
      if (!d.is_number_integer()) {
        bad.push_back("degrees must be integers");
        break;
      }
      degrees.push_back(d.get<int>());
    }
  }
  if (!j.contains("probs") || !j["probs"].is_array()) {
    bad.push_back("probs must be an array of numbers");
  } else {
    for (const auto& x : j["probs"]) {
      if (!x.is_number()) {
        bad.push_back("probs must be numbers");
        break;
      }
      probs.push_back(x.get<double>());
    }
  }
  const bool has_kernel = j.contains("kernel");
  const bool flag = j.contains("uncorrelated") && j["uncorrelated"].is_boolean() && j["uncorrelated"].get<bool>();
  if (j.contains("uncorrelated") && !j["uncorrelated"].is_boolean()) bad.push_back("uncorrelated must be a boolean");
  if (has_kernel && flag) bad.push_back("give either kernel or uncorrelated:true, not both");
  if (!has_kernel && !flag) bad.push_back("network needs a kernel matrix or uncorrelated:true");
  if (!bad.empty()) throw ValidationError(std::move(bad));

  DegreeDistribution dist = DegreeDistribution::create(std::move(degrees), std::move(probs));
  if (!has_kernel) return {std::move(dist), std::nullopt};

  const Json& kj = j["kernel"];
  const auto n = static_cast<Eigen::Index>(dist.size());
  if (!kj.is_array() || static_cast<Eigen::Index>(kj.size()) != n) {
    throw ValidationError("kernel must be an n x n array matching degrees");
  }
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Json& row = kj[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw ValidationError("kernel row " + std::to_string(r) + " must have " + std::to_string(n) + " entries");
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const Json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ValidationError("kernel entries must be numbers");
      m(r, c) = v.get<double>();
    }
  }
  MixingKernel kernel = MixingKernel::from_matrix(std::move(m));
  const auto violations = validate_consistency(dist, kernel);
  if (!violations.empty()) {
    std::vector<std::string> msgs;
    for (const auto& v : violations) msgs.push_back(to_string(v));
    throw ValidationError(std::move(msgs));
  }
  return {std::move(dist), std::move(kernel)};
}

Json to_json(const DegreeDistribution& dist, const std::optional<MixingKernel>& kernel) {
  Json j;
  j["degrees"] = std::vector<int>(dist.degrees().begin(), dist.degrees().end());
  j["probs"] = std::vector<double>(dist.probs().begin(), dist.probs().end());
  if (kernel && !kernel->uncorrelated()) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < kernel->matrix().rows(); ++r) {
      std::vector<double> row(kernel->matrix().cols());
      for (Eigen::Index c = 0; c < kernel->matrix().cols(); ++c) row[static_cast<std::size_t>(c)] = kernel->matrix()(r, c);
      rows.push_back(row);
    }
    j["kernel"] = rows;
  } else {
    j["uncorrelated"] = true;
  }
  j["mean_degree"] = dist.mean_degree();
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

namespace {

Json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json certificate(const Certificate& c) { return {{"holds", c.holds}, {"margin", c.margin}}; }

}  // namespace

Json to_json(const R0Report& r) {
  Json j;
  j["value"] = r.value;
  j["method"] = std::string(to_string(r.method));
  if (r.bounds) j["bounds"] = {{"lower", r.bounds->lower}, {"upper", r.bounds->upper}};
  if (r.certificates) {
    j["certificates"] = {{"i", certificate(r.certificates->i)},
                         {"ii", certificate(r.certificates->ii)},
                         {"iii", certificate(r.certificates->iii)},
                         {"any", r.certificates->any()}};
  }
  if (r.discrepancy) {
    const auto& d = *r.discrepancy;
    j["discrepancy"] = {{"printed", d.printed},
                        {"exact", d.exact},
                        {"numeric", d.numeric},
                        {"relative_error", d.relative_error},
                        {"exact_relative_error", d.exact_relative_error},
                        {"agrees", d.agrees},
                        {"note", d.note}};
  }
  if (r.interlacing) {
    j["interlacing"] = {{"holds", r.interlacing->holds},
                        {"real_simple_positive", r.interlacing->real_simple_positive},
                        {"eigenvalues", r.interlacing->eigenvalues},
                        {"diagonal", r.interlacing->diagonal}};
  }
  if (r.power_fallback) j["power_fallback"] = true;
  return j;
}

Json to_json(const NgmCoefficients& c) {
  return {{"A_E", c.A_E}, {"A_I", c.A_I}, {"A_R", c.A_R}, {"a", c.a},   {"b", c.b},   {"a0", c.a0},
          {"b0", c.b0},   {"a1", c.a1},   {"b1", c.b1},   {"a2", c.a2}, {"b2", c.b2}, {"a3", c.a3},
          {"b3", c.b3},   {"a4", c.a4},   {"b4", c.b4},   {"a5", c.a5}, {"b5", c.b5}, {"a6", c.a6},
          {"b6", c.b6},   {"a7", c.a7},   {"b7", c.b7},   {"a8", c.a8}, {"b8", c.b8}, {"a_exceeds_b", c.a_exceeds_b}};
}

Json to_json(const EndemicSolution& s, bool with_history) {
  Json j;
  j["status"] = std::string(to_string(s.status));
  j["z_star"] = vec(s.z_star);
  j["x_star"] = vec(s.x_star);
  j["y_star"] = vec(s.y_star);
  j["residual"] = s.residual;
  j["h_value"] = s.h_value;
  j["rhs_residual"] = s.rhs_residual;
  j["rhs_ok"] = s.rhs_ok;
  j["iterations"] = s.iterations;
  j["floor_projections"] = s.floor_projections;
  if (with_history) j["residual_history"] = s.residual_history;
  return j;
}

Json to_json(const SweepResult& r, const SweepSpec& spec) {
  Json cells = Json::array();
  for (const auto& c : r.cells) {
    Json jc = {{spec.x.name, c.x}, {spec.y.name, c.y}, {"valid", c.valid}, {"r0", c.r0},
               {"r0_printed", c.r0_printed}, {"mean_degree", c.mean_degree}};
    if (c.r0_numeric) jc["r0_numeric"] = *c.r0_numeric;
    if (!c.valid) jc["error"] = c.error;
    cells.push_back(jc);
  }
  Json contour = Json::array();
  for (const auto& e : r.contour) contour.push_back({e.a, e.b});
  return {{"x", spec.x.name},     {"y", spec.y.name},       {"nx", r.nx},
          {"ny", r.ny},           {"cells", cells},         {"contour", contour},
          {"checked", r.checked}, {"max_check_error", r.max_check_error}};
}

Json to_json(const std::vector<MigrationRow>& rows) {
  Json out = Json::array();
  for (const auto& row : rows) {
    Json prev = Json::array();
    for (const auto& p : row.prevalence) prev.push_back({{"k", p.k}, {"prevalence", p.prevalence}});
    out.push_back({{"D", row.D}, {"settled", row.settled}, {"rhs_norm", row.rhs_norm},
                   {"time", row.time}, {"prevalence", prev}});
  }
  return out;
}

Json to_json(const Trajectory& t, const DegreeDistribution& dist) {
  Json samples = Json::array();
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    const auto& s = t.states[i];
    const auto& a = t.aggregates[i];
    samples.push_back({{"t", t.times[i]},
                       {"rho_S", vec(s.S)},
                       {"rho_E", vec(s.E)},
                       {"rho_I", vec(s.I)},
                       {"rho_R", vec(s.R)},
                       {"aggregate", {{"rho_S", a.S}, {"rho_E", a.E}, {"rho_I", a.I}, {"rho_R", a.R}, {"rho", a.total}}}});
  }
  return {{"degrees", std::vector<int>(dist.degrees().begin(), dist.degrees().end())},
          {"samples", samples},
          {"stats",
           {{"accepted", t.stats.accepted},
            {"rejected", t.stats.rejected},
            {"evaluations", t.stats.evaluations},
            {"clips", t.stats.clips},
            {"implicit_steps", t.stats.implicit_steps}}}};
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << format_number(m(r, c));
    }
    os << '\n';
  }
}

void write_h_curve_csv(std::ostream& os, const std::vector<HCurvePoint>& curve) {
  os << "c,H\n";
  for (const auto& pt : curve) os << format_number(pt.c) << ',' << format_number(pt.h) << '\n';
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t, const DegreeDistribution& dist) {
  os << "t,k,rho_S,rho_E,rho_I,rho_R\n";
  for (std::size_t i = 0; i < t.times.size(); ++i) {
    const auto& s = t.states[i];
    for (std::size_t k = 0; k < dist.size(); ++k) {
      const auto e = static_cast<Eigen::Index>(k);
      os << format_number(t.times[i]) << ',' << dist.degree(k) << ',' << format_number(s.S[e]) << ','
         << format_number(s.E[e]) << ',' << format_number(s.I[e]) << ',' << format_number(s.R[e]) << '\n';
    }
  }
}

void write_sweep_csv(std::ostream& os, const SweepResult& r, const SweepSpec& spec) {
  os << spec.x.name << ',' << spec.y.name << ",R0,R0_printed,R0_numeric,mean_degree,valid\n";
  for (const auto& c : r.cells) {
    os << format_number(c.x) << ',' << format_number(c.y) << ',' << format_number(c.r0) << ','
       << format_number(c.r0_printed) << ',' << (c.r0_numeric ? format_number(*c.r0_numeric) : std::string())
       << ',' << format_number(c.mean_degree) << ',' << (c.valid ? 1 : 0) << '\n';
  }
}

void write_migration_csv(std::ostream& os, const std::vector<MigrationRow>& rows) {
  os << "D,k,prevalence,settled\n";
  for (const auto& row : rows) {
    for (const auto& p : row.prevalence) {
      os << format_number(row.D) << ',' << p.k << ',' << format_number(p.prevalence) << ','
         << (row.settled ? 1 : 0) << '\n';
    }
  }
}

}  // namespace tbmeta
