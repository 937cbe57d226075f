#include "fpnet/config.hpp"

#include "fpnet/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fpnet {

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"network", "topology", "random_connected", "complete | ring | path | random_connected"},
      {"network", "n_agents", "6", "number of agents; must match the operator suite"},
      {"network", "edge_prob", "0.4", "edge probability of random_connected"},
      {"network", "graph_seed", "7", "seed of random_connected"},
      {"operators", "suite", "nonconvex", "nonconvex | strongly_convex | quadratic"},
      {"operators", "dim", "30", "problem dimension n"},
      {"operators", "box", "auto", "operating box radius; auto = suite default"},
      {"operators", "x_star", "auto", "auto (solve when contractive) | solve | none"},
      {"operators", "quadratic_curvature", "1,1,1,1,1,1", "quadratic suite: per-agent curvature list"},
      {"operators", "quadratic_linear", "-1,-0.6,-0.2,0.2,0.6,1", "quadratic suite: per-agent linear coefficient list"},
      {"operators", "quadratic_tau", "0.5", "quadratic suite: step tau of T_i = Id - tau grad f_i"},
      {"oracle", "mechanism", "additive_gaussian", "additive_gaussian | zeroth_order | synthetic_bias"},
      {"oracle", "noise_std", "0", "per-coordinate std of the operator noise"},
      {"oracle", "gradient_noise_variance", "none", "per-coordinate gradient noise variance; std = tau sqrt(var)"},
      {"oracle", "noise_total_variance", "none", "E|noise|^2; std = sqrt(var / n)"},
      {"oracle", "z_radius", "0.001", "zeroth_order smoothing radius"},
      {"oracle", "beta", "0", "synthetic_bias constant bias magnitude"},
      {"oracle", "p", "0", "synthetic_bias state-dependent slope"},
      {"oracle", "d_bound", "auto", "declared D; auto = empirical estimate on the box"},
      {"compression", "kind", "c1", "identity | c1 | c2 | c3"},
      {"compression", "l_bits", "2", "c1 quantisation bits l"},
      {"compression", "delta", "1", "c2/c3 lattice step"},
      {"compression", "p_keep", "0.75", "c3 keep probability"},
      {"compression", "float_bits", "64", "bits per float b"},
      {"compression", "int_bits", "8", "bits per integer q"},
      {"scheduling", "policy", "fixed_period", "every_step | fixed_period | random_gap | front_loaded"},
      {"scheduling", "h", "3", "period (fixed_period) or gap cap H"},
      {"scheduling", "schedule_seed", "1", "seed of random_gap"},
      {"scheduling", "step", "inv_sqrt", "inv_sqrt | inv_linear | constant"},
      {"scheduling", "a", "80", "step offset a; auto = 1.1 x theorem minimum"},
      {"scheduling", "b", "0.8", "step scale b; auto = theorem maximum (inv_sqrt) or 1.1 x minimum (inv_linear)"},
      {"scheduling", "gamma", "0.7", "consensus step; auto = 0.9 gamma_max"},
      {"scheduling", "psi", "0.99", "estimate step; auto = 1/r"},
      {"scheduling", "freeze_scale", "false", "hold s_t at s_0"},
      {"engine", "horizon", "20000", "iterations T"},
      {"engine", "seed", "1", "master seed"},
      {"engine", "x0", "zero", "zero | random_ball | constant"},
      {"engine", "x0_value", "0", "ball radius or constant value"},
      {"engine", "run_id", "run", "output file stem"},
  };
  return schema;
}

namespace {

const ConfigKey* find_key(const std::string& section, const std::string& key) {
  for (const auto& k : config_schema())
    if (k.section == section && k.key == key) return &k;
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& k : config_schema())
    if (k.section == section) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string dotted(const std::string& section, const std::string& key) { return section + "." + key; }

}  // namespace

ConfigDoc::ConfigDoc() {
  for (const auto& k : config_schema()) values_[dotted(k.section, k.key)] = k.default_value;
}

const std::string& ConfigDoc::get(const std::string& section, const std::string& key) const {
  const auto it = values_.find(dotted(section, key));
  if (it == values_.end()) throw ParseError("unknown config key '" + dotted(section, key) + "'");
  return it->second;
}

void ConfigDoc::set(const std::string& section, const std::string& key, const std::string& value) {
  if (!find_key(section, key)) throw ParseError("unknown config key '" + dotted(section, key) + "'");
  if (value.empty()) throw ParseError("empty value for '" + dotted(section, key) + "'");
  values_[dotted(section, key)] = value;
}

bool ConfigDoc::is_default(const std::string& section, const std::string& key) const {
  const ConfigKey* k = find_key(section, key);
  return k && get(section, key) == k->default_value;
}

double ConfigDoc::get_double(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ParseError("key '" + dotted(section, key) + "': expected a number, got '" + v + "'");
}

long ConfigDoc::get_long(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ParseError("key '" + dotted(section, key) + "': expected an integer, got '" + v + "'");
}

std::uint64_t ConfigDoc::get_u64(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] != '-') {
      const unsigned long long d = std::stoull(v, &pos);
      if (pos == v.size()) return d;
    }
  } catch (const std::logic_error&) {
  }
  throw ParseError("key '" + dotted(section, key) + "': expected a non-negative integer, got '" + v + "'");
}

bool ConfigDoc::get_bool(const std::string& section, const std::string& key) const {
  const std::string& v = get(section, key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ParseError("key '" + dotted(section, key) + "': expected true or false, got '" + v + "'");
}

std::string ConfigDoc::to_text() const {
  std::ostringstream os;
  std::string section;
  for (const auto& k : config_schema()) {
    if (k.section != section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.key << " = " << get(k.section, k.key) << '\n';
  }
  return os.str();
}

namespace {

// Shared line scanner; `meta` receives the [run] section when non-null.
ConfigDoc parse_lines(const std::string& text, const std::string& origin,
                      std::vector<std::pair<std::string, std::string>>* meta) {
  ConfigDoc doc;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::map<std::string, int> seen;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(is, raw)) {
    ++lineno;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section) && !(meta && section == "run")) fail("unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("missing key before '='");
    if (section.empty()) fail("key '" + key + "' appears before any [section]");
    if (meta && section == "run") {
      meta->emplace_back(key, value);
      continue;
    }
    if (!find_key(section, key)) fail("unknown key '" + dotted(section, key) + "'");
    if (value.empty()) fail("empty value for key '" + dotted(section, key) + "'");
    const auto [it, fresh] = seen.emplace(dotted(section, key), lineno);
    if (!fresh) fail("duplicate key '" + dotted(section, key) + "' (first on line " + std::to_string(it->second) + ")");
    doc.set(section, key, value);
  }
  return doc;
}

}  // namespace

ConfigDoc parse_config(const std::string& text, const std::string& origin) {
  return parse_lines(text, origin, nullptr);
}

ConfigDoc load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("io", "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path);
}

void apply_override(ConfigDoc& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ParseError("override '" + assignment + "' is not of the form section.key=value");
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  doc.set(section, key, trim(assignment.substr(eq + 1)));
}

namespace {

bool is_auto(const std::string& v) { return v == "auto"; }

std::vector<double> number_list(const ConfigDoc& doc, const std::string& section, const std::string& key) {
  const std::string& v = doc.get(section, key);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    std::size_t pos = 0;
    try {
      out.push_back(std::stod(item, &pos));
    } catch (const std::logic_error&) {
      pos = 0;
    }
    if (pos == 0 || pos != item.size())
      throw ParseError("key '" + dotted(section, key) + "': expected a comma-separated number list, got '" + v + "'");
  }
  return out;
}

GlobalOperator build_suite(const ConfigDoc& doc) {
  const std::string suite = doc.get("operators", "suite");
  const long dim = doc.get_long("operators", "dim");
  if (dim < 1) throw InvalidParameter("operators.dim must be >= 1");
  const std::string box = doc.get("operators", "box");
  if (suite == "nonconvex")
    return make_nonconvex_suite(static_cast<int>(dim), is_auto(box) ? kNonconvexBox : doc.get_double("operators", "box"));
  if (suite == "strongly_convex")
    return make_strongly_convex_suite(static_cast<int>(dim),
                                      is_auto(box) ? kStronglyConvexBox : doc.get_double("operators", "box"));
  if (suite == "quadratic")
    return make_quadratic_suite(static_cast<int>(dim), number_list(doc, "operators", "quadratic_curvature"),
                                number_list(doc, "operators", "quadratic_linear"),
                                doc.get_double("operators", "quadratic_tau"),
                                is_auto(box) ? kNonconvexBox : doc.get_double("operators", "box"));
  throw InvalidParameter("unknown operator suite '" + suite + "'");
}

OracleConfig build_oracle(const ConfigDoc& doc, const GlobalOperator& g) {
  OracleConfig oc;
  oc.mechanism = parse_mechanism(doc.get("oracle", "mechanism"));
  oc.z_radius = doc.get_double("oracle", "z_radius");
  oc.beta_scale = doc.get_double("oracle", "beta");
  oc.p_scale = doc.get_double("oracle", "p");
  const bool grad_var = doc.get("oracle", "gradient_noise_variance") != "none";
  const bool total_var = doc.get("oracle", "noise_total_variance") != "none";
  const bool plain = !doc.is_default("oracle", "noise_std");
  if (int(grad_var) + int(total_var) + int(plain) > 1)
    throw InvalidParameter("set at most one of oracle.noise_std, oracle.gradient_noise_variance, "
                           "oracle.noise_total_variance");
  if (grad_var) {
    const double var = doc.get_double("oracle", "gradient_noise_variance");
    if (var < 0.0) throw InvalidParameter("oracle.gradient_noise_variance must be non-negative");
    oc.noise_std = g.locals.front().tau() * std::sqrt(var);
  } else if (total_var) {
    const double var = doc.get_double("oracle", "noise_total_variance");
    if (var < 0.0) throw InvalidParameter("oracle.noise_total_variance must be non-negative");
    oc.noise_std = std::sqrt(var / g.dim());
  } else {
    oc.noise_std = doc.get_double("oracle", "noise_std");
  }
  OracleConstants decl;
  for (const auto& local : g.locals) {
    const OracleConstants c = analytic_constants(oc, local);
    decl.beta = std::max(decl.beta, c.beta);
    decl.p = std::max(decl.p, c.p);
    decl.sigma = std::max(decl.sigma, c.sigma);
    decl.m_growth = std::max(decl.m_growth, c.m_growth);
  }
  oc.declared = decl;
  validate(oc);
  if (is_auto(doc.get("oracle", "d_bound"))) {
    double d = 0.0;
    for (const auto& local : g.locals) d = std::max(d, estimate_d_bound(oc, local, g.box_radius));
    oc.declared.d_bound = d;
  } else {
    oc.declared.d_bound = doc.get_double("oracle", "d_bound");
    if (oc.declared.d_bound < 0.0) throw InvalidParameter("oracle.d_bound must be non-negative");
  }
  return oc;
}

}  // namespace

ResolvedRun resolve(const ConfigDoc& doc) {
  ResolvedRun out;
  RunConfig& rc = out.run;
  auto note = [&](const std::string& k, double v) { out.resolved.emplace_back(k, fmt_double(v)); };

  TopologySpec topo;
  topo.kind = parse_topology(doc.get("network", "topology"));
  topo.edge_prob = doc.get_double("network", "edge_prob");
  topo.seed = doc.get_u64("network", "graph_seed");
  const long n_agents = doc.get_long("network", "n_agents");

  auto suite = std::make_shared<GlobalOperator>(build_suite(doc));
  if (n_agents != suite->n_agents())
    throw InvalidParameter("network.n_agents = " + std::to_string(n_agents) + " but suite '" + suite->suite + "' has " +
                           std::to_string(suite->n_agents()) + " agents");
  rc.mixing = metropolis_mixing(build_graph(topo, static_cast<int>(n_agents)));
  rc.op = suite;
  rc.oracle = build_oracle(doc, *suite);

  rc.compressor = make_compressor(parse_compressor(doc.get("compression", "kind")), suite->dim(),
                                  static_cast<int>(doc.get_long("compression", "l_bits")),
                                  doc.get_double("compression", "delta"), doc.get_double("compression", "p_keep"),
                                  static_cast<int>(doc.get_long("compression", "float_bits")),
                                  static_cast<int>(doc.get_long("compression", "int_bits")));

  rc.comm.policy = parse_schedule_policy(doc.get("scheduling", "policy"));
  rc.comm.h = static_cast<int>(doc.get_long("scheduling", "h"));
  rc.comm.seed = doc.get_u64("scheduling", "schedule_seed");
  if (rc.comm.h < 1) throw InvalidParameter("scheduling.h must be >= 1");
  const int h_max = rc.comm.policy == SchedulePolicy::every_step ? 1 : rc.comm.h;

  const double r = rc.compressor.r, phi = rc.compressor.phi;
  rc.psi = is_auto(doc.get("scheduling", "psi")) ? 1.0 / r : doc.get_double("scheduling", "psi");
  const double gmax = gamma_upper_bound(phi, rc.mixing.kappa, rc.mixing.alpha, rc.psi, r);
  rc.gamma = is_auto(doc.get("scheduling", "gamma")) ? 0.9 * gmax : doc.get_double("scheduling", "gamma");
  const Zeta1Branches zb = zeta1_branches(rc.gamma, phi, rc.mixing.kappa, rc.mixing.alpha, rc.psi, r);
  const double z1 = std::min(zb.first, zb.second);

  rc.step.kind = parse_step_kind(doc.get("scheduling", "step"));
  const bool auto_a = is_auto(doc.get("scheduling", "a"));
  const bool auto_b = is_auto(doc.get("scheduling", "b"));
  if ((auto_a || auto_b) && !(z1 > 0.0 && z1 < 1.0))
    throw InfeasibleParameters("auto step parameters need 0 < zeta1 < 1, got " + fmt_double(z1));
  const double lip = suite->lipschitz();
  const OracleConstants& dc = rc.oracle.declared;
  switch (rc.step.kind) {
    case StepKind::inv_sqrt:
      rc.step.a = auto_a ? 1.1 * 4.0 * h_max / (3.0 * z1) : doc.get_double("scheduling", "a");
      if (auto_b) {
        TheoremInputs tmp;
        tmp.a = rc.step.a;
        tmp.lipschitz = lip;
        tmp.p_bias = dc.p;
        tmp.m_growth = dc.m_growth;
        rc.step.b = theorem1_max_b(tmp);
      } else {
        rc.step.b = doc.get_double("scheduling", "b");
      }
      break;
    case StepKind::inv_linear:
      if (auto_b) {
        if (!(lip < 1.0)) throw InfeasibleParameters("auto b for inv_linear steps needs L < 1");
        rc.step.b = 1.1 * 4.0 / ((1.0 - lip) * (1.0 - dc.p));
      } else {
        rc.step.b = doc.get_double("scheduling", "b");
      }
      rc.step.a = auto_a ? 1.1 * std::max(8.0 * h_max / (3.0 * z1),
                                          12.0 * (1.0 + lip) * (1.0 + 4.0 * dc.m_growth) * rc.step.b / (1.0 - dc.p))
                         : doc.get_double("scheduling", "a");
      break;
    case StepKind::constant:
      rc.step.a = doc.get_double("scheduling", "a");
      rc.step.b = doc.get_double("scheduling", "b");
      break;
  }
  rc.freeze_scale = doc.get_bool("scheduling", "freeze_scale");

  rc.horizon = doc.get_long("engine", "horizon");
  rc.seed = doc.get_u64("engine", "seed");
  rc.x0.kind = parse_x0_kind(doc.get("engine", "x0"));
  rc.x0.value = doc.get_double("engine", "x0_value");
  rc.run_id = doc.get("engine", "run_id");

  const std::string xs = doc.get("operators", "x_star");
  if (xs == "solve" || (xs == "auto" && suite->contractive())) {
    rc.x_star = find_fixed_point(*suite).x;
  } else if (xs != "auto" && xs != "none") {
    throw InvalidParameter("operators.x_star must be auto, solve or none");
  }

  check_run_config(rc);
  const TheoremInputs hyp = theorem_inputs(rc);
  out.reports = {validate_theorem1(hyp), validate_theorem2(hyp)};
  out.governing = rc.step.kind == StepKind::inv_linear ? out.reports[1] : out.reports[0];

  note("alpha", rc.mixing.alpha);
  note("kappa", rc.mixing.kappa);
  note("lipschitz", lip);
  note("heterogeneity_zeta", suite->heterogeneity_zeta);
  note("noise_std", rc.oracle.noise_std);
  note("declared_beta", dc.beta);
  note("declared_p", dc.p);
  note("declared_sigma", dc.sigma);
  note("declared_m", dc.m_growth);
  note("declared_d", dc.d_bound);
  note("r", r);
  note("phi", phi);
  note("delta_sq", rc.compressor.delta_sq);
  note("psi", rc.psi);
  note("gamma_max", gmax);
  note("gamma", rc.gamma);
  note("zeta1", z1);
  note("a", rc.step.a);
  note("b", rc.step.b);
  if (z1 > 0.0 && z1 < 1.0) {
    const double z2 = zeta2(rc.gamma, phi, rc.mixing.kappa, rc.mixing.alpha, rc.psi, r, suite->n_agents(), dc.d_bound);
    note("zeta2", z2);
    note("c1", theorem1_constant(z1, z2, suite->n_agents(), rc.psi, r, rc.compressor.delta_sq, dc.d_bound, h_max));
    note("c2", theorem2_constant(z1, z2, suite->n_agents(), rc.psi, r, rc.compressor.delta_sq, dc.d_bound, h_max));
  }
  if (rc.x_star) note("x_star_norm", rc.x_star->norm());
  return out;
}

std::string sidecar_text(const ConfigDoc& doc, const std::vector<std::pair<std::string, std::string>>& meta) {
  std::ostringstream os;
  os << doc.to_text() << "\n[run]\n";
  for (const auto& [k, v] : meta) os << k << " = " << v << '\n';
  return os.str();
}

Sidecar parse_sidecar(const std::string& text, const std::string& origin) {
  Sidecar s;
  s.config = parse_lines(text, origin, &s.meta);
  return s;
}

}  // namespace fpnet
