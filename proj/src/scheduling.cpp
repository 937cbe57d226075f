#include "fpnet/scheduling.hpp"

#include "fpnet/format.hpp"
#include "fpnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace fpnet {

SchedulePolicy parse_schedule_policy(const std::string& name) {
  if (name == "every_step") return SchedulePolicy::every_step;
  if (name == "fixed_period") return SchedulePolicy::fixed_period;
  if (name == "random_gap") return SchedulePolicy::random_gap;
  if (name == "front_loaded") return SchedulePolicy::front_loaded;
  throw InvalidParameter("unknown schedule policy '" + name + "'");
}

std::string to_string(SchedulePolicy p) {
  switch (p) {
    case SchedulePolicy::every_step: return "every_step";
    case SchedulePolicy::fixed_period: return "fixed_period";
    case SchedulePolicy::random_gap: return "random_gap";
    case SchedulePolicy::front_loaded: return "front_loaded";
  }
  return "?";
}

int CommSchedule::max_gap() const {
  int g = 1;
  for (std::size_t k = 1; k < indices.size(); ++k) g = std::max<int>(g, static_cast<int>(indices[k] - indices[k - 1]));
  return g;
}

CommSchedule make_schedule(SchedulePolicy policy, long horizon, int h, std::uint64_t seed) {
  if (horizon < 1) throw InvalidParameter("schedule horizon must be >= 1");
  if (h < 1) throw InvalidParameter("schedule period/gap cap must be >= 1");
  CommSchedule s;
  s.horizon = horizon;
  s.h_max = policy == SchedulePolicy::every_step ? 1 : h;
  Rng rng = make_stream(seed, StreamPurpose::schedule, 0, 0);
  std::uniform_int_distribution<int> gap_dist(1, h);
  long k = 1;
  long block = 0;
  while (k <= horizon) {
    s.indices.push_back(k);
    int gap = 1;
    switch (policy) {
      case SchedulePolicy::every_step: gap = 1; break;
      case SchedulePolicy::fixed_period: gap = h; break;
      case SchedulePolicy::random_gap: gap = gap_dist(rng); break;
      case SchedulePolicy::front_loaded: gap = static_cast<int>(std::min<long>(h, block / 2 + 1)); break;
    }
    ++block;
    k += gap;
  }
  s.mask.assign(horizon + 1, 0);
  for (long i : s.indices) s.mask[i] = 1;
  return s;
}

StepKind parse_step_kind(const std::string& name) {
  if (name == "inv_sqrt") return StepKind::inv_sqrt;
  if (name == "inv_linear") return StepKind::inv_linear;
  if (name == "constant") return StepKind::constant;
  throw InvalidParameter("unknown step kind '" + name + "'");
}

std::string to_string(StepKind k) {
  switch (k) {
    case StepKind::inv_sqrt: return "inv_sqrt";
    case StepKind::inv_linear: return "inv_linear";
    case StepKind::constant: return "constant";
  }
  return "?";
}

double StepSchedule::eta(long t) const {
  switch (kind) {
    case StepKind::inv_sqrt: return b / std::sqrt(static_cast<double>(t) + a);
    case StepKind::inv_linear: return b / (static_cast<double>(t) + a);
    case StepKind::constant: return b;
  }
  return b;
}

void validate_step_schedule(const StepSchedule& s) {
  if (!(s.b > 0.0)) throw InvalidParameter("step scale b must be positive");
  if (s.kind != StepKind::constant && !(s.a > 0.0)) throw InvalidParameter("step offset a must be positive");
  const double e0 = s.eta(0);
  if (!(e0 > 0.0 && e0 < 1.0))
    throw InvalidParameter("invalid-step: eta_0 = " + fmt_double(e0) + " must lie in (0, 1)");
}

double gamma_upper_bound(double phi, double kappa, double alpha, double psi, double r) {
  if (!(phi > 0.0 && phi <= 1.0)) throw InvalidParameter("phi must lie in (0, 1]");
  if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidParameter("kappa must lie in (0, 1]");
  if (!(alpha >= 0.0)) throw InvalidParameter("alpha must be non-negative");
  const double first = phi / (8.0 * (1.0 + 4.0 / kappa) * alpha * alpha + 16.0 * (1.0 - phi / 4.0) * alpha);
  const double second = (1.5 * kappa) / (9.0 * kappa * kappa / 16.0 +
                                         2.0 * (1.0 - psi * r * phi) * (1.0 + 4.0 / phi) * alpha * alpha);
  return std::min(first, second);
}

Zeta1Branches zeta1_branches(double gamma, double phi, double kappa, double alpha, double psi, double r) {
  const double first = phi / 4.0 - 2.0 * (1.0 + 4.0 / kappa) * gamma * alpha * alpha -
                       (1.0 - phi / 4.0) * 4.0 * gamma * alpha;
  const double second = 1.5 * kappa * gamma - 9.0 * kappa * kappa * gamma * gamma / 16.0 -
                        2.0 * (1.0 - psi * r * phi) * (1.0 + 4.0 / phi) * gamma * gamma * alpha * alpha;
  return {first, second};
}

double zeta1(double gamma, double phi, double kappa, double alpha, double psi, double r) {
  if (!(gamma > 0.0)) throw InvalidParameter("gamma must be positive");
  const Zeta1Branches z = zeta1_branches(gamma, phi, kappa, alpha, psi, r);
  if (z.first <= 0.0)
    throw InfeasibleParameters("zeta1 <= 0: compression branch phi/4 - ... = " + fmt_double(z.first));
  if (z.second <= 0.0)
    throw InfeasibleParameters("zeta1 <= 0: mixing branch 3 kappa gamma/2 - ... = " + fmt_double(z.second));
  return std::min(z.first, z.second);
}

double zeta2(double gamma, double phi, double kappa, double alpha, double psi, double r, int n_agents,
             double d_bound) {
  if (!(gamma > 0.0)) throw InvalidParameter("gamma must be positive");
  const double nd2 = n_agents * d_bound * d_bound;
  const double kg = kappa * gamma;
  const double mixing = (1.0 + 4.0 / kg) *
                        (2.0 * gamma * gamma * alpha * alpha +
                         3.0 * (1.0 + kg / 4.0) *
                             ((1.0 - kg + gamma) * (1.0 - kg + gamma) + gamma * gamma + (1.0 - kg) * (1.0 - kg))) *
                        nd2;
  const double ga = 1.0 + gamma * alpha;
  const double compression = (1.0 - psi * r * phi) * (1.0 + 4.0 / phi) *
                             ((1.0 + phi / 4.0) * ga * ga + 2.0 * gamma * gamma * alpha * alpha) * nd2;
  return mixing + compression;
}

double theorem1_constant(double z1, double z2, int n_agents, double psi, double r, double delta_sq, double d_bound,
                         int h_max) {
  if (!(z1 > 0.0 && z1 < 1.0)) throw InvalidParameter("zeta1 must lie in (0, 1)");
  const double h2 = static_cast<double>(h_max) * h_max;
  return (16.0 * z2 * h2 + 16.0 * n_agents * psi * r * delta_sq) / (z1 * z1) +
         8.0 * n_agents * d_bound * d_bound * h2;
}

double theorem2_constant(double z1, double z2, int n_agents, double psi, double r, double delta_sq, double d_bound,
                         int h_max) {
  if (!(z1 > 0.0 && z1 < 1.0)) throw InvalidParameter("zeta1 must lie in (0, 1)");
  const double h2 = static_cast<double>(h_max) * h_max;
  return (32.0 * z2 * h2 + 32.0 * n_agents * psi * r * delta_sq) / (z1 * z1) +
         16.0 * n_agents * d_bound * d_bound * h2;
}

std::string to_string(Severity s) {
  switch (s) {
    case Severity::pass: return "PASS";
    case Severity::warn: return "WARN";
    case Severity::fail: return "FAIL";
  }
  return "?";
}

void ValidationReport::add(ConditionCheck c) {
  if (static_cast<int>(c.severity) > static_cast<int>(status)) status = c.severity;
  conditions.push_back(std::move(c));
}

std::string ValidationReport::to_text() const {
  std::ostringstream os;
  os << "validation " << theorem << " status=" << to_string(status) << '\n';
  for (const auto& c : conditions)
    os << "condition name=" << c.name << " value=" << fmt_double(c.value) << " limit=" << fmt_double(c.limit)
       << " margin=" << fmt_double(c.margin) << " status=" << to_string(c.severity) << '\n';
  return os.str();
}

namespace {

// margin > 0 means satisfied; `strict` marks "<" versus "<=" conditions.
ConditionCheck upper(const std::string& name, double value, double limit, bool strict, Severity if_violated) {
  const bool ok = strict ? value < limit : value <= limit;
  return {name, value, limit, limit - value, ok ? Severity::pass : if_violated};
}

ConditionCheck lower(const std::string& name, double value, double limit, bool strict, Severity if_violated) {
  const bool ok = strict ? value > limit : value >= limit;
  return {name, value, limit, value - limit, ok ? Severity::pass : if_violated};
}

// Shared hypotheses; returns zeta1 or NaN when infeasible.
double common_checks(const TheoremInputs& in, ValidationReport& rep) {
  rep.add(upper("oracle_bias_P", in.p_bias, 1.0, true, Severity::fail));
  rep.add(lower("psi_lower", in.psi, 3.0 / (4.0 * in.r), true, Severity::warn));
  rep.add(upper("psi_upper", in.psi, 1.0 / in.r, false, Severity::warn));
  const double gmax = gamma_upper_bound(in.phi, in.kappa, in.alpha, in.psi, in.r);
  rep.add(upper("gamma_bound", in.gamma, gmax, true, Severity::warn));
  rep.add(lower("gamma_positive", in.gamma, 0.0, true, Severity::fail));
  if (!(in.gamma > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const Zeta1Branches z = zeta1_branches(in.gamma, in.phi, in.kappa, in.alpha, in.psi, in.r);
  const double z1 = std::min(z.first, z.second);
  rep.add(lower("zeta1_positive", z1, 0.0, true, Severity::warn));
  return z1 > 0.0 ? z1 : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double theorem1_max_b(const TheoremInputs& in) {
  return (1.0 - in.p_bias) * std::sqrt(in.a) / (6.0 * (1.0 + in.lipschitz) * (1.0 + 4.0 * in.m_growth));
}

ValidationReport validate_theorem1(const TheoremInputs& in) {
  ValidationReport rep;
  rep.theorem = "theorem1";
  const double z1 = common_checks(in, rep);
  if (std::isfinite(z1)) rep.add(lower("a_offset", in.a, 4.0 * in.h_max / (3.0 * z1), true, Severity::warn));
  rep.add(lower("b_positive", in.b, 0.0, true, Severity::fail));
  rep.add(upper("b_scale", in.b, theorem1_max_b(in), false, Severity::warn));
  return rep;
}

ValidationReport validate_theorem2(const TheoremInputs& in) {
  ValidationReport rep;
  rep.theorem = "theorem2";
  rep.add(upper("contractive_L", in.lipschitz, 1.0, true, Severity::fail));
  const double z1 = common_checks(in, rep);
  const double a_bias = 12.0 * (1.0 + in.lipschitz) * (1.0 + 4.0 * in.m_growth) * in.b / (1.0 - in.p_bias);
  const double a_min = std::isfinite(z1) ? std::max(8.0 * in.h_max / (3.0 * z1), a_bias) : a_bias;
  rep.add(lower("a_offset", in.a, a_min, false, Severity::warn));
  if (in.lipschitz < 1.0 && in.p_bias < 1.0)
    rep.add(lower("b_scale", in.b, 4.0 / ((1.0 - in.lipschitz) * (1.0 - in.p_bias)), true, Severity::warn));
  return rep;
}

Lemma6Report lemma6_recursion_check(double r1, double r2, double r3, double a, double psi0, long horizon,
                                    bool keep_values) {
  if (!(r1 >= 1.0)) throw InvalidParameter("lemma6 requires r1 >= 1");
  if (!(a > r1)) throw InvalidParameter("lemma6 requires a > r1");
  if (r2 < 0.0 || r3 < 0.0 || psi0 < 0.0) throw InvalidParameter("lemma6 requires non-negative r2, r3, psi0");
  if (horizon < 1) throw InvalidParameter("lemma6 horizon must be >= 1");
  Lemma6Report rep;
  const double d2 = a * psi0 + r2 * (1.0 + 2.0 / a) + r3;
  const long tail_start = horizon - horizon / 10;
  rep.liminf_tail = std::numeric_limits<double>::infinity();
  double psi = psi0;
  for (long t = 0; t <= horizon; ++t) {
    const double ta = static_cast<double>(t) + a;
    const double bound = (2.0 * r2 * std::log(ta) + d2) / (ta - 1.0) + 2.0 * r3;
    if (bound > 0.0) rep.worst_ratio = std::max(rep.worst_ratio, psi / bound);
    if (psi > bound * (1.0 + 1e-12) && rep.pass) {
      rep.pass = false;
      rep.first_violation = t;
    }
    if (t >= tail_start) rep.liminf_tail = std::min(rep.liminf_tail, psi);
    if (keep_values) rep.values.push_back(psi);
    if (t == horizon) break;
    psi = (1.0 - r1 / ta) * psi + r2 / (ta * ta) + r3 / ta;
  }
  rep.final_value = psi;
  return rep;
}

}  // namespace fpnet
