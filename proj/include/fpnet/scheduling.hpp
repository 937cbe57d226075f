#pragma once

#include "fpnet/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fpnet {

enum class SchedulePolicy { every_step, fixed_period, random_gap, front_loaded };

SchedulePolicy parse_schedule_policy(const std::string& name);
std::string to_string(SchedulePolicy p);

/// Communication index set I_T over iterations 1..T.
struct CommSchedule {
  std::vector<long> indices;  // ascending, indices.front() == 1
  int h_max = 1;
  long horizon = 0;
  std::vector<char> mask;  // mask[k] != 0 iff k in I_T, k in [0, T]

  bool communicates(long k) const { return k >= 0 && k < static_cast<long>(mask.size()) && mask[k]; }
  long rounds() const { return static_cast<long>(indices.size()); }
  int max_gap() const;
};

/// `h` is the period for fixed_period and the gap cap for the others.
CommSchedule make_schedule(SchedulePolicy policy, long horizon, int h = 1, std::uint64_t seed = 1);

enum class StepKind { inv_sqrt, inv_linear, constant };

StepKind parse_step_kind(const std::string& name);
std::string to_string(StepKind k);

/// eta_t = s_t = b / sqrt(t + a), b / (t + a), or b.
struct StepSchedule {
  StepKind kind = StepKind::inv_sqrt;
  double a = 1.0;
  double b = 0.5;

  double eta(long t) const;
};

/// Throws InvalidParameter unless a > 0, b > 0 and eta_0 in (0, 1).
void validate_step_schedule(const StepSchedule& s);

/// Consensus step bound: min of the two closed-form branches.
double gamma_upper_bound(double phi, double kappa, double alpha, double psi, double r);

/// The two branches of zeta1 individually.
struct Zeta1Branches {
  double first;
  double second;
};
Zeta1Branches zeta1_branches(double gamma, double phi, double kappa, double alpha, double psi, double r);

/// Throws InfeasibleParameters naming the branch if zeta1 <= 0.
double zeta1(double gamma, double phi, double kappa, double alpha, double psi, double r);
double zeta2(double gamma, double phi, double kappa, double alpha, double psi, double r, int n_agents, double d_bound);

/// C1 = (16 zeta2 H^2 + 16 N psi r delta^2) / zeta1^2 + 8 N D^2 H^2.
double theorem1_constant(double zeta1, double zeta2, int n_agents, double psi, double r, double delta_sq,
                         double d_bound, int h_max);
/// C2 doubles every coefficient of C1.
double theorem2_constant(double zeta1, double zeta2, int n_agents, double psi, double r, double delta_sq,
                         double d_bound, int h_max);

enum class Severity { pass, warn, fail };
std::string to_string(Severity s);

/// One inequality of a theorem's hypotheses. margin > 0 means satisfied.
struct ConditionCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  double margin = 0.0;
  Severity severity = Severity::pass;
};

struct ValidationReport {
  std::string theorem;
  Severity status = Severity::pass;
  std::vector<ConditionCheck> conditions;

  void add(ConditionCheck c);
  std::string to_text() const;
};

/// Everything the hypotheses depend on.
struct TheoremInputs {
  double gamma = 0.0;
  double psi = 1.0;
  double r = 1.0;
  double phi = 1.0;
  double delta_sq = 0.0;
  double alpha = 1.0;
  double kappa = 1.0;
  int n_agents = 1;
  double d_bound = 0.0;
  int h_max = 1;
  double a = 1.0;
  double b = 1.0;
  double lipschitz = 1.0;
  double p_bias = 0.0;
  double m_growth = 0.0;
};

/// Violations of the conservative theoretical inequalities are WARN;
/// structurally impossible inputs (P >= 1, and L >= 1 for theorem 2) are FAIL.
ValidationReport validate_theorem1(const TheoremInputs& in);
ValidationReport validate_theorem2(const TheoremInputs& in);

/// Largest b admitted by theorem 1 for the given a.
double theorem1_max_b(const TheoremInputs& in);

struct Lemma6Report {
  bool pass = true;
  long first_violation = -1;
  double worst_ratio = 0.0;  // max psi_t / bound_t
  double final_value = 0.0;
  double liminf_tail = 0.0;  // min over the last 10% of iterations
  std::vector<double> values;
};

/// Iterates psi_{t+1} = (1 - r1/(t+a)) psi_t + r2/(t+a)^2 + r3/(t+a) and
/// checks psi_t <= (2 r2 ln(t+a) + D2)/(t-1+a) + 2 r3 for t = 1..T.
Lemma6Report lemma6_recursion_check(double r1, double r2, double r3, double a, double psi0, long horizon,
                                    bool keep_values = false);

}  // namespace fpnet
