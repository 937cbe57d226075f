#pragma once

#include "fpnet/common.hpp"
#include "fpnet/engine.hpp"
#include "fpnet/operators.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fpnet {

/// Line integral G(x) = int_0^1 <u(s) - T(u(s)), x - y> ds along the straight
/// segment u(s) = y + s (x - y).
struct SurrogateEvaluator {
  std::function<Vector(const Vector&)> map;
  Vector base_point;
  int quadrature_nodes = 64;  // composite Gauss-Legendre, 8 points per panel
};

SurrogateEvaluator make_surrogate(const GlobalOperator& g, int quadrature_nodes = 64);
SurrogateEvaluator make_surrogate(const OperatorSpec& op, int quadrature_nodes = 64);

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

double surrogate_value(const SurrogateEvaluator& ev, const Vector& x);
/// Same integral along the polyline base_point -> waypoints... -> x.
double surrogate_value_path(const SurrogateEvaluator& ev, const std::vector<Vector>& waypoints, const Vector& x);
/// x - T(x).
Vector surrogate_gradient(const SurrogateEvaluator& ev, const Vector& x);

struct Lemma1Report {
  bool pass = true;
  bool checked_strong = false;  // items (b), (c) evaluated
  std::string skip_reason;
  int samples = 0;
  // Largest violation lhs - rhs per item (<= slack means satisfied).
  double worst_a = -1e300;
  double worst_b = -1e300;
  double worst_c = -1e300;
  std::string to_text() const;
};

/// Checks the smoothness inequality (a) of every local surrogate at random
/// pairs of the operating box, and when L < 1 the gradient-dominance (b) and
/// strong-convexity (c) inequalities around each local fixed point.
Lemma1Report check_lemma1(const GlobalOperator& g, double lipschitz, int n_samples, std::uint64_t seed = 1,
                          double slack = 1e-8);

enum class RateModel { log_over_sqrt, log_over_linear, plateau };

RateModel parse_rate_model(const std::string& name);
std::string to_string(RateModel m);

/// ln(t)/sqrt(t) or ln(t)/t.
double rate_regressor(RateModel m, double t);

struct RateFit {
  RateModel model = RateModel::plateau;
  double slope = 0.0;
  double intercept = 0.0;
  double plateau_level = 0.0;
  bool plateau_subtracted = false;
  double window_begin = 0.0;
  double window_end = 0.0;
  int window_points = 0;
  double r_squared = 0.0;
  bool decay_accepted = false;
  std::string reason;
};

struct FitOptions {
  double t_min = 10.0;        // earliest t admitted to the decay window
  double t_max = -1.0;        // latest t admitted (<= 0: end of series)
  double flat_slope = 0.15;   // |log-log tail slope| below this marks a plateau
  double min_excess = 1.0;    // window keeps metric - plateau >= min_excess * plateau
  int max_points = 400;       // log-spaced sample of the window
  int min_points = 20;
};

/// Least-squares fit of ln(metric - plateau) against ln(g(t)). The plateau
/// estimate is the median of the last 10% and is subtracted only when the
/// tail is flat on a log-log scale. When no decaying window survives the
/// result has model = plateau and decay_accepted = false.
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& metric, RateModel model,
                 const FitOptions& opts = {});

double median(std::vector<double> v);

/// Seed-averaged columns of equally long traces.
struct AveragedTrace {
  std::vector<double> t;
  std::vector<double> residual, residual_se;
  std::vector<double> consensus, consensus_se;
  std::vector<double> dist, dist_se;
  int n_seeds = 0;
};
AveragedTrace average_traces(const std::vector<RunTrace>& traces);

/// (1/(t+1)) sum_{k<=t} v_k.
std::vector<double> running_average(const std::vector<double>& v);

/// Steady-state level: median of the last `fraction` of a series with a
/// standard error from the per-seed tail medians.
struct PlateauEstimate {
  double level = 0.0;
  double se = 0.0;
};
PlateauEstimate plateau_of(const std::vector<RunTrace>& traces, const std::string& metric, double fraction = 0.1);

enum class VerdictStatus { pass, fail, skip };
std::string to_string(VerdictStatus s);

struct VerdictClause {
  std::string name;
  VerdictStatus status = VerdictStatus::skip;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct VerdictReport {
  std::string subject;
  bool pass = true;
  std::vector<VerdictClause> clauses;
  void add(VerdictClause c);
  std::string to_text() const;
};

struct VerdictInputs {
  double c_const = 0.0;  // C1 or C2
  StepSchedule step;
  double t_min = 10.0;   // per-t consensus checks start here
  double slope_tolerance = 0.4;
  double fit_t_min = 1000.0;
  bool biased = false;   // beta > 0 or P > 0
};

/// Theorem 1: cumulative consensus <= C1 b^2 ln(1 + T/a), per-t consensus
/// <= C1 eta_t^2, running-average residual fits ln T / sqrt T, finite plateau.
VerdictReport verdict_theorem1(const std::vector<RunTrace>& traces, const VerdictInputs& in);
/// Theorem 2: per-t consensus <= C2 b^2/(t+a)^2, distance metric fits ln t / t, finite plateau.
VerdictReport verdict_theorem2(const std::vector<RunTrace>& traces, const VerdictInputs& in);

/// PASS iff the levels are strictly increasing in the listed order.
VerdictClause plateau_ordering(const std::string& name, const std::vector<PlateauEstimate>& levels);

}  // namespace fpnet
