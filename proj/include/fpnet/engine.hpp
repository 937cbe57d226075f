#pragma once

#include "fpnet/common.hpp"
#include "fpnet/compression.hpp"
#include "fpnet/network.hpp"
#include "fpnet/operators.hpp"
#include "fpnet/oracle.hpp"
#include "fpnet/scheduling.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fpnet {

/// Local iterate, own estimate and the replicas of the in-neighbours'
/// estimates held by one agent.
struct AgentState {
  Vector x;
  Vector x_hat_self;
  std::map<int, Vector> x_hat_neighbors;
};

enum class X0Kind { zero, random_ball, constant };

X0Kind parse_x0_kind(const std::string& name);
std::string to_string(X0Kind k);

struct X0Policy {
  X0Kind kind = X0Kind::zero;
  double value = 0.0;  // ball radius or constant
};

struct CommParams {
  SchedulePolicy policy = SchedulePolicy::fixed_period;
  int h = 3;
  std::uint64_t seed = 1;
};

struct RunConfig {
  std::shared_ptr<const GlobalOperator> op;
  OracleConfig oracle;
  MixingMatrix mixing;
  CompressorSpec compressor;
  CommParams comm;
  StepSchedule step;
  bool freeze_scale = false;  // s_t = s_0 instead of s_t = eta_t
  double gamma = 0.1;
  double psi = 1.0;
  long horizon = 1000;
  std::uint64_t seed = 1;
  X0Policy x0;
  std::optional<Vector> x_star;
  std::string run_id = "run";
};

/// Throws on inconsistent dimensions or out-of-domain parameters.
void check_run_config(const RunConfig& cfg);

/// Hypothesis inputs for the theorem validators derived from `cfg`.
TheoremInputs theorem_inputs(const RunConfig& cfg);

struct TraceRow {
  long t = 0;
  double residual = 0.0;
  double consensus_error = 0.0;
  double dist_to_fixpoint = 0.0;  // NaN when x* is unknown
  long long bits_cumulative = 0;
  long comm_rounds = 0;
  double eta = 0.0;
};

struct RunDiagnostics {
  long long bits_per_message = 0;  // each broadcast counted once
  long long index_bits = 0;        // c3 index overhead, per receiving edge
  long box_violations = 0;         // (agent, step) pairs outside the operating box
  double max_mean_drift = 0.0;     // max |xbar - zbar| / (1 + |zbar|) at communication steps
  bool replicas_consistent = true;
  double max_abs_coordinate = 0.0;
};

struct RunTrace {
  std::string run_id;
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  RunDiagnostics diag;
  std::vector<ValidationReport> validation;
  std::vector<AgentState> final_states;

  Vector mean_final() const;
};

struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::shared_ptr<RunTrace> t)
      : Error("divergence", what), trace(std::move(t)) {}
  std::shared_ptr<RunTrace> trace;
};

/// z = (1 - eta) x + eta T~. Throws InvalidParameter ("invalid-step") unless eta in (0, 1).
Vector km_local_step(const Vector& x, const Vector& oracle_value, double eta);

struct BroadcastStats {
  long long bits_per_edge = 0;
  long long bits_per_message = 0;
  long long index_bits = 0;
  double mean_drift = 0.0;
};

/// Communication round: x_i = z_i + gamma sum_j w_ij (xhat_j - xhat_i) from
/// agent i's replicas, c_i = C((x_i - xhat_i)/s), then every holder of
/// xhat_i adds psi * s * decode(c_i). `compressor_rng(i)` supplies agent i's
/// stream for this round.
BroadcastStats consensus_and_broadcast(std::vector<AgentState>& states, const std::vector<Vector>& z,
                                       const MixingMatrix& w, double gamma, double psi,
                                       const CompressorSpec& compressor, double s,
                                       const std::function<Rng(int)>& compressor_rng);

/// Agents holding a replica of xhat_i: the non-zero off-diagonal entries of row i.
std::vector<std::vector<int>> mixing_neighbors(const MixingMatrix& w);

/// True when every replica of each xhat_i is bit-identical to agent i's own copy.
bool replicas_consistent(const std::vector<AgentState>& states);

std::vector<AgentState> initial_states(const RunConfig& cfg);

RunTrace run(const RunConfig& cfg);

struct SweepPoint {
  std::string label;
  std::function<void(RunConfig&)> apply;
};

struct SweepResult {
  std::string label;
  std::uint64_t seed = 0;
  std::optional<RunTrace> trace;
  std::string error_code;
  std::string error;
};

/// One run per (point, seed); failures are captured per run. Runs execute on
/// up to FPNET_THREADS worker threads (default: hardware concurrency).
std::vector<SweepResult> run_sweep(const RunConfig& base, const std::vector<SweepPoint>& grid,
                                   const std::vector<std::uint64_t>& seeds);

int worker_threads();

inline constexpr const char* kTraceHeader =
    "t,residual,consensus_error,dist_to_fixpoint,bits_cumulative,comm_rounds,eta_t";

void write_trace_csv(const RunTrace& trace, const std::string& path);
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace fpnet
