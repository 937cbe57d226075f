#include "fpnet/engine.hpp"

#include "fpnet/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace fpnet {

X0Kind parse_x0_kind(const std::string& name) {
  if (name == "zero") return X0Kind::zero;
  if (name == "random_ball") return X0Kind::random_ball;
  if (name == "constant") return X0Kind::constant;
  throw InvalidParameter("unknown x0 policy '" + name + "'");
}

std::string to_string(X0Kind k) {
  switch (k) {
    case X0Kind::zero: return "zero";
    case X0Kind::random_ball: return "random_ball";
    case X0Kind::constant: return "constant";
  }
  return "?";
}

namespace {

constexpr double kDivergenceThreshold = 1e12;

}  // namespace

void check_run_config(const RunConfig& cfg) {
  if (!cfg.op || cfg.op->n_agents() < 1) throw InvalidParameter("run config has no operator");
  const int n_agents = cfg.op->n_agents();
  const int dim = cfg.op->dim();
  if (cfg.mixing.size() != n_agents)
    throw DimensionMismatch("mixing matrix has " + std::to_string(cfg.mixing.size()) + " agents, operator suite has " +
                            std::to_string(n_agents));
  if (cfg.compressor.dim != dim)
    throw DimensionMismatch("compressor dimension " + std::to_string(cfg.compressor.dim) +
                            " differs from operator dimension " + std::to_string(dim));
  if (cfg.x_star && cfg.x_star->size() != dim) throw DimensionMismatch("x_star dimension differs from operator");
  for (const auto& l : cfg.op->locals)
    if (l.dim() != dim) throw DimensionMismatch("local operators disagree on dimension");
  if (cfg.horizon < 1) throw InvalidParameter("horizon must be >= 1");
  if (!(cfg.gamma > 0.0)) throw InvalidParameter("gamma must be positive");
  if (!(cfg.psi > 0.0)) throw InvalidParameter("psi must be positive");
  if (cfg.comm.h < 1) throw InvalidParameter("communication period must be >= 1");
  if (cfg.x0.kind == X0Kind::random_ball && !(cfg.x0.value >= 0.0))
    throw InvalidParameter("x0 ball radius must be non-negative");
  validate_step_schedule(cfg.step);
  validate(cfg.oracle);
  check_declared_constants(cfg.compressor);
  check_doubly_stochastic(cfg.mixing.w);
}

TheoremInputs theorem_inputs(const RunConfig& cfg) {
  TheoremInputs in;
  in.gamma = cfg.gamma;
  in.psi = cfg.psi;
  in.r = cfg.compressor.r;
  in.phi = cfg.compressor.phi;
  in.delta_sq = cfg.compressor.delta_sq;
  in.alpha = cfg.mixing.alpha;
  in.kappa = cfg.mixing.kappa;
  in.n_agents = cfg.op ? cfg.op->n_agents() : 0;
  in.d_bound = cfg.oracle.declared.d_bound;
  in.h_max = cfg.comm.policy == SchedulePolicy::every_step ? 1 : cfg.comm.h;
  in.a = cfg.step.a;
  in.b = cfg.step.b;
  in.lipschitz = cfg.op ? cfg.op->lipschitz() : 1.0;
  in.p_bias = cfg.oracle.declared.p;
  in.m_growth = cfg.oracle.declared.m_growth;
  return in;
}

Vector RunTrace::mean_final() const {
  if (final_states.empty()) return {};
  Vector m = Vector::Zero(final_states.front().x.size());
  for (const auto& s : final_states) m += s.x;
  return m / static_cast<double>(final_states.size());
}

Vector km_local_step(const Vector& x, const Vector& oracle_value, double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw InvalidParameter("invalid-step: eta = " + fmt_double(eta) + " outside (0, 1)");
  if (x.size() != oracle_value.size()) throw DimensionMismatch("km_local_step: dimension mismatch");
  return (1.0 - eta) * x + eta * oracle_value;
}

std::vector<std::vector<int>> mixing_neighbors(const MixingMatrix& w) {
  const int n = w.size();
  std::vector<std::vector<int>> nb(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && w.w(i, j) != 0.0) nb[i].push_back(j);
  return nb;
}

BroadcastStats consensus_and_broadcast(std::vector<AgentState>& states, const std::vector<Vector>& z,
                                       const MixingMatrix& w, double gamma, double psi,
                                       const CompressorSpec& compressor, double s,
                                       const std::function<Rng(int)>& compressor_rng) {
  const int n = static_cast<int>(states.size());
  if (static_cast<int>(z.size()) != n || w.size() != n) throw DimensionMismatch("consensus: agent count mismatch");
  const auto nb = mixing_neighbors(w);
  BroadcastStats st;

  // (i) consensus step from each agent's own replicas of x^t_hat.
  for (int i = 0; i < n; ++i) {
    Vector x = z[i];
    for (int j : nb[i]) x += (gamma * w.w(i, j)) * (states[i].x_hat_neighbors.at(j) - states[i].x_hat_self);
    states[i].x = std::move(x);
  }

  Vector zbar = Vector::Zero(z.front().size());
  Vector xbar = Vector::Zero(z.front().size());
  for (int i = 0; i < n; ++i) {
    zbar += z[i];
    xbar += states[i].x;
  }
  zbar /= n;
  xbar /= n;
  st.mean_drift = (xbar - zbar).norm() / (1.0 + zbar.norm());

  // (ii) compress the innovation; (iii) every holder applies the same message.
  for (int i = 0; i < n; ++i) {
    Rng rng = compressor_rng(i);
    const CompressedMessage msg = scaled_compress(compressor, states[i].x - states[i].x_hat_self, s, rng);
    const long long receivers = static_cast<long long>(nb[i].size());
    st.bits_per_message += msg.bits;
    st.bits_per_edge += msg.bits * receivers;
    st.index_bits += msg.index_bits * receivers;
    states[i].x_hat_self += (psi * s) * decode(msg);
    for (int j : nb[i]) states[j].x_hat_neighbors.at(i) += (psi * s) * decode(msg);
  }
  return st;
}

bool replicas_consistent(const std::vector<AgentState>& states) {
  const int n = static_cast<int>(states.size());
  for (int j = 0; j < n; ++j)
    for (const auto& [i, replica] : states[j].x_hat_neighbors) {
      if (i < 0 || i >= n) return false;
      if (replica.size() != states[i].x_hat_self.size()) return false;
      if (!(replica.array() == states[i].x_hat_self.array()).all()) return false;
    }
  return true;
}

std::vector<AgentState> initial_states(const RunConfig& cfg) {
  const int n = cfg.op->n_agents();
  const int dim = cfg.op->dim();
  const auto nb = mixing_neighbors(cfg.mixing);
  std::vector<AgentState> st(n);
  for (int i = 0; i < n; ++i) {
    switch (cfg.x0.kind) {
      case X0Kind::zero: st[i].x = Vector::Zero(dim); break;
      case X0Kind::constant: st[i].x = Vector::Constant(dim, cfg.x0.value); break;
      case X0Kind::random_ball: {
        Rng rng = make_stream(cfg.seed, StreamPurpose::init, static_cast<std::uint64_t>(i), 0);
        const Vector u = sample_unit_sphere(dim, rng);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double radius = cfg.x0.value * std::pow(unif(rng), 1.0 / dim);
        st[i].x = radius * u;
        break;
      }
    }
    st[i].x_hat_self = Vector::Zero(dim);
  }
  for (int i = 0; i < n; ++i)
    for (int j : nb[i]) st[i].x_hat_neighbors.emplace(j, Vector::Zero(dim));
  return st;
}

namespace {

TraceRow measure(const RunConfig& cfg, const std::vector<AgentState>& st, long t) {
  const int n = static_cast<int>(st.size());
  TraceRow row;
  row.t = t;
  Vector xbar = Vector::Zero(st.front().x.size());
  for (const auto& a : st) xbar += a.x;
  xbar /= n;
  double res = 0.0, cons = 0.0, dist = 0.0;
  for (const auto& a : st) {
    res += (a.x - apply_global(*cfg.op, a.x)).squaredNorm();
    cons += (a.x - xbar).squaredNorm();
    if (cfg.x_star) dist += (a.x - *cfg.x_star).squaredNorm();
  }
  row.residual = res / n;
  row.consensus_error = cons;
  row.dist_to_fixpoint = cfg.x_star ? dist / n : std::numeric_limits<double>::quiet_NaN();
  row.eta = cfg.step.eta(t);
  return row;
}

// Largest |coordinate| over all agents, or +inf when any entry is non-finite.
double max_abs(const std::vector<AgentState>& st) {
  double m = 0.0;
  for (const auto& a : st) {
    if (!a.x.allFinite() || !a.x_hat_self.allFinite()) return std::numeric_limits<double>::infinity();
    m = std::max(m, a.x.cwiseAbs().maxCoeff());
  }
  return m;
}

}  // namespace

RunTrace run(const RunConfig& cfg) {
  check_run_config(cfg);
  const int n = cfg.op->n_agents();
  const CommSchedule schedule = make_schedule(cfg.comm.policy, cfg.horizon, cfg.comm.h, cfg.comm.seed);

  auto trace = std::make_shared<RunTrace>();
  trace->run_id = cfg.run_id;
  trace->seed = cfg.seed;
  const TheoremInputs hyp = theorem_inputs(cfg);
  trace->validation.push_back(validate_theorem1(hyp));
  trace->validation.push_back(validate_theorem2(hyp));

  std::vector<AgentState> st = initial_states(cfg);
  trace->rows.reserve(cfg.horizon + 1);
  trace->rows.push_back(measure(cfg, st, 0));
  long long bits = 0;
  long rounds = 0;
  std::vector<Vector> z(n);

  for (long t = 0; t < cfg.horizon; ++t) {
    const double eta = cfg.step.eta(t);
    const double s = cfg.freeze_scale ? cfg.step.eta(0) : eta;
    for (int i = 0; i < n; ++i) {
      const OperatorSpec& local = cfg.op->locals[i];
      if (!cfg.op->in_box(st[i].x)) ++trace->diag.box_violations;
      Rng rng = make_stream(cfg.seed, StreamPurpose::oracle, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
      z[i] = km_local_step(st[i].x, sample(cfg.oracle, local, st[i].x, rng, static_cast<std::uint64_t>(t)).value, eta);
    }
    if (schedule.communicates(t + 1)) {
      const auto crng = [&](int i) {
        return make_stream(cfg.seed, StreamPurpose::compressor, static_cast<std::uint64_t>(i),
                           static_cast<std::uint64_t>(t));
      };
      const BroadcastStats b = consensus_and_broadcast(st, z, cfg.mixing, cfg.gamma, cfg.psi, cfg.compressor, s, crng);
      bits += b.bits_per_edge;
      trace->diag.bits_per_message += b.bits_per_message;
      trace->diag.index_bits += b.index_bits;
      trace->diag.max_mean_drift = std::max(trace->diag.max_mean_drift, b.mean_drift);
      if (!replicas_consistent(st)) trace->diag.replicas_consistent = false;
      ++rounds;
    } else {
      for (int i = 0; i < n; ++i) st[i].x = z[i];
    }

    const double m = max_abs(st);
    if (!(m <= kDivergenceThreshold)) {
      trace->final_states = st;
      throw DivergenceError("run " + cfg.run_id + " diverged at t=" + std::to_string(t + 1) +
                                " (max |x| = " + fmt_double(m) + ")",
                            trace);
    }
    trace->diag.max_abs_coordinate = std::max(trace->diag.max_abs_coordinate, m);
    TraceRow row = measure(cfg, st, t + 1);
    row.bits_cumulative = bits;
    row.comm_rounds = rounds;
    trace->rows.push_back(row);
  }
  trace->final_states = std::move(st);
  return std::move(*trace);
}

int worker_threads() {
  if (const char* env = std::getenv("FPNET_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<SweepResult> run_sweep(const RunConfig& base, const std::vector<SweepPoint>& grid,
                                   const std::vector<std::uint64_t>& seeds) {
  if (grid.empty()) throw InvalidParameter("sweep grid is empty");
  if (seeds.empty()) throw InvalidParameter("sweep needs at least one seed");
  std::vector<SweepResult> out(grid.size() * seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < out.size(); k = next++) {
      const SweepPoint& p = grid[k / seeds.size()];
      SweepResult& r = out[k];
      r.label = p.label;
      r.seed = seeds[k % seeds.size()];
      try {
        RunConfig cfg = base;
        if (p.apply) p.apply(cfg);
        cfg.seed = r.seed;
        cfg.run_id = p.label + "_seed" + std::to_string(r.seed);
        r.trace = run(cfg);
      } catch (const Error& e) {
        r.error_code = e.code();
        r.error = e.what();
      } catch (const std::exception& e) {
        r.error_code = "internal";
        r.error = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(worker_threads(), static_cast<int>(out.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return out;
}

void write_trace_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("io", "cannot write " + path);
  os << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    os << r.t << ',' << fmt_double(r.residual) << ',' << fmt_double(r.consensus_error) << ','
       << (std::isnan(r.dist_to_fixpoint) ? std::string("nan") : fmt_double(r.dist_to_fixpoint)) << ','
       << r.bits_cumulative << ',' << r.comm_rounds << ',' << fmt_double(r.eta) << '\n';
  }
  if (!os) throw Error("io", "write failed for " + path);
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("io", "cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw ParseError(path + ": unexpected trace header");
  std::vector<TraceRow> rows;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ParseError(path + ":" + std::to_string(lineno) + ": expected 7 columns");
    try {
      TraceRow r;
      r.t = std::stol(f[0]);
      r.residual = std::stod(f[1]);
      r.consensus_error = std::stod(f[2]);
      r.dist_to_fixpoint = f[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[3]);
      r.bits_cumulative = std::stoll(f[4]);
      r.comm_rounds = std::stol(f[5]);
      r.eta = std::stod(f[6]);
      rows.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace fpnet
