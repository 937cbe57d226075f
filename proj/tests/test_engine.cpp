#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fpnet/engine.hpp"
#include "reference_km.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace fpnet;

namespace {

RunConfig base_config(const GlobalOperator& g, const Graph& graph, CompressorKind kind) {
  RunConfig cfg;
  cfg.op = std::make_shared<GlobalOperator>(g);
  cfg.mixing = metropolis_mixing(graph);
  cfg.compressor = make_compressor(kind, g.dim());
  cfg.comm = {SchedulePolicy::fixed_period, 3, 1};
  cfg.step = {StepKind::inv_sqrt, 80.0, 0.8};
  cfg.gamma = 0.1;
  cfg.psi = 1.0 / cfg.compressor.r;
  cfg.horizon = 300;
  return cfg;
}

GlobalOperator single(const OperatorSpec& op) {
  GlobalOperator g;
  g.locals = {op};
  return g;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("km_local_step: affine evaluation and domain") {
  const Vector x = Vector::Constant(1, 2.0);
  const Vector tx = linear_operator(1, 0.5).apply(x);
  CHECK(km_local_step(x, tx, 0.5)(0) == 1.5);
  const Vector near = km_local_step(x, tx, 1e-9);
  CHECK(std::abs(near(0) - 2.0) <= 1e-9 * std::abs(tx(0) - 2.0) * (1 + 1e-12));
  CHECK_THROWS_AS(km_local_step(x, tx, 0.0), InvalidParameter);
  CHECK_THROWS_AS(km_local_step(x, tx, 1.0), InvalidParameter);
  CHECK_THROWS_AS(km_local_step(x, tx, -0.1), InvalidParameter);
  CHECK_THROWS_AS(km_local_step(x, Vector::Zero(2), 0.5), DimensionMismatch);
}

TEST_CASE("km_local_step: three-step block matches the compact form") {
  Rng rng = test::gen(1);
  const Vector x0 = test::random_vector(rng, 4);
  const StepSchedule step{StepKind::inv_sqrt, 5.0, 0.9};
  std::vector<Vector> v;
  for (int k = 0; k < 3; ++k) v.push_back(test::random_vector(rng, 4));
  Vector x = x0;
  for (int k = 0; k < 3; ++k) x = km_local_step(x, v[k], step.eta(10 + k));
  // x_{t+3} = prod(1 - eta_k) x_t + sum_k eta_k prod_{l>k}(1 - eta_l) v_k.
  double prod = 1.0;
  for (int k = 0; k < 3; ++k) prod *= 1.0 - step.eta(10 + k);
  Vector compact = prod * x0;
  for (int k = 0; k < 3; ++k) {
    double tail = step.eta(10 + k);
    for (int l = k + 1; l < 3; ++l) tail *= 1.0 - step.eta(10 + l);
    compact += tail * v[k];
  }
  CHECK((x - compact).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("consensus_and_broadcast: lossless and fixed-point cases") {
  const int n = 4, dim = 3;
  const MixingMatrix w = metropolis_mixing(build_graph({Topology::ring}, n));
  RunConfig cfg;
  cfg.op = std::make_shared<GlobalOperator>(make_strongly_convex_suite(dim));
  Rng rng = test::gen(2);
  std::vector<AgentState> st(n);
  std::vector<Vector> z(n);
  const auto nb = mixing_neighbors(w);
  for (int i = 0; i < n; ++i) {
    st[i].x = Vector::Zero(dim);
    st[i].x_hat_self = test::random_vector(rng, dim);
    z[i] = test::random_vector(rng, dim);
  }
  for (int i = 0; i < n; ++i)
    for (int j : nb[i]) st[i].x_hat_neighbors[j] = st[j].x_hat_self;
  const CompressorSpec id = make_compressor(CompressorKind::identity, dim);
  const auto crng = [](int i) { return make_stream(1, StreamPurpose::compressor, i, 0); };
  consensus_and_broadcast(st, z, w, 0.3, 1.0, id, 0.37, crng);
  for (int i = 0; i < n; ++i) CHECK((st[i].x_hat_self - st[i].x).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(replicas_consistent(st));

  // Agreement with matching estimates: the consensus term vanishes.
  const Vector common = test::random_vector(rng, dim);
  for (int i = 0; i < n; ++i) {
    st[i].x_hat_self = common;
    for (int j : nb[i]) st[i].x_hat_neighbors[j] = common;
    z[i] = common;
  }
  consensus_and_broadcast(st, z, w, 0.3, 1.0, id, 1.0, crng);
  for (int i = 0; i < n; ++i) CHECK(st[i].x == common);
}

TEST_CASE("run: single agent geometric recursion x_t = 0.75^t x_0") {
  RunConfig cfg;
  cfg.op = std::make_shared<GlobalOperator>(single(linear_operator(2, 0.5)));
  cfg.mixing = make_mixing(Matrix::Ones(1, 1));
  cfg.compressor = make_compressor(CompressorKind::identity, 2);
  cfg.comm = {SchedulePolicy::every_step, 1, 1};
  cfg.step = {StepKind::constant, 1.0, 0.5};
  cfg.psi = 1.0;
  cfg.horizon = 40;
  cfg.x0 = {X0Kind::constant, 3.0};
  cfg.x_star = Vector::Zero(2);
  const RunTrace tr = run(cfg);
  REQUIRE(tr.rows.size() == 41u);
  for (const auto& row : tr.rows) {
    const double xt = std::pow(0.75, static_cast<double>(row.t)) * 3.0;
    CHECK(row.dist_to_fixpoint == doctest::Approx(2 * xt * xt).epsilon(1e-12));
    CHECK(row.residual == doctest::Approx(2 * 0.25 * xt * xt).epsilon(1e-12));
    CHECK(row.consensus_error == 0.0);
    CHECK(row.bits_cumulative == 0);
    CHECK(row.eta == 0.5);
  }
  CHECK(tr.final_states[0].x(0) == doctest::Approx(3.0 * std::pow(0.75, 40)).epsilon(1e-13));
}

TEST_CASE("run: identity compressor, H = 1 matches a plain distributed KM loop") {
  for (const auto& g : {make_strongly_convex_suite(5), make_nonconvex_suite(5)}) {
    const Graph graph = build_graph({Topology::random_connected, 0.5, 3}, 6);
    RunConfig cfg = base_config(g, graph, CompressorKind::identity);
    cfg.comm = {SchedulePolicy::every_step, 1, 1};
    cfg.psi = 1.0;
    cfg.gamma = 0.4;
    cfg.horizon = 1000;
    const RunTrace tr = run(cfg);
    const auto ref = test::reference_km(g, cfg.mixing.w, cfg.gamma, cfg.step,
                                        std::vector<Vector>(6, Vector::Zero(5)), cfg.horizon);
    double err = 0.0;
    for (int i = 0; i < 6; ++i) err = std::max(err, (tr.final_states[i].x - ref[i]).cwiseAbs().maxCoeff());
    CHECK(err <= 1e-12);
  }
}

TEST_CASE("run: identical locals on a complete graph reduce to the centralised recursion") {
  // With T_i = T and equal starts, all agents follow x <- (1 - eta) x + eta T(x).
  GlobalOperator g;
  const OperatorSpec op = make_strongly_convex_suite(3).locals[1];
  g.locals.assign(4, op);
  RunConfig cfg = base_config(g, build_graph({Topology::complete}, 4), CompressorKind::identity);
  cfg.comm = {SchedulePolicy::every_step, 1, 1};
  cfg.psi = 1.0;
  cfg.horizon = 500;
  cfg.x0 = {X0Kind::constant, 0.0};
  const RunTrace tr = run(cfg);
  Vector x = Vector::Zero(3);
  for (long t = 0; t < cfg.horizon; ++t) x = (1.0 - cfg.step.eta(t)) * x + cfg.step.eta(t) * op.apply(x);
  for (const auto& s : tr.final_states) CHECK((s.x - x).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("run: mean preservation, replica consistency and bit totals") {
  const Graph graph = build_graph({Topology::random_connected, 0.4, 7}, 6);
  for (const auto kind : {CompressorKind::c1_inf_quantizer, CompressorKind::c2_uniform,
                          CompressorKind::c3_sparsify_quantize, CompressorKind::identity}) {
    RunConfig cfg = base_config(make_nonconvex_suite(30), graph, kind);
    cfg.oracle.noise_std = 0.1;
    cfg.horizon = 200;
    const RunTrace tr = run(cfg);
    CHECK(tr.diag.replicas_consistent);
    CHECK(tr.diag.max_mean_drift <= 1e-12);
    const long rounds = tr.rows.back().comm_rounds;
    CHECK(rounds == make_schedule(SchedulePolicy::fixed_period, 200, 3).rounds());
    long long degree_sum = 0;
    for (int i = 0; i < 6; ++i) degree_sum += graph.degree(i);
    if (kind == CompressorKind::c1_inf_quantizer) {
      CHECK(tr.rows.back().bits_cumulative == rounds * degree_sum * 154);
      CHECK(tr.diag.bits_per_message == rounds * 6 * 154);
    }
    if (kind == CompressorKind::c2_uniform) CHECK(tr.rows.back().bits_cumulative == rounds * degree_sum * 240);
    if (kind == CompressorKind::c3_sparsify_quantize) {
      CHECK(tr.rows.back().bits_cumulative % 8 == 0);
      CHECK(tr.diag.index_bits == tr.rows.back().bits_cumulative / 8 * 5);
    }
    for (std::size_t k = 1; k < tr.rows.size(); ++k) {
      CHECK(tr.rows[k].bits_cumulative >= tr.rows[k - 1].bits_cumulative);
      const bool comm = tr.rows[k].comm_rounds != tr.rows[k - 1].comm_rounds;
      if (kind != CompressorKind::c3_sparsify_quantize)
        CHECK(comm == (tr.rows[k].bits_cumulative != tr.rows[k - 1].bits_cumulative));
    }
  }
}

TEST_CASE("run: estimates only change at communication steps") {
  const Graph graph = build_graph({Topology::ring}, 6);
  RunConfig cfg = base_config(make_nonconvex_suite(4), graph, CompressorKind::c1_inf_quantizer);
  cfg.oracle.noise_std = 0.2;
  // Schedule {1, 4, 7, ...}: step t communicates iff t + 1 is an index.
  cfg.horizon = 4;
  const RunTrace a = run(cfg);
  cfg.horizon = 5;
  const RunTrace b = run(cfg);
  cfg.horizon = 6;
  const RunTrace c = run(cfg);
  for (int i = 0; i < 6; ++i) {
    CHECK(a.final_states[i].x_hat_self == b.final_states[i].x_hat_self);
    CHECK(b.final_states[i].x_hat_self == c.final_states[i].x_hat_self);
    CHECK(a.final_states[i].x_hat_neighbors == c.final_states[i].x_hat_neighbors);
    CHECK(b.final_states[i].x != c.final_states[i].x);
  }
  CHECK(a.rows.back().comm_rounds == 2);
  CHECK(c.rows.back().comm_rounds == 2);
}

TEST_CASE("run: x_hat starts at zero for any x0 policy") {
  const Graph graph = build_graph({Topology::ring}, 6);
  RunConfig cfg = base_config(make_nonconvex_suite(4), graph, CompressorKind::c2_uniform);
  cfg.x0 = {X0Kind::random_ball, 2.0};
  const auto st = initial_states(cfg);
  for (const auto& s : st) {
    CHECK(s.x.norm() <= 2.0);
    CHECK(s.x.norm() > 0.0);
    CHECK(s.x_hat_self.norm() == 0.0);
    CHECK(s.x_hat_neighbors.size() == 2u);
  }
  CHECK(initial_states(cfg)[3].x == st[3].x);
}

TEST_CASE("run: byte-identical reruns under a fixed seed") {
  const Graph graph = build_graph({Topology::random_connected, 0.4, 7}, 6);
  RunConfig cfg = base_config(make_nonconvex_suite(10), graph, CompressorKind::c3_sparsify_quantize);
  cfg.oracle.noise_std = 0.3;
  cfg.seed = 42;
  const std::string dir = test::temp_dir("engine_rerun");
  write_trace_csv(run(cfg), dir + "/a.csv");
  write_trace_csv(run(cfg), dir + "/b.csv");
  CHECK(slurp(dir + "/a.csv") == slurp(dir + "/b.csv"));
  cfg.seed = 43;
  write_trace_csv(run(cfg), dir + "/c.csv");
  CHECK(slurp(dir + "/a.csv") != slurp(dir + "/c.csv"));
}

TEST_CASE("trace CSV: schema and round trip") {
  const Graph graph = build_graph({Topology::ring}, 6);
  RunConfig cfg = base_config(make_strongly_convex_suite(3), graph, CompressorKind::c1_inf_quantizer);
  cfg.oracle.noise_std = 0.1;
  cfg.horizon = 50;
  const std::string dir = test::temp_dir("engine_csv");
  const RunTrace tr = run(cfg);
  write_trace_csv(tr, dir + "/t.csv");
  const std::string text = slurp(dir + "/t.csv");
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  CHECK(text.find(",nan,") != std::string::npos);
  const auto rows = read_trace_csv(dir + "/t.csv");
  REQUIRE(rows.size() == tr.rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].t == tr.rows[k].t);
    CHECK(rows[k].residual == tr.rows[k].residual);
    CHECK(rows[k].consensus_error == tr.rows[k].consensus_error);
    CHECK(std::isnan(rows[k].dist_to_fixpoint));
    CHECK(rows[k].bits_cumulative == tr.rows[k].bits_cumulative);
    CHECK(rows[k].eta == tr.rows[k].eta);
  }
  std::ofstream(dir + "/bad.csv") << "t,residual\n1,2\n";
  CHECK_THROWS_AS(read_trace_csv(dir + "/bad.csv"), ParseError);
  CHECK_THROWS_AS(read_trace_csv(dir + "/missing.csv"), Error);
}

TEST_CASE("run: divergence carries the last finite trace") {
  RunConfig cfg;
  GlobalOperator g;
  g.locals = {linear_operator(2, 3.0), linear_operator(2, 3.0)};
  cfg.op = std::make_shared<GlobalOperator>(g);
  cfg.mixing = metropolis_mixing(build_graph({Topology::path}, 2));
  cfg.compressor = make_compressor(CompressorKind::identity, 2);
  cfg.step = {StepKind::constant, 1.0, 0.9};
  cfg.horizon = 1000;
  cfg.x0 = {X0Kind::constant, 1.0};
  try {
    run(cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.code() == "divergence");
    REQUIRE(e.trace);
    CHECK(e.trace->rows.size() > 10u);
    CHECK(e.trace->rows.size() < 1000u);
    CHECK(std::isfinite(e.trace->rows.back().residual));
  }
}

TEST_CASE("run: configuration errors") {
  const Graph graph = build_graph({Topology::ring}, 6);
  RunConfig cfg = base_config(make_nonconvex_suite(4), graph, CompressorKind::c1_inf_quantizer);
  RunConfig bad = cfg;
  bad.compressor = make_compressor(CompressorKind::c1_inf_quantizer, 5);
  CHECK_THROWS_AS(run(bad), DimensionMismatch);
  bad = cfg;
  bad.mixing = metropolis_mixing(build_graph({Topology::ring}, 5));
  CHECK_THROWS_AS(run(bad), DimensionMismatch);
  bad = cfg;
  bad.step = {StepKind::inv_sqrt, 0.5, 0.9};
  CHECK_THROWS_AS(run(bad), InvalidParameter);
  bad = cfg;
  bad.gamma = 0.0;
  CHECK_THROWS_AS(run(bad), InvalidParameter);
}

TEST_CASE("run_sweep: schedule cardinality and seed behaviour") {
  const Graph graph = build_graph({Topology::random_connected, 0.4, 7}, 6);
  RunConfig cfg = base_config(make_nonconvex_suite(6), graph, CompressorKind::c2_uniform);
  cfg.horizon = 390;
  std::vector<SweepPoint> grid;
  for (int h : {3, 8, 13}) grid.push_back({"H-" + std::to_string(h), [h](RunConfig& c) { c.comm.h = h; }});
  const auto res = run_sweep(cfg, grid, {1});
  REQUIRE(res.size() == 3u);
  for (const auto& r : res) REQUIRE(r.trace);
  CHECK(res[0].trace->rows.back().comm_rounds == 130);
  CHECK(res[1].trace->rows.back().comm_rounds == 49);
  CHECK(res[2].trace->rows.back().comm_rounds == 30);
  CHECK(res[0].trace->run_id == "H-3_seed1");

  cfg.oracle.noise_std = 0.1;
  const auto seeds = run_sweep(cfg, {{"p", nullptr}}, {1, 2, 3, 4, 5});
  REQUIRE(seeds.size() == 5u);
  for (const auto& r : seeds) CHECK(r.trace->rows.back().comm_rounds == seeds[0].trace->rows.back().comm_rounds);
  CHECK(seeds[0].trace->rows.back().residual != seeds[1].trace->rows.back().residual);

  cfg.oracle.noise_std = 0.0;
  const auto quiet = run_sweep(cfg, {{"q", nullptr}}, {1, 2, 3});
  for (const auto& r : quiet)
    for (std::size_t k = 0; k < r.trace->rows.size(); ++k)
      CHECK(r.trace->rows[k].residual == quiet[0].trace->rows[k].residual);

  RunConfig broken = cfg;
  const auto failed = run_sweep(broken, {{"bad", [](RunConfig& c) { c.gamma = -1.0; }}}, {1, 2});
  CHECK_FALSE(failed[0].trace);
  CHECK(failed[0].error_code == "invalid-parameter");
  CHECK_THROWS_AS(run_sweep(cfg, {}, {1}), InvalidParameter);
}
