#include "fpnet/analysis.hpp"

#include "fpnet/format.hpp"
#include "fpnet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace fpnet {

SurrogateEvaluator make_surrogate(const GlobalOperator& g, int quadrature_nodes) {
  auto op = std::make_shared<GlobalOperator>(g);
  return {[op](const Vector& x) { return apply_global(*op, x); }, Vector::Zero(g.dim()), quadrature_nodes};
}

SurrogateEvaluator make_surrogate(const OperatorSpec& op, int quadrature_nodes) {
  return {[op](const Vector& x) { return op.apply(x); }, Vector::Zero(op.dim()), quadrature_nodes};
}

GaussRule gauss_legendre(int n) {
  if (n < 1) throw InvalidParameter("Gauss-Legendre rule needs n >= 1");
  // P_n(x) by the three-term recurrence, and P_n'(x).
  auto legendre = [n](double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    return std::pair{p1, n * (x * p1 - p0) / (x * x - 1.0)};
  };
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

namespace {

// int_0^1 <u(s) - T(u(s)), b - a> ds with u(s) = a + s (b - a).
double segment_integral(const SurrogateEvaluator& ev, const Vector& a, const Vector& b) {
  const int per_panel = ev.quadrature_nodes % 8 == 0 ? 8 : ev.quadrature_nodes;
  const int panels = ev.quadrature_nodes / per_panel;
  static thread_local std::vector<std::pair<int, GaussRule>> cache;
  const GaussRule* rule = nullptr;
  for (const auto& [k, r] : cache)
    if (k == per_panel) rule = &r;
  if (!rule) {
    cache.emplace_back(per_panel, gauss_legendre(per_panel));
    rule = &cache.back().second;
  }
  const Vector d = b - a;
  const double h = 1.0 / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = (p + 0.5) * h;
    for (int k = 0; k < per_panel; ++k) {
      const double s = mid + 0.5 * h * rule->nodes[k];
      const Vector u = a + s * d;
      total += 0.5 * h * rule->weights[k] * (u - ev.map(u)).dot(d);
    }
  }
  return total;
}

}  // namespace

double surrogate_value(const SurrogateEvaluator& ev, const Vector& x) {
  if (x.size() != ev.base_point.size()) throw DimensionMismatch("surrogate_value: dimension mismatch");
  if (ev.quadrature_nodes < 1) throw InvalidParameter("quadrature_nodes must be >= 1");
  return segment_integral(ev, ev.base_point, x);
}

double surrogate_value_path(const SurrogateEvaluator& ev, const std::vector<Vector>& waypoints, const Vector& x) {
  Vector from = ev.base_point;
  double total = 0.0;
  for (const auto& w : waypoints) {
    total += segment_integral(ev, from, w);
    from = w;
  }
  return total + segment_integral(ev, from, x);
}

Vector surrogate_gradient(const SurrogateEvaluator& ev, const Vector& x) { return x - ev.map(x); }

std::string Lemma1Report::to_text() const {
  std::ostringstream os;
  os << "lemma1 status=" << (pass ? "PASS" : "FAIL") << " samples=" << samples << '\n';
  os << "item name=a worst=" << fmt_double(worst_a) << '\n';
  if (checked_strong) {
    os << "item name=b worst=" << fmt_double(worst_b) << '\n';
    os << "item name=c worst=" << fmt_double(worst_c) << '\n';
  } else {
    os << "item name=b skipped reason=\"" << skip_reason << "\"\n";
    os << "item name=c skipped reason=\"" << skip_reason << "\"\n";
  }
  return os.str();
}

Lemma1Report check_lemma1(const GlobalOperator& g, double lipschitz, int n_samples, std::uint64_t seed,
                          double slack) {
  Lemma1Report rep;
  rep.samples = n_samples;
  rep.checked_strong = lipschitz < 1.0;
  if (!rep.checked_strong) rep.skip_reason = "requires L < 1";
  const int dim = g.dim();
  const double box = g.box_radius;
  Rng rng = make_stream(seed, StreamPurpose::misc, 0x1e1, 0);
  std::uniform_real_distribution<double> unif(-box, box);
  auto draw = [&] {
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v(k) = unif(rng);
    return v;
  };

  for (std::size_t i = 0; i < g.locals.size(); ++i) {
    const OperatorSpec& op = g.locals[i];
    const SurrogateEvaluator ev = make_surrogate(op);
    Vector x_star;
    double g_star = 0.0;
    if (rep.checked_strong) {
      x_star = find_fixed_point([&op](const Vector& v) { return op.apply(v); }, Vector::Zero(dim), true).x;
      g_star = surrogate_value(ev, x_star);
    }
    const int per_local = std::max(1, n_samples / static_cast<int>(g.locals.size()));
    for (int s = 0; s < per_local; ++s) {
      const Vector x = draw();
      const Vector y = draw();
      const double gx = surrogate_value(ev, x);
      const double gy = surrogate_value(ev, y);
      const Vector grad = surrogate_gradient(ev, x);
      const double rhs_a = gx + grad.dot(y - x) + 0.5 * (1.0 + lipschitz) * (x - y).squaredNorm();
      const double va = gy - rhs_a;
      rep.worst_a = std::max(rep.worst_a, va);
      if (va > slack * (1.0 + std::abs(gy) + std::abs(rhs_a))) rep.pass = false;
      if (!rep.checked_strong) continue;
      const double gap = gx - g_star;
      const double vb = 2.0 * (1.0 - lipschitz) * gap - grad.squaredNorm();
      const double vc = 0.5 * (1.0 - lipschitz) * (x - x_star).squaredNorm() - gap;
      rep.worst_b = std::max(rep.worst_b, vb);
      rep.worst_c = std::max(rep.worst_c, vc);
      const double scale = 1.0 + std::abs(gx) + std::abs(g_star);
      if (vb > slack * (scale + grad.squaredNorm()) || vc > slack * scale) rep.pass = false;
    }
  }
  return rep;
}

RateModel parse_rate_model(const std::string& name) {
  if (name == "log_over_sqrt") return RateModel::log_over_sqrt;
  if (name == "log_over_linear") return RateModel::log_over_linear;
  if (name == "plateau") return RateModel::plateau;
  throw InvalidParameter("unknown rate model '" + name + "'");
}

std::string to_string(RateModel m) {
  switch (m) {
    case RateModel::log_over_sqrt: return "log_over_sqrt";
    case RateModel::log_over_linear: return "log_over_linear";
    case RateModel::plateau: return "plateau";
  }
  return "?";
}

double rate_regressor(RateModel m, double t) {
  switch (m) {
    case RateModel::log_over_sqrt: return std::log(t) / std::sqrt(t);
    case RateModel::log_over_linear: return std::log(t) / t;
    case RateModel::plateau: return 1.0;
  }
  return 1.0;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

namespace {

struct Ols {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

Ols ols(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  Ols o;
  o.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  o.intercept = my - o.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (o.intercept + o.slope * x[i]);
    ss_res += e * e;
  }
  o.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return o;
}

// Distinct indices in [lo, hi] whose t values are roughly log-spaced.
std::vector<std::size_t> log_spaced(const std::vector<double>& t, std::size_t lo, std::size_t hi, int max_points) {
  std::vector<std::size_t> idx;
  if (hi < lo) return idx;
  if (static_cast<int>(hi - lo + 1) <= max_points) {
    for (std::size_t i = lo; i <= hi; ++i) idx.push_back(i);
    return idx;
  }
  const double a = std::log(std::max(t[lo], 1e-300));
  const double b = std::log(std::max(t[hi], 1e-300));
  std::size_t cur = lo;
  for (int k = 0; k < max_points; ++k) {
    const double target = std::exp(a + (b - a) * k / (max_points - 1));
    while (cur < hi && t[cur] < target) ++cur;
    if (idx.empty() || idx.back() != cur) idx.push_back(cur);
  }
  return idx;
}

}  // namespace

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& metric, RateModel model,
                 const FitOptions& opts) {
  if (t.size() != metric.size()) throw DimensionMismatch("fit_rate: t and metric differ in length");
  if (t.size() < 1000) throw Error("fit-window", "fit_rate needs at least 1000 samples");
  const std::size_t n = t.size();
  RateFit fit;
  fit.model = model;

  const std::vector<double> tail(metric.end() - static_cast<long>(n / 10), metric.end());
  fit.plateau_level = median(tail);

  // Log-log slope over the second half decides whether the tail is flat.
  {
    std::vector<double> lx, ly;
    for (std::size_t i : log_spaced(t, n / 2, n - 1, opts.max_points))
      if (metric[i] > 0.0 && t[i] > 0.0) {
        lx.push_back(std::log(t[i]));
        ly.push_back(std::log(metric[i]));
      }
    const bool flat = lx.size() >= 2 && std::abs(ols(lx, ly).slope) < opts.flat_slope;
    fit.plateau_subtracted = flat && fit.plateau_level > 0.0;
  }
  if (model == RateModel::plateau) {
    fit.reason = "plateau model requested";
    return fit;
  }
  const double p = fit.plateau_subtracted ? fit.plateau_level : 0.0;
  const double t_max = opts.t_max > 0.0 ? opts.t_max : t.back();

  std::size_t lo = 0;
  while (lo < n && t[lo] < std::max(opts.t_min, 1.0 + 1e-9)) ++lo;
  std::size_t hi = lo;
  bool any = false;
  for (std::size_t i = lo; i < n && t[i] <= t_max; ++i) {
    const double excess = metric[i] - p;
    if (fit.plateau_subtracted ? excess < opts.min_excess * p : !(excess > 0.0)) {
      if (!fit.plateau_subtracted && any)
        throw Error("fit-window", "metric non-positive at t=" + fmt_double(t[i]) + " inside the decay window");
      break;
    }
    hi = i;
    any = true;
  }
  if (!any) {
    fit.model = RateModel::plateau;
    fit.reason = "no decaying window above the plateau";
    return fit;
  }
  std::vector<double> x, y;
  for (std::size_t i : log_spaced(t, lo, hi, opts.max_points)) {
    x.push_back(std::log(rate_regressor(model, t[i])));
    y.push_back(std::log(metric[i] - p));
  }
  fit.window_begin = t[lo];
  fit.window_end = t[hi];
  fit.window_points = static_cast<int>(x.size());
  if (fit.window_points < opts.min_points || t[hi] < 2.0 * t[lo]) {
    fit.model = RateModel::plateau;
    fit.reason = "decaying window too short";
    return fit;
  }
  const Ols o = ols(x, y);
  fit.slope = o.slope;
  fit.intercept = o.intercept;
  fit.r_squared = o.r2;
  fit.decay_accepted = true;
  return fit;
}

AveragedTrace average_traces(const std::vector<RunTrace>& traces) {
  if (traces.empty()) throw InvalidParameter("average_traces: no traces");
  const std::size_t len = traces.front().rows.size();
  for (const auto& tr : traces)
    if (tr.rows.size() != len) throw DimensionMismatch("average_traces: traces differ in length");
  AveragedTrace a;
  a.n_seeds = static_cast<int>(traces.size());
  const double s = a.n_seeds;
  auto column = [&](auto get, std::vector<double>& mean, std::vector<double>& se) {
    mean.assign(len, 0.0);
    se.assign(len, 0.0);
    for (std::size_t k = 0; k < len; ++k) {
      double s1 = 0.0, s2 = 0.0;
      for (const auto& tr : traces) {
        const double v = get(tr.rows[k]);
        s1 += v;
        s2 += v * v;
      }
      mean[k] = s1 / s;
      se[k] = s > 1.0 ? std::sqrt(std::max(0.0, (s2 / s - mean[k] * mean[k]) * s / (s - 1.0)) / s) : 0.0;
    }
  };
  a.t.resize(len);
  for (std::size_t k = 0; k < len; ++k) a.t[k] = static_cast<double>(traces.front().rows[k].t);
  column([](const TraceRow& r) { return r.residual; }, a.residual, a.residual_se);
  column([](const TraceRow& r) { return r.consensus_error; }, a.consensus, a.consensus_se);
  column([](const TraceRow& r) { return r.dist_to_fixpoint; }, a.dist, a.dist_se);
  return a;
}

std::vector<double> running_average(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    s += v[k];
    out[k] = s / static_cast<double>(k + 1);
  }
  return out;
}

PlateauEstimate plateau_of(const std::vector<RunTrace>& traces, const std::string& metric, double fraction) {
  if (traces.empty()) throw InvalidParameter("plateau_of: no traces");
  std::vector<double> levels;
  for (const auto& tr : traces) {
    const std::size_t len = tr.rows.size();
    const std::size_t from = len - std::max<std::size_t>(1, static_cast<std::size_t>(fraction * len));
    std::vector<double> tail;
    for (std::size_t k = from; k < len; ++k) {
      const TraceRow& r = tr.rows[k];
      if (metric == "residual") tail.push_back(r.residual);
      else if (metric == "consensus") tail.push_back(r.consensus_error);
      else if (metric == "dist") tail.push_back(r.dist_to_fixpoint);
      else throw InvalidParameter("unknown metric '" + metric + "'");
    }
    levels.push_back(median(tail));
  }
  const double s = static_cast<double>(levels.size());
  double m = 0.0, m2 = 0.0;
  for (double v : levels) {
    m += v;
    m2 += v * v;
  }
  m /= s;
  PlateauEstimate p;
  p.level = m;
  p.se = s > 1.0 ? std::sqrt(std::max(0.0, (m2 / s - m * m) * s / (s - 1.0)) / s) : 0.0;
  return p;
}

std::string to_string(VerdictStatus s) {
  switch (s) {
    case VerdictStatus::pass: return "PASS";
    case VerdictStatus::fail: return "FAIL";
    case VerdictStatus::skip: return "SKIP";
  }
  return "?";
}

void VerdictReport::add(VerdictClause c) {
  if (c.status == VerdictStatus::fail) pass = false;
  clauses.push_back(std::move(c));
}

std::string VerdictReport::to_text() const {
  std::ostringstream os;
  os << "verdict " << subject << " status=" << (pass ? "PASS" : "FAIL") << '\n';
  for (const auto& c : clauses)
    os << "clause name=" << c.name << " status=" << to_string(c.status) << " measured=" << fmt_double(c.measured)
       << " bound=" << fmt_double(c.bound) << " detail=\"" << c.detail << "\"\n";
  return os.str();
}

namespace {

VerdictClause per_t_consensus(const AveragedTrace& a, double c_const, const StepSchedule& step, double t_min) {
  VerdictClause c;
  c.name = "consensus_per_t";
  double worst = 0.0;
  double worst_t = 0.0;
  bool ok = true;
  for (std::size_t k = 0; k < a.t.size(); ++k) {
    if (a.t[k] < t_min) continue;
    const double eta = step.eta(static_cast<long>(a.t[k]));
    const double bound = c_const * eta * eta;
    const double lower = a.consensus[k] - 3.0 * a.consensus_se[k];
    const double ratio = bound > 0.0 ? lower / bound : std::numeric_limits<double>::infinity();
    if (ratio > worst) {
      worst = ratio;
      worst_t = a.t[k];
    }
    if (lower > bound) ok = false;
  }
  c.status = ok ? VerdictStatus::pass : VerdictStatus::fail;
  c.measured = worst;
  c.bound = 1.0;
  c.detail = "max over t>=" + fmt_double(t_min) + " of (mean - 3se)/(C eta_t^2) at t=" + fmt_double(worst_t);
  return c;
}

VerdictClause rate_clause(const std::string& name, const std::vector<double>& t, const std::vector<double>& m,
                          RateModel model, double t_min, double tol) {
  VerdictClause c;
  c.name = name;
  FitOptions fo;
  fo.t_min = t_min;
  try {
    const RateFit f = fit_rate(t, m, model, fo);
    c.measured = f.slope;
    c.bound = 1.0;
    c.status = f.decay_accepted && std::abs(f.slope - 1.0) <= tol ? VerdictStatus::pass : VerdictStatus::fail;
    c.detail = "model=" + to_string(model) + " r2=" + fmt_double(f.r_squared) + " window=[" +
               fmt_double(f.window_begin) + "," + fmt_double(f.window_end) + "] plateau=" +
               fmt_double(f.plateau_subtracted ? f.plateau_level : 0.0) + (f.reason.empty() ? "" : " " + f.reason);
  } catch (const Error& e) {
    c.status = VerdictStatus::fail;
    c.detail = e.what();
  }
  return c;
}

VerdictClause plateau_clause(const std::vector<RunTrace>& traces, const std::string& metric, bool biased) {
  VerdictClause c;
  c.name = "plateau_finite";
  const PlateauEstimate p = plateau_of(traces, metric);
  c.measured = p.level;
  c.bound = p.se;
  c.status = std::isfinite(p.level) ? VerdictStatus::pass : VerdictStatus::fail;
  c.detail = std::string(biased ? "biased oracle" : "unbiased oracle") + ", bound column holds the standard error";
  return c;
}

}  // namespace

VerdictReport verdict_theorem1(const std::vector<RunTrace>& traces, const VerdictInputs& in) {
  VerdictReport rep;
  rep.subject = "theorem1";
  const AveragedTrace a = average_traces(traces);
  if (a.n_seeds < 20) rep.add({"seed_count", VerdictStatus::fail, double(a.n_seeds), 20.0, "needs >= 20 seeds"});

  // Cumulative consensus over t = 1..T against C1 b^2 ln(1 + T/a).
  {
    std::vector<double> sums;
    for (const auto& tr : traces) {
      double s = 0.0;
      for (std::size_t k = 1; k < tr.rows.size(); ++k) s += tr.rows[k].consensus_error;
      sums.push_back(s);
    }
    const double ns = static_cast<double>(sums.size());
    double m = 0.0, m2 = 0.0;
    for (double v : sums) {
      m += v;
      m2 += v * v;
    }
    m /= ns;
    const double se = ns > 1 ? std::sqrt(std::max(0.0, (m2 / ns - m * m) * ns / (ns - 1.0)) / ns) : 0.0;
    const double horizon = a.t.back();
    const double bound = in.c_const * in.step.b * in.step.b * std::log(1.0 + horizon / in.step.a);
    rep.add({"consensus_cumulative", m - 3.0 * se <= bound ? VerdictStatus::pass : VerdictStatus::fail, m, bound,
             "seed mean of sum_t consensus_error, se=" + fmt_double(se)});
  }
  rep.add(per_t_consensus(a, in.c_const, in.step, in.t_min));
  rep.add(rate_clause("rate_running_residual", a.t, running_average(a.residual), RateModel::log_over_sqrt,
                      in.fit_t_min, in.slope_tolerance));
  rep.add(plateau_clause(traces, "residual", in.biased));
  return rep;
}

VerdictReport verdict_theorem2(const std::vector<RunTrace>& traces, const VerdictInputs& in) {
  VerdictReport rep;
  rep.subject = "theorem2";
  const AveragedTrace a = average_traces(traces);
  if (a.n_seeds < 20) rep.add({"seed_count", VerdictStatus::fail, double(a.n_seeds), 20.0, "needs >= 20 seeds"});
  rep.add(per_t_consensus(a, in.c_const, in.step, in.t_min));
  const bool have_dist = !a.dist.empty() && std::isfinite(a.dist.back());
  rep.add(rate_clause(have_dist ? "rate_distance" : "rate_residual", a.t, have_dist ? a.dist : a.residual,
                      RateModel::log_over_linear, in.fit_t_min, in.slope_tolerance));
  rep.add(plateau_clause(traces, have_dist ? "dist" : "residual", in.biased));
  return rep;
}

VerdictClause plateau_ordering(const std::string& name, const std::vector<PlateauEstimate>& levels) {
  VerdictClause c;
  c.name = name;
  bool ok = levels.size() >= 2;
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < levels.size(); ++k) {
    const double gap = levels[k].level - levels[k - 1].level;
    min_gap = std::min(min_gap, gap);
    if (!(gap > 0.0)) ok = false;
  }
  c.status = ok ? VerdictStatus::pass : VerdictStatus::fail;
  c.measured = min_gap;
  c.bound = 0.0;
  c.detail = "smallest successive plateau increment";
  return c;
}

}  // namespace fpnet
