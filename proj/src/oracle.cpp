#include "fpnet/oracle.hpp"

#include <cmath>
#include <random>

namespace fpnet {

OracleMechanism parse_mechanism(const std::string& name) {
  if (name == "additive_gaussian") return OracleMechanism::additive_gaussian;
  if (name == "zeroth_order") return OracleMechanism::zeroth_order;
  if (name == "synthetic_bias") return OracleMechanism::synthetic_bias;
  throw InvalidParameter("unknown oracle mechanism '" + name + "'");
}

std::string to_string(OracleMechanism m) {
  switch (m) {
    case OracleMechanism::additive_gaussian: return "additive_gaussian";
    case OracleMechanism::zeroth_order: return "zeroth_order";
    case OracleMechanism::synthetic_bias: return "synthetic_bias";
  }
  return "?";
}

void validate(const OracleConfig& cfg) {
  const auto& d = cfg.declared;
  if (!(d.p < 1.0)) throw InvalidParameter("state-dependent bias slope P must be < 1");
  if (d.p < 0.0 || d.beta < 0.0 || d.sigma < 0.0 || d.m_growth < 0.0 || d.d_bound < 0.0)
    throw InvalidParameter("oracle constants must be non-negative");
  if (cfg.noise_std < 0.0 || cfg.beta_scale < 0.0 || cfg.p_scale < 0.0)
    throw InvalidParameter("oracle mechanism parameters must be non-negative");
  if (cfg.mechanism == OracleMechanism::zeroth_order && !(cfg.z_radius > 0.0))
    throw InvalidParameter("z_radius must be positive");
}

OracleConstants analytic_constants(const OracleConfig& cfg, const OperatorSpec& op) {
  const double n = op.dim();
  OracleConstants c;
  switch (cfg.mechanism) {
    case OracleMechanism::additive_gaussian:
      c.sigma = std::sqrt(n) * cfg.noise_std;
      break;
    case OracleMechanism::zeroth_order: {
      if (!op.potential()) throw InvalidParameter("zeroth_order oracle needs a potential-derived operator");
      const double tz_m = op.tau() * cfg.z_radius * op.potential()->smoothness;
      c.beta = tz_m * (n + 3.0) / 2.0;
      c.p = 0.0;
      c.sigma = std::sqrt(3.0 * tz_m * tz_m * std::pow(n + 4.0, 3.0));
      c.m_growth = 4.0 * (n + 4.0);
      break;
    }
    case OracleMechanism::synthetic_bias: {
      // |b u + p (T - x)|^2 <= 2 b^2 + 2 p^2 |T - x|^2 when both terms are present.
      const double b2 = cfg.beta_scale * cfg.beta_scale;
      const double p2 = cfg.p_scale * cfg.p_scale;
      const bool both = cfg.beta_scale > 0.0 && cfg.p_scale > 0.0;
      const double bias_b2 = both ? 2.0 * b2 : b2;
      const double bias_p = both ? 2.0 * p2 : p2;
      c.beta = std::sqrt(bias_b2);
      c.p = bias_p;
      c.sigma = std::sqrt(bias_b2 + n * cfg.noise_std * cfg.noise_std);
      c.m_growth = bias_p;
      break;
    }
  }
  return c;
}

Vector sample_unit_sphere(int n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector u(n);
  double norm2 = 0.0;
  do {
    for (int k = 0; k < n; ++k) u(k) = gauss(rng);
    norm2 = u.squaredNorm();
  } while (norm2 == 0.0);
  return u / std::sqrt(norm2);
}

Vector zeroth_order_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                             double z_radius, Rng& rng) {
  if (!(z_radius > 0.0)) throw InvalidParameter("z_radius must be positive");
  const Vector u = sample_unit_sphere(static_cast<int>(x.size()), rng);
  const Vector xz = x + z_radius * u;
  return ((f(xz) - f(x)) / z_radius) * u;
}

namespace {

void add_gaussian(Vector& v, double std, Rng& rng) {
  if (std == 0.0) return;
  std::normal_distribution<double> gauss(0.0, std);
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) += gauss(rng);
}

}  // namespace

OracleSample sample(const OracleConfig& cfg, const OperatorSpec& op, const Vector& x, Rng& rng,
                    std::uint64_t draw_id) {
  OracleSample s;
  s.rng_draw_id = draw_id;
  switch (cfg.mechanism) {
    case OracleMechanism::additive_gaussian:
      s.value = op.apply(x);
      add_gaussian(s.value, cfg.noise_std, rng);
      break;
    case OracleMechanism::zeroth_order: {
      if (!op.potential()) throw InvalidParameter("zeroth_order oracle needs a potential-derived operator");
      // The sphere estimator has mean grad f_z / n; rescale by n so that
      // E T~ tracks T up to the smoothing bias.
      const double n = static_cast<double>(x.size());
      s.value = x - (op.tau() * n) * zeroth_order_gradient(op.potential()->value, x, cfg.z_radius, rng);
      break;
    }
    case OracleMechanism::synthetic_bias: {
      const Vector tx = op.apply(x);
      const double n = static_cast<double>(x.size());
      s.value = tx + (cfg.beta_scale / std::sqrt(n)) * Vector::Ones(x.size()) + cfg.p_scale * (tx - x);
      add_gaussian(s.value, cfg.noise_std, rng);
      break;
    }
  }
  if (!s.value.allFinite()) throw NumericError("oracle produced a non-finite value");
  return s;
}

namespace {

struct PointMoments {
  Vector mean;
  double var_mean = 0.0, var_sd = 0.0;    // |T~ - T|^2
  double dist_mean = 0.0, dist_sd = 0.0;  // |T~ - x|^2
  double trace_cov = 0.0;
};

PointMoments moments_at(const OracleConfig& cfg, const OperatorSpec& op, const Vector& x, const Vector& tx,
                        int k, Rng& rng) {
  const Eigen::Index n = x.size();
  PointMoments pm;
  Vector sum = Vector::Zero(n), sumsq = Vector::Zero(n);
  double v1 = 0, v2 = 0, d1 = 0, d2 = 0;
  for (int s = 0; s < k; ++s) {
    const Vector v = sample(cfg, op, x, rng).value;
    sum += v;
    sumsq += v.cwiseProduct(v);
    const double a = (v - tx).squaredNorm();
    const double b = (v - x).squaredNorm();
    v1 += a;
    v2 += a * a;
    d1 += b;
    d2 += b * b;
  }
  const double kk = k;
  pm.mean = sum / kk;
  pm.trace_cov = std::max(0.0, (sumsq / kk - pm.mean.cwiseProduct(pm.mean)).sum() * kk / (kk - 1.0));
  pm.var_mean = v1 / kk;
  pm.var_sd = std::sqrt(std::max(0.0, (v2 / kk - pm.var_mean * pm.var_mean) * kk / (kk - 1.0)));
  pm.dist_mean = d1 / kk;
  pm.dist_sd = std::sqrt(std::max(0.0, (d2 / kk - pm.dist_mean * pm.dist_mean) * kk / (kk - 1.0)));
  return pm;
}

// Least-squares line y = a + b x; returns b, stores a.
double fit_line(const std::vector<double>& xs, const std::vector<double>& ys, double& intercept) {
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double den = n * sxx - sx * sx;
  const double slope = den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
  intercept = (sy - slope * sx) / n;
  return slope;
}

}  // namespace

CertificationReport certify_oracle(const OracleConfig& cfg, const OperatorSpec& op,
                                   const OracleCertifyOptions& opts) {
  if (opts.n_samples < 10000) throw InvalidParameter("certify_oracle needs n_samples >= 10^4");
  validate(cfg);
  CertificationReport rep;
  rep.subject = "oracle:" + to_string(cfg.mechanism);
  const auto& d = cfg.declared;
  const int n = op.dim();
  Rng pts = make_stream(opts.seed, StreamPurpose::certify, 0xfffff, 0);
  std::uniform_real_distribution<double> unit(-opts.sample_box, opts.sample_box);
  std::vector<double> res2, bias2, var2;
  for (int p = 0; p < opts.n_points; ++p) {
    Vector x(n);
    for (int k = 0; k < n; ++k) x(k) = unit(pts);
    const Vector tx = op.apply(x);
    const double r2 = (tx - x).squaredNorm();
    Rng rng = make_stream(opts.seed, StreamPurpose::certify, static_cast<std::uint64_t>(p), 1);
    const PointMoments pm = moments_at(cfg, op, x, tx, opts.n_samples, rng);

    const double b2 = (pm.mean - tx).squaredNorm();
    const double b_bound = d.beta * d.beta + d.p * r2;
    // The relative 1e-9 terms absorb accumulation rounding when a moment sits on its bound.
    const double b_rad = std::sqrt(b_bound) * (1.0 + 1e-9) + 3.0 * std::sqrt(pm.trace_cov / opts.n_samples);
    rep.add({"bias", p, b2, b_bound, b_rad * b_rad - b_bound, b2 <= b_rad * b_rad});

    const double v_bound = d.sigma * d.sigma + d.m_growth * r2;
    const double v_slack = 3.0 * pm.var_sd / std::sqrt(static_cast<double>(opts.n_samples)) + 1e-9 * v_bound;
    rep.add({"variance", p, pm.var_mean, v_bound, v_slack, pm.var_mean <= v_bound + v_slack});

    if (d.d_bound > 0.0) {
      const double d_bound = d.d_bound * d.d_bound;
      const double d_slack = 3.0 * pm.dist_sd / std::sqrt(static_cast<double>(opts.n_samples)) + 1e-9 * d_bound;
      rep.add({"d_bound", p, pm.dist_mean, d_bound, d_slack, pm.dist_mean <= d_bound + d_slack});
    }
    res2.push_back(r2);
    // Remove the Monte-Carlo inflation tr(Cov)/K of the squared-bias estimate.
    bias2.push_back(b2 - pm.trace_cov / opts.n_samples);
    var2.push_back(pm.var_mean);
  }
  double icpt = 0.0;
  rep.stats["bias_slope"] = fit_line(res2, bias2, icpt);
  rep.stats["bias_intercept"] = icpt;
  rep.stats["variance_slope"] = fit_line(res2, var2, icpt);
  rep.stats["variance_intercept"] = icpt;
  rep.stats["declared_beta"] = d.beta;
  rep.stats["declared_p"] = d.p;
  rep.stats["declared_sigma"] = d.sigma;
  rep.stats["declared_m"] = d.m_growth;
  rep.stats["declared_d"] = d.d_bound;
  return rep;
}

double estimate_d_bound(const OracleConfig& cfg, const OperatorSpec& op, double box, int samples_per_point,
                        std::uint64_t seed) {
  const int n = op.dim();
  std::vector<Vector> points;
  constexpr int kDiag = 41;
  for (int g = 0; g < kDiag; ++g) points.push_back(Vector::Constant(n, -box + 2.0 * box * g / (kDiag - 1)));
  Rng pts = make_stream(seed, StreamPurpose::certify, 0xd0d0, 0);
  std::uniform_real_distribution<double> unit(-box, box);
  for (int r = 0; r < 20; ++r) {
    Vector x(n);
    for (int k = 0; k < n; ++k) x(k) = unit(pts);
    points.push_back(x);
  }
  double worst = 0.0;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const Vector& x = points[p];
    Rng rng = make_stream(seed, StreamPurpose::certify, p, 2);
    double s1 = 0, s2 = 0;
    for (int s = 0; s < samples_per_point; ++s) {
      const double b = (sample(cfg, op, x, rng).value - x).squaredNorm();
      s1 += b;
      s2 += b * b;
    }
    const double k = samples_per_point;
    const double mean = s1 / k;
    const double sd = std::sqrt(std::max(0.0, s2 / k - mean * mean));
    worst = std::max(worst, mean + 3.0 * sd / std::sqrt(k));
  }
  return 1.1 * std::sqrt(worst);
}

}  // namespace fpnet
