#include "fpnet/compression.hpp"

#include <cmath>
#include <random>

namespace fpnet {

CompressorKind parse_compressor(const std::string& name) {
  if (name == "identity") return CompressorKind::identity;
  if (name == "c1" || name == "c1_inf_quantizer") return CompressorKind::c1_inf_quantizer;
  if (name == "c2" || name == "c2_uniform") return CompressorKind::c2_uniform;
  if (name == "c3" || name == "c3_sparsify_quantize") return CompressorKind::c3_sparsify_quantize;
  throw InvalidParameter("unknown compressor '" + name + "'");
}

std::string to_string(CompressorKind k) {
  switch (k) {
    case CompressorKind::identity: return "identity";
    case CompressorKind::c1_inf_quantizer: return "c1";
    case CompressorKind::c2_uniform: return "c2";
    case CompressorKind::c3_sparsify_quantize: return "c3";
  }
  return "?";
}

namespace {

struct Constants {
  double r, phi, delta_sq;
};

Constants analytic(const CompressorSpec& s) {
  const double n = s.dim;
  switch (s.kind) {
    case CompressorKind::identity: return {1.0, 1.0, 0.0};
    case CompressorKind::c1_inf_quantizer: {
      const double rho = n / std::pow(4.0, s.l_bits);
      return {1.0 + rho, 1.0 / (1.0 + rho), 0.0};
    }
    case CompressorKind::c2_uniform: return {1.0, 1.0, n * s.delta_step * s.delta_step / 4.0};
    case CompressorKind::c3_sparsify_quantize: {
      const double p = s.p_keep;
      return {1.0 / p, p, n * p * p * p * s.delta_step * s.delta_step / 4.0};
    }
  }
  return {1.0, 1.0, 0.0};
}

}  // namespace

CompressorSpec make_compressor(CompressorKind kind, int dim, int l_bits, double delta_step, double p_keep,
                               int float_bits, int int_bits) {
  if (dim < 1) throw InvalidSize("compressor dimension must be >= 1");
  if (l_bits < 1 || l_bits > 30) throw InvalidParameter("l_bits must lie in [1, 30]");
  if (!(delta_step > 0.0)) throw InvalidParameter("delta_step must be positive");
  if (!(p_keep > 0.0 && p_keep <= 1.0)) throw InvalidParameter("p_keep must lie in (0, 1]");
  if (float_bits < 1 || int_bits < 1) throw InvalidParameter("bit widths must be positive");
  CompressorSpec s;
  s.kind = kind;
  s.dim = dim;
  s.l_bits = l_bits;
  s.delta_step = delta_step;
  s.p_keep = p_keep;
  s.float_bits = float_bits;
  s.int_bits = int_bits;
  const Constants c = analytic(s);
  s.r = c.r;
  s.phi = c.phi;
  s.delta_sq = c.delta_sq;
  return s;
}

void check_declared_constants(const CompressorSpec& spec) {
  if (!(spec.r > 0.0)) throw ContractViolation("compressor r must be positive");
  if (!(spec.phi > 0.0 && spec.phi <= 1.0)) throw ContractViolation("compressor phi must lie in (0, 1]");
  if (spec.delta_sq < 0.0) throw ContractViolation("compressor delta^2 must be non-negative");
  const Constants c = analytic(spec);
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  if (!close(spec.r, c.r) || !close(spec.phi, c.phi) || !close(spec.delta_sq, c.delta_sq))
    throw ContractViolation("declared compressor constants do not match the analytic constants of " +
                            to_string(spec.kind));
}

int index_width(int dim) {
  int w = 0;
  while ((1L << w) < dim) ++w;
  return std::max(w, 1);
}

CompressedMessage compress(const CompressorSpec& spec, const Vector& x, Rng& rng) {
  if (x.size() != spec.dim)
    throw DimensionMismatch("compressor expects dim " + std::to_string(spec.dim) + ", got " +
                            std::to_string(x.size()));
  if (!x.allFinite()) throw NumericError("compress: non-finite input");
  const int n = spec.dim;
  CompressedMessage m;
  m.kind = spec.kind;
  m.dim = n;
  switch (spec.kind) {
    case CompressorKind::identity:
      m.raw = x;
      m.bits = static_cast<long>(n) * spec.float_bits;
      break;
    case CompressorKind::c1_inf_quantizer: {
      // All n dithers are drawn even at |x|_inf = 0 to keep streams aligned.
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      Vector dither(n);
      for (int k = 0; k < n; ++k) dither(k) = unif(rng);
      return encode_c1(spec, x, dither);
    }
    case CompressorKind::c2_uniform: {
      m.scalar = spec.delta_step;
      m.levels.resize(n);
      for (int k = 0; k < n; ++k) m.levels[k] = static_cast<std::int64_t>(std::floor(x(k) / spec.delta_step + 0.5));
      m.bits = static_cast<long>(n) * spec.int_bits;
      break;
    }
    case CompressorKind::c3_sparsify_quantize: {
      m.scalar = spec.delta_step;
      std::bernoulli_distribution keep(spec.p_keep);
      std::uniform_real_distribution<double> dither(-0.5, 0.5);
      for (int k = 0; k < n; ++k) {
        if (!keep(rng)) continue;
        const double v = dither(rng);
        const double q = std::round(x(k) / spec.p_keep / spec.delta_step + v);
        m.indices.push_back(k);
        m.levels.push_back(static_cast<std::int64_t>(q));
      }
      const long kept = static_cast<long>(m.indices.size());
      m.bits = kept * spec.int_bits;
      m.index_bits = kept * index_width(n);
      break;
    }
  }
  return m;
}

CompressedMessage encode_c1(const CompressorSpec& spec, const Vector& x, const Vector& dither) {
  if (spec.kind != CompressorKind::c1_inf_quantizer) throw InvalidParameter("encode_c1 needs a c1 spec");
  if (x.size() != spec.dim || dither.size() != spec.dim) throw DimensionMismatch("encode_c1: dimension mismatch");
  const int n = spec.dim;
  CompressedMessage m;
  m.kind = spec.kind;
  m.dim = n;
  m.level_shift = spec.l_bits - 1;
  const double levels = std::ldexp(1.0, m.level_shift);
  const double norm = x.cwiseAbs().maxCoeff();
  m.scalar = norm;
  m.levels.assign(n, 0);
  if (norm > 0.0) {
    for (int k = 0; k < n; ++k) {
      const double mag = std::floor(levels * std::abs(x(k)) / norm + dither(k));
      m.levels[k] = static_cast<std::int64_t>(x(k) < 0 ? -mag : mag);
    }
  }
  m.bits = static_cast<long>(spec.l_bits + 1) * n + spec.float_bits;
  return m;
}

Vector decode(const CompressedMessage& m) {
  switch (m.kind) {
    case CompressorKind::identity: return m.raw;
    case CompressorKind::c1_inf_quantizer: {
      Vector out = Vector::Zero(m.dim);
      if (m.scalar == 0.0) return out;
      const double unit = m.scalar / std::ldexp(1.0, m.level_shift);
      for (int k = 0; k < m.dim; ++k) out(k) = unit * static_cast<double>(m.levels[k]);
      return out;
    }
    case CompressorKind::c2_uniform: {
      Vector out(m.dim);
      for (int k = 0; k < m.dim; ++k) out(k) = m.scalar * static_cast<double>(m.levels[k]);
      return out;
    }
    case CompressorKind::c3_sparsify_quantize: {
      Vector out = Vector::Zero(m.dim);
      for (std::size_t j = 0; j < m.indices.size(); ++j)
        out(m.indices[j]) = m.scalar * static_cast<double>(m.levels[j]);
      return out;
    }
  }
  return {};
}

CompressedMessage scaled_compress(const CompressorSpec& spec, const Vector& y, double s, Rng& rng) {
  if (!(s > 0.0)) throw InvalidParameter("invalid-scale: s_t must be positive");
  return compress(spec, y / s, rng);
}

Vector scaled_decode(const CompressedMessage& msg, double s) { return s * decode(msg); }

double bit_cost(const CompressorSpec& spec, int dim) {
  if (dim < 1) throw InvalidSize("bit_cost needs dim >= 1");
  switch (spec.kind) {
    case CompressorKind::identity: return static_cast<double>(dim) * spec.float_bits;
    case CompressorKind::c1_inf_quantizer: return static_cast<double>(spec.l_bits + 1) * dim + spec.float_bits;
    case CompressorKind::c2_uniform: return static_cast<double>(dim) * spec.int_bits;
    case CompressorKind::c3_sparsify_quantize: return static_cast<double>(dim) * spec.int_bits * spec.p_keep;
  }
  return 0.0;
}

VectorSampler gaussian_sampler(int dim, double scale) {
  return [dim, scale](Rng& rng) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v(k) = g(rng);
    return v;
  };
}

VectorSampler uniform_box_sampler(int dim, double box) {
  return [dim, box](Rng& rng) {
    std::uniform_real_distribution<double> u(-box, box);
    Vector v(dim);
    for (int k = 0; k < dim; ++k) v(k) = u(rng);
    return v;
  };
}

VectorSampler sparse_sampler(int dim, int nonzeros, double scale) {
  return [dim, nonzeros, scale](Rng& rng) {
    std::normal_distribution<double> g(0.0, scale);
    std::uniform_int_distribution<int> pick(0, dim - 1);
    Vector v = Vector::Zero(dim);
    for (int j = 0; j < nonzeros; ++j) v(pick(rng)) = g(rng);
    return v;
  };
}

CertificationReport certify_compressor(const CompressorSpec& spec, const VectorSampler& sampler,
                                       const CompressorCertifyOptions& opts) {
  if (opts.n_trials < 10000) throw InvalidParameter("certify_compressor needs n_trials >= 10^4");
  CertificationReport rep;
  rep.subject = "compressor:" + to_string(spec.kind);
  const double s = opts.scale;
  Rng pts = make_stream(opts.seed, StreamPurpose::certify, 0xc0c0, 0);
  double worst_ratio = 0.0;
  for (int p = 0; p < opts.n_points; ++p) {
    const Vector x = sampler(pts);
    Rng rng = make_stream(opts.seed, StreamPurpose::certify, static_cast<std::uint64_t>(p), 3);
    double s1 = 0.0, s2 = 0.0;
    for (int t = 0; t < opts.n_trials; ++t) {
      const Vector c = scaled_decode(scaled_compress(spec, x, s, rng), s);
      const double e = (c / spec.r - x).squaredNorm();
      s1 += e;
      s2 += e * e;
    }
    const double k = opts.n_trials;
    const double mean = s1 / k;
    const double sd = std::sqrt(std::max(0.0, (s2 / k - mean * mean) * k / (k - 1.0)));
    const double bound = (1.0 - spec.phi) * x.squaredNorm() + s * s * spec.delta_sq;
    // Absolute 1e-12 term absorbs rounding in exact-equality cases.
    const double slack = 3.0 * sd / std::sqrt(k) + 1e-12 * (1.0 + bound);
    rep.add({"unified", p, mean, bound, slack, mean <= bound + slack});
    if (x.squaredNorm() > 0.0) worst_ratio = std::max(worst_ratio, mean / x.squaredNorm());
  }
  rep.stats["r"] = spec.r;
  rep.stats["phi"] = spec.phi;
  rep.stats["delta_sq"] = spec.delta_sq;
  rep.stats["scale"] = s;
  rep.stats["worst_error_ratio"] = worst_ratio;
  return rep;
}

}  // namespace fpnet
