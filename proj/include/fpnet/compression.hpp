#pragma once

#include "fpnet/certification.hpp"
#include "fpnet/common.hpp"
#include "fpnet/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fpnet {

enum class CompressorKind { identity, c1_inf_quantizer, c2_uniform, c3_sparsify_quantize };

CompressorKind parse_compressor(const std::string& name);
std::string to_string(CompressorKind k);

/// Compressor with its certified constants for a fixed dimension:
///   E |C(x)/r - x|^2 <= (1 - phi) |x|^2 + delta_sq.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::identity;
  int dim = 1;
  int l_bits = 2;           // c1
  double delta_step = 1.0;  // c2, c3
  double p_keep = 0.75;     // c3
  int float_bits = 64;      // b
  int int_bits = 8;         // q
  double r = 1.0;
  double phi = 1.0;
  double delta_sq = 0.0;
};

/// Fills r, phi and delta_sq with the analytic constants of `kind` at `dim`.
CompressorSpec make_compressor(CompressorKind kind, int dim, int l_bits = 2, double delta_step = 1.0,
                               double p_keep = 0.75, int float_bits = 64, int int_bits = 8);

/// Throws ContractViolation if the declared constants differ from the
/// analytic ones or leave their domains.
void check_declared_constants(const CompressorSpec& spec);

/// Wire form of one compressed vector. Integers plus at most one scalar, so
/// decode is bit-exact.
struct CompressedMessage {
  CompressorKind kind = CompressorKind::identity;
  int dim = 0;
  double scalar = 0.0;                  // c1: |x|_inf; c2/c3: delta step
  int level_shift = 0;                  // c1: l - 1
  std::vector<std::int64_t> levels;     // quantised integers
  std::vector<std::int32_t> indices;    // c3: kept support
  Vector raw;                           // identity payload
  long bits = 0;                        // payload cost under the paper-style count
  long index_bits = 0;                  // c3: ceil(log2 n) per kept index
};

CompressedMessage compress(const CompressorSpec& spec, const Vector& x, Rng& rng);

/// c1 with an explicit dither vector in [0, 1)^n (compress draws it from rng).
CompressedMessage encode_c1(const CompressorSpec& spec, const Vector& x, const Vector& dither);
Vector decode(const CompressedMessage& msg);

/// Encodes C(y / s); the receiver reconstitutes s * decode(msg).
CompressedMessage scaled_compress(const CompressorSpec& spec, const Vector& y, double s, Rng& rng);
Vector scaled_decode(const CompressedMessage& msg, double s);

/// Expected bits per message: c1 (l+1)n + b, c2 nq, c3 nqp, identity nb.
double bit_cost(const CompressorSpec& spec, int dim);

/// ceil(log2 n), at least 1.
int index_width(int dim);

using VectorSampler = std::function<Vector(Rng&)>;
VectorSampler gaussian_sampler(int dim, double scale = 1.0);
VectorSampler uniform_box_sampler(int dim, double box = 1.0);
VectorSampler sparse_sampler(int dim, int nonzeros, double scale = 1.0);

struct CompressorCertifyOptions {
  int n_trials = 10000;
  int n_points = 10;
  std::uint64_t seed = 1;
  double scale = 1.0;  // certify the scaled map s C(x / s) when != 1
};

/// PASS iff, at each sampled x, the empirical mean of |C(x)/r - x|^2 is
/// within 3 standard errors of (1 - phi)|x|^2 + s^2 delta_sq.
CertificationReport certify_compressor(const CompressorSpec& spec, const VectorSampler& sampler,
                                       const CompressorCertifyOptions& opts = {});

}  // namespace fpnet
