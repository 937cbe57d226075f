#pragma once

#include "fpnet/certification.hpp"
#include "fpnet/common.hpp"
#include "fpnet/operators.hpp"
#include "fpnet/rng.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace fpnet {

enum class OracleMechanism { additive_gaussian, zeroth_order, synthetic_bias };

OracleMechanism parse_mechanism(const std::string& name);
std::string to_string(OracleMechanism m);

/// Declared constants of the biased-oracle contract:
///   |E T~ - T|^2 <= beta^2 + P |T(x) - x|^2
///   E|T~ - T|^2  <= sigma^2 + M |T(x) - x|^2
///   E|T~ - x|^2  <= D^2
struct OracleConstants {
  double beta = 0.0;
  double p = 0.0;
  double sigma = 0.0;
  double m_growth = 0.0;
  double d_bound = 0.0;
};

struct OracleConfig {
  OracleMechanism mechanism = OracleMechanism::additive_gaussian;
  double noise_std = 0.0;   // per-coordinate std of the additive noise
  double z_radius = 1e-3;   // zeroth_order smoothing radius
  double beta_scale = 0.0;  // synthetic_bias constant bias magnitude
  double p_scale = 0.0;     // synthetic_bias state-dependent slope
  OracleConstants declared;
};

/// Throws InvalidParameter unless P < 1 and all magnitudes are non-negative.
void validate(const OracleConfig& cfg);

/// Constants the mechanism satisfies analytically on `op` (D is left at 0;
/// it is certified empirically, see estimate_d_bound).
OracleConstants analytic_constants(const OracleConfig& cfg, const OperatorSpec& op);

struct OracleSample {
  Vector value;
  std::uint64_t rng_draw_id = 0;
};

/// One draw of T~_i(x, xi). The stream is fully determined by `rng`.
OracleSample sample(const OracleConfig& cfg, const OperatorSpec& op, const Vector& x, Rng& rng,
                    std::uint64_t draw_id = 0);

/// (f(x + z u) - f(x)) / z * u with u uniform on the unit sphere.
Vector zeroth_order_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                             double z_radius, Rng& rng);

/// Uniform direction on the unit sphere S^{n-1}.
Vector sample_unit_sphere(int n, Rng& rng);

struct OracleCertifyOptions {
  int n_samples = 10000;
  int n_points = 8;
  double sample_box = 1.0;
  std::uint64_t seed = 1;
};

/// Monte-Carlo check of the declared bias, variance and D bounds at
/// `n_points` random points of the box; 3-sigma slack on every estimate.
/// Also reports fitted bias/variance growth slopes against |T(x) - x|^2.
CertificationReport certify_oracle(const OracleConfig& cfg, const OperatorSpec& op,
                                   const OracleCertifyOptions& opts = {});

/// Empirical D: sqrt of the largest E|T~ - x|^2 over the diagonal s*1 for s
/// on a grid of [-box, box] plus random box points, inflated by 10%.
double estimate_d_bound(const OracleConfig& cfg, const OperatorSpec& op, double box,
                        int samples_per_point = 200, std::uint64_t seed = 11);

}  // namespace fpnet
