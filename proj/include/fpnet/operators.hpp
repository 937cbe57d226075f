#pragma once

#include "fpnet/common.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fpnet {

/// Scalar function with its first two derivatives; the benchmark suites
/// apply one of these to every coordinate and sum.
struct ScalarFunction {
  std::string name;
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> d2f;
};

/// Potential f: R^n -> R with gradient, plus the smoothness constant m
/// certified on the operator's operating box.
struct Potential {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double smoothness = 0.0;
};

/// A local operator T_i: R^n -> R^n with declared Lipschitz constant.
/// Potential-derived operators have the form T_i = Id - tau * grad f.
class OperatorSpec {
 public:
  using Map = std::function<Vector(const Vector&)>;

  OperatorSpec(int dim, Map apply, double lipschitz, std::string name = {});
  /// Builds T = Id - tau * grad(potential).
  OperatorSpec(int dim, Potential potential, double tau, double lipschitz, std::string name = {});

  int dim() const noexcept { return dim_; }
  double lipschitz() const noexcept { return lipschitz_; }
  double tau() const noexcept { return tau_; }
  const std::string& name() const noexcept { return name_; }
  const std::optional<Potential>& potential() const noexcept { return potential_; }

  Vector apply(const Vector& x) const;
  Vector operator()(const Vector& x) const { return apply(x); }

 private:
  int dim_;
  Map apply_;
  double lipschitz_;
  double tau_ = 0.0;
  std::optional<Potential> potential_;
  std::string name_;
};

/// Sum-separable global operator T(x) = (1/N) sum_i T_i(x).
struct GlobalOperator {
  std::vector<OperatorSpec> locals;
  double heterogeneity_zeta = 0.0;
  double box_radius = 5.0;  // operating box [-B, B]^n on which L and zeta hold
  std::string suite = "custom";

  int dim() const { return locals.empty() ? 0 : locals.front().dim(); }
  int n_agents() const { return static_cast<int>(locals.size()); }
  /// Largest declared local Lipschitz constant.
  double lipschitz() const;
  bool contractive() const { return lipschitz() < 1.0; }
  bool in_box(const Vector& x) const { return x.cwiseAbs().maxCoeff() <= box_radius; }
};

Vector apply_global(const GlobalOperator& g, const Vector& x);

/// Coordinate-wise operator T(x)_k = x_k - tau f'(x_k). L is the largest
/// |1 - tau f''(s)| over a dense grid of [-box, box].
OperatorSpec coordinatewise_operator(const ScalarFunction& fn, int dim, double tau, double box);

/// Max of |1 - tau f''| and of |f''| over [-box, box] (grid of 20001 points).
struct CurvatureBounds {
  double lipschitz;
  double smoothness;
};
CurvatureBounds curvature_bounds(const ScalarFunction& fn, double tau, double box);

/// The six non-convex component functions with tau = 0.1, operating box 5.
std::vector<ScalarFunction> nonconvex_functions();
/// The six strongly convex component functions with tau = 0.5.
std::vector<ScalarFunction> strongly_convex_functions();

inline constexpr double kNonconvexTau = 0.1;
inline constexpr double kStronglyConvexTau = 0.5;
inline constexpr double kNonconvexBox = 5.0;
inline constexpr double kStronglyConvexBox = 0.5;

GlobalOperator make_nonconvex_suite(int dim, double box = kNonconvexBox);
GlobalOperator make_strongly_convex_suite(int dim, double box = kStronglyConvexBox);
/// Agent i minimises sum_k (curv_i s_k^2 / 2 + lin_i s_k).
GlobalOperator make_quadratic_suite(int dim, const std::vector<double>& curvature,
                                    const std::vector<double>& linear, double tau, double box);
/// T(x) = scale * x, written as Id - grad(f) with f = (1 - scale)/2 |x|^2.
OperatorSpec linear_operator(int dim, double scale);

/// Empirical heterogeneity bound: sqrt of the largest (1/N) sum_i |T_i(x) - T(x)|^2
/// over `samples` uniform points of [-box, box]^n, inflated by `inflation`.
double estimate_heterogeneity(const GlobalOperator& g, double box, int samples = 10000,
                              std::uint64_t seed = 0x5eed, double inflation = 1.1);

/// Largest ratio |T(x) - T(y)| / |x - y| over random pairs in the box.
double empirical_lipschitz(const OperatorSpec& op, double box, int pairs, std::uint64_t seed);

struct FixedPointOptions {
  double tol = 1e-10;
  long max_iterations = 1000000;
  std::optional<Vector> x0;
};

struct FixedPointResult {
  Vector x;
  double residual = 0.0;  // |T(x) - x|
  long iterations = 0;
  bool local_stationary = false;  // true when found by the non-contractive KM route
};

struct NoFixedPointFound : Error {
  NoFixedPointFound(const std::string& what, double last)
      : Error("no-fixed-point", what), last_residual(last) {}
  double last_residual;
};

/// Centralised oracle for x*. Picard iteration for contractive operators,
/// KM with eta_t = 1/sqrt(t + 100) otherwise.
FixedPointResult find_fixed_point(const GlobalOperator& g, const FixedPointOptions& opts = {});
FixedPointResult find_fixed_point(const std::function<Vector(const Vector&)>& t, const Vector& x0,
                                  bool contractive, const FixedPointOptions& opts = {});

}  // namespace fpnet
