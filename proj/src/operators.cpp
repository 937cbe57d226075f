#include "fpnet/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fpnet {

OperatorSpec::OperatorSpec(int dim, Map apply, double lipschitz, std::string name)
    : dim_(dim), apply_(std::move(apply)), lipschitz_(lipschitz), name_(std::move(name)) {
  if (dim < 1) throw InvalidSize("operator dimension must be >= 1");
  if (!(lipschitz >= 0.0)) throw InvalidParameter("Lipschitz constant must be non-negative");
}

OperatorSpec::OperatorSpec(int dim, Potential potential, double tau, double lipschitz, std::string name)
    : dim_(dim), lipschitz_(lipschitz), tau_(tau), potential_(std::move(potential)), name_(std::move(name)) {
  if (dim < 1) throw InvalidSize("operator dimension must be >= 1");
  if (!(lipschitz >= 0.0)) throw InvalidParameter("Lipschitz constant must be non-negative");
  if (!(tau > 0.0)) throw InvalidParameter("tau must be positive");
  apply_ = [grad = potential_->gradient, tau](const Vector& x) -> Vector { return x - tau * grad(x); };
}

Vector OperatorSpec::apply(const Vector& x) const {
  if (x.size() != dim_)
    throw DimensionMismatch("operator expects dim " + std::to_string(dim_) + ", got " + std::to_string(x.size()));
  return apply_(x);
}

double GlobalOperator::lipschitz() const {
  double l = 0.0;
  for (const auto& op : locals) l = std::max(l, op.lipschitz());
  return l;
}

Vector apply_global(const GlobalOperator& g, const Vector& x) {
  if (g.locals.empty()) throw InvalidSize("global operator has no local operators");
  if (x.size() != g.dim())
    throw DimensionMismatch("global operator expects dim " + std::to_string(g.dim()) + ", got " +
                            std::to_string(x.size()));
  Vector acc = Vector::Zero(x.size());
  for (const auto& op : g.locals) acc += op.apply(x);
  return acc / static_cast<double>(g.locals.size());
}

CurvatureBounds curvature_bounds(const ScalarFunction& fn, double tau, double box) {
  constexpr int kGrid = 20001;
  CurvatureBounds b{0.0, 0.0};
  for (int k = 0; k < kGrid; ++k) {
    const double s = -box + 2.0 * box * k / (kGrid - 1);
    const double h = fn.d2f(s);
    b.lipschitz = std::max(b.lipschitz, std::abs(1.0 - tau * h));
    b.smoothness = std::max(b.smoothness, std::abs(h));
  }
  return b;
}

OperatorSpec coordinatewise_operator(const ScalarFunction& fn, int dim, double tau, double box) {
  const CurvatureBounds cb = curvature_bounds(fn, tau, box);
  Potential pot;
  pot.value = [f = fn.f](const Vector& x) {
    double s = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) s += f(x(k));
    return s;
  };
  pot.gradient = [df = fn.df](const Vector& x) -> Vector { return x.unaryExpr(df); };
  pot.smoothness = cb.smoothness;
  return OperatorSpec(dim, std::move(pot), tau, cb.lipschitz, fn.name);
}

std::vector<ScalarFunction> nonconvex_functions() {
  using std::cos;
  using std::exp;
  using std::sin;
  return {
      {"0.06x^4-0.02x^2", [](double x) { return 0.06 * x * x * x * x - 0.02 * x * x; },
       [](double x) { return 0.24 * x * x * x - 0.04 * x; }, [](double x) { return 0.72 * x * x - 0.04; }},
      {"0.05sin(x+1/2)+0.15cos(10x/3)",
       [](double x) { return 0.05 * sin(x + 0.5) + 0.15 * cos(10.0 * x / 3.0); },
       [](double x) { return 0.05 * cos(x + 0.5) - 0.5 * sin(10.0 * x / 3.0); },
       [](double x) { return -0.05 * sin(x + 0.5) - (5.0 / 3.0) * cos(10.0 * x / 3.0); }},
      {"0.1exp(-x^2)+0.1x^4-0.3x^2",
       [](double x) { return 0.1 * exp(-x * x) + 0.1 * x * x * x * x - 0.3 * x * x; },
       [](double x) { return -0.2 * x * exp(-x * x) + 0.4 * x * x * x - 0.6 * x; },
       [](double x) { return (-0.2 + 0.4 * x * x) * exp(-x * x) + 1.2 * x * x - 0.6; }},
      {"0.14x^4-0.2x^2", [](double x) { return 0.14 * x * x * x * x - 0.2 * x * x; },
       [](double x) { return 0.56 * x * x * x - 0.4 * x; }, [](double x) { return 1.68 * x * x - 0.4; }},
      {"0.45cos(x)+0.15sin(10x/3+1/2)",
       [](double x) { return 0.45 * cos(x) + 0.15 * sin(10.0 * x / 3.0 + 0.5); },
       [](double x) { return -0.45 * sin(x) + 0.5 * cos(10.0 * x / 3.0 + 0.5); },
       [](double x) { return -0.45 * cos(x) - (5.0 / 3.0) * sin(10.0 * x / 3.0 + 0.5); }},
      {"0.4exp(-x^2)-0.3x^2", [](double x) { return 0.4 * exp(-x * x) - 0.3 * x * x; },
       [](double x) { return -0.8 * x * exp(-x * x) - 0.6 * x; },
       [](double x) { return (-0.8 + 1.6 * x * x) * exp(-x * x) - 0.6; }},
  };
}

std::vector<ScalarFunction> strongly_convex_functions() {
  using std::exp;
  return {
      {"x^2+1.5x+0.9", [](double x) { return x * x + 1.5 * x + 0.9; }, [](double x) { return 2.0 * x + 1.5; },
       [](double) { return 2.0; }},
      {"0.4x^2+0.7exp(x)", [](double x) { return 0.4 * x * x + 0.7 * exp(x); },
       [](double x) { return 0.8 * x + 0.7 * exp(x); }, [](double x) { return 0.8 + 0.7 * exp(x); }},
      {"0.2x^4+0.6x^2", [](double x) { return 0.2 * x * x * x * x + 0.6 * x * x; },
       [](double x) { return 0.8 * x * x * x + 1.2 * x; }, [](double x) { return 2.4 * x * x + 1.2; }},
      {"x^2+1.5x+0.1", [](double x) { return x * x + 1.5 * x + 0.1; }, [](double x) { return 2.0 * x + 1.5; },
       [](double) { return 2.0; }},
      {"0.6x^2+0.3exp(x)", [](double x) { return 0.6 * x * x + 0.3 * exp(x); },
       [](double x) { return 1.2 * x + 0.3 * exp(x); }, [](double x) { return 1.2 + 0.3 * exp(x); }},
      {"0.8x^4+0.4x^2", [](double x) { return 0.8 * x * x * x * x + 0.4 * x * x; },
       [](double x) { return 3.2 * x * x * x + 0.8 * x; }, [](double x) { return 9.6 * x * x + 0.8; }},
  };
}

namespace {

GlobalOperator suite_from(const std::vector<ScalarFunction>& fns, int dim, double tau, double box,
                          std::string name) {
  if (dim < 1) throw InvalidSize("suite dimension must be >= 1");
  GlobalOperator g;
  g.box_radius = box;
  g.suite = std::move(name);
  for (const auto& fn : fns) g.locals.push_back(coordinatewise_operator(fn, dim, tau, box));
  g.heterogeneity_zeta = estimate_heterogeneity(g, box);
  return g;
}

}  // namespace

GlobalOperator make_nonconvex_suite(int dim, double box) {
  return suite_from(nonconvex_functions(), dim, kNonconvexTau, box, "nonconvex");
}

GlobalOperator make_strongly_convex_suite(int dim, double box) {
  return suite_from(strongly_convex_functions(), dim, kStronglyConvexTau, box, "strongly_convex");
}

GlobalOperator make_quadratic_suite(int dim, const std::vector<double>& curvature,
                                    const std::vector<double>& linear, double tau, double box) {
  if (curvature.size() != linear.size() || curvature.empty())
    throw InvalidParameter("quadratic suite needs matching non-empty curvature/linear lists");
  std::vector<ScalarFunction> fns;
  for (std::size_t i = 0; i < curvature.size(); ++i) {
    const double c = curvature[i];
    const double l = linear[i];
    fns.push_back({"quadratic", [c, l](double x) { return 0.5 * c * x * x + l * x; },
                   [c, l](double x) { return c * x + l; }, [c](double) { return c; }});
  }
  return suite_from(fns, dim, tau, box, "quadratic");
}

OperatorSpec linear_operator(int dim, double scale) {
  Potential pot;
  const double k = 1.0 - scale;
  pot.value = [k](const Vector& x) { return 0.5 * k * x.squaredNorm(); };
  pot.gradient = [k](const Vector& x) -> Vector { return k * x; };
  pot.smoothness = std::abs(k);
  const double l = std::max(std::abs(scale), 1e-300);
  return OperatorSpec(dim, std::move(pot), 1.0, l, "linear");
}

double estimate_heterogeneity(const GlobalOperator& g, double box, int samples, std::uint64_t seed,
                              double inflation) {
  const int n = g.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  double worst = 0.0;
  Vector x(n);
  for (int s = 0; s < samples; ++s) {
    for (int k = 0; k < n; ++k) x(k) = box * unit(rng);
    const Vector mean = apply_global(g, x);
    double spread = 0.0;
    for (const auto& op : g.locals) spread += (op.apply(x) - mean).squaredNorm();
    worst = std::max(worst, spread / g.n_agents());
  }
  return inflation * std::sqrt(worst);
}

double empirical_lipschitz(const OperatorSpec& op, double box, int pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-box, box);
  double worst = 0.0;
  Vector x(op.dim()), y(op.dim());
  for (int p = 0; p < pairs; ++p) {
    for (int k = 0; k < op.dim(); ++k) {
      x(k) = unit(rng);
      y(k) = unit(rng);
    }
    const double d = (x - y).norm();
    if (d == 0.0) continue;
    worst = std::max(worst, (op.apply(x) - op.apply(y)).norm() / d);
  }
  return worst;
}

FixedPointResult find_fixed_point(const std::function<Vector(const Vector&)>& t, const Vector& x0,
                                  bool contractive, const FixedPointOptions& opts) {
  if (!(opts.tol > 0.0)) throw InvalidParameter("tolerance must be positive");
  FixedPointResult out;
  Vector x = x0;
  Vector tx = t(x);
  double res = (tx - x).norm();
  long it = 0;
  while (res > opts.tol && it < opts.max_iterations) {
    if (contractive) {
      x = tx;
    } else {
      const double eta = 1.0 / std::sqrt(static_cast<double>(it) + 100.0);
      x = (1.0 - eta) * x + eta * tx;
    }
    tx = t(x);
    res = (tx - x).norm();
    if (!std::isfinite(res)) throw NoFixedPointFound("fixed-point iteration diverged", res);
    ++it;
  }
  if (res > opts.tol)
    throw NoFixedPointFound("no fixed point within " + std::to_string(opts.max_iterations) +
                                " iterations (residual " + std::to_string(res) + ")",
                            res);
  out.x = x;
  out.residual = res;
  out.iterations = it;
  out.local_stationary = !contractive;
  return out;
}

FixedPointResult find_fixed_point(const GlobalOperator& g, const FixedPointOptions& opts) {
  const Vector x0 = opts.x0 ? *opts.x0 : Vector::Zero(g.dim());
  return find_fixed_point([&g](const Vector& x) { return apply_global(g, x); }, x0, g.contractive(), opts);
}

}  // namespace fpnet
