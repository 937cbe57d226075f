#pragma once

#include "fpnet/operators.hpp"
#include "fpnet/scheduling.hpp"

#include <vector>

namespace fpnet::test {

/// Plain distributed KM with exact (uncompressed) gossip every step:
/// z_i = (1 - eta) x_i + eta T_i(x_i), x_i <- z_i + gamma sum_j w_ij (x_j - x_i).
/// Returns the agent iterates after `steps` iterations.
inline std::vector<Vector> reference_km(const GlobalOperator& g, const Matrix& w, double gamma,
                                        const StepSchedule& step, std::vector<Vector> x, long steps) {
  const int n = g.n_agents();
  for (long t = 0; t < steps; ++t) {
    const double eta = step.eta(t);
    std::vector<Vector> next(n);
    for (int i = 0; i < n; ++i) {
      next[i] = (1.0 - eta) * x[i] + eta * g.locals[i].apply(x[i]);
      for (int j = 0; j < n; ++j)
        if (j != i) next[i] += gamma * w(i, j) * (x[j] - x[i]);
    }
    x = std::move(next);
  }
  return x;
}

}  // namespace fpnet::test
