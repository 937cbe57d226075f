#pragma once

#include "fpnet/common.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fpnet {

/// Undirected communication graph on agents 0..n-1. Self-loops are never
/// stored; self-weights live on the mixing matrix diagonal.
class Graph {
 public:
  Graph(int n_agents, std::vector<std::pair<int, int>> edges);

  int size() const noexcept { return n_; }
  /// Edges normalised to (min, max) and sorted.
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  const std::vector<int>& neighbors(int i) const { return adj_.at(i); }
  int degree(int i) const { return static_cast<int>(adj_.at(i).size()); }
  bool has_edge(int i, int j) const;
  bool connected() const;

 private:
  int n_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_;
};

enum class Topology { complete, ring, path, random_connected };

struct TopologySpec {
  Topology kind = Topology::random_connected;
  double edge_prob = 0.4;    // random_connected only
  std::uint64_t seed = 7;    // random_connected only
};

Topology parse_topology(const std::string& name);
std::string to_string(Topology t);

/// Builds a connected graph. Random graphs are resampled (up to 1000
/// attempts) until connected.
Graph build_graph(const TopologySpec& spec, int n_agents);

struct SpectralParams {
  double alpha = 0.0;  // ||I - W||_2
  double kappa = 0.0;  // 1 - max(|lambda_2|, |lambda_N|)
};

/// Symmetric doubly-stochastic mixing matrix together with its spectral data.
struct MixingMatrix {
  Matrix w;
  double alpha = 0.0;
  double kappa = 0.0;

  int size() const noexcept { return static_cast<int>(w.rows()); }
};

/// Metropolis-Hastings weights: w_ij = 1 / (1 + max(d_i, d_j)) on edges,
/// remainder on the diagonal.
MixingMatrix metropolis_mixing(const Graph& g);

/// Wraps an arbitrary symmetric doubly-stochastic matrix (validated).
MixingMatrix make_mixing(const Matrix& w);

/// Throws ContractViolation unless every row and column sums to one within
/// `tol`, all entries lie in [0, 1] and the matrix is symmetric.
void check_doubly_stochastic(const Matrix& w, double tol = 1e-12);

/// Spectral quantities of a symmetric doubly-stochastic matrix; eigenvalues
/// from a dense self-adjoint solver.
template <typename Derived>
SpectralParams spectral_params(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  check_doubly_stochastic(w.template cast<double>().eval());
  const Eigen::Index n = w.rows();
  SpectralParams out;
  const Mat i_minus_w = Mat::Identity(n, n) - w;
  Eigen::JacobiSVD<Mat> svd(i_minus_w);
  out.alpha = static_cast<double>(svd.singularValues()(0));
  if (n == 1) {
    out.kappa = 1.0;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(w);
  // Eigen returns eigenvalues in increasing order.
  const auto& ev = es.eigenvalues();
  const double second = static_cast<double>(ev(n - 2));
  const double smallest = static_cast<double>(ev(0));
  out.kappa = 1.0 - std::max(std::abs(second), std::abs(smallest));
  return out;
}

}  // namespace fpnet
