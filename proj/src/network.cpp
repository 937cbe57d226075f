#include "fpnet/network.hpp"

#include <algorithm>
#include <queue>
#include <random>

namespace fpnet {

Graph::Graph(int n_agents, std::vector<std::pair<int, int>> edges) : n_(n_agents) {
  if (n_agents < 1) throw InvalidSize("graph needs at least one agent");
  adj_.assign(n_, {});
  for (auto [a, b] : edges) {
    if (a == b) throw InvalidParameter("self-loop on agent " + std::to_string(a));
    if (a < 0 || b < 0 || a >= n_ || b >= n_) throw InvalidParameter("edge endpoint out of range");
    edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (auto [a, b] : edges_) {
    adj_[a].push_back(b);
    adj_[b].push_back(a);
  }
  for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
}

bool Graph::has_edge(int i, int j) const {
  const auto& nb = adj_.at(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

bool Graph::connected() const {
  std::vector<char> seen(n_, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int u : adj_[v]) {
      if (!seen[u]) {
        seen[u] = 1;
        ++count;
        q.push(u);
      }
    }
  }
  return count == n_;
}

Topology parse_topology(const std::string& name) {
  if (name == "complete") return Topology::complete;
  if (name == "ring") return Topology::ring;
  if (name == "path") return Topology::path;
  if (name == "random_connected") return Topology::random_connected;
  throw InvalidParameter("unknown topology '" + name + "'");
}

std::string to_string(Topology t) {
  switch (t) {
    case Topology::complete: return "complete";
    case Topology::ring: return "ring";
    case Topology::path: return "path";
    case Topology::random_connected: return "random_connected";
  }
  return "?";
}

Graph build_graph(const TopologySpec& spec, int n_agents) {
  if (n_agents < 2) throw InvalidSize("n_agents must be >= 2, got " + std::to_string(n_agents));
  std::vector<std::pair<int, int>> edges;
  switch (spec.kind) {
    case Topology::complete:
      for (int i = 0; i < n_agents; ++i)
        for (int j = i + 1; j < n_agents; ++j) edges.emplace_back(i, j);
      return Graph(n_agents, edges);
    case Topology::ring:
      for (int i = 0; i < n_agents; ++i) {
        const int j = (i + 1) % n_agents;
        if (i != j) edges.emplace_back(i, j);
      }
      return Graph(n_agents, edges);
    case Topology::path:
      for (int i = 0; i + 1 < n_agents; ++i) edges.emplace_back(i, i + 1);
      return Graph(n_agents, edges);
    case Topology::random_connected: {
      if (!(spec.edge_prob > 0.0 && spec.edge_prob <= 1.0))
        throw InvalidParameter("edge_prob must lie in (0, 1]");
      std::mt19937_64 rng(spec.seed);
      std::bernoulli_distribution coin(spec.edge_prob);
      for (int attempt = 0; attempt < 1000; ++attempt) {
        edges.clear();
        for (int i = 0; i < n_agents; ++i)
          for (int j = i + 1; j < n_agents; ++j)
            if (coin(rng)) edges.emplace_back(i, j);
        Graph g(n_agents, edges);
        if (g.connected()) return g;
      }
      throw ConnectivityError("no connected sample in 1000 attempts (edge_prob too small?)");
    }
  }
  throw InvalidParameter("unhandled topology");
}

void check_doubly_stochastic(const Matrix& w, double tol) {
  if (w.rows() != w.cols() || w.rows() == 0) throw ContractViolation("mixing matrix must be square");
  if ((w.array() < -tol).any() || (w.array() > 1.0 + tol).any())
    throw ContractViolation("mixing matrix entries must lie in [0, 1]");
  const Vector rows = w.rowwise().sum();
  const Vector cols = w.colwise().sum().transpose();
  if ((rows.array() - 1.0).abs().maxCoeff() > tol) throw ContractViolation("row sums differ from 1");
  if ((cols.array() - 1.0).abs().maxCoeff() > tol) throw ContractViolation("column sums differ from 1");
  if ((w - w.transpose()).cwiseAbs().maxCoeff() > tol) throw ContractViolation("mixing matrix must be symmetric");
}

MixingMatrix make_mixing(const Matrix& w) {
  MixingMatrix m;
  m.w = w;
  const SpectralParams sp = spectral_params(w);
  m.alpha = sp.alpha;
  m.kappa = sp.kappa;
  return m;
}

MixingMatrix metropolis_mixing(const Graph& g) {
  if (!g.connected()) throw ConnectivityError("metropolis_mixing requires a connected graph");
  const int n = g.size();
  Matrix w = Matrix::Zero(n, n);
  for (auto [i, j] : g.edges()) {
    const double v = 1.0 / (1.0 + std::max(g.degree(i), g.degree(j)));
    w(i, j) = v;
    w(j, i) = v;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : g.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return make_mixing(w);
}

}  // namespace fpnet
