#include "closedloop/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "closedloop/errors.hpp"

namespace closedloop {

namespace {

struct Arc {
  int to;
  double cap;
  double cost;
  int rev;  // index of reverse arc in graph[to]
};

class FlowGraph {
 public:
  explicit FlowGraph(int n) : adj_(n) {}

  void add_arc(int from, int to, double cap, double cost) {
    adj_[from].push_back({to, cap, cost, static_cast<int>(adj_[to].size())});
    adj_[to].push_back({from, 0.0, -cost, static_cast<int>(adj_[from].size()) - 1});
  }

  std::vector<std::vector<Arc>> adj_;
};

}  // namespace

double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                      const std::function<double(std::size_t, std::size_t)>& cost) {
  constexpr double kMassEps = 1e-15;
  std::vector<std::size_t> src, dst;
  double total_supply = 0.0, total_demand = 0.0;
  for (std::size_t i = 0; i < supply.size(); ++i) {
    if (supply[i] < -1e-12) fail(ErrorCode::ConstraintError, "negative supply");
    if (supply[i] > kMassEps) {
      src.push_back(i);
      total_supply += supply[i];
    }
  }
  for (std::size_t j = 0; j < demand.size(); ++j) {
    if (demand[j] < -1e-12) fail(ErrorCode::ConstraintError, "negative demand");
    if (demand[j] > kMassEps) {
      dst.push_back(j);
      total_demand += demand[j];
    }
  }
  if (std::abs(total_supply - total_demand) > 1e-9) {
    fail(ErrorCode::ConstraintError, "unbalanced transportation problem");
  }
  if (src.empty() || dst.empty()) return 0.0;

  const int m = static_cast<int>(src.size());
  const int n = static_cast<int>(dst.size());
  const int s_node = m + n;
  const int t_node = m + n + 1;
  const int num_nodes = m + n + 2;
  const double inf = std::numeric_limits<double>::infinity();

  FlowGraph g(num_nodes);
  for (int i = 0; i < m; ++i) g.add_arc(s_node, i, supply[src[i]], 0.0);
  for (int j = 0; j < n; ++j) g.add_arc(m + j, t_node, demand[dst[j]], 0.0);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      const double c = cost(src[i], dst[j]);
      if (!(c >= 0.0) || !std::isfinite(c)) fail(ErrorCode::ConstraintError, "transport cost must be finite and >= 0");
      g.add_arc(i, m + j, inf, c);
    }
  }

  std::vector<double> potential(num_nodes, 0.0);
  std::vector<double> dist(num_nodes);
  std::vector<int> prev_node(num_nodes), prev_arc(num_nodes);
  double total_cost = 0.0;
  double remaining = total_supply;

  // Each augmentation saturates a super-source or super-sink arc, so at most
  // m + n rounds of Dijkstra are needed.
  const int max_rounds = m + n + 4;
  for (int round = 0; round < max_rounds && remaining > kMassEps * (1.0 + total_supply); ++round) {
    std::fill(dist.begin(), dist.end(), inf);
    dist[s_node] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, s_node});
    while (!heap.empty()) {
      auto [d, u] = heap.top();
      heap.pop();
      if (d > dist[u]) continue;
      for (std::size_t k = 0; k < g.adj_[u].size(); ++k) {
        const Arc& a = g.adj_[u][k];
        if (a.cap <= kMassEps) continue;
        const double nd = d + a.cost + potential[u] - potential[a.to];
        if (nd < dist[a.to]) {
          dist[a.to] = nd;
          prev_node[a.to] = u;
          prev_arc[a.to] = static_cast<int>(k);
          heap.push({nd, a.to});
        }
      }
    }
    if (!std::isfinite(dist[t_node])) {
      fail(ErrorCode::ConstraintError, "transportation problem infeasible");
    }
    for (int v = 0; v < num_nodes; ++v) {
      if (std::isfinite(dist[v])) potential[v] += dist[v];
    }
    // Bottleneck along the shortest path.
    double push = remaining;
    for (int v = t_node; v != s_node; v = prev_node[v]) {
      push = std::min(push, g.adj_[prev_node[v]][prev_arc[v]].cap);
    }
    for (int v = t_node; v != s_node; v = prev_node[v]) {
      Arc& a = g.adj_[prev_node[v]][prev_arc[v]];
      a.cap -= push;
      g.adj_[a.to][a.rev].cap += push;
      total_cost += push * a.cost;
    }
    remaining -= push;
  }
  if (remaining > 1e-9 * (1.0 + total_supply)) {
    fail(ErrorCode::ConstraintError, "transport solver failed to route all mass");
  }
  return total_cost;
}

}  // namespace closedloop
