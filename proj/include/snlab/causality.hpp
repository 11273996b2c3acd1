#pragma once

// Causal precedence of probability measures on constant-time slices of 1+1
// Minkowski spacetime. mu (at time t_mu) precedes nu (at t_nu >= t_mu) iff a
// coupling of the two exists that only moves mass between points with
// |y - x| <= c (t_nu - t_mu). Two independent routes decide it: transport
// feasibility through max-flow, and the interval criterion
// mu(K) <= nu(J+(K)) scanned over all closed intervals K.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "snlab/error.hpp"
#include "snlab/grid.hpp"
#include "snlab/propagator.hpp"

namespace snlab {

struct SliceMeasure {
  double t = 0.0;
  std::vector<double> points;   ///< strictly increasing
  std::vector<double> weights;  ///< nonnegative, summing to 1

  std::size_t size() const { return points.size(); }
};

inline SliceMeasure make_slice_measure(double t, std::vector<double> points, std::vector<double> weights) {
  if (points.size() != weights.size()) throw UsageError("points and weights differ in length");
  if (points.empty()) throw UsageError("slice measure needs at least one atom");
  double total = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i > 0 && !(points[i] > points[i - 1]))
      throw UsageError("slice measure positions must be strictly increasing");
    if (!(weights[i] >= 0.0)) throw UsageError("slice measure weights must be nonnegative");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw UsageError("slice measure weights sum to " + std::to_string(total) + ", not 1");
  return {t, std::move(points), std::move(weights)};
}

/// Grid density as atoms at cell centers with weight rho_k dx, rescaled to
/// unit total mass.
inline SliceMeasure slice_from_density(const Grid& grid, std::span<const double> rho, double t) {
  if (rho.size() != grid.size()) throw UsageError("density size does not match grid");
  std::vector<double> w(rho.begin(), rho.end());
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw UsageError("density has no mass");
  for (double& v : w) v /= total;
  return {t, grid.points(), std::move(w)};
}

struct Interval {
  double a = 0.0;
  double b = 0.0;
};

struct IntervalLeak {
  double value = 0.0;  ///< max(0, raw)
  double raw = 0.0;    ///< sup of mu([a,b]) - nu([a - c dt, b + c dt]) over atom-bounded intervals
  std::optional<Interval> interval;  ///< argmax, present when value > 0
};

inline double cone_reach(const SliceMeasure& mu, const SliceMeasure& nu, double c) {
  if (!(c > 0.0)) throw UsageError("speed of light must be positive");
  if (nu.t < mu.t) throw OrderingError("target slice t = " + std::to_string(nu.t) +
                                       " precedes source slice t = " + std::to_string(mu.t));
  return c * (nu.t - mu.t);
}

/// sup over closed [a, b] of mu([a, b]) - nu([a - d, b + d]), d = c (t_nu - t_mu).
///
/// The supremum is attained with both endpoints on atoms of mu, so writing
/// the objective as g(b) - h(a) with
///   g(x_k) = F_mu(x_k) - F_nu(x_k + d),  h(x_i) = F_mu(x_i-) - F_nu((x_i - d)-)
/// turns it into one sweep over mu keeping the running minimum of h. The cone
/// J+ is closed, so nu atoms exactly at distance d count as inside.
inline IntervalLeak interval_leak_sup(const SliceMeasure& mu, const SliceMeasure& nu, double c) {
  const double d = cone_reach(mu, nu, c);
  const std::size_t m = mu.size();
  const std::size_t n = nu.size();

  double f_mu = 0.0;             // F_mu(x_k-)
  double f_nu_right = 0.0;       // F_nu(x_k + d)
  double f_nu_left = 0.0;        // F_nu((x_k - d)-)
  std::size_t j_right = 0, j_left = 0;
  double best_h = std::numeric_limits<double>::infinity();
  std::size_t best_h_index = 0;
  IntervalLeak out;
  out.raw = -std::numeric_limits<double>::infinity();
  std::size_t best_a = 0, best_b = 0;

  for (std::size_t k = 0; k < m; ++k) {
    const double x = mu.points[k];
    while (j_left < n && nu.points[j_left] < x - d) f_nu_left += nu.weights[j_left++];
    const double h = f_mu - f_nu_left;
    if (h < best_h) {
      best_h = h;
      best_h_index = k;
    }
    f_mu += mu.weights[k];
    while (j_right < n && nu.points[j_right] <= x + d) f_nu_right += nu.weights[j_right++];
    const double g = f_mu - f_nu_right;
    if (g - best_h > out.raw) {
      out.raw = g - best_h;
      best_a = best_h_index;
      best_b = k;
    }
  }
  out.value = std::max(0.0, out.raw);
  if (out.value > 0.0) out.interval = Interval{mu.points[best_a], mu.points[best_b]};
  return out;
}

/// Leak of one given interval; the symmetric case [-R, R] reproduces the
/// light-cone diagnostic on atomic measures.
inline double interval_leak(const SliceMeasure& mu, const SliceMeasure& nu, double c, Interval k) {
  const double d = cone_reach(mu, nu, c);
  double inside = 0.0, cone = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    if (mu.points[i] >= k.a && mu.points[i] <= k.b) inside += mu.weights[i];
  for (std::size_t j = 0; j < nu.size(); ++j)
    if (nu.points[j] >= k.a - d && nu.points[j] <= k.b + d) cone += nu.weights[j];
  return std::max(0.0, inside - cone);
}

namespace detail {

/// Dinic max-flow on real capacities.
class MaxFlow {
 public:
  explicit MaxFlow(std::size_t nodes) : adj_(nodes), level_(nodes), next_(nodes) {}

  std::size_t add_edge(std::size_t from, std::size_t to, double cap) {
    adj_[from].push_back(edges_.size());
    edges_.push_back({to, cap, 0.0});
    adj_[to].push_back(edges_.size());
    edges_.push_back({from, 0.0, 0.0});
    return edges_.size() - 2;
  }

  double flow_on(std::size_t edge) const { return edges_[edge].flow; }

  double run(std::size_t s, std::size_t t) {
    double total = 0.0;
    while (bfs(s, t)) {
      std::fill(next_.begin(), next_.end(), 0);
      while (const double f = dfs(s, t, std::numeric_limits<double>::infinity())) total += f;
    }
    return total;
  }

 private:
  struct Edge {
    std::size_t to;
    double cap;
    double flow;
  };
  static constexpr double eps = 1e-15;

  double residual(std::size_t e) const { return edges_[e].cap - edges_[e].flow; }

  bool bfs(std::size_t s, std::size_t t) {
    std::fill(level_.begin(), level_.end(), -1);
    std::queue<std::size_t> q;
    level_[s] = 0;
    q.push(s);
    while (!q.empty()) {
      const std::size_t u = q.front();
      q.pop();
      for (std::size_t e : adj_[u]) {
        const std::size_t v = edges_[e].to;
        if (level_[v] < 0 && residual(e) > eps) {
          level_[v] = level_[u] + 1;
          q.push(v);
        }
      }
    }
    return level_[t] >= 0;
  }

  double dfs(std::size_t u, std::size_t t, double pushed) {
    if (u == t) return pushed;
    for (std::size_t& i = next_[u]; i < adj_[u].size(); ++i) {
      const std::size_t e = adj_[u][i];
      const std::size_t v = edges_[e].to;
      if (level_[v] != level_[u] + 1 || residual(e) <= eps) continue;
      const double f = dfs(v, t, std::min(pushed, residual(e)));
      if (f > 0.0) {
        edges_[e].flow += f;
        edges_[e ^ 1].flow -= f;
        return f;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<Edge> edges_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
};

}  // namespace detail

struct Transfer {
  std::size_t from;  ///< atom index in mu
  std::size_t to;    ///< atom index in nu
  double mass;
};

struct CausalVerdict {
  bool causal = false;
  double transported = 0.0;        ///< max-flow value
  std::vector<Transfer> coupling;  ///< feasible coupling when causal
  IntervalLeak violation;          ///< interval witness when not causal
};

struct CausalityOptions {
  std::size_t max_support = 10000;
  double tolerance = 1e-12;
};

/// Decides mu <= nu by transport feasibility: the bipartite network
/// source -> mu_i -> nu_j -> sink, with arcs only between causally related
/// atoms, must carry the whole unit mass.
inline CausalVerdict is_causal_pair(const SliceMeasure& mu, const SliceMeasure& nu, double c,
                                    const CausalityOptions& options = {}) {
  const double d = cone_reach(mu, nu, c);
  if (mu.size() > options.max_support || nu.size() > options.max_support)
    throw SizeError("measure support exceeds the cap of " + std::to_string(options.max_support));
  const std::size_t m = mu.size(), n = nu.size();
  const std::size_t source = m + n, sink = m + n + 1;
  detail::MaxFlow net(m + n + 2);
  double mu_total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    net.add_edge(source, i, mu.weights[i]);
    mu_total += mu.weights[i];
  }
  for (std::size_t j = 0; j < n; ++j) net.add_edge(m + j, sink, nu.weights[j]);

  struct Arc {
    std::size_t i, j, edge;
  };
  std::vector<Arc> arcs;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double x = mu.points[i];
    while (lo < n && nu.points[lo] < x - d) ++lo;
    for (std::size_t j = lo; j < n && nu.points[j] <= x + d; ++j)
      arcs.push_back({i, j, net.add_edge(i, m + j, 2.0)});
  }

  CausalVerdict verdict;
  verdict.transported = net.run(source, sink);
  verdict.causal = verdict.transported >= mu_total - options.tolerance;
  if (verdict.causal) {
    for (const auto& arc : arcs)
      if (const double f = net.flow_on(arc.edge); f > 0.0) verdict.coupling.push_back({arc.i, arc.j, f});
  } else {
    verdict.violation = interval_leak_sup(mu, nu, c);
  }
  return verdict;
}

struct LeakRecord {
  double t = 0.0;
  double leak = 0.0;
  std::optional<Interval> interval;
};

struct EvolutionCausality {
  std::vector<LeakRecord> records;
  bool causal = true;
  double max_leak = 0.0;
};

/// Interval leak supremum between the initial snapshot and every stride-th
/// later snapshot of a trajectory.
inline EvolutionCausality check_evolution_causal(const Grid& grid, const Trajectory& trajectory, double c,
                                                 std::size_t stride = 1, double tolerance = 1e-9) {
  if (stride == 0) throw UsageError("stride must be positive");
  if (trajectory.snapshots.empty()) throw UsageError("trajectory has no snapshots");
  const SliceMeasure mu0 = slice_from_density(grid, trajectory.snapshots.front(), trajectory.times.front());
  EvolutionCausality out;
  const std::size_t count = trajectory.snapshots.size();
  for (std::size_t s = stride; s < count; s += stride) {
    const SliceMeasure nu = slice_from_density(grid, trajectory.snapshots[s], trajectory.times[s]);
    const IntervalLeak leak = interval_leak_sup(mu0, nu, c);
    out.records.push_back({trajectory.times[s], leak.value, leak.interval});
    out.max_leak = std::max(out.max_leak, leak.value);
  }
  out.causal = out.max_leak <= tolerance;
  return out;
}

}  // namespace snlab
