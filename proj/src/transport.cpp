#include "tabsyn/transport.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tabsyn/errors.hpp"
#include "tabsyn/kernels.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

double TransportPlan::marginal_violation(std::span<const double> p,
                                         std::span<const double> q) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += mass[i * cols + j];
    worst = std::max(worst, std::fabs(s - p[i]));
  }
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += mass[i * cols + j];
    worst = std::max(worst, std::fabs(s - q[j]));
  }
  return worst;
}

namespace {

void check_weights(std::span<const double> w, const char* side) {
  double sum = 0.0;
  for (double x : w) {
    if (x < 0.0) throw ConfigError(std::string(side) + " weights contain a negative entry");
    sum += x;
  }
  if (std::fabs(sum - 1.0) > 1e-6) {
    throw ConfigError(std::string(side) + " weights sum to " + std::to_string(sum) +
                      ", expected 1");
  }
}

// Transportation simplex on the dense bipartite problem. The basis is a
// spanning tree over m source + n sink nodes; duals come from one tree
// traversal per pivot. Entering rule: most negative reduced cost, switching
// to first-negative (Bland) after a degenerate streak to rule out cycling.
class TransportSimplex {
 public:
  TransportSimplex(std::span<const double> p, std::span<const double> q,
                   std::span<const double> cost)
      : m_(p.size()), n_(q.size()), cost_(cost), p_(p.begin(), p.end()),
        q_(q.begin(), q.end()) {
    double sp = std::accumulate(p_.begin(), p_.end(), 0.0);
    double sq = std::accumulate(q_.begin(), q_.end(), 0.0);
    for (auto& x : p_) x /= sp;
    for (auto& x : q_) x /= sq;
    cmax_ = 0.0;
    for (double c : cost_) cmax_ = std::max(cmax_, c);
    eps_ = 1e-12 * (1.0 + cmax_);
  }

  ExactResult solve() {
    build_northwest_corner();
    std::size_t degenerate_streak = 0;
    bool bland = false;
    // The cap is far above observed pivot counts; hitting it means a bug.
    std::size_t max_pivots = 1000 + 64 * (m_ + n_) + m_ * n_;
    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      compute_duals();
      auto [ei, ej] = find_entering(bland);
      if (ei == m_) return finish();
      double theta = pivot_step(ei, ej);
      if (theta <= 0.0) {
        if (++degenerate_streak > m_ + n_) bland = true;
      } else {
        degenerate_streak = 0;
      }
    }
    throw Error("transportation simplex exceeded its pivot cap");
  }

 private:
  struct Cell {
    std::size_t i, j;
    double mass;
    bool active;
  };

  std::size_t m_, n_;
  std::span<const double> cost_;
  std::vector<double> p_, q_;
  double cmax_ = 0.0, eps_ = 0.0;

  std::vector<Cell> cells_;
  std::vector<int> slot_of_;              // m*n -> cell slot + 1, 0 when non-basic
  std::vector<std::vector<int>> adj_;     // node -> active cell slots
  std::vector<double> u_, v_;

  std::size_t source_node(std::size_t i) const { return i; }
  std::size_t sink_node(std::size_t j) const { return m_ + j; }
  double c(std::size_t i, std::size_t j) const { return cost_[i * n_ + j]; }

  void add_basic(std::size_t i, std::size_t j, double mass) {
    cells_.push_back({i, j, mass, true});
    int slot = static_cast<int>(cells_.size()) - 1;
    slot_of_[i * n_ + j] = slot + 1;
    adj_[source_node(i)].push_back(slot);
    adj_[sink_node(j)].push_back(slot);
  }

  void remove_basic(int slot) {
    Cell& cell = cells_[slot];
    cell.active = false;
    slot_of_[cell.i * n_ + cell.j] = 0;
    auto drop = [slot](std::vector<int>& list) {
      list.erase(std::find(list.begin(), list.end(), slot));
    };
    drop(adj_[source_node(cell.i)]);
    drop(adj_[sink_node(cell.j)]);
  }

  void build_northwest_corner() {
    slot_of_.assign(m_ * n_, 0);
    adj_.assign(m_ + n_, {});
    cells_.reserve(m_ + n_);
    std::size_t i = 0, j = 0;
    double a = p_[0], b = q_[0];
    for (;;) {
      add_basic(i, j, std::min(a, b));
      if (i == m_ - 1 && j == n_ - 1) break;
      if (a <= b && i < m_ - 1) {
        b -= a;
        a = p_[++i];
      } else if (j < n_ - 1) {
        a -= b;
        b = q_[++j];
      } else {
        b -= a;
        a = p_[++i];
      }
    }
  }

  // Duals satisfy u_i + v_j = c_ij on the basis tree; u_0 anchors at 0.
  void compute_duals() {
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::deque<std::size_t> frontier{source_node(0)};
    seen[source_node(0)] = 1;
    while (!frontier.empty()) {
      std::size_t node = frontier.front();
      frontier.pop_front();
      for (int slot : adj_[node]) {
        const Cell& cell = cells_[slot];
        std::size_t other = node < m_ ? sink_node(cell.j) : source_node(cell.i);
        if (seen[other]) continue;
        seen[other] = 1;
        if (other >= m_) {
          v_[cell.j] = c(cell.i, cell.j) - u_[cell.i];
        } else {
          u_[cell.i] = c(cell.i, cell.j) - v_[cell.j];
        }
        frontier.push_back(other);
      }
    }
  }

  // Returns (m_, 0) when optimal.
  std::pair<std::size_t, std::size_t> find_entering(bool bland) const {
    std::size_t best_i = m_, best_j = 0;
    double best = -eps_;
    for (std::size_t i = 0; i < m_; ++i) {
      double ui = u_[i];
      const double* row = cost_.data() + i * n_;
      const int* slots = slot_of_.data() + i * n_;
      for (std::size_t j = 0; j < n_; ++j) {
        if (slots[j]) continue;
        double reduced = row[j] - ui - v_[j];
        if (reduced < best) {
          best = reduced;
          best_i = i;
          best_j = j;
          if (bland) return {best_i, best_j};
        }
      }
    }
    return {best_i, best_j};
  }

  // Path through the basis tree from the entering sink back to the entering
  // source; with the entering edge it closes the unique pivot cycle.
  std::vector<int> tree_path(std::size_t from_node, std::size_t to_node) const {
    std::vector<int> parent_cell(m_ + n_, -1);
    std::vector<int> parent_node(m_ + n_, -1);
    std::vector<std::uint8_t> seen(m_ + n_, 0);
    std::deque<std::size_t> frontier{from_node};
    seen[from_node] = 1;
    while (!frontier.empty()) {
      std::size_t node = frontier.front();
      frontier.pop_front();
      if (node == to_node) break;
      for (int slot : adj_[node]) {
        const Cell& cell = cells_[slot];
        std::size_t other = node < m_ ? sink_node(cell.j) : source_node(cell.i);
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell[other] = slot;
        parent_node[other] = static_cast<int>(node);
        frontier.push_back(other);
      }
    }
    if (!seen[to_node]) throw Error("basis lost connectivity");
    std::vector<int> path;
    for (std::size_t node = to_node; node != from_node;
         node = static_cast<std::size_t>(parent_node[node])) {
      path.push_back(parent_cell[node]);
    }
    return path;  // ordered from to_node back toward from_node
  }

  double pivot_step(std::size_t ei, std::size_t ej) {
    // Cycle = entering edge (+) then tree path from the entering sink to the
    // entering source, alternating -, +, -, ...
    std::vector<int> path = tree_path(sink_node(ej), source_node(ei));
    std::reverse(path.begin(), path.end());  // now sink -> ... -> source order

    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const Cell& cell = cells_[path[k]];
      if (cell.mass < theta ||
          (cell.mass == theta && leaving >= 0 &&
           cell.i * n_ + cell.j < cells_[leaving].i * n_ + cells_[leaving].j)) {
        theta = cell.mass;
        leaving = path[k];
      }
    }
    if (leaving < 0) throw Error("pivot cycle has no leaving candidate");

    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& cell = cells_[path[k]];
      cell.mass += (k % 2 == 0) ? -theta : theta;
    }
    remove_basic(leaving);
    add_basic(ei, ej, theta);
    return theta;
  }

  ExactResult finish() {
    ExactResult out;
    out.plan.rows = m_;
    out.plan.cols = n_;
    out.plan.mass.assign(m_ * n_, 0.0);
    double dist = 0.0;
    for (const Cell& cell : cells_) {
      if (!cell.active) continue;
      out.plan.mass[cell.i * n_ + cell.j] = cell.mass;
      dist += cell.mass * c(cell.i, cell.j);
    }
    out.distance = dist;
    certify(out);
    return out;
  }

  void certify(const ExactResult& out) const {
    double dual_tol = 1e-9 * (1.0 + cmax_);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (c(i, j) - u_[i] - v_[j] < -dual_tol) {
          throw Error("transport solution failed dual certification");
        }
      }
    }
    if (out.plan.marginal_violation(p_, q_) > 1e-9) {
      throw Error("transport plan violates its marginal constraints");
    }
  }
};

}  // namespace

ExactResult transport_exact(std::span<const double> p, std::span<const double> q,
                            std::span<const double> cost) {
  if (p.empty() || q.empty()) throw ConfigError("transport requires non-empty supports");
  if (cost.size() != p.size() * q.size()) {
    throw ConfigError("cost matrix shape does not match the supports");
  }
  check_weights(p, "source");
  check_weights(q, "sink");
  return TransportSimplex(p, q, cost).solve();
}

ExactResult wasserstein_exact(const MarginalDistribution& p,
                              const MarginalDistribution& q,
                              const CostMatrix& c) {
  if (c.rows != p.size() || c.cols != q.size()) {
    throw ConfigError("cost matrix shape does not match the marginals");
  }
  return transport_exact(p.weights, q.weights, c.entries);
}

double wasserstein_1d(const MarginalDistribution& p,
                      const MarginalDistribution& q) {
  if (p.variable.order() != 1 || q.variable.order() != 1) {
    throw ConfigError("1-D transport requires single-attribute marginals");
  }
  check_weights(p.weights, "source");
  check_weights(q.weights, "sink");

  auto sorted_pairs = [](const MarginalDistribution& d) {
    std::vector<std::pair<double, double>> vw(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) vw[i] = {d.support[i], d.weights[i]};
    std::sort(vw.begin(), vw.end());
    return vw;
  };
  auto a = sorted_pairs(p);
  auto b = sorted_pairs(q);

  // Quantile coupling: walk both CDFs, moving the overlapping mass sliver
  // between the current support points.
  double dist = 0.0;
  std::size_t ia = 0, ib = 0;
  double ra = a[0].second, rb = b[0].second;
  while (ia < a.size() && ib < b.size()) {
    double step = std::min(ra, rb);
    dist += step * std::fabs(a[ia].first - b[ib].first);
    ra -= step;
    rb -= step;
    if (ra <= 1e-15) {
      ++ia;
      if (ia < a.size()) ra = a[ia].second;
    }
    if (rb <= 1e-15) {
      ++ib;
      if (ib < b.size()) rb = b[ib].second;
    }
  }
  return dist;
}

namespace {

struct ScalingProblem {
  std::size_t m, n;
  std::span<const double> cost;
  std::vector<double> p, q;
};

// Plain scaling iterations on K = exp(-C/reg). Only safe when K cannot
// underflow; returns nullopt on any non-finite intermediate so the caller
// can retry in the log domain.
std::optional<SinkhornResult> sinkhorn_vanilla(const ScalingProblem& prob,
                                               double reg, std::size_t max_iters,
                                               double tol) {
  std::size_t m = prob.m, n = prob.n;
  std::vector<double> K(m * n);
  auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* crow = prob.cost.data() + static_cast<std::size_t>(i) * n;
    double* krow = K.data() + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) krow[j] = std::exp(-crow[j] / reg);
  }

  std::vector<double> u(m, 1.0), v(n, 1.0), kv(m), ktu(n);
  bool converged = false;
  std::size_t iters = 0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    iters = it + 1;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
      const double* krow = K.data() + static_cast<std::size_t>(i) * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += krow[j] * v[j];
      kv[i] = s;
    }
    for (std::size_t i = 0; i < m; ++i) u[i] = prob.p[i] / kv[i];

    // Column sums accumulate in fixed i order for every j, so the result is
    // identical for any thread partition of the columns.
    std::fill(ktu.begin(), ktu.end(), 0.0);
#pragma omp parallel
    {
#ifdef _OPENMP
      int nt = omp_get_num_threads();
      int tid = omp_get_thread_num();
#else
      int nt = 1, tid = 0;
#endif
      std::size_t lo = n * tid / nt, hi = n * (tid + 1) / nt;
      for (std::size_t i = 0; i < m; ++i) {
        const double* krow = K.data() + i * n;
        double ui = u[i];
        for (std::size_t j = lo; j < hi; ++j) ktu[j] += ui * krow[j];
      }
    }

    double err = 0.0;
    for (std::size_t j = 0; j < n; ++j) err += std::fabs(v[j] * ktu[j] - prob.q[j]);
    if (!std::isfinite(err)) return std::nullopt;
    if (err < tol) {
      converged = true;
      break;
    }
    for (std::size_t j = 0; j < n; ++j) v[j] = prob.q[j] / ktu[j];
  }

  std::vector<double> row_cost(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* krow = K.data() + static_cast<std::size_t>(i) * n;
    const double* crow = prob.cost.data() + static_cast<std::size_t>(i) * n;
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += krow[j] * crow[j] * v[j];
    row_cost[i] = s;
  }
  double dist = 0.0;
  for (std::size_t i = 0; i < m; ++i) dist += u[i] * row_cost[i];
  if (!std::isfinite(dist)) return std::nullopt;
  return SinkhornResult{dist, converged, iters};
}

// Log-domain scaling with stepwise reduction of the regularizer (warm-started
// potentials), which keeps iteration counts tractable at tiny reg.
SinkhornResult sinkhorn_log(const ScalingProblem& prob, double reg,
                            std::size_t max_iters, double tol) {
  std::size_t m = prob.m, n = prob.n;
  std::vector<double> ct(n * m);  // transpose, for cache-friendly g updates
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) ct[j * m + i] = prob.cost[i * n + j];
  }
  std::vector<double> logp(m), logq(n);
  for (std::size_t i = 0; i < m; ++i) logp[i] = std::log(std::max(prob.p[i], 1e-300));
  for (std::size_t j = 0; j < n; ++j) logq[j] = std::log(std::max(prob.q[j], 1e-300));

  std::vector<double> f(m, 0.0), g(n, 0.0), colsum(n);
  auto rows = static_cast<std::int64_t>(m);
  auto cols = static_cast<std::int64_t>(n);

  auto update_f = [&](double r) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) {
      const double* crow = prob.cost.data() + static_cast<std::size_t>(i) * n;
      double amax = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) amax = std::max(amax, g[j] - crow[j]);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += std::exp((g[j] - crow[j] - amax) / r);
      f[i] = r * logp[i] - amax - r * std::log(s);
    }
  };
  auto update_g = [&](double r) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < cols; ++j) {
      const double* ccol = ct.data() + static_cast<std::size_t>(j) * m;
      double amax = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) amax = std::max(amax, f[i] - ccol[i]);
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += std::exp((f[i] - ccol[i] - amax) / r);
      g[j] = r * logq[j] - amax - r * std::log(s);
    }
  };
  // Column-sum violation of the implied plan; rows are exact after update_f.
  auto col_violation = [&](double r) {
    std::fill(colsum.begin(), colsum.end(), 0.0);
#pragma omp parallel
    {
#ifdef _OPENMP
      int nt = omp_get_num_threads();
      int tid = omp_get_thread_num();
#else
      int nt = 1, tid = 0;
#endif
      std::size_t lo = n * tid / nt, hi = n * (tid + 1) / nt;
      for (std::size_t i = 0; i < m; ++i) {
        const double* crow = prob.cost.data() + i * n;
        for (std::size_t j = lo; j < hi; ++j) {
          colsum[j] += std::exp((f[i] + g[j] - crow[j]) / r);
        }
      }
    }
    double err = 0.0;
    for (std::size_t j = 0; j < n; ++j) err += std::fabs(colsum[j] - prob.q[j]);
    return err;
  };

  double cmax = 0.0;
  for (double c : prob.cost) cmax = std::max(cmax, c);
  std::vector<double> levels;
  for (double r = std::max(reg, cmax / 16.0); r > reg; r /= 2.0) levels.push_back(r);
  levels.push_back(reg);

  std::size_t iters = 0;
  bool converged = false;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    double r = levels[li];
    bool final_level = li + 1 == levels.size();
    std::size_t budget = final_level ? (max_iters > iters ? max_iters - iters : 1) : 50;
    for (std::size_t it = 0; it < budget && iters < max_iters; ++it) {
      update_g(r);
      update_f(r);
      ++iters;
      if (it % 5 == 4 || it + 1 == budget) {
        double err = col_violation(r);
        if (final_level && err < tol) {
          converged = true;
          break;
        }
        if (!final_level && err < 1e-4) break;
      }
    }
    if (converged) break;
  }

  std::vector<double> row_cost(m);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* crow = prob.cost.data() + static_cast<std::size_t>(i) * n;
    double fi = f[static_cast<std::size_t>(i)];
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      s += std::exp((fi + g[j] - crow[j]) / reg) * crow[j];
    }
    row_cost[i] = s;
  }
  double dist = 0.0;
  for (std::size_t i = 0; i < m; ++i) dist += row_cost[i];
  return SinkhornResult{dist, converged, iters};
}

}  // namespace

SinkhornResult wasserstein_sinkhorn(const MarginalDistribution& p,
                                    const MarginalDistribution& q,
                                    const CostMatrix& c, double reg,
                                    std::size_t max_iters, double tol) {
  if (reg <= 0.0) throw ConfigError("sinkhorn regularizer must be positive");
  if (c.rows != p.size() || c.cols != q.size()) {
    throw ConfigError("cost matrix shape does not match the marginals");
  }
  check_weights(p.weights, "source");
  check_weights(q.weights, "sink");

  ScalingProblem prob{c.rows, c.cols, c.entries,
                      {p.weights.begin(), p.weights.end()},
                      {q.weights.begin(), q.weights.end()}};
  if (c.max() / reg < 500.0) {
    if (auto res = sinkhorn_vanilla(prob, reg, max_iters, tol)) return *res;
  }
  return sinkhorn_log(prob, reg, max_iters, tol);
}

namespace {

void check_same_shape(const Schema& a, const Schema& b) {
  if (a.size() != b.size()) throw ConfigError("tables have different schemas");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.attribute(i).name != b.attribute(i).name ||
        a.attribute(i).kind != b.attribute(i).kind) {
      throw ConfigError("tables have different schemas (attribute '" +
                        a.attribute(i).name + "')");
    }
  }
}

}  // namespace

FidelityScore fidelity(const Table& real, const Table& synthetic,
                       const MarginalSet& marginal_set,
                       const FidelityConfig& config) {
  if (real.rows() == 0 || synthetic.rows() == 0) {
    throw Error("fidelity: empty table");
  }
  check_same_shape(real.schema(), synthetic.schema());
  const Schema& schema = real.schema();

  auto [real_n, params] = normalize(real);
  Table syn_n = normalize(synthetic, params).first;

  FidelityScore score;
  score.config = config;
  score.per_marginal.resize(marginal_set.variables.size());

  auto count = static_cast<std::int64_t>(marginal_set.variables.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t idx = 0; idx < count; ++idx) {
    const auto& var = marginal_set.variables[static_cast<std::size_t>(idx)];
    bool numeric = false;
    for (std::size_t a : var.attr_indices) {
      if (schema.attribute(a).is_numerical()) numeric = true;
    }

    auto subsample_for = [&](const Table& t, std::uint64_t salt) -> std::optional<SubsampleSpec> {
      if (!numeric || t.rows() <= config.subsample_threshold) return std::nullopt;
      std::size_t target = std::min((t.rows() + 1) / 2, config.max_support);
      return SubsampleSpec{target, derive_seed(config.seed, "subsample",
                                               static_cast<std::uint64_t>(idx) * 2 + salt)};
    };
    auto p = extract_marginal(real_n, var, subsample_for(real_n, 0));
    auto q = extract_marginal(syn_n, var, subsample_for(syn_n, 1));

    MarginalFidelity mf;
    mf.key = var.key(schema);
    mf.support_real = p.size();
    mf.support_synth = q.size();
    mf.subsampled = p.subsampled || q.subsampled;

    if (var.order() == 1 && numeric) {
      mf.distance = wasserstein_1d(p, q);
      mf.solver = "1d";
    } else {
      CostMatrix c = build_cost_matrix(p, q, schema);
      bool exact = config.solver == FidelitySolver::exact ||
                   (config.solver == FidelitySolver::auto_select &&
                    std::max(p.size(), q.size()) <= config.max_exact_support);
      if (exact) {
        mf.distance = wasserstein_exact(p, q, c).distance;
        mf.solver = "exact";
      } else {
        double mean_cost = c.mean();
        mf.solver = "sinkhorn";
        if (mean_cost <= 0.0) {
          mf.distance = 0.0;
        } else {
          auto res = wasserstein_sinkhorn(p, q, c, config.sinkhorn_reg_factor * mean_cost,
                                          config.sinkhorn_max_iters, config.sinkhorn_tol);
          mf.distance = res.distance;
          mf.converged = res.converged;
        }
      }
    }
    score.per_marginal[static_cast<std::size_t>(idx)] = std::move(mf);
  }

  double sum = 0.0;
  for (const auto& mf : score.per_marginal) sum += mf.distance;
  score.overall = score.per_marginal.empty()
                      ? 0.0
                      : sum / static_cast<double>(score.per_marginal.size());
  return score;
}

}  // namespace tabsyn
