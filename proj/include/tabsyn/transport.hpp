#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tabsyn/dataset.hpp"
#include "tabsyn/marginals.hpp"

namespace tabsyn {

struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> mass;

  double at(std::size_t i, std::size_t j) const { return mass[i * cols + j]; }
  // Largest absolute deviation of row/column sums from the target weights.
  double marginal_violation(std::span<const double> p,
                            std::span<const double> q) const;
};

struct ExactResult {
  double distance = 0.0;
  TransportPlan plan;
};

struct SinkhornResult {
  double distance = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

// Exact 1-Wasserstein via the transportation simplex. Weights must each sum
// to 1 (tiny float drift is rescaled away). The returned plan is feasible
// within 1e-6 and dual-certified optimal within 1e-9 relative.
ExactResult wasserstein_exact(const MarginalDistribution& p,
                              const MarginalDistribution& q,
                              const CostMatrix& c);

// Weight-vector core of the solver, usable without marginal wrappers.
ExactResult transport_exact(std::span<const double> p, std::span<const double> q,
                            std::span<const double> cost);

// Closed-form W1 on the line by quantile coupling. Only valid for single
// numerical attributes; matches wasserstein_exact within 1e-8.
double wasserstein_1d(const MarginalDistribution& p,
                      const MarginalDistribution& q);

// Entropic approximation. Runs vanilla scaling when exp(-C/reg) cannot
// underflow, log-domain iterations with stepwise reg reduction otherwise.
// Returns <C, A_reg>; non-convergence is flagged, not fatal.
SinkhornResult wasserstein_sinkhorn(const MarginalDistribution& p,
                                    const MarginalDistribution& q,
                                    const CostMatrix& c, double reg,
                                    std::size_t max_iters = 5000,
                                    double tol = 1e-9);

enum class FidelitySolver { auto_select, exact, sinkhorn };

struct FidelityConfig {
  FidelitySolver solver = FidelitySolver::auto_select;
  // reg = sinkhorn_reg_factor * mean(C) when the Sinkhorn path runs.
  double sinkhorn_reg_factor = 0.05;
  std::size_t sinkhorn_max_iters = 5000;
  double sinkhorn_tol = 1e-9;
  // auto_select: exact LP up to this support size per side, Sinkhorn above.
  std::size_t max_exact_support = 1000;
  // Point supports larger than the threshold are subsampled to ceil(n/2),
  // capped at max_support.
  std::size_t subsample_threshold = 5000;
  std::size_t max_support = 5000;
  std::uint64_t seed = 0;
};

struct MarginalFidelity {
  std::string key;
  double distance = 0.0;
  std::string solver;  // "1d" | "exact" | "sinkhorn"
  std::size_t support_real = 0;
  std::size_t support_synth = 0;
  bool subsampled = false;
  bool converged = true;
};

struct FidelityScore {
  double overall = 0.0;
  std::vector<MarginalFidelity> per_marginal;
  FidelityConfig config;
};

// Mean Wasserstein distance over the marginal set. Numerical attributes are
// min-max normalized with the real table's parameters on both sides first.
FidelityScore fidelity(const Table& real, const Table& synthetic,
                       const MarginalSet& marginal_set,
                       const FidelityConfig& config = {});

}  // namespace tabsyn
