#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tabsyn/dataset.hpp"

namespace tabsyn {

// An ordered tuple of 1..k distinct attributes of one schema.
struct MarginalVariable {
  std::vector<std::size_t> attr_indices;

  std::size_t order() const { return attr_indices.size(); }
  // Attribute names joined with "," for report keys.
  std::string key(const Schema& schema) const;
  bool operator==(const MarginalVariable&) const = default;
};

struct MarginalSet {
  std::vector<MarginalVariable> variables;
};

// Discrete distribution over a finite support of attribute-value tuples.
// Support tuples are flattened (order() doubles per element). Categorical
// cells hold domain codes, numerical ones hold (normalized) values.
struct MarginalDistribution {
  MarginalVariable variable;
  std::vector<double> support;
  std::vector<double> weights;
  bool subsampled = false;
  std::size_t source_rows = 0;

  std::size_t size() const { return weights.size(); }
  std::span<const double> tuple(std::size_t i) const {
    return {support.data() + i * variable.order(), variable.order()};
  }
};

struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;

  double at(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
  double mean() const;
  double max() const;
};

struct SubsampleSpec {
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

// All attribute subsets of size 1..max_order, ordered by (size, index tuple).
MarginalSet enumerate_marginals(const Schema& schema, std::size_t max_order = 2);

// Categorical-only variables collapse to distinct tuples with relative
// frequencies; any variable touching a numerical attribute keeps the
// projected rows as a uniform point support. Subsampling (without
// replacement) applies to point supports before projection.
MarginalDistribution extract_marginal(const Table& table,
                                      const MarginalVariable& variable,
                                      const std::optional<SubsampleSpec>& subsample = {});

// C_ij = sum over the variable's attributes of per-attribute distance
// (|a-b| numerical, 0/1 categorical).
CostMatrix build_cost_matrix(const MarginalDistribution& p,
                             const MarginalDistribution& q,
                             const Schema& schema);

}  // namespace tabsyn
