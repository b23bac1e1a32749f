#pragma once

#include <cstdint>
#include <vector>

#include "tabsyn/dataset.hpp"

namespace tabsyn {

// One conjunct of a counting query. Categorical: equality on the label code.
// Numerical: inclusive range [lo, hi] on the raw value.
struct QueryCondition {
  std::size_t attr = 0;
  bool categorical = false;
  double value = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Conjunction of conditions over distinct attributes.
struct CountingQuery {
  std::vector<QueryCondition> conditions;
};

struct Workload {
  std::vector<CountingQuery> queries;
  std::size_t k = 0;
  std::uint64_t seed = 0;
};

// Random k-way conjunctive counting queries over distinct attributes.
// Requires 1 <= k <= schema size. Deterministic in (schema, k, count, seed).
Workload generate_workload(const Schema& schema, std::size_t k, std::size_t count,
                           std::uint64_t seed);

// Fraction of rows matching the query. Operates on raw (unnormalized) values.
double execute_query(const CountingQuery& query, const Table& table);

// Mean absolute difference of answer fractions across the workload.
double query_error(const Workload& workload, const Table& real, const Table& synthetic);

}  // namespace tabsyn
