#include "tabsyn/queries.hpp"

#include <algorithm>
#include <cmath>

#include "tabsyn/errors.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

Workload generate_workload(const Schema& schema, std::size_t k, std::size_t count,
                           std::uint64_t seed) {
  if (schema.size() == 0) throw ConfigError("workload needs a non-empty schema");
  if (count == 0) throw ConfigError("workload count must be positive");
  if (k == 0) throw ConfigError("workload k must be at least 1");
  if (k > schema.size()) {
    throw ConfigError("workload k=" + std::to_string(k) + " exceeds the " +
                      std::to_string(schema.size()) + " attributes in the schema");
  }

  Workload workload;
  workload.k = k;
  workload.seed = seed;
  workload.queries.reserve(count);
  for (std::size_t q = 0; q < count; ++q) {
    Rng rng(derive_seed(seed, "query", q));
    auto attrs = rng.sample_without_replacement(schema.size(), k);
    std::sort(attrs.begin(), attrs.end());
    CountingQuery query;
    for (std::size_t a : attrs) {
      const auto& attr = schema.attribute(a);
      QueryCondition cond;
      cond.attr = a;
      if (attr.is_numerical()) {
        double x = rng.uniform(attr.lo, attr.hi);
        double y = rng.uniform(attr.lo, attr.hi);
        cond.lo = std::min(x, y);
        cond.hi = std::max(x, y);
      } else {
        cond.categorical = true;
        cond.value = static_cast<double>(rng.below(attr.cardinality()));
      }
      query.conditions.push_back(cond);
    }
    workload.queries.push_back(std::move(query));
  }
  return workload;
}

double execute_query(const CountingQuery& query, const Table& table) {
  if (table.rows() == 0) throw Error("execute_query: empty table");
  for (const auto& cond : query.conditions) {
    if (cond.attr >= table.cols()) {
      throw ConfigError("query condition references attribute " +
                        std::to_string(cond.attr) + " but table has " +
                        std::to_string(table.cols()) + " columns");
    }
  }
  std::size_t hits = 0;
  for (std::size_t r = 0; r < table.rows(); ++r) {
    bool match = true;
    for (const auto& cond : query.conditions) {
      double v = table.at(r, cond.attr);
      if (cond.categorical ? (v != cond.value) : (v < cond.lo || v > cond.hi)) {
        match = false;
        break;
      }
    }
    hits += match;
  }
  return static_cast<double>(hits) / static_cast<double>(table.rows());
}

double query_error(const Workload& workload, const Table& real, const Table& synthetic) {
  if (workload.queries.empty()) throw ConfigError("query_error: empty workload");
  double sum = 0.0;
  for (const auto& query : workload.queries) {
    sum += std::fabs(execute_query(query, real) - execute_query(query, synthetic));
  }
  return sum / static_cast<double>(workload.queries.size());
}

}  // namespace tabsyn
