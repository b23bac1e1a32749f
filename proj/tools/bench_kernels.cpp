// Compares the parallel distance kernels against their serial reference
// implementations: wall time, speedup, and bit-identity of the outputs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tabsyn/dataset.hpp"
#include "tabsyn/kernels.hpp"
#include "tabsyn/rng.hpp"

namespace {

using namespace tabsyn;

SchemaPtr bench_schema(std::size_t numeric, std::size_t categorical) {
  Schema schema;
  for (std::size_t i = 0; i < numeric; ++i) {
    schema.attributes.push_back(
        {"num" + std::to_string(i), AttrKind::numerical, 0.0, 1.0, {}});
  }
  for (std::size_t i = 0; i < categorical; ++i) {
    schema.attributes.push_back({"cat" + std::to_string(i),
                                 AttrKind::categorical,
                                 0.0,
                                 0.0,
                                 {"a", "b", "c", "d"}});
  }
  schema.target = schema.attributes.front().name;
  schema.task = Task::regression;
  return std::make_shared<const Schema>(std::move(schema));
}

Table random_table(const SchemaPtr& schema, std::size_t rows, std::uint64_t seed) {
  Table t(schema);
  t.reserve(rows);
  Rng rng(seed);
  std::vector<double> row(schema->size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < schema->size(); ++c) {
      const auto& attr = schema->attribute(c);
      row[c] = attr.is_numerical()
                   ? rng.uniform()
                   : static_cast<double>(rng.below(attr.cardinality()));
    }
    t.append_row(row);
  }
  return t;
}

double seconds(std::chrono::steady_clock::time_point a,
               std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

bool identical(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t queries = 2000, corpus = 4000, reps = 3;
  for (int i = 1; i + 1 < argc; i += 2) {
    std::string flag = argv[i];
    auto value = static_cast<std::size_t>(std::stoull(argv[i + 1]));
    if (flag == "--queries") queries = value;
    else if (flag == "--corpus") corpus = value;
    else if (flag == "--reps") reps = value;
  }

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif
  std::printf("queries %zu, corpus %zu, %zu reps\n\n", queries, corpus, reps);

  auto schema = bench_schema(4, 2);
  Table q = random_table(schema, queries, 1);
  Table c = random_table(schema, corpus, 2);
  auto mask = categorical_mask(*schema);

  {
    std::vector<double> serial(queries), parallel(queries);
    double ts = 0.0, tp = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      auto a = std::chrono::steady_clock::now();
      nearest_distances_serial(q, c, mask, serial);
      auto b = std::chrono::steady_clock::now();
      nearest_distances(q, c, mask, parallel);
      auto e = std::chrono::steady_clock::now();
      ts += seconds(a, b);
      tp += seconds(b, e);
    }
    std::printf("nearest_distances      serial %8.3fs  parallel %8.3fs  x%.2f  %s\n",
                ts / static_cast<double>(reps), tp / static_cast<double>(reps),
                ts / tp, identical(serial, parallel) ? "bit-identical" : "MISMATCH");
  }

  {
    std::vector<double> s1(queries), s2(queries), p1(queries), p2(queries);
    double ts = 0.0, tp = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      auto a = std::chrono::steady_clock::now();
      two_nearest_distances_serial(q, c, mask, s1, s2);
      auto b = std::chrono::steady_clock::now();
      two_nearest_distances(q, c, mask, p1, p2);
      auto e = std::chrono::steady_clock::now();
      ts += seconds(a, b);
      tp += seconds(b, e);
    }
    std::printf("two_nearest_distances  serial %8.3fs  parallel %8.3fs  x%.2f  %s\n",
                ts / static_cast<double>(reps), tp / static_cast<double>(reps),
                ts / tp,
                identical(s1, p1) && identical(s2, p2) ? "bit-identical"
                                                       : "MISMATCH");
  }

  {
    std::size_t a_count = std::min<std::size_t>(queries, 1500);
    std::size_t b_count = std::min<std::size_t>(corpus, 1500);
    std::size_t width = schema->size();
    std::vector<double> a_flat(q.cells().begin(),
                               q.cells().begin() +
                                   static_cast<std::ptrdiff_t>(a_count * width));
    std::vector<double> b_flat(c.cells().begin(),
                               c.cells().begin() +
                                   static_cast<std::ptrdiff_t>(b_count * width));
    std::vector<double> serial(a_count * b_count), parallel(a_count * b_count);
    double ts = 0.0, tp = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      auto a = std::chrono::steady_clock::now();
      fill_cost_matrix_serial(a_flat, a_count, b_flat, b_count, mask, serial);
      auto b = std::chrono::steady_clock::now();
      fill_cost_matrix(a_flat, a_count, b_flat, b_count, mask, parallel);
      auto e = std::chrono::steady_clock::now();
      ts += seconds(a, b);
      tp += seconds(b, e);
    }
    std::printf("fill_cost_matrix       serial %8.3fs  parallel %8.3fs  x%.2f  %s\n",
                ts / static_cast<double>(reps), tp / static_cast<double>(reps),
                ts / tp, identical(serial, parallel) ? "bit-identical" : "MISMATCH");
  }

  return 0;
}
