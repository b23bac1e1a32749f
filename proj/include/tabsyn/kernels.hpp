#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tabsyn/dataset.hpp"

namespace tabsyn {

// Mixed-attribute row distance: sum over attributes of |a-b| for numerical
// ones and 0/1 mismatch for categorical ones. All kernels assume numerical
// attributes are already min-max normalized so contributions are
// commensurate. Each output element is computed wholly by one thread, so
// results are bit-identical across thread counts and match the *_serial
// variants exactly.

// 0/1 mask per attribute, 1 = categorical.
std::vector<std::uint8_t> categorical_mask(const Schema& schema);

double row_distance(std::span<const double> a, std::span<const double> b,
                    std::span<const std::uint8_t> cat_mask);

// For every query row, the minimum row_distance to any corpus row.
void nearest_distances(const Table& queries, const Table& corpus,
                       std::span<const std::uint8_t> cat_mask,
                       std::span<double> out);
void nearest_distances_serial(const Table& queries, const Table& corpus,
                              std::span<const std::uint8_t> cat_mask,
                              std::span<double> out);

// Nearest and second-nearest distances per query row. Requires >= 2 corpus
// rows. Two corpus rows at equal distance fill both slots.
void two_nearest_distances(const Table& queries, const Table& corpus,
                           std::span<const std::uint8_t> cat_mask,
                           std::span<double> d1, std::span<double> d2);
void two_nearest_distances_serial(const Table& queries, const Table& corpus,
                                  std::span<const std::uint8_t> cat_mask,
                                  std::span<double> d1, std::span<double> d2);

// Dense pairwise matrix: out[i*cols + j] = row_distance(a_i, b_j). Supports
// are flattened tuples of width k (see marginals).
void fill_cost_matrix(std::span<const double> a_flat, std::size_t a_count,
                      std::span<const double> b_flat, std::size_t b_count,
                      std::span<const std::uint8_t> cat_mask,
                      std::span<double> out);
void fill_cost_matrix_serial(std::span<const double> a_flat, std::size_t a_count,
                             std::span<const double> b_flat, std::size_t b_count,
                             std::span<const std::uint8_t> cat_mask,
                             std::span<double> out);

}  // namespace tabsyn
