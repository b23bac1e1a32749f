#include "tabsyn/kernels.hpp"

#include <cmath>
#include <limits>

#include "tabsyn/errors.hpp"

namespace tabsyn {

std::vector<std::uint8_t> categorical_mask(const Schema& schema) {
  std::vector<std::uint8_t> mask(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    mask[i] = schema.attribute(i).is_numerical() ? 0 : 1;
  }
  return mask;
}

double row_distance(std::span<const double> a, std::span<const double> b,
                    std::span<const std::uint8_t> cat_mask) {
  double sum = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    double diff = a[c] - b[c];
    sum += cat_mask[c] ? (diff != 0.0 ? 1.0 : 0.0) : std::fabs(diff);
  }
  return sum;
}

namespace {

double min_distance_to(std::span<const double> q, const double* corpus,
                       std::size_t rows, std::size_t width,
                       const std::uint8_t* cat) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* y = corpus + r * width;
    double sum = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      double diff = q[c] - y[c];
      sum += cat[c] ? (diff != 0.0 ? 1.0 : 0.0) : std::fabs(diff);
    }
    best = sum < best ? sum : best;
  }
  return best;
}

void min2_distance_to(std::span<const double> q, const double* corpus,
                      std::size_t rows, std::size_t width,
                      const std::uint8_t* cat, double* d1, double* d2) {
  double b1 = std::numeric_limits<double>::infinity();
  double b2 = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* y = corpus + r * width;
    double sum = 0.0;
    for (std::size_t c = 0; c < width; ++c) {
      double diff = q[c] - y[c];
      sum += cat[c] ? (diff != 0.0 ? 1.0 : 0.0) : std::fabs(diff);
    }
    if (sum < b1) {
      b2 = b1;
      b1 = sum;
    } else if (sum < b2) {
      b2 = sum;
    }
  }
  *d1 = b1;
  *d2 = b2;
}

}  // namespace

void nearest_distances_serial(const Table& queries, const Table& corpus,
                              std::span<const std::uint8_t> cat_mask,
                              std::span<double> out) {
  if (corpus.rows() == 0) throw Error("nearest_distances: empty corpus");
  std::size_t width = queries.cols();
  const double* body = corpus.cells().data();
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    out[i] = min_distance_to(queries.row_span(i), body, corpus.rows(), width,
                             cat_mask.data());
  }
}

void nearest_distances(const Table& queries, const Table& corpus,
                       std::span<const std::uint8_t> cat_mask,
                       std::span<double> out) {
  if (corpus.rows() == 0) throw Error("nearest_distances: empty corpus");
  std::size_t width = queries.cols();
  const double* body = corpus.cells().data();
  auto n = static_cast<std::int64_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    out[i] = min_distance_to(queries.row_span(static_cast<std::size_t>(i)),
                             body, corpus.rows(), width, cat_mask.data());
  }
}

void two_nearest_distances_serial(const Table& queries, const Table& corpus,
                                  std::span<const std::uint8_t> cat_mask,
                                  std::span<double> d1, std::span<double> d2) {
  if (corpus.rows() < 2) throw Error("two_nearest_distances: need >= 2 corpus rows");
  std::size_t width = queries.cols();
  const double* body = corpus.cells().data();
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    min2_distance_to(queries.row_span(i), body, corpus.rows(), width,
                     cat_mask.data(), &d1[i], &d2[i]);
  }
}

void two_nearest_distances(const Table& queries, const Table& corpus,
                           std::span<const std::uint8_t> cat_mask,
                           std::span<double> d1, std::span<double> d2) {
  if (corpus.rows() < 2) throw Error("two_nearest_distances: need >= 2 corpus rows");
  std::size_t width = queries.cols();
  const double* body = corpus.cells().data();
  auto n = static_cast<std::int64_t>(queries.rows());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    min2_distance_to(queries.row_span(static_cast<std::size_t>(i)), body,
                     corpus.rows(), width, cat_mask.data(), &d1[i], &d2[i]);
  }
}

void fill_cost_matrix_serial(std::span<const double> a_flat, std::size_t a_count,
                             std::span<const double> b_flat, std::size_t b_count,
                             std::span<const std::uint8_t> cat_mask,
                             std::span<double> out) {
  std::size_t width = cat_mask.size();
  for (std::size_t i = 0; i < a_count; ++i) {
    const double* x = a_flat.data() + i * width;
    double* row = out.data() + i * b_count;
    for (std::size_t j = 0; j < b_count; ++j) {
      const double* y = b_flat.data() + j * width;
      double sum = 0.0;
      for (std::size_t c = 0; c < width; ++c) {
        double diff = x[c] - y[c];
        sum += cat_mask[c] ? (diff != 0.0 ? 1.0 : 0.0) : std::fabs(diff);
      }
      row[j] = sum;
    }
  }
}

void fill_cost_matrix(std::span<const double> a_flat, std::size_t a_count,
                      std::span<const double> b_flat, std::size_t b_count,
                      std::span<const std::uint8_t> cat_mask,
                      std::span<double> out) {
  std::size_t width = cat_mask.size();
  auto n = static_cast<std::int64_t>(a_count);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double* x = a_flat.data() + static_cast<std::size_t>(i) * width;
    double* row = out.data() + static_cast<std::size_t>(i) * b_count;
    for (std::size_t j = 0; j < b_count; ++j) {
      const double* y = b_flat.data() + j * width;
      double sum = 0.0;
      for (std::size_t c = 0; c < width; ++c) {
        double diff = x[c] - y[c];
        sum += cat_mask[c] ? (diff != 0.0 ? 1.0 : 0.0) : std::fabs(diff);
      }
      row[j] = sum;
    }
  }
}

}  // namespace tabsyn
