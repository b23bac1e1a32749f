#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabsyn/dataset.hpp"
#include "tabsyn/synth.hpp"
#include "tabsyn/transport.hpp"

namespace tabsyn {

struct TuningConfig {
  double alpha1 = 1.0 / 3.0;  // fidelity weight
  double alpha2 = 1.0 / 3.0;  // learning-gap weight
  double alpha3 = 1.0 / 3.0;  // query-error weight
  std::size_t marginal_order = 2;
  std::size_t workload_k = 3;
  std::size_t workload_count = 1000;
  std::size_t repeats = 3;
  std::size_t jobs = 1;  // parallel grid points; 0 = all hardware threads
  FidelityConfig fidelity;
  std::uint64_t seed = 0;
};

// L = alpha1 * fidelity + alpha2 * learning_gap + alpha3 * query_error.
// All three components must be finite and at least one weight positive.
double tuning_objective(double fidelity, double learning_gap, double query_error,
                        const TuningConfig& config);

struct GridAxis {
  std::string name;  // "bins", "jitter_sigma", or "epsilon"
  std::vector<double> values;
};

struct GridSpace {
  std::vector<GridAxis> axes;
  std::size_t size() const;
};

// Hyperparameter assignment for one grid point, keyed by axis name.
using GridPoint = std::map<std::string, double>;

struct TunedCandidate {
  GridPoint point;
  SynthesizerSpec spec;
  double objective = 0.0;
  double fidelity = 0.0;
  double learning_gap = 0.0;
  double query_error = 0.0;
  std::vector<double> objective_per_repeat;
  bool failed = false;
  std::string failure;
};

struct TuningResult {
  std::vector<TunedCandidate> candidates;  // grid order
  std::size_t best_index = 0;              // first strict minimizer
  SynthesizerSpec best_spec;
};

// Enumerates the Cartesian grid (last axis fastest), applies each point to the
// spec template, and scores each candidate by the mean objective over
// `repeats` train/sample/evaluate rounds against the validation split.
// Candidates whose every repeat fails are recorded as failed; if all
// candidates fail the search throws.
TuningResult grid_search(const SynthesizerSpec& spec_template, const GridSpace& grid,
                         const DataSplit& split, const TuningConfig& config);

// Applies one grid point to a spec template ("bins", "jitter_sigma", "epsilon").
SynthesizerSpec apply_point(const SynthesizerSpec& spec_template, const GridPoint& point);

}  // namespace tabsyn
