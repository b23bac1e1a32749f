#include "tabsyn/tuning.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tabsyn/errors.hpp"
#include "tabsyn/evaluators.hpp"
#include "tabsyn/marginals.hpp"
#include "tabsyn/queries.hpp"
#include "tabsyn/rng.hpp"

namespace tabsyn {

double tuning_objective(double fidelity, double learning_gap, double query_error,
                        const TuningConfig& config) {
  if (!std::isfinite(fidelity) || !std::isfinite(learning_gap) ||
      !std::isfinite(query_error)) {
    throw ConfigError("tuning objective requires finite metric values");
  }
  if (config.alpha1 < 0.0 || config.alpha2 < 0.0 || config.alpha3 < 0.0) {
    throw ConfigError("tuning weights must be non-negative");
  }
  if (config.alpha1 + config.alpha2 + config.alpha3 <= 0.0) {
    throw ConfigError("at least one tuning weight must be positive");
  }
  return config.alpha1 * fidelity + config.alpha2 * learning_gap +
         config.alpha3 * query_error;
}

std::size_t GridSpace::size() const {
  std::size_t n = 1;
  for (const auto& axis : axes) n *= axis.values.size();
  return n;
}

SynthesizerSpec apply_point(const SynthesizerSpec& spec_template, const GridPoint& point) {
  SynthesizerSpec spec = spec_template;
  for (const auto& [name, value] : point) {
    if (name == "bins") {
      auto bins = static_cast<long long>(std::llround(value));
      if (bins < 2) throw ConfigError("grid axis bins: value below 2");
      spec.bins = static_cast<std::size_t>(bins);
    } else if (name == "jitter_sigma") {
      if (value < 0.0) throw ConfigError("grid axis jitter_sigma: negative value");
      spec.jitter_sigma = value;
    } else if (name == "epsilon") {
      if (value <= 0.0) throw ConfigError("grid axis epsilon: value must be positive");
      spec.epsilon = value;
    } else {
      throw ConfigError("unknown grid axis '" + name + "'");
    }
  }
  return spec;
}

namespace {

std::vector<GridPoint> enumerate_grid(const GridSpace& grid) {
  for (const auto& axis : grid.axes) {
    if (axis.values.empty()) {
      throw ConfigError("grid axis '" + axis.name + "' has no values");
    }
  }
  std::vector<GridPoint> points;
  std::vector<std::size_t> cursor(grid.axes.size(), 0);
  while (true) {
    GridPoint point;
    for (std::size_t a = 0; a < grid.axes.size(); ++a) {
      point[grid.axes[a].name] = grid.axes[a].values[cursor[a]];
    }
    points.push_back(std::move(point));
    std::size_t a = grid.axes.size();
    while (a > 0) {
      --a;
      if (++cursor[a] < grid.axes[a].values.size()) break;
      cursor[a] = 0;
      if (a == 0) return points;
    }
    if (grid.axes.empty()) return points;
  }
}

}  // namespace

TuningResult grid_search(const SynthesizerSpec& spec_template, const GridSpace& grid,
                         const DataSplit& split, const TuningConfig& config) {
  if (grid.axes.empty()) throw ConfigError("grid search needs at least one axis");
  if (config.repeats == 0) throw ConfigError("tuning repeats must be positive");
  if (split.train.rows() == 0 || split.validation.rows() == 0) {
    throw ConfigError("grid search needs non-empty train and validation splits");
  }
  tuning_objective(0.0, 0.0, 0.0, config);  // validates the weights up front

  const Schema& schema = split.train.schema();
  auto marginal_set = enumerate_marginals(schema, config.marginal_order);
  auto workload = generate_workload(schema, config.workload_k, config.workload_count,
                                    derive_seed(config.seed, "tune_workload"));
  FidelityConfig fidelity_cfg = config.fidelity;

  auto points = enumerate_grid(grid);
  TuningResult result;
  result.candidates.resize(points.size());
  const std::size_t repeats = config.repeats;

  std::size_t jobs = config.jobs;
#ifdef _OPENMP
  if (jobs == 0) jobs = static_cast<std::size_t>(omp_get_max_threads());
#else
  if (jobs == 0) jobs = 1;
#endif
  auto eff = static_cast<int>(std::min(jobs, points.size()));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(eff) if (eff > 1)
#endif
  for (std::ptrdiff_t gii = 0; gii < static_cast<std::ptrdiff_t>(points.size());
       ++gii) {
    auto gi = static_cast<std::size_t>(gii);
    TunedCandidate& cand = result.candidates[gi];
    cand.point = points[gi];
    try {
      cand.spec = apply_point(spec_template, points[gi]);
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.failure = e.what();
      continue;
    }

    double sum_obj = 0.0, sum_fid = 0.0, sum_gap = 0.0, sum_qerr = 0.0;
    std::size_t ok = 0;
    std::string last_failure;
    for (std::size_t r = 0; r < repeats; ++r) {
      try {
        std::uint64_t train_seed = derive_seed(config.seed, "tune_train", gi * repeats + r);
        std::uint64_t sample_seed = derive_seed(config.seed, "tune_sample", gi * repeats + r);
        auto synthesizer = train_synthesizer(cand.spec, split.train, train_seed);
        Table synthetic = synthesizer->sample(split.train.rows(), sample_seed);

        FidelityConfig fc = fidelity_cfg;
        fc.seed = derive_seed(config.seed, "tune_fidelity", gi * repeats + r);
        double fid =
            fidelity(split.validation, synthetic, marginal_set, fc).overall;
        double gap =
            mla(split.train, synthetic, split.validation,
                derive_seed(config.seed, "tune_mla", gi * repeats + r))
                .mla;
        double qerr = query_error(workload, split.validation, synthetic);
        double obj = tuning_objective(fid, gap, qerr, config);
        sum_obj += obj;
        sum_fid += fid;
        sum_gap += gap;
        sum_qerr += qerr;
        cand.objective_per_repeat.push_back(obj);
        ++ok;
      } catch (const std::exception& e) {
        last_failure = e.what();
      }
    }
    if (ok == 0) {
      cand.failed = true;
      cand.failure = last_failure.empty() ? "all repeats failed" : last_failure;
    } else {
      auto dn = static_cast<double>(ok);
      cand.objective = sum_obj / dn;
      cand.fidelity = sum_fid / dn;
      cand.learning_gap = sum_gap / dn;
      cand.query_error = sum_qerr / dn;
    }
  }

  bool found = false;
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    const auto& cand = result.candidates[i];
    if (cand.failed) continue;
    if (!found || cand.objective < result.candidates[result.best_index].objective) {
      result.best_index = i;
      found = true;
    }
  }
  if (!found) throw Error("grid search: every candidate failed");
  result.best_spec = result.candidates[result.best_index].spec;
  return result;
}

}  // namespace tabsyn
