#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabsyn/dataset.hpp"
#include "tabsyn/synth.hpp"
#include "tabsyn/transport.hpp"

namespace tabsyn {

// Everything that shapes an evaluation run. Echoed verbatim into the report.
struct RunConfig {
  std::string data_path;
  std::string schema_path;
  SynthesizerSpec synth;
  std::vector<std::string> metrics = {"fidelity", "mla", "query"};
  std::string fidelity_split = "test";  // reference split for fidelity: train|test
  std::size_t repeats = 20;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;  // 0 = all hardware threads
  std::string out_dir;
  std::size_t marginal_order = 2;
  std::size_t mds_m = 20;
  std::size_t mds_n = 100;
  std::size_t mds_record_cap = 0;  // 0 = score every record
  std::size_t workload_k = 3;
  std::size_t workload_count = 1000;
  double percentile = 5.0;  // DCR / NNDR
  bool baselines = false;
  // Pick evaluator hyperparameters on real data (train vs validation) first.
  bool tune_evaluators = false;
  FidelityConfig fidelity;
};

extern const std::vector<std::string> kKnownMetrics;

struct MetricFailure {
  std::size_t repeat = 0;
  std::string error;
};

struct MetricSummary {
  std::string name;
  std::vector<double> raw;  // successful repeats, in repeat order
  std::vector<MetricFailure> failures;
  double mean = 0.0;  // NaN when raw is empty
  double stddev = 0.0;
};

struct EvaluationReport {
  RunConfig config;
  std::string synthesizer;  // describe() of the evaluated synthesizer
  std::uint64_t data_fingerprint = 0;
  std::size_t rows_total = 0;
  std::size_t rows_train = 0;
  std::size_t rows_validation = 0;
  std::size_t rows_test = 0;
  std::vector<std::uint64_t> repeat_seeds;  // derived training seed per repeat
  std::vector<std::string> evaluator_suite; // one "kind(params)" per member
  std::vector<MetricSummary> metrics;       // selection order
  // baseline kind -> metric -> value, filled only when config.baselines is set
  std::map<std::string, std::map<std::string, double>> baseline_scores;
  std::vector<std::string> warnings;

  bool partial_failure() const;
};

// Runs the full evaluation pipeline: split, per-repeat train/sample, selected
// metrics, optional baseline bounds. Failures are recorded per metric per
// repeat; the run continues.
EvaluationReport evaluate(const Table& data, const RunConfig& config);

// Sample statistics over the successful repeats (stddev with ddof = 1,
// zero when fewer than two values).
double mean_of(const std::vector<double>& values);
double stddev_of(const std::vector<double>& values);

nlohmann::json report_to_json(const EvaluationReport& report,
                              const std::string& timestamp);
std::string raw_values_csv(const EvaluationReport& report);
std::string iso8601_utc_now();

// --- report merging ---------------------------------------------------------

// Fractional ranks, ascending (rank 1 = smallest); ties share the average of
// the ranks they span.
std::vector<double> fractional_ranks(const std::vector<double>& values);

struct ReportSummary {
  std::string label;
  std::string path;
  std::map<std::string, double> means;
};

// Pulls label + per-metric means out of a report JSON document.
ReportSummary summarize_report(const nlohmann::json& report, const std::string& path);

struct RankingEntry {
  std::string label;
  std::string path;
  std::map<std::string, double> means;
  std::map<std::string, double> ranks;
  double average_rank = 0.0;
};

struct RankingTable {
  std::vector<std::string> metrics;  // intersection across all reports
  std::vector<RankingEntry> entries; // sorted by average rank, then label
};

RankingTable rank_reports(const std::vector<ReportSummary>& reports);
nlohmann::json ranking_to_json(const RankingTable& table);

}  // namespace tabsyn
