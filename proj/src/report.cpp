#include "tabsyn/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <numeric>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tabsyn/errors.hpp"
#include "tabsyn/evaluators.hpp"
#include "tabsyn/marginals.hpp"
#include "tabsyn/privacy.hpp"
#include "tabsyn/queries.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/version.hpp"

namespace tabsyn {

const std::vector<std::string> kKnownMetrics = {"fidelity", "mds",  "dcr",
                                                "nndr",     "mla",  "query"};

bool EvaluationReport::partial_failure() const {
  for (const auto& metric : metrics) {
    if (!metric.failures.empty()) return true;
  }
  return false;
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sum = std::accumulate(values.begin(), values.end(), 0.0);
  return sum / static_cast<double>(values.size());
}

double stddev_of(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double m = mean_of(values);
  double sum2 = 0.0;
  for (double v : values) sum2 += (v - m) * (v - m);
  return std::sqrt(sum2 / static_cast<double>(values.size() - 1));
}

namespace {

void validate_config(const RunConfig& config) {
  if (config.repeats == 0) throw ConfigError("repeats must be at least 1");
  if (config.metrics.empty()) throw ConfigError("no metrics selected");
  for (const auto& m : config.metrics) {
    if (std::find(kKnownMetrics.begin(), kKnownMetrics.end(), m) ==
        kKnownMetrics.end()) {
      std::string allowed;
      for (const auto& k : kKnownMetrics) allowed += (allowed.empty() ? "" : ", ") + k;
      throw ConfigError("unknown metric '" + m + "' (known: " + allowed + ")");
    }
  }
  if (config.fidelity_split != "train" && config.fidelity_split != "test") {
    throw ConfigError("fidelity split must be 'train' or 'test', got '" +
                      config.fidelity_split + "'");
  }
  if (config.percentile < 0.0 || config.percentile > 100.0) {
    throw ConfigError("percentile must lie in [0, 100]");
  }
}

bool selected(const RunConfig& config, const std::string& name) {
  return std::find(config.metrics.begin(), config.metrics.end(), name) !=
         config.metrics.end();
}

struct RepeatContext {
  const RunConfig* config = nullptr;
  const DataSplit* split = nullptr;
  const Table* fidelity_ref = nullptr;
  const MarginalSet* marginal_set = nullptr;
  const Workload* workload = nullptr;
  const std::vector<EvaluatorSpec>* suite_spec = nullptr;
};

double run_metric(const std::string& name, const RepeatContext& ctx,
                  const Table& synthetic, std::size_t r) {
  const RunConfig& cfg = *ctx.config;
  if (name == "fidelity") {
    FidelityConfig fc = cfg.fidelity;
    fc.seed = derive_seed(cfg.seed, "fidelity", r);
    return fidelity(*ctx.fidelity_ref, synthetic, *ctx.marginal_set, fc).overall;
  }
  if (name == "mds") {
    MdsOptions opts;
    opts.m = cfg.mds_m;
    opts.n = cfg.mds_n;
    opts.seed = derive_seed(cfg.seed, "mds", r);
    opts.record_cap = cfg.mds_record_cap;
    if (!cfg.out_dir.empty()) {
      opts.run_dir = cfg.out_dir + "/mds/repeat_" + std::to_string(r);
    }
    return mds(cfg.synth, ctx.split->train, opts).mds;
  }
  if (name == "dcr") return dcr(ctx.split->train, synthetic, cfg.percentile);
  if (name == "nndr") return nndr(ctx.split->train, synthetic, cfg.percentile);
  if (name == "mla") {
    auto suite = build_suite(ctx.split->train.schema().task, *ctx.suite_spec);
    return mla(ctx.split->train, synthetic, ctx.split->test, suite,
               derive_seed(cfg.seed, "mla", r))
        .mla;
  }
  if (name == "query") {
    return query_error(*ctx.workload, ctx.split->test, synthetic);
  }
  throw ConfigError("unknown metric '" + name + "'");
}

}  // namespace

EvaluationReport evaluate(const Table& data, const RunConfig& config) {
  validate_config(config);

  EvaluationReport report;
  report.config = config;
  report.data_fingerprint = data.fingerprint();
  report.rows_total = data.rows();

  DataSplit sp = split(data, config.seed);
  report.rows_train = sp.train.rows();
  report.rows_validation = sp.validation.rows();
  report.rows_test = sp.test.rows();

  RepeatContext ctx;
  ctx.config = &config;
  ctx.split = &sp;
  const Table& fidelity_ref =
      config.fidelity_split == "train" ? sp.train : sp.test;
  ctx.fidelity_ref = &fidelity_ref;

  MarginalSet marginal_set;
  if (selected(config, "fidelity")) {
    marginal_set = enumerate_marginals(data.schema(), config.marginal_order);
  }
  ctx.marginal_set = &marginal_set;

  Workload workload;
  if (selected(config, "query")) {
    workload = generate_workload(data.schema(), config.workload_k,
                                 config.workload_count,
                                 derive_seed(config.seed, "workload"));
  }
  ctx.workload = &workload;

  std::vector<EvaluatorSpec> suite_spec = default_suite_spec();
  if (selected(config, "mla") && config.tune_evaluators) {
    suite_spec = tune_suite_spec(sp.train, sp.validation,
                                 derive_seed(config.seed, "evaluator_tune"));
  }
  ctx.suite_spec = &suite_spec;
  for (const auto& spec : suite_spec) {
    std::string desc = spec.kind;
    if (spec.kind == "decision_tree") {
      desc += "(max_depth=" + std::to_string(spec.max_depth) + ")";
    } else if (spec.kind == "random_forest") {
      desc += "(trees=" + std::to_string(spec.trees) +
              ",max_depth=" + std::to_string(spec.max_depth) + ")";
    } else if (spec.kind == "knn") {
      desc += "(k=" + std::to_string(spec.k) + ")";
    }
    report.evaluator_suite.push_back(std::move(desc));
  }

  const std::size_t repeats = config.repeats;
  const std::size_t n_metrics = config.metrics.size();
  report.repeat_seeds.resize(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    report.repeat_seeds[r] = derive_seed(config.seed, "train", r);
  }

  // values[m][r]: NaN marks a failure, message in errors[m][r].
  std::vector<std::vector<double>> values(
      n_metrics,
      std::vector<double>(repeats, std::numeric_limits<double>::quiet_NaN()));
  std::vector<std::vector<std::string>> errors(n_metrics,
                                               std::vector<std::string>(repeats));
  std::vector<std::string> describes(repeats);

  std::size_t jobs = config.jobs;
#ifdef _OPENMP
  if (jobs == 0) jobs = static_cast<std::size_t>(omp_get_max_threads());
#else
  if (jobs == 0) jobs = 1;
#endif
  auto eff = static_cast<int>(std::min(jobs, repeats));

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) num_threads(eff) if (eff > 1)
#endif
  for (std::ptrdiff_t ri = 0; ri < static_cast<std::ptrdiff_t>(repeats); ++ri) {
    auto r = static_cast<std::size_t>(ri);
    SynthesizerPtr synthesizer;
    Table synthetic;
    bool trained = false;
    std::string train_error;
    try {
      synthesizer = train_synthesizer(config.synth, sp.train, report.repeat_seeds[r]);
      synthetic = synthesizer->sample(sp.train.rows(),
                                      derive_seed(config.seed, "sample", r));
      describes[r] = synthesizer->describe();
      trained = true;
    } catch (const std::exception& e) {
      train_error = e.what();
    }
    for (std::size_t m = 0; m < n_metrics; ++m) {
      if (!trained) {
        errors[m][r] = "training/sampling failed: " + train_error;
        continue;
      }
      try {
        values[m][r] = run_metric(config.metrics[m], ctx, synthetic, r);
      } catch (const std::exception& e) {
        errors[m][r] = e.what();
      }
    }
  }

  for (const auto& d : describes) {
    if (!d.empty()) {
      report.synthesizer = d;
      break;
    }
  }

  for (std::size_t m = 0; m < n_metrics; ++m) {
    MetricSummary summary;
    summary.name = config.metrics[m];
    for (std::size_t r = 0; r < repeats; ++r) {
      if (errors[m][r].empty() && !std::isnan(values[m][r])) {
        summary.raw.push_back(values[m][r]);
      } else {
        summary.failures.push_back(
            {r, errors[m][r].empty() ? "metric returned NaN" : errors[m][r]});
      }
    }
    summary.mean = mean_of(summary.raw);
    summary.stddev = stddev_of(summary.raw);
    report.metrics.push_back(std::move(summary));
  }

  if (config.baselines) {
    const std::vector<SynthesizerKind> kinds = {
        SynthesizerKind::half, SynthesizerKind::histogram, SynthesizerKind::self_copy};
    for (std::size_t b = 0; b < kinds.size(); ++b) {
      SynthesizerSpec spec = config.synth;
      spec.kind = kinds[b];
      const std::string kind_name = to_string(kinds[b]);
      try {
        auto synthesizer = train_synthesizer(
            spec, sp.train, derive_seed(config.seed, "baseline_train", b));
        Table synthetic = synthesizer->sample(
            sp.train.rows(), derive_seed(config.seed, "baseline_sample", b));
        RepeatContext bctx = ctx;
        RunConfig bcfg = config;
        bcfg.synth = spec;
        bcfg.out_dir.clear();  // baseline MDS runs do not persist
        bctx.config = &bcfg;
        for (const auto& metric : config.metrics) {
          try {
            report.baseline_scores[kind_name][metric] =
                run_metric(metric, bctx, synthetic,
                           1000000 + b);  // seed lane away from the repeat range
          } catch (const std::exception& e) {
            report.warnings.push_back("baseline " + kind_name + " metric " + metric +
                                      " failed: " + e.what());
          }
        }
      } catch (const std::exception& e) {
        report.warnings.push_back("baseline " + kind_name + " failed: " + e.what());
      }
    }
  }

  return report;
}

namespace {

std::string solver_name(FidelitySolver solver) {
  switch (solver) {
    case FidelitySolver::auto_select: return "auto";
    case FidelitySolver::exact: return "exact";
    case FidelitySolver::sinkhorn: return "sinkhorn";
  }
  return "auto";
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json synth = {
      {"kind", to_string(c.synth.kind)},
      {"bins", c.synth.bins},
      {"jitter_sigma", c.synth.jitter_sigma},
      {"epsilon", c.synth.epsilon ? nlohmann::json(*c.synth.epsilon)
                                  : nlohmann::json(nullptr)},
      {"command", c.synth.command},
      {"hyperparams", c.synth.hyperparams_json},
      {"timeout_seconds", c.synth.timeout_seconds},
  };
  nlohmann::json fidelity = {
      {"solver", solver_name(c.fidelity.solver)},
      {"sinkhorn_reg_factor", c.fidelity.sinkhorn_reg_factor},
      {"sinkhorn_max_iters", c.fidelity.sinkhorn_max_iters},
      {"sinkhorn_tol", c.fidelity.sinkhorn_tol},
      {"max_exact_support", c.fidelity.max_exact_support},
      {"subsample_threshold", c.fidelity.subsample_threshold},
      {"max_support", c.fidelity.max_support},
  };
  return {
      {"data", c.data_path},
      {"schema", c.schema_path},
      {"synth", synth},
      {"metrics", c.metrics},
      {"split", c.fidelity_split},
      {"repeats", c.repeats},
      {"seed", c.seed},
      {"marginal_order", c.marginal_order},
      {"mds_m", c.mds_m},
      {"mds_n", c.mds_n},
      {"mds_record_cap", c.mds_record_cap},
      {"workload_k", c.workload_k},
      {"workload_count", c.workload_count},
      {"percentile", c.percentile},
      {"baselines", c.baselines},
      {"tune_evaluators", c.tune_evaluators},
      {"fidelity", fidelity},
  };
}

}  // namespace

nlohmann::json report_to_json(const EvaluationReport& report,
                              const std::string& timestamp) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& metric : report.metrics) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& f : metric.failures) {
      failures.push_back({{"repeat", f.repeat}, {"error", f.error}});
    }
    metrics[metric.name] = {
        {"mean", std::isnan(metric.mean) ? nlohmann::json(nullptr)
                                         : nlohmann::json(metric.mean)},
        {"std", metric.stddev},
        {"raw", metric.raw},
        {"failures", failures},
    };
  }
  nlohmann::json doc = {
      {"format_version", kFormatVersion},
      {"tool", "tabsyn-assess"},
      {"tool_version", kVersion},
      {"timestamp", timestamp},
      {"config", config_to_json(report.config)},
      {"synthesizer", report.synthesizer},
      {"metrics", metrics},
      {"provenance",
       {
           {"data_fingerprint", hex64(report.data_fingerprint)},
           {"rows_total", report.rows_total},
           {"split_sizes",
            {{"train", report.rows_train},
             {"validation", report.rows_validation},
             {"test", report.rows_test}}},
           {"repeat_seeds", report.repeat_seeds},
           {"evaluator_suite", report.evaluator_suite},
       }},
      {"warnings", report.warnings},
  };
  if (report.config.baselines) {
    nlohmann::json baselines = nlohmann::json::object();
    for (const auto& [kind, scores] : report.baseline_scores) {
      baselines[kind] = scores;
    }
    doc["baselines"] = baselines;
  }
  return doc;
}

std::string raw_values_csv(const EvaluationReport& report) {
  std::ostringstream out;
  out << "metric,repeat,value\n";
  const std::size_t repeats = report.config.repeats;
  for (const auto& metric : report.metrics) {
    std::size_t raw_pos = 0;
    std::size_t fail_pos = 0;
    for (std::size_t r = 0; r < repeats; ++r) {
      if (fail_pos < metric.failures.size() && metric.failures[fail_pos].repeat == r) {
        ++fail_pos;
        continue;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", metric.raw[raw_pos++]);
      out << metric.name << ',' << r << ',' << buf << '\n';
    }
  }
  return out.str();
}

std::string iso8601_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the average 1-based rank
    double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

ReportSummary summarize_report(const nlohmann::json& report, const std::string& path) {
  ReportSummary summary;
  summary.path = path;
  if (report.contains("synthesizer") && report["synthesizer"].is_string() &&
      !report["synthesizer"].get<std::string>().empty()) {
    summary.label = report["synthesizer"].get<std::string>();
  } else {
    summary.label = path;
  }
  if (!report.contains("metrics") || !report["metrics"].is_object()) {
    throw ParseError("report " + path + " has no metrics object");
  }
  for (const auto& [name, body] : report["metrics"].items()) {
    if (body.contains("mean") && body["mean"].is_number()) {
      summary.means[name] = body["mean"].get<double>();
    }
  }
  return summary;
}

RankingTable rank_reports(const std::vector<ReportSummary>& reports) {
  if (reports.size() < 2) throw ConfigError("ranking needs at least two reports");
  RankingTable table;
  for (const auto& [name, value] : reports.front().means) {
    bool everywhere = true;
    for (const auto& r : reports) {
      if (!r.means.count(name)) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) table.metrics.push_back(name);
  }
  if (table.metrics.empty()) {
    throw ConfigError("no metric is present in every report");
  }

  table.entries.resize(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    table.entries[i].label = reports[i].label;
    table.entries[i].path = reports[i].path;
  }
  for (const auto& metric : table.metrics) {
    std::vector<double> column(reports.size());
    for (std::size_t i = 0; i < reports.size(); ++i) {
      column[i] = reports[i].means.at(metric);
    }
    auto ranks = fractional_ranks(column);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      table.entries[i].means[metric] = column[i];
      table.entries[i].ranks[metric] = ranks[i];
    }
  }
  for (auto& entry : table.entries) {
    double sum = 0.0;
    for (const auto& [name, rank] : entry.ranks) sum += rank;
    entry.average_rank = sum / static_cast<double>(entry.ranks.size());
  }
  std::sort(table.entries.begin(), table.entries.end(),
            [](const RankingEntry& a, const RankingEntry& b) {
              if (a.average_rank != b.average_rank) {
                return a.average_rank < b.average_rank;
              }
              return a.label < b.label;
            });
  return table;
}

nlohmann::json ranking_to_json(const RankingTable& table) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& entry : table.entries) {
    entries.push_back({
        {"label", entry.label},
        {"path", entry.path},
        {"means", entry.means},
        {"ranks", entry.ranks},
        {"average_rank", entry.average_rank},
    });
  }
  return {
      {"format_version", kFormatVersion},
      {"metrics", table.metrics},
      {"entries", entries},
  };
}

}  // namespace tabsyn
