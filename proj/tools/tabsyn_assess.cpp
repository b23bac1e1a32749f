#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tabsyn/dataset.hpp"
#include "tabsyn/errors.hpp"
#include "tabsyn/report.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/synth.hpp"
#include "tabsyn/tuning.hpp"
#include "tabsyn/version.hpp"

namespace {

using nlohmann::json;
using namespace tabsyn;

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("write to '" + path + "' failed");
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("invalid JSON in '" + path + "': " + e.what());
  }
}

// --hyperparams accepts inline JSON or a path to a JSON file.
std::string resolve_hyperparams(const std::string& value) {
  std::string text = value;
  if (std::filesystem::exists(value) && std::filesystem::is_regular_file(value)) {
    std::ifstream in(value, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  try {
    auto parsed = json::parse(text);
    (void)parsed;
  } catch (const json::exception& e) {
    throw ConfigError("hyperparams is neither valid JSON nor a JSON file: " +
                      std::string(e.what()));
  }
  return text;
}

// Loads the table described by (data, schema | target [+ task]). The schema
// sidecar wins when present; otherwise the schema is inferred from the data.
Table load_input(const std::string& data_path, const std::string& schema_path,
                 const std::string& target, const std::string& task_override) {
  if (data_path.empty()) throw ConfigError("--data is required");
  SchemaPtr schema;
  if (!schema_path.empty()) {
    if (!target.empty() || !task_override.empty()) {
      throw ConfigError("--schema conflicts with --target/--task");
    }
    schema = load_schema(schema_path);
  } else {
    if (target.empty()) throw ConfigError("provide --schema or --target");
    Schema inferred = infer_schema(data_path, target);
    if (!task_override.empty()) {
      inferred.task = task_from_string(task_override);
      inferred.validate();
    }
    schema = std::make_shared<const Schema>(std::move(inferred));
  }
  return load_table(data_path, schema);
}

// flags override file: a JSON config value applies only when the flag was
// not given on the command line.
template <typename T>
void config_fill(const json& cfg, const char* key, const CLI::Option* opt, T* out) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!cfg.contains(key) || cfg.at(key).is_null()) return;
  try {
    *out = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

struct SynthFlags {
  std::string kind = "histogram";
  std::size_t bins = 10;
  double jitter_sigma = 0.05;
  double epsilon = 0.0;  // 0 = unset
  std::string command;
  std::string hyperparams = "{}";
  double timeout_seconds = 3600.0;

  CLI::Option* kind_opt = nullptr;
  CLI::Option* bins_opt = nullptr;
  CLI::Option* jitter_opt = nullptr;
  CLI::Option* epsilon_opt = nullptr;
  CLI::Option* command_opt = nullptr;
  CLI::Option* hyper_opt = nullptr;
  CLI::Option* timeout_opt = nullptr;

  void attach(CLI::App* cmd) {
    kind_opt = cmd->add_option("--synth", kind,
                               "synthesizer: half|histogram|self|memorizing|external");
    bins_opt = cmd->add_option("--bins", bins, "histogram bin count");
    jitter_opt = cmd->add_option("--jitter-sigma", jitter_sigma,
                                 "memorizing jitter (normalized units)");
    epsilon_opt = cmd->add_option("--epsilon", epsilon,
                                  "differential privacy budget for histogram");
    command_opt = cmd->add_option("--command", command, "external synthesizer command");
    hyper_opt = cmd->add_option("--hyperparams", hyperparams,
                                "external hyperparams (inline JSON or file)");
    timeout_opt =
        cmd->add_option("--timeout", timeout_seconds, "external call timeout, seconds");
  }

  void fill_from(const json& cfg) {
    config_fill(cfg, "synth", kind_opt, &kind);
    config_fill(cfg, "bins", bins_opt, &bins);
    config_fill(cfg, "jitter_sigma", jitter_opt, &jitter_sigma);
    config_fill(cfg, "epsilon", epsilon_opt, &epsilon);
    config_fill(cfg, "command", command_opt, &command);
    config_fill(cfg, "hyperparams", hyper_opt, &hyperparams);
    config_fill(cfg, "timeout_seconds", timeout_opt, &timeout_seconds);
  }

  SynthesizerSpec to_spec() const {
    SynthesizerSpec spec;
    spec.kind = synthesizer_kind_from_string(kind);
    spec.bins = bins;
    spec.jitter_sigma = jitter_sigma;
    if (epsilon > 0.0) spec.epsilon = epsilon;
    spec.command = command;
    spec.hyperparams_json = resolve_hyperparams(hyperparams);
    spec.timeout_seconds = timeout_seconds;
    return spec;
  }
};

struct DataFlags {
  std::string data, schema, target, task;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "input CSV");
    cmd->add_option("--schema", schema, "schema JSON sidecar");
    cmd->add_option("--target", target, "target attribute (schema inference)");
    cmd->add_option("--task", task, "task override: binary|multiclass|regression");
  }

  Table load(const json& cfg) {
    if (data.empty() && cfg.contains("data")) data = cfg["data"].get<std::string>();
    if (schema.empty() && cfg.contains("schema")) {
      schema = cfg["schema"].get<std::string>();
    }
    if (target.empty() && cfg.contains("target")) {
      target = cfg["target"].get<std::string>();
    }
    if (task.empty() && cfg.contains("task")) task = cfg["task"].get<std::string>();
    return load_input(data, schema, target, task);
  }
};

std::string dump_json(const json& doc) { return doc.dump(2) + "\n"; }

void emit(const std::string& out_path, const json& doc) {
  if (out_path.empty()) {
    std::cout << dump_json(doc);
  } else {
    write_text_file(out_path, dump_json(doc));
  }
}

int cmd_schema(const std::string& data, const std::string& target,
               const std::string& task, std::size_t threshold,
               const std::string& out) {
  if (data.empty()) throw ConfigError("--data is required");
  if (target.empty()) throw ConfigError("--target is required");
  Schema schema = infer_schema(data, target, threshold);
  if (!task.empty()) {
    schema.task = task_from_string(task);
    schema.validate();
  }
  if (out.empty()) {
    std::cout << schema_to_json(schema) << "\n";
  } else {
    save_schema(schema, out);
    std::cout << "schema written to " << out << "\n";
  }
  return 0;
}

int cmd_split(DataFlags& dataf, std::uint64_t seed, const std::string& out_dir) {
  if (out_dir.empty()) throw ConfigError("--out directory is required");
  Table data = dataf.load(json::object());
  DataSplit sp = split(data, seed);
  std::filesystem::create_directories(out_dir);
  save_table_csv(sp.train, out_dir + "/train.csv");
  save_table_csv(sp.validation, out_dir + "/validation.csv");
  save_table_csv(sp.test, out_dir + "/test.csv");
  char fp[19];
  std::snprintf(fp, sizeof fp, "%016llx",
                static_cast<unsigned long long>(data.fingerprint()));
  json manifest = {
      {"format_version", kFormatVersion},
      {"seed", seed},
      {"rows", {{"train", sp.train.rows()},
                {"validation", sp.validation.rows()},
                {"test", sp.test.rows()}}},
      {"data_fingerprint", fp},
  };
  write_text_file(out_dir + "/split.json", dump_json(manifest));
  std::cout << "split written to " << out_dir << " (train " << sp.train.rows()
            << ", validation " << sp.validation.rows() << ", test "
            << sp.test.rows() << ")\n";
  return 0;
}

int cmd_synth(DataFlags& dataf, SynthFlags& synthf, std::size_t n,
              std::uint64_t seed, const std::string& out) {
  if (out.empty()) throw ConfigError("--out CSV path is required");
  Table data = dataf.load(json::object());
  SynthesizerSpec spec = synthf.to_spec();
  auto synthesizer = train_synthesizer(spec, data, derive_seed(seed, "train"));
  std::size_t count = n == 0 ? data.rows() : n;
  Table synthetic = synthesizer->sample(count, derive_seed(seed, "sample"));
  save_table_csv(synthetic, out);
  std::cout << synthesizer->describe() << "\n"
            << count << " rows written to " << out << "\n";
  return 0;
}

json tuning_result_json(const TuningResult& result, const GridSpace& grid,
                        const TuningConfig& config) {
  json axes = json::array();
  for (const auto& axis : grid.axes) {
    axes.push_back({{"name", axis.name}, {"values", axis.values}});
  }
  json candidates = json::array();
  for (const auto& cand : result.candidates) {
    json point = json::object();
    for (const auto& [name, value] : cand.point) point[name] = value;
    json entry = {
        {"point", point},
        {"failed", cand.failed},
    };
    if (cand.failed) {
      entry["failure"] = cand.failure;
    } else {
      entry["objective"] = cand.objective;
      entry["fidelity"] = cand.fidelity;
      entry["learning_gap"] = cand.learning_gap;
      entry["query_error"] = cand.query_error;
      entry["objective_per_repeat"] = cand.objective_per_repeat;
    }
    candidates.push_back(std::move(entry));
  }
  json best_point = json::object();
  for (const auto& [name, value] : result.candidates[result.best_index].point) {
    best_point[name] = value;
  }
  return {
      {"format_version", kFormatVersion},
      {"tool", "tabsyn-assess"},
      {"tool_version", kVersion},
      {"timestamp", iso8601_utc_now()},
      {"config",
       {{"alpha1", config.alpha1},
        {"alpha2", config.alpha2},
        {"alpha3", config.alpha3},
        {"marginal_order", config.marginal_order},
        {"workload_k", config.workload_k},
        {"workload_count", config.workload_count},
        {"repeats", config.repeats},
        {"seed", config.seed}}},
      {"grid", axes},
      {"candidates", candidates},
      {"best",
       {{"index", result.best_index},
        {"point", best_point},
        {"objective", result.candidates[result.best_index].objective}}},
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular data synthesizer assessment"};
  app.set_version_flag("--version", tabsyn::kVersion);
  app.require_subcommand(1);

  // schema
  auto* schema_cmd = app.add_subcommand("schema", "infer a schema sidecar from a CSV");
  std::string sc_data, sc_target, sc_task, sc_out;
  std::size_t sc_threshold = 20;
  schema_cmd->add_option("--data", sc_data, "input CSV")->required();
  schema_cmd->add_option("--target", sc_target, "target attribute")->required();
  schema_cmd->add_option("--task", sc_task, "task override");
  schema_cmd->add_option("--categorical-threshold", sc_threshold,
                         "max distinct numeric values treated as categorical");
  schema_cmd->add_option("--out", sc_out, "output schema JSON path");

  // split
  auto* split_cmd = app.add_subcommand("split", "write train/validation/test CSVs");
  DataFlags sp_data;
  sp_data.attach(split_cmd);
  std::uint64_t sp_seed = 0;
  std::string sp_out;
  split_cmd->add_option("--seed", sp_seed, "split seed");
  split_cmd->add_option("--out", sp_out, "output directory")->required();

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "train a synthesizer and sample");
  DataFlags sy_data;
  SynthFlags sy_synth;
  sy_data.attach(synth_cmd);
  sy_synth.attach(synth_cmd);
  std::size_t sy_n = 0;
  std::uint64_t sy_seed = 0;
  std::string sy_out;
  synth_cmd->add_option("--n", sy_n, "rows to sample (default: input size)");
  synth_cmd->add_option("--seed", sy_seed, "sampling seed");
  synth_cmd->add_option("--out", sy_out, "output CSV path")->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "run metrics over repeated seeds");
  DataFlags ev_data;
  SynthFlags ev_synth;
  ev_data.attach(eval_cmd);
  ev_synth.attach(eval_cmd);
  tabsyn::RunConfig run;
  std::string ev_config_path;
  auto* ev_metrics_opt =
      eval_cmd->add_option("--metrics", run.metrics,
                           "metrics: fidelity,mds,dcr,nndr,mla,query")
          ->delimiter(',');
  auto* ev_split_opt = eval_cmd->add_option(
      "--split", run.fidelity_split, "fidelity reference split: train|test");
  auto* ev_repeats_opt = eval_cmd->add_option("--repeats", run.repeats, "repeat count");
  auto* ev_seed_opt = eval_cmd->add_option("--seed", run.seed, "master seed");
  auto* ev_jobs_opt =
      eval_cmd->add_option("--jobs", run.jobs, "parallel repeats (0 = all cores)");
  auto* ev_out_opt = eval_cmd->add_option("--out", run.out_dir, "output directory");
  eval_cmd->add_option("--config", ev_config_path, "JSON config (flags override)");
  auto* ev_mdsm_opt = eval_cmd->add_option("--mds-m", run.mds_m, "shadow model count");
  auto* ev_mdsn_opt =
      eval_cmd->add_option("--mds-n", run.mds_n, "synthetic tables per shadow");
  auto* ev_cap_opt = eval_cmd->add_option("--mds-record-cap", run.mds_record_cap,
                                          "score only this many records (0 = all)");
  auto* ev_wk_opt =
      eval_cmd->add_option("--workload-k", run.workload_k, "query conjunct count");
  auto* ev_wc_opt =
      eval_cmd->add_option("--workload-count", run.workload_count, "query count");
  auto* ev_order_opt = eval_cmd->add_option("--marginal-order", run.marginal_order,
                                            "max marginal order for fidelity");
  auto* ev_pct_opt = eval_cmd->add_option("--percentile", run.percentile,
                                          "DCR/NNDR percentile");
  auto* ev_base_opt = eval_cmd->add_flag("--baselines", run.baselines,
                                         "also score half/histogram/self bounds");
  auto* ev_tuneev_opt =
      eval_cmd->add_flag("--tune-evaluators", run.tune_evaluators,
                         "pick evaluator hyperparameters on the validation split");

  // tune
  auto* tune_cmd = app.add_subcommand("tune", "grid-search hyperparameters");
  DataFlags tu_data;
  SynthFlags tu_synth;
  tu_data.attach(tune_cmd);
  tu_synth.attach(tune_cmd);
  tabsyn::TuningConfig tuning;
  tuning.repeats = 3;
  std::string tu_config_path, tu_out;
  std::vector<double> tu_grid_bins, tu_grid_eps, tu_grid_jitter;
  auto* tu_a1_opt = tune_cmd->add_option("--alpha1", tuning.alpha1, "fidelity weight");
  auto* tu_a2_opt =
      tune_cmd->add_option("--alpha2", tuning.alpha2, "learning-gap weight");
  auto* tu_a3_opt =
      tune_cmd->add_option("--alpha3", tuning.alpha3, "query-error weight");
  auto* tu_rep_opt =
      tune_cmd->add_option("--repeats", tuning.repeats, "repeats per grid point");
  auto* tu_seed_opt = tune_cmd->add_option("--seed", tuning.seed, "master seed");
  auto* tu_order_opt = tune_cmd->add_option("--marginal-order", tuning.marginal_order,
                                            "max marginal order for fidelity");
  auto* tu_wk_opt =
      tune_cmd->add_option("--workload-k", tuning.workload_k, "query conjunct count");
  auto* tu_wc_opt =
      tune_cmd->add_option("--workload-count", tuning.workload_count, "query count");
  auto* tu_jobs_opt = tune_cmd->add_option(
      "--jobs", tuning.jobs, "parallel grid points (0 = all cores)");
  tune_cmd->add_option("--grid-bins", tu_grid_bins, "bins axis values")
      ->delimiter(',');
  tune_cmd->add_option("--grid-epsilon", tu_grid_eps, "epsilon axis values")
      ->delimiter(',');
  tune_cmd->add_option("--grid-jitter-sigma", tu_grid_jitter,
                       "jitter_sigma axis values")
      ->delimiter(',');
  tune_cmd->add_option("--config", tu_config_path, "JSON config (flags override)");
  tune_cmd->add_option("--out", tu_out, "output JSON path");

  // report
  auto* report_cmd =
      app.add_subcommand("report", "merge eval reports into a ranking");
  std::vector<std::string> rp_inputs;
  std::string rp_out;
  report_cmd->add_option("inputs", rp_inputs, "report JSON files")
      ->required()
      ->expected(-2);
  report_cmd->add_option("--out", rp_out, "output JSON path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(schema_cmd)) {
      return cmd_schema(sc_data, sc_target, sc_task, sc_threshold, sc_out);
    }
    if (app.got_subcommand(split_cmd)) return cmd_split(sp_data, sp_seed, sp_out);
    if (app.got_subcommand(synth_cmd)) {
      return cmd_synth(sy_data, sy_synth, sy_n, sy_seed, sy_out);
    }

    if (app.got_subcommand(eval_cmd)) {
      json cfg = json::object();
      if (!ev_config_path.empty()) cfg = load_json_file(ev_config_path);
      ev_synth.fill_from(cfg);
      config_fill(cfg, "metrics", ev_metrics_opt, &run.metrics);
      config_fill(cfg, "split", ev_split_opt, &run.fidelity_split);
      config_fill(cfg, "repeats", ev_repeats_opt, &run.repeats);
      config_fill(cfg, "seed", ev_seed_opt, &run.seed);
      config_fill(cfg, "jobs", ev_jobs_opt, &run.jobs);
      config_fill(cfg, "out", ev_out_opt, &run.out_dir);
      config_fill(cfg, "mds_m", ev_mdsm_opt, &run.mds_m);
      config_fill(cfg, "mds_n", ev_mdsn_opt, &run.mds_n);
      config_fill(cfg, "mds_record_cap", ev_cap_opt, &run.mds_record_cap);
      config_fill(cfg, "workload_k", ev_wk_opt, &run.workload_k);
      config_fill(cfg, "workload_count", ev_wc_opt, &run.workload_count);
      config_fill(cfg, "marginal_order", ev_order_opt, &run.marginal_order);
      config_fill(cfg, "percentile", ev_pct_opt, &run.percentile);
      config_fill(cfg, "baselines", ev_base_opt, &run.baselines);
      config_fill(cfg, "tune_evaluators", ev_tuneev_opt, &run.tune_evaluators);

      Table data = ev_data.load(cfg);
      run.data_path = ev_data.data;
      run.schema_path = ev_data.schema;
      run.synth = ev_synth.to_spec();
      if (!run.out_dir.empty()) std::filesystem::create_directories(run.out_dir);

      tabsyn::EvaluationReport report = tabsyn::evaluate(data, run);
      json doc = tabsyn::report_to_json(report, tabsyn::iso8601_utc_now());
      if (run.out_dir.empty()) {
        std::cout << dump_json(doc);
      } else {
        write_text_file(run.out_dir + "/report.json", dump_json(doc));
        write_text_file(run.out_dir + "/raw_values.csv",
                        tabsyn::raw_values_csv(report));
        std::cout << "report written to " << run.out_dir << "/report.json\n";
      }
      for (const auto& metric : report.metrics) {
        std::printf("  %-8s mean %.6g  std %.6g  (%zu/%zu repeats)\n",
                    metric.name.c_str(), metric.mean, metric.stddev,
                    metric.raw.size(), report.config.repeats);
      }
      if (report.partial_failure()) {
        std::cerr << "warning: some repeats failed; see report\n";
        return 2;
      }
      return 0;
    }

    if (app.got_subcommand(tune_cmd)) {
      json cfg = json::object();
      if (!tu_config_path.empty()) cfg = load_json_file(tu_config_path);
      tu_synth.fill_from(cfg);
      config_fill(cfg, "alpha1", tu_a1_opt, &tuning.alpha1);
      config_fill(cfg, "alpha2", tu_a2_opt, &tuning.alpha2);
      config_fill(cfg, "alpha3", tu_a3_opt, &tuning.alpha3);
      config_fill(cfg, "repeats", tu_rep_opt, &tuning.repeats);
      config_fill(cfg, "seed", tu_seed_opt, &tuning.seed);
      config_fill(cfg, "marginal_order", tu_order_opt, &tuning.marginal_order);
      config_fill(cfg, "workload_k", tu_wk_opt, &tuning.workload_k);
      config_fill(cfg, "workload_count", tu_wc_opt, &tuning.workload_count);
      config_fill(cfg, "jobs", tu_jobs_opt, &tuning.jobs);

      tabsyn::GridSpace grid;
      if (cfg.contains("grid")) {
        for (const auto& [name, values] : cfg["grid"].items()) {
          grid.axes.push_back({name, values.get<std::vector<double>>()});
        }
      }
      auto add_axis = [&grid](const std::string& name, std::vector<double> values) {
        if (values.empty()) return;
        for (auto& axis : grid.axes) {
          if (axis.name == name) {  // flags override the config grid
            axis.values = std::move(values);
            return;
          }
        }
        grid.axes.push_back({name, std::move(values)});
      };
      add_axis("bins", tu_grid_bins);
      add_axis("epsilon", tu_grid_eps);
      add_axis("jitter_sigma", tu_grid_jitter);

      Table data = tu_data.load(cfg);
      tabsyn::SynthesizerSpec spec = tu_synth.to_spec();
      if (grid.axes.empty()) {
        switch (spec.kind) {
          case tabsyn::SynthesizerKind::histogram:
            grid.axes.push_back({"bins", {5, 10, 15, 20}});
            break;
          case tabsyn::SynthesizerKind::memorizing:
            grid.axes.push_back({"jitter_sigma", {0.01, 0.05, 0.1, 0.2}});
            break;
          default:
            throw tabsyn::ConfigError(
                "no grid axes given and synthesizer '" + tabsyn::to_string(spec.kind) +
                "' has no default grid");
        }
      }

      tabsyn::DataSplit sp = tabsyn::split(data, tuning.seed);
      tabsyn::TuningResult result = tabsyn::grid_search(spec, grid, sp, tuning);
      json doc = tuning_result_json(result, grid, tuning);
      emit(tu_out, doc);
      const auto& best = result.candidates[result.best_index];
      std::printf("best objective %.6g at grid point %zu\n", best.objective,
                  result.best_index);
      return 0;
    }

    if (app.got_subcommand(report_cmd)) {
      std::vector<tabsyn::ReportSummary> summaries;
      summaries.reserve(rp_inputs.size());
      for (const auto& path : rp_inputs) {
        summaries.push_back(tabsyn::summarize_report(load_json_file(path), path));
      }
      tabsyn::RankingTable table = tabsyn::rank_reports(summaries);
      emit(rp_out, tabsyn::ranking_to_json(table));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
