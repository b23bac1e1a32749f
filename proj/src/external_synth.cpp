#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "tabsyn/errors.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/synth.hpp"

namespace tabsyn {

namespace fs = std::filesystem;

std::string scratch_root() {
  if (const char* env = std::getenv("TABSYN_ASSESS_TMP"); env && *env) {
    fs::create_directories(env);
    return env;
  }
  fs::path p = fs::temp_directory_path() / "tabsyn_assess";
  fs::create_directories(p);
  return p.string();
}

namespace {

std::vector<std::string> tokenize_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  if (tokens.empty()) throw ConfigError("external synthesizer command is empty");
  return tokens;
}

std::string tail(const std::string& s, std::size_t max_len = 4000) {
  if (s.size() <= max_len) return s;
  return "..." + s.substr(s.size() - max_len);
}

// Runs argv with stderr captured; throws ProtocolError on non-zero exit or
// when the deadline passes (the child is killed first).
void run_command(const std::vector<std::string>& argv, double timeout_seconds) {
  int err_pipe[2];
  if (pipe(err_pipe) != 0) throw Error("pipe() failed");

  pid_t pid = fork();
  if (pid < 0) throw Error("fork() failed");
  if (pid == 0) {
    dup2(err_pipe[1], STDERR_FILENO);
    close(err_pipe[0]);
    close(err_pipe[1]);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    perror("execvp");
    _exit(127);
  }

  close(err_pipe[1]);
  fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

  std::string captured;
  auto deadline = std::chrono::steady_clock::now() +
                  std::chrono::duration<double>(timeout_seconds);
  auto drain = [&] {
    char buf[4096];
    ssize_t got;
    while ((got = read(err_pipe[0], buf, sizeof(buf))) > 0) {
      captured.append(buf, static_cast<std::size_t>(got));
    }
  };

  int status = 0;
  bool exited = false;
  while (!exited) {
    drain();
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      exited = true;
      break;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      drain();
      close(err_pipe[0]);
      throw ProtocolError("external synthesizer timed out after " +
                          std::to_string(timeout_seconds) + "s; stderr: " +
                          tail(captured));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  drain();
  close(err_pipe[0]);

  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::string code = WIFEXITED(status)
                           ? "exit code " + std::to_string(WEXITSTATUS(status))
                           : "signal " + std::to_string(WTERMSIG(status));
    throw ProtocolError("external synthesizer failed (" + code + "); stderr: " +
                        tail(captured));
  }
}

class ExternalSynthesizer final : public Synthesizer {
 public:
  ExternalSynthesizer(const SynthesizerSpec& spec, const Table& train,
                      std::uint64_t seed)
      : spec_(spec), schema_(train.schema_ptr()), seed_(seed) {
    if (spec.command.empty()) throw ConfigError("external synthesizer needs --command");

    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(train.fingerprint() ^ seed));
    fs::path base = spec.workdir.empty()
                        ? fs::path(scratch_root()) /
                              ("ext_" + std::to_string(getpid()) + "_" + hex)
                        : fs::path(spec.workdir);
    fs::create_directories(base);
    workdir_ = base.string();
    model_dir_ = (base / "model").string();
    fs::create_directories(model_dir_);

    std::string train_csv = (base / "train.csv").string();
    std::string schema_json = (base / "schema.json").string();
    std::string hyper_json = (base / "hyperparams.json").string();
    save_table_csv(train, train_csv);
    save_schema(*schema_, schema_json);
    {
      std::ofstream out(hyper_json);
      out << (spec.hyperparams_json.empty() ? "{}" : spec.hyperparams_json) << '\n';
    }

    auto argv = tokenize_command(spec.command);
    argv.insert(argv.end(), {"--train", train_csv, "--schema", schema_json,
                             "--model-out", model_dir_, "--seed",
                             std::to_string(seed), "--hyperparams", hyper_json});
    run_command(argv, spec.timeout_seconds);
  }

  Table sample(std::size_t n, std::uint64_t seed) const override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string out_csv =
        (fs::path(workdir_) /
         ("sample_" + std::to_string(seed) + "_" + std::to_string(n) + ".csv"))
            .string();
    auto argv = tokenize_command(spec_.command);
    argv.insert(argv.end(), {"--model", model_dir_, "--n", std::to_string(n),
                             "--seed", std::to_string(seed), "--out", out_csv});
    run_command(argv, spec_.timeout_seconds);

    std::vector<std::string> violations;
    Table out = [&] {
      try {
        return load_table_lenient(out_csv, schema_, &violations);
      } catch (const Error& e) {
        throw ProtocolError(std::string("external synthesizer emitted malformed output: ") +
                            e.what());
      }
    }();
    if (out.rows() != n) {
      throw ProtocolError("external synthesizer returned " + std::to_string(out.rows()) +
                          " rows, requested " + std::to_string(n));
    }
    violations_.insert(violations_.end(), violations.begin(), violations.end());
    std::error_code ec;
    fs::remove(out_csv, ec);
    return out;
  }

  const SchemaPtr& schema() const override { return schema_; }

  std::string describe() const override {
    return "external(command=" + spec_.command + ", seed=" + std::to_string(seed_) + ")";
  }

  std::vector<std::string> violations() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return violations_;
  }

 private:
  SynthesizerSpec spec_;
  SchemaPtr schema_;
  std::uint64_t seed_;
  std::string workdir_;
  std::string model_dir_;
  mutable std::mutex mutex_;
  mutable std::vector<std::string> violations_;
};

}  // namespace

SynthesizerPtr external_synthesizer(const SynthesizerSpec& spec, const Table& train,
                                    std::uint64_t seed) {
  return std::make_unique<ExternalSynthesizer>(spec, train, seed);
}

}  // namespace tabsyn
