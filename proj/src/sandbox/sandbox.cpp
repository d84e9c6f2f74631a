#include "evoscale/sandbox/evaluator.hpp"

#include <fcntl.h>
#include <sched.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "evoscale/rng.hpp"

namespace evoscale::sandbox {

namespace fs = std::filesystem;

const char* error_class_name(ErrorClass ec) {
  switch (ec) {
    case ErrorClass::none: return "none";
    case ErrorClass::timeout: return "timeout";
    case ErrorClass::crash: return "crash";
    case ErrorClass::malformed_output: return "malformed_output";
    case ErrorClass::missing_dependency: return "missing_dependency";
    case ErrorClass::invalid_solution: return "invalid_solution";
    case ErrorClass::verification_mismatch: return "verification_mismatch";
  }
  return "unknown";
}

ErrorClass error_class_from_name(const std::string& name) {
  if (name == "none") return ErrorClass::none;
  if (name == "timeout") return ErrorClass::timeout;
  if (name == "crash") return ErrorClass::crash;
  if (name == "malformed_output") return ErrorClass::malformed_output;
  if (name == "missing_dependency") return ErrorClass::missing_dependency;
  if (name == "invalid_solution") return ErrorClass::invalid_solution;
  if (name == "verification_mismatch") return ErrorClass::verification_mismatch;
  throw std::invalid_argument("unknown error class: " + name);
}

std::vector<std::string> CommandSpec::argv(const std::string& solution_path) const {
  std::vector<std::string> out;
  out.push_back(command);
  for (std::string arg : args) {
    std::size_t pos;
    while ((pos = arg.find("{SOLUTION_PATH}")) != std::string::npos)
      arg.replace(pos, std::strlen("{SOLUTION_PATH}"), solution_path);
    out.push_back(std::move(arg));
  }
  return out;
}

void EvaluatorSpec::validate() const {
  if (evaluator.empty()) throw std::invalid_argument("evaluator.command: must be set");
  if (!(timeout_s > 0)) throw std::invalid_argument("evaluator.timeout_s: must be > 0");
  if (memory_limit_mb < 1)
    throw std::invalid_argument("evaluator.memory_limit_mb: must be >= 1");
  if (isolation == Isolation::container && container_image.empty())
    throw std::invalid_argument(
        "evaluator.container_image: required for container isolation");
}

namespace {

// Live evaluation process groups; serialized so an interrupt handler can
// reap everything that is still running.
class ReaperRegistry {
 public:
  static ReaperRegistry& instance() {
    static ReaperRegistry reg;
    return reg;
  }
  void add(pid_t pgid) {
    std::lock_guard<std::mutex> lock(mu_);
    live_.insert(pgid);
  }
  void remove(pid_t pgid) {
    std::lock_guard<std::mutex> lock(mu_);
    live_.erase(pgid);
  }
  void kill_all() {
    std::lock_guard<std::mutex> lock(mu_);
    for (pid_t pgid : live_) ::kill(-pgid, SIGKILL);
  }

 private:
  std::mutex mu_;
  std::set<pid_t> live_;
};

struct RunResult {
  bool timed_out = false;
  bool exec_failed = false;
  int exit_code = 0;
  int term_signal = 0;
  std::string stdout_text;
  std::string stderr_text;
  double wall_time_s = 0.0;
};

std::string read_file_limited(const fs::path& p, std::size_t limit) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() > limit) data.resize(limit);
  return data;
}

constexpr int kExecFailExitCode = 97;

// Environment allowlist; evaluators see nothing else from the host.
const char* kEnvAllowlist[] = {"PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH", "TZ"};

RunResult run_limited(const std::vector<std::string>& argv, const fs::path& workdir,
                      double timeout_s, long memory_limit_mb, bool disable_network) {
  RunResult result;
  const fs::path stdout_path = workdir / ".eval_stdout";
  const fs::path stderr_path = workdir / ".eval_stderr";

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  std::vector<std::string> env_storage;
  for (const char* key : kEnvAllowlist) {
    if (const char* val = ::getenv(key))
      env_storage.push_back(std::string(key) + "=" + val);
  }
  env_storage.push_back("TMPDIR=" + workdir.string());
  std::vector<char*> cenv;
  for (auto& e : env_storage) cenv.push_back(e.data());
  cenv.push_back(nullptr);

  const auto start = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    result.exec_failed = true;
    result.stderr_text = "fork failed";
    return result;
  }
  if (pid == 0) {
    // child: own session => pid is the process-group id the parent can kill
    ::setsid();
    if (disable_network) {
      // best effort outside containers; requires privileges
      ::unshare(CLONE_NEWNET);
    }
    rlimit mem{};
    mem.rlim_cur = mem.rlim_max =
        static_cast<rlim_t>(memory_limit_mb) * 1024ull * 1024ull;
    ::setrlimit(RLIMIT_AS, &mem);
    rlimit core{0, 0};
    ::setrlimit(RLIMIT_CORE, &core);

    const int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    const int out =
        ::open(stdout_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int err =
        ::open(stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    if (out >= 0) ::dup2(out, STDOUT_FILENO);
    if (err >= 0) ::dup2(err, STDERR_FILENO);
    if (::chdir(workdir.c_str()) != 0) ::_exit(kExecFailExitCode);

    ::execvpe(cargv[0], cargv.data(), cenv.data());
    const char* msg = "evoscale: exec failed: ";
    (void)!::write(STDERR_FILENO, msg, std::strlen(msg));
    const char* errname = std::strerror(errno);
    (void)!::write(STDERR_FILENO, errname, std::strlen(errname));
    (void)!::write(STDERR_FILENO, "\n", 1);
    ::_exit(kExecFailExitCode);
  }

  ReaperRegistry::instance().add(pid);
  const auto deadline =
      start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::duration<double>(timeout_s));
  int status = 0;
  bool reaped = false;
  while (true) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      reaped = true;
      break;
    }
    if (r < 0 && errno != EINTR) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      result.timed_out = true;
      ::kill(-pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      reaped = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  // sweep stragglers in the group regardless of how the leader exited
  ::kill(-pid, SIGKILL);
  ReaperRegistry::instance().remove(pid);
  if (reaped) {
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    if (WIFSIGNALED(status)) {
      result.term_signal = WTERMSIG(status);
      result.exit_code = 128 + result.term_signal;
    }
  }
  result.exec_failed = (result.exit_code == kExecFailExitCode);
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.stdout_text = read_file_limited(stdout_path, 1 << 20);
  result.stderr_text = read_file_limited(stderr_path, 1 << 20);
  return result;
}

std::optional<double> parse_score_line(const std::string& stdout_text) {
  // last non-empty line must be "SCORE <real>" (strtod grammar, so nan/inf
  // parse and classify as invalid rather than malformed)
  std::string_view text(stdout_text);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.remove_suffix(1);
  const std::size_t nl = text.find_last_of('\n');
  std::string line(nl == std::string_view::npos ? text : text.substr(nl + 1));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::istringstream in(line);
  std::string tag, number;
  if (!(in >> tag >> number) || tag != "SCORE") return std::nullopt;
  std::string rest;
  if (in >> rest) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(number.c_str(), &end);
  if (end == number.c_str() || *end != '\0') return std::nullopt;
  return value;
}

bool stderr_suggests_missing_dependency(const std::string& err) {
  static const std::regex pattern(
      "ModuleNotFoundError|ImportError|No module named|command not found|"
      "No such file or directory|error while loading shared libraries|"
      "cannot open shared object",
      std::regex::icase);
  return std::regex_search(err, pattern);
}

class TempDir {
 public:
  explicit TempDir(const std::string& base) {
    fs::path root = base.empty() ? fs::temp_directory_path() : fs::path(base);
    fs::create_directories(root);
    std::string tmpl = (root / "evoscale-eval-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (::mkdtemp(buf.data()) == nullptr)
      throw std::runtime_error("mkdtemp failed in " + root.string());
    path_ = buf.data();
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::vector<std::string> wrap_for_container(const EvaluatorSpec& spec,
                                            const std::vector<std::string>& argv,
                                            const fs::path& workdir) {
  std::vector<std::string> wrapped = {
      "docker", "run", "--rm",
      "--network", spec.network == NetworkPolicy::disabled ? "none" : "bridge",
      "--memory", std::to_string(spec.memory_limit_mb) + "m",
      "-v", workdir.string() + ":" + workdir.string(),
      "-w", workdir.string(),
      spec.container_image};
  wrapped.insert(wrapped.end(), argv.begin(), argv.end());
  return wrapped;
}

EvalOutcome run_command(const EvaluatorSpec& spec, const CommandSpec& cmd,
                        const std::string& solution) {
  EvalOutcome outcome;
  TempDir tmp(spec.workdir);
  const fs::path solution_path = tmp.path() / "solution.txt";
  {
    std::ofstream out(solution_path, std::ios::binary);
    out << solution;
  }
  std::vector<std::string> argv = cmd.argv(solution_path.string());
  if (spec.isolation == Isolation::container)
    argv = wrap_for_container(spec, argv, tmp.path());

  const bool disable_net = spec.isolation == Isolation::process &&
                           spec.network == NetworkPolicy::disabled;
  const RunResult run =
      run_limited(argv, tmp.path(), spec.timeout_s, spec.memory_limit_mb, disable_net);

  outcome.wall_time_s = run.wall_time_s;
  outcome.stderr_excerpt = run.stderr_text.substr(
      0, static_cast<std::size_t>(spec.stderr_excerpt_limit));
  if (run.timed_out) {
    outcome.error_class = ErrorClass::timeout;
    return outcome;
  }
  if (run.exec_failed) {
    outcome.error_class = ErrorClass::missing_dependency;
    return outcome;
  }
  if (run.exit_code != 0) {
    outcome.error_class = stderr_suggests_missing_dependency(run.stderr_text)
                              ? ErrorClass::missing_dependency
                              : ErrorClass::crash;
    return outcome;
  }
  const std::optional<double> score = parse_score_line(run.stdout_text);
  if (!score) {
    outcome.error_class = ErrorClass::malformed_output;
    return outcome;
  }
  if (!std::isfinite(*score)) {
    outcome.error_class = ErrorClass::invalid_solution;
    return outcome;
  }
  outcome.reported_score = *score;
  return outcome;
}

}  // namespace

SandboxEvaluator::SandboxEvaluator(EvaluatorSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

EvalOutcome SandboxEvaluator::evaluate(const std::string& solution) {
  EvalOutcome outcome = run_command(spec_, spec_.evaluator, solution);
  if (!outcome.failed() && spec_.has_verifier())
    outcome = verify(std::move(outcome), solution);
  return outcome;
}

EvalOutcome SandboxEvaluator::verify(EvalOutcome outcome, const std::string& solution) const {
  if (outcome.failed() || !spec_.has_verifier()) return outcome;
  const EvalOutcome recomputed = run_command(spec_, spec_.verifier, solution);
  outcome.verifier_ran = true;
  if (recomputed.failed() || !recomputed.reported_score) {
    // an untrusted score is never accepted on verifier failure
    outcome.error_class = ErrorClass::verification_mismatch;
    outcome.stderr_excerpt = recomputed.stderr_excerpt.empty()
                                 ? "verifier failed: " +
                                       std::string(error_class_name(recomputed.error_class))
                                 : recomputed.stderr_excerpt;
    return outcome;
  }
  const double reported = outcome.reported_score.value_or(0.0);
  const double verified = *recomputed.reported_score;
  const double diff = std::fabs(verified - reported);
  const double tol = std::max(spec_.verify_abs_tol,
                              spec_.verify_rel_tol *
                                  std::max(std::fabs(verified), std::fabs(reported)));
  if (diff <= tol) {
    outcome.verified_score = verified;
  } else {
    outcome.verified_score = verified;
    outcome.error_class = ErrorClass::verification_mismatch;
    std::ostringstream msg;
    msg << "score mismatch: reported " << reported << " vs verified " << verified;
    outcome.stderr_excerpt = msg.str();
  }
  return outcome;
}

void MockEvaluator::set_table_entry(const std::string& solution, EvalOutcome outcome) {
  table_[solution] = std::move(outcome);
}

void MockEvaluator::set_default_constant(double score) {
  hash_default_ = false;
  default_score_ = score;
}

void MockEvaluator::set_default_hash() { hash_default_ = true; }

EvalOutcome MockEvaluator::evaluate(const std::string& solution) {
  ++calls_;
  if (auto it = table_.find(solution); it != table_.end()) return it->second;
  if (fn_) return fn_(solution);
  if (hash_default_) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : solution) h = (h ^ c) * 0x100000001b3ull;
    return EvalOutcome::success(static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53);
  }
  return EvalOutcome::success(default_score_);
}

void kill_all_live_evaluations() { ReaperRegistry::instance().kill_all(); }

}  // namespace evoscale::sandbox
