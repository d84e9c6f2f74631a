#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

#include "evoscale/gateway/mock_generator.hpp"
#include "evoscale/sandbox/evaluator.hpp"
#include "evoscale/sandbox/failure_patterns.hpp"
#include "evoscale/sandbox/reflection.hpp"

using namespace evoscale;
using namespace evoscale::sandbox;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  fs::path dir;

  Fixture() {
    dir = fs::temp_directory_path() /
          ("evoscale-fixture-" + std::to_string(::getpid()) + "-" +
           std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(dir);
  }
  ~Fixture() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }

  std::string script(const std::string& name, const std::string& body) {
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << body;
    out.close();
    fs::permissions(path, fs::perms::owner_all, fs::perm_options::add);
    return path.string();
  }
};

EvaluatorSpec python_spec(const std::string& script_path, double timeout_s = 10.0,
                          long memory_mb = 1024) {
  EvaluatorSpec spec;
  spec.evaluator.command = "python3";
  spec.evaluator.args = {script_path, "{SOLUTION_PATH}"};
  spec.timeout_s = timeout_s;
  spec.memory_limit_mb = memory_mb;
  return spec;
}

// a killed-but-unreaped process is a zombie, not a survivor
bool pid_alive(pid_t pid) {
  std::ifstream stat("/proc/" + std::to_string(pid) + "/stat");
  if (!stat) return false;
  std::string content;
  std::getline(stat, content);
  const std::size_t paren = content.rfind(')');
  if (paren == std::string::npos || paren + 2 >= content.size()) return false;
  return content[paren + 2] != 'Z';
}

}  // namespace

TEST_CASE("score parsing from the final stdout line") {
  Fixture fx;
  SUBCASE("plain score") {
    SandboxEvaluator eval(python_spec(fx.script("ok.py", R"py(
import sys
print("some log line")
print("SCORE 0.5")
)py")));
    const EvalOutcome outcome = eval.evaluate("whatever");
    CHECK(outcome.error_class == ErrorClass::none);
    CHECK(outcome.reported_score == 0.5);
    CHECK(outcome.wall_time_s > 0.0);
  }
  SUBCASE("score derived from the solution file") {
    SandboxEvaluator eval(python_spec(fx.script("read.py", R"py(
import sys
x = float(open(sys.argv[1]).read().strip())
print("SCORE", -(x - 3.0) ** 2)
)py")));
    CHECK(eval.evaluate("3.0").reported_score == 0.0);
    CHECK(eval.evaluate("5.0").reported_score == -4.0);
  }
  SUBCASE("missing SCORE line classifies malformed_output") {
    SandboxEvaluator eval(python_spec(fx.script("noscore.py", "print('hello')\n")));
    CHECK(eval.evaluate("x").error_class == ErrorClass::malformed_output);
  }
  SUBCASE("trailing junk after the score is malformed") {
    SandboxEvaluator eval(
        python_spec(fx.script("junk.py", "print('SCORE 0.5 extra')\n")));
    CHECK(eval.evaluate("x").error_class == ErrorClass::malformed_output);
  }
  SUBCASE("non-finite score is an invalid solution") {
    SandboxEvaluator eval(python_spec(fx.script("nan.py", "print('SCORE nan')\n")));
    CHECK(eval.evaluate("x").error_class == ErrorClass::invalid_solution);
  }
}

TEST_CASE("timeout kills the whole process group including grandchildren") {
  Fixture fx;
  const std::string pid_file = (fx.dir / "grandchild.pid").string();
  SandboxEvaluator eval(python_spec(fx.script("sleeper.py", R"py(
import subprocess, sys, time
child = subprocess.Popen([sys.executable, "-c", "import time; time.sleep(60)"])
open()py" + ("\"" + pid_file + "\"") + R"py(, "w").write(str(child.pid))
time.sleep(60)
)py"),
                                    /*timeout_s=*/1.0));
  const EvalOutcome outcome = eval.evaluate("x");
  CHECK(outcome.error_class == ErrorClass::timeout);
  CHECK(outcome.wall_time_s >= 1.0);
  CHECK(outcome.wall_time_s < 10.0);

  REQUIRE(fs::exists(pid_file));
  const pid_t grandchild = std::stoi([&] {
    std::ifstream in(pid_file);
    std::string s;
    in >> s;
    return s;
  }());
  // the grandchild must not survive the process-group kill
  for (int i = 0; i < 100 && pid_alive(grandchild); ++i)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  CHECK(!pid_alive(grandchild));
}

TEST_CASE("memory limit classifies as crash with evidence") {
  Fixture fx;
  SandboxEvaluator eval(python_spec(fx.script("bomb.py", R"py(
data = bytearray(512 * 1024 * 1024)
print("SCORE 1.0")
)py"),
                                    10.0, /*memory_mb=*/128));
  const EvalOutcome outcome = eval.evaluate("x");
  CHECK(outcome.error_class == ErrorClass::crash);
  CHECK(outcome.stderr_excerpt.find("MemoryError") != std::string::npos);
}

TEST_CASE("missing interpreter or module classifies missing_dependency") {
  Fixture fx;
  SUBCASE("binary not found") {
    EvaluatorSpec spec;
    spec.evaluator.command = "/nonexistent/evaluator-binary";
    SandboxEvaluator eval(spec);
    CHECK(eval.evaluate("x").error_class == ErrorClass::missing_dependency);
  }
  SUBCASE("python import failure") {
    SandboxEvaluator eval(
        python_spec(fx.script("imp.py", "import definitely_not_a_module\n")));
    CHECK(eval.evaluate("x").error_class == ErrorClass::missing_dependency);
  }
}

TEST_CASE("environment scrubbed to the allowlist") {
  Fixture fx;
  ::setenv("EVOSCALE_SECRET_TEST_VAR", "leaky", 1);
  SandboxEvaluator eval(python_spec(fx.script("env.py", R"py(
import os
assert "EVOSCALE_SECRET_TEST_VAR" not in os.environ, "leaked"
print("SCORE 1.0")
)py")));
  const EvalOutcome outcome = eval.evaluate("x");
  CHECK(outcome.error_class == ErrorClass::none);
  ::unsetenv("EVOSCALE_SECRET_TEST_VAR");
}

TEST_CASE("filesystem hygiene: work directory is private and removed") {
  Fixture fx;
  const std::string marker = (fx.dir / "cwd.txt").string();
  SandboxEvaluator eval(python_spec(fx.script("files.py", R"py(
import os
open("scratch.txt", "w").write("data")
open()py" + ("\"" + marker + "\"") + R"py(, "w").write(os.getcwd())
print("SCORE 1.0")
)py")));
  CHECK(eval.evaluate("x").error_class == ErrorClass::none);
  REQUIRE(fs::exists(marker));
  std::ifstream in(marker);
  std::string cwd;
  std::getline(in, cwd);
  CHECK(cwd.find("evoscale-eval-") != std::string::npos);
  CHECK(!fs::exists(cwd));  // temp dir (and the scratch file) removed
}

TEST_CASE("independent score verification") {
  Fixture fx;
  const std::string honest = fx.script("honest.py", R"py(
import sys
print("SCORE 0.5")
)py");
  const std::string verifier = fx.script("verify.py", R"py(
import sys
print("SCORE 0.5")
)py");

  SUBCASE("matching recompute is accepted as canonical") {
    EvaluatorSpec spec = python_spec(honest);
    spec.verifier.command = "python3";
    spec.verifier.args = {verifier, "{SOLUTION_PATH}"};
    SandboxEvaluator eval(spec);
    const EvalOutcome outcome = eval.evaluate("x");
    CHECK(outcome.error_class == ErrorClass::none);
    CHECK(outcome.verifier_ran);
    CHECK(outcome.verified_score == 0.5);
    CHECK(outcome.canonical_score() == 0.5);
  }

  SUBCASE("inflated report is flagged as verification_mismatch") {
    const std::string liar = fx.script("liar.py", "print('SCORE 0.9')\n");
    EvaluatorSpec spec = python_spec(liar);
    spec.verifier.command = "python3";
    spec.verifier.args = {verifier, "{SOLUTION_PATH}"};
    SandboxEvaluator eval(spec);
    const EvalOutcome outcome = eval.evaluate("x");
    CHECK(outcome.error_class == ErrorClass::verification_mismatch);
    CHECK(outcome.failed());
    CHECK(outcome.canonical_score() == kSentinelWorstScore);
  }

  SUBCASE("verifier crash rejects the untrusted score") {
    const std::string broken = fx.script("broken.py", "raise SystemExit(3)\n");
    EvaluatorSpec spec = python_spec(honest);
    spec.verifier.command = "python3";
    spec.verifier.args = {broken, "{SOLUTION_PATH}"};
    SandboxEvaluator eval(spec);
    CHECK(eval.evaluate("x").error_class == ErrorClass::verification_mismatch);
  }

  SUBCASE("tolerances accept tiny drift") {
    const std::string close = fx.script("close.py", "print('SCORE 0.5000000001')\n");
    EvaluatorSpec spec = python_spec(close);
    spec.verifier.command = "python3";
    spec.verifier.args = {verifier, "{SOLUTION_PATH}"};
    spec.verify_abs_tol = 1e-9;
    spec.verify_rel_tol = 1e-6;
    SandboxEvaluator eval(spec);
    const EvalOutcome outcome = eval.evaluate("x");
    CHECK(outcome.error_class == ErrorClass::none);
    CHECK(outcome.canonical_score() == doctest::Approx(0.5));
  }

  SUBCASE("no verifier: reported stands, flagged unverified") {
    SandboxEvaluator eval(python_spec(honest));
    const EvalOutcome outcome = eval.evaluate("x");
    CHECK(!outcome.verifier_ran);
    CHECK(outcome.canonical_score() == 0.5);
  }
}

TEST_CASE("failure pattern accumulation") {
  SUBCASE("top-k by frequency") {
    FailureMemory memory;
    for (int i = 0; i < 10; ++i)
      memory.record(EvalOutcome::failure(ErrorClass::timeout, ""), i);
    for (int i = 0; i < 2; ++i)
      memory.record(EvalOutcome::failure(ErrorClass::crash, "boom"), 100 + i);
    const auto top1 = memory.top_patterns(1);
    REQUIRE(top1.size() == 1);
    CHECK(top1[0] == "10x timeout");
    const auto top3 = memory.top_patterns(3);
    CHECK(top3.size() == 2);
  }

  SUBCASE("temp paths normalize to one signature") {
    FailureMemory memory;
    memory.record(EvalOutcome::failure(
                      ErrorClass::crash,
                      "open failed: /tmp/evoscale-eval-abc123/solution.txt"),
                  1);
    memory.record(EvalOutcome::failure(
                      ErrorClass::crash,
                      "open failed: /tmp/evoscale-eval-zzz999/solution.txt"),
                  2);
    CHECK(memory.distinct() == 1);
  }

  SUBCASE("hex addresses normalize") {
    CHECK(normalize_stderr_line("fault at 0xDEADBEEF in frame 0x12") ==
          "fault at <addr> in frame <addr>");
  }

  SUBCASE("successes never enter the memory") {
    FailureMemory memory;
    memory.record(EvalOutcome::success(1.0), 1);
    CHECK(memory.empty());
  }

  SUBCASE("empty window leaves memory unchanged") {
    FailureMemory memory;
    memory.record_batch({}, 0);
    CHECK(memory.empty());
    CHECK(memory.top_patterns(3).empty());
  }
}

TEST_CASE("reflection") {
  SUBCASE("scripted summary is stored verbatim") {
    auto generator = std::make_shared<gateway::FunctionGenerator>(
        [](const gateway::GeneratorRequest&) {
          gateway::GenResult r;
          r.response.candidates = {"used coordinate descent"};
          return r;
        });
    gateway::Gateway gw(generator, gateway::TokenBudget{});
    const auto text = reflect_on_winner(gw, "instr", "solution", 0.7, 2048);
    REQUIRE(text.has_value());
    CHECK(*text == "used coordinate descent");
  }

  SUBCASE("long reflections truncate at the cap") {
    auto generator = std::make_shared<gateway::FunctionGenerator>(
        [](const gateway::GeneratorRequest&) {
          gateway::GenResult r;
          r.response.candidates = {std::string(5000, 'r')};
          return r;
        });
    gateway::Gateway gw(generator, gateway::TokenBudget{});
    const auto text = reflect_on_winner(gw, "instr", "solution", 0.7, 64);
    REQUIRE(text.has_value());
    CHECK(text->size() == 64);
  }

  SUBCASE("generator failure degrades silently") {
    auto generator = std::make_shared<gateway::FunctionGenerator>(
        [](const gateway::GeneratorRequest&) {
          return gateway::GenResult::failure(gateway::GenErrorKind::protocol, "bad");
        });
    gateway::RetryPolicy retry;
    retry.attempts = 1;
    gateway::Gateway gw(generator, gateway::TokenBudget{}, retry);
    CHECK(!reflect_on_winner(gw, "instr", "solution", 0.7, 2048).has_value());
  }
}
