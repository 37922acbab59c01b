#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "meshshift/cli/commands.hpp"
#include "meshshift/common/binary_io.hpp"
#include "test_support.hpp"

using namespace meshshift;
using namespace meshshift::cli;

namespace {

std::string tiny_config(const std::filesystem::path& root) {
  return R"({
  "format_version": 1, "name": "tiny", "profile": "desk",
  "task": {"name": "plate-heat", "resolution": 8, "samples": 48, "seed": 1},
  "model": {"width": 8, "layers": 2, "encoding": {"frequencies": 4, "base": 10}},
  "train": {"max_epochs": 10, "eval_every": 5, "patience": 10},
  "uda": {"kinds": ["coral"], "lambdas": [0.1, 0]},
  "seeds": [0, 1],
  "output_root": ")" + root.string() + R"("
})";
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config defaults validate and round-trip through JSON") {
  const auto lc = load_config(std::nullopt);
  CHECK(lc.config.profile == harness::Profile::desk);
  CHECK(lc.config.train.max_epochs <= 300);
  const auto again = parse_config(lc.echo, "echo");
  CHECK(to_json(again) == to_json(lc.config));
}

TEST_CASE("config errors name the offending field") {
  CHECK(error_of(R"({"tsk": {}})").find("tsk: unknown field") != std::string::npos);
  CHECK(error_of(R"({"train": {"learning_rat": 1}})").find("train.learning_rat") != std::string::npos);
  CHECK(error_of(R"({"train": {"batch_size": "big"}})").find("train.batch_size") != std::string::npos);
  CHECK(error_of(R"({"uda": {"kinds": ["mmd"]}})").find("uda.kinds") != std::string::npos);
  CHECK(error_of(R"({"strategies": []})").find("strategies") != std::string::npos);
  CHECK(error_of(R"({"format_version": 2})").find("format_version") != std::string::npos);
  const auto syntax = error_of("{\n  \"name\": \"x\",\n  oops\n}");
  CHECK(syntax.find("line 3") != std::string::npos);
}

TEST_CASE("desk profile rejects budgets above its caps") {
  CHECK(error_of(R"({"profile": "desk", "train": {"max_epochs": 301}})").find("max_epochs") != std::string::npos);
  const auto paper = parse_config(R"({"profile": "paper"})", "p");
  CHECK(paper.train.max_epochs == 3000);
  CHECK(paper.train.patience == 500);
  CHECK(paper.effective_lambdas().size() == 9);
}

TEST_CASE("seed and difficulty lists") {
  CHECK(parse_seeds("3") == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(parse_seeds("4,9") == std::vector<std::uint64_t>{4, 9});
  CHECK_THROWS_AS(parse_seeds("a"), ConfigError);
  CHECK_THROWS_AS(parse_seeds("0"), ConfigError);
  CHECK(parse_difficulties("easy,hard").size() == 2);
  CHECK_THROWS_AS(parse_difficulties("extreme"), ConfigError);
}

TEST_CASE("flags override the environment") {
  ::setenv("MESHSHIFT_WORKERS", "3", 1);
  auto c = load_config(std::nullopt).config;
  RunFlags f;
  apply_overrides(c, f);
  CHECK(c.workers == 3);
  f.workers = 1;
  f.seeds = "2";
  apply_overrides(c, f);
  CHECK(c.workers == 1);
  CHECK(c.seeds.size() == 2);
  ::unsetenv("MESHSHIFT_WORKERS");
}

TEST_CASE("generate, bench, verify and report on a tiny corpus") {
  test_support::TempDir tmp;
  const auto cfg_path = tmp.path / "tiny.json";
  io::write_text_atomic(cfg_path, tiny_config(tmp.path / "out"));
  std::ostringstream log;
  RunFlags flags;
  GenerateFlags g;

  REQUIRE(cmd_generate(load_config(cfg_path), g, flags, log) == kOk);
  const auto lc = load_config(cfg_path);
  auto c = lc.config;
  c.finalize();
  CHECK(io::read_text(c.dataset_dir() / "pipeline_config.json") == io::read_text(cfg_path));
  CHECK(cmd_generate(load_config(cfg_path), g, flags, log) == kExistingOutput);

  REQUIRE(cmd_bench(load_config(cfg_path), flags, log) == kOk);
  CHECK(cmd_bench(load_config(cfg_path), flags, log) == kExistingOutput);
  for (const char* f : {"summary.csv", "scaling.csv", "per_sample_errors.csv", "selection.json", "oracle_audit.json",
                        "determinism.json", "pipeline_config.json"}) {
    CHECK(std::filesystem::exists(c.report_dir() / f));
  }
  const auto audit = nlohmann::json::parse(io::read_text(c.report_dir() / "oracle_audit.json"));
  CHECK(audit.at("non_oracle_reads") == 0);
  const auto det = nlohmann::json::parse(io::read_text(c.report_dir() / "determinism.json"));
  CHECK(det.at("replay").at("match") == true);

  std::ostringstream vlog;
  CHECK(cmd_verify(c.dataset_dir(), vlog) == kOk);
  CHECK(cmd_verify(c.sweep_dir(datagen::Difficulty::medium), vlog) == kOk);
  CHECK(cmd_verify(c.report_dir(), vlog) == kOk);

  const auto summary = io::read_text(c.report_dir() / "summary.csv");
  CHECK(cmd_report(load_config(cfg_path), flags, log) == kOk);
  CHECK(io::read_text(c.report_dir() / "summary.csv") == summary);
  CHECK(cmd_verify(c.report_dir(), vlog) == kOk);

  // A truncated checkpoint must be reported.
  const auto run = c.sweep_dir(datagen::Difficulty::medium) / "sage-none-0-s0";
  auto bytes = io::read_file(run / "checkpoint.bin");
  bytes.resize(bytes.size() - 5);
  io::write_file_atomic(run / "checkpoint.bin", bytes);
  std::ostringstream bad;
  CHECK(cmd_verify(run, bad) == kFailure);
  CHECK(bad.str().find("FAIL") != std::string::npos);
}
