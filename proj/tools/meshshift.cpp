// Command-line front end: generate, bench, select, report, evaluate, verify.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "meshshift/cli/commands.hpp"
#include "meshshift/common/errors.hpp"

namespace {

using namespace meshshift;

struct Common {
  std::optional<std::string> config;
  cli::RunFlags flags;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Pipeline config JSON (defaults apply when omitted)");
  app->add_flag("--force", c.flags.force, "Overwrite existing outputs");
  app->add_flag("--dry-run", c.flags.dry_run, "Print the plan without writing anything");
  app->add_option("--workers", c.flags.workers, "Worker threads (0 = hardware concurrency)");
  app->add_option("--profile", c.flags.profile, "Budget profile: paper or desk");
  app->add_option("--seeds", c.flags.seeds, "Seed count N (0..N-1) or a comma list");
  app->add_option("--strategies", c.flags.strategies, "Comma list of SB, IWV, DEV, TB");
  app->add_option("--difficulty", c.flags.difficulty, "Comma list of easy, medium, hard");
}

cli::LoadedConfig load(const Common& c) {
  return cli::load_config(c.config ? std::optional<std::filesystem::path>(*c.config) : std::nullopt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"meshshift: mesh surrogate benchmark under domain shift"};
  app.require_subcommand(1);

  Common gen_c, bench_c, select_c, report_c;
  cli::GenerateFlags gen;
  std::optional<std::string> gen_out;
  auto* generate = app.add_subcommand("generate", "Solve and write a dataset with its domain splits");
  add_common(generate, gen_c);
  generate->add_option("--task", gen.task, "plate-heat or rod-bending");
  generate->add_option("--n", gen.n, "Number of samples");
  generate->add_option("--seed", gen.seed, "Corpus seed");
  generate->add_option("--resolution", gen.resolution, "Mesh resolution (0 = task default)");
  generate->add_option("--out", gen_out, "Dataset directory (defaults to the config location)");

  auto* bench = app.add_subcommand("bench", "Train the sweep, select models and write reports");
  add_common(bench, bench_c);
  auto* select = app.add_subcommand("select", "Recompute model selection from sweep outputs");
  add_common(select, select_c);
  auto* report = app.add_subcommand("report", "Rebuild report tables from sweep outputs");
  add_common(report, report_c);

  std::string eval_run, eval_dataset, eval_difficulty = "medium", eval_domain = "source_test";
  auto* evaluate = app.add_subcommand("evaluate", "Score a saved checkpoint on one split");
  evaluate->add_option("--run", eval_run, "Run directory holding checkpoint.bin")->required();
  evaluate->add_option("--dataset", eval_dataset, "Dataset directory")->required();
  evaluate->add_option("--difficulty", eval_difficulty, "Split difficulty");
  evaluate->add_option("--domain", eval_domain, "source_val, source_test or target_test");

  std::string verify_dir;
  auto* verify = app.add_subcommand("verify", "Check a dataset, run, sweep or report directory");
  verify->add_option("dir", verify_dir, "Directory to check")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      if (gen_out) gen.out = *gen_out;
      return cli::cmd_generate(load(gen_c), gen, gen_c.flags, std::cout);
    }
    if (*bench) return cli::cmd_bench(load(bench_c), bench_c.flags, std::cout);
    if (*select) return cli::cmd_select(load(select_c), select_c.flags, std::cout);
    if (*report) return cli::cmd_report(load(report_c), report_c.flags, std::cout);
    if (*evaluate) {
      return cli::cmd_evaluate(eval_run, eval_dataset, datagen::difficulty_from_string(eval_difficulty), eval_domain,
                               std::cout);
    }
    if (*verify) return cli::cmd_verify(verify_dir, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kFailure;
  }
  return cli::kUsage;
}
