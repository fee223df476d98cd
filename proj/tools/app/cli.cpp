#include "malfuse_app/cli.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <optional>
#include <string>

#include "malfuse/ablation.hpp"
#include "malfuse_app/commands.hpp"
#include "malfuse_app/config.hpp"

namespace malfuse::app {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const char* env_out) {
  CLI::App cli{"Per-domain GBDT malware classifiers with probability-level fusion", "malfuse"};
  cli.require_subcommand(1);
  cli.fallthrough();

  std::string config_file;
  std::uint64_t seed = 0;
  std::string out_dir;
  int workers = 0;
  auto* config_opt = cli.add_option("--config", config_file, "Run configuration file (key = value)");
  auto* seed_opt = cli.add_option("--seed", seed, "Master seed");
  auto* out_opt = cli.add_option("--out", out_dir,
                                 std::string("Output directory (overrides ") + kOutEnvVar + ")");
  auto* workers_opt = cli.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* gen = cli.add_subcommand("gen-data", "Generate the synthetic benchmark datasets");

  std::string train_domain;
  auto* train_cmd = cli.add_subcommand("train", "Train, select features and retrain one domain model");
  train_cmd->add_option("--domain", train_domain, "Domain id")->required();

  auto* fuse_cmd = cli.add_subcommand("fuse-optimize", "Grid-search fusion weights on the pooled validation set");

  std::string eval_target;
  auto* eval_cmd = cli.add_subcommand("evaluate", "Write reports for a domain model or the fused model");
  eval_cmd->add_option("--target", eval_target, "Domain id or 'fused'")->required();

  std::string predict_input;
  std::string predict_target = "fused";
  std::string predict_output;
  auto* predict_cmd = cli.add_subcommand("predict", "Score a CSV file");
  predict_cmd->add_option("--input", predict_input, "Input CSV")->required();
  predict_cmd->add_option("--target", predict_target, "Domain id or 'fused'")->capture_default_str();
  auto* predict_output_opt = predict_cmd->add_option("--output", predict_output, "Output CSV");

  std::string study;
  std::string ablate_domain;
  auto* ablate_cmd = cli.add_subcommand("ablate", "Run an ablation study");
  ablate_cmd->add_option("--study", study, "domain-removal | feature-count | weight-perturbation")
      ->required()
      ->check(CLI::IsMember({"domain-removal", "feature-count", "weight-perturbation"}));
  auto* ablate_domain_opt = ablate_cmd->add_option("--domain", ablate_domain, "Restrict feature-count to one domain");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return cli.exit(e, out, err);
  }

  try {
    Overrides flags;
    if (*config_opt) flags.config_file = config_file;
    if (*seed_opt) flags.seed = seed;
    if (*out_opt) flags.out = out_dir;
    if (*workers_opt) flags.workers = workers;
    const auto config = resolve_config(flags, env_out);

    if (gen->parsed()) {
      gen_data(config, out);
    } else if (train_cmd->parsed()) {
      train(config, train_domain, out);
    } else if (fuse_cmd->parsed()) {
      fuse_optimize(config, out);
    } else if (eval_cmd->parsed()) {
      evaluate(config, eval_target, out);
    } else if (predict_cmd->parsed()) {
      PredictOptions options;
      options.input = predict_input;
      options.target = predict_target;
      if (*predict_output_opt) options.output = predict_output;
      predict(config, options, out);
    } else if (ablate_cmd->parsed()) {
      std::optional<std::string> domain;
      if (*ablate_domain_opt) domain = ablate_domain;
      ablate(config, ablation::parse_study(study), domain, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace malfuse::app
