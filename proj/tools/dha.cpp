// Command-line driver for the DHA pipeline.
#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "dha/pipeline/ablation.hpp"
#include "dha/pipeline/stages.hpp"

namespace {

using namespace dha;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> k;
  std::optional<std::string> mode;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Options& o, const std::string& mode_help) {
  cmd->add_option("--config", o.config, "key=value config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--k", o.k, "number of latent domains, or auto");
  cmd->add_option("--mode", o.mode, mode_help);
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

pipeline::RunConfig resolve(const Options& o, bool mode_is_adapt) {
  auto c = pipeline::load_config(o.config);
  if (o.seed) c.master_seed = *o.seed;
  if (o.k) pipeline::set_key(c, "k", *o.k);
  if (o.mode && mode_is_adapt) pipeline::set_key(c, "adapt_mode", *o.mode);
  if (o.out) c.output_dir = *o.out;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discover, Hallucinate and Adapt on a synthetic compound-domain benchmark"};
  app.require_subcommand(1);
  Options o;
  const std::string adapt_help = "adapt mode: none, traditional_raw, traditional_translated, domain_wise, domain_wise_raw";
  const char* stages[] = {"generate_data", "discover", "hallucinate", "adapt", "evaluate", "run_all"};
  for (const char* name : stages) add_common(app.add_subcommand(name), o, adapt_help);
  add_common(app.add_subcommand("ablate", "run an ablation grid"), o,
             "preset: framework_design, k_sweep or adapt_mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    if (cmd == "ablate") {
      if (!o.mode) throw pipeline::ConfigError("ablate needs --mode PRESET");
      const auto c = resolve(o, false);
      pipeline::cmd_ablate(*o.mode, c, c.output_dir);
      return 0;
    }
    const auto c = resolve(o, true);
    if (cmd == "generate_data") pipeline::cmd_generate_data(c);
    else if (cmd == "discover") pipeline::cmd_discover(c);
    else if (cmd == "hallucinate") pipeline::cmd_hallucinate(c);
    else if (cmd == "adapt") pipeline::cmd_adapt(c);
    else if (cmd == "evaluate") pipeline::cmd_evaluate(c);
    else if (cmd == "run_all") pipeline::cmd_run_all(c);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
