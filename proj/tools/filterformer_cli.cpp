// filterformer: batch front end for the filtering lab.
//
//   filterformer simulate --config exp.json [--out DIR] [--seed N]
//   filterformer oracle   --config exp.json [--dataset DIR] [--out DIR]
//   filterformer train    --config exp.json [--dataset DIR] [--out DIR]
//   filterformer eval     --config exp.json [--model FILE] [--dataset DIR] [--out DIR]
//
// DIR defaults to the config's output_dir (relative to the config file);
// --dataset defaults to --out and --model to <out>/model.json.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "filterformer/error.hpp"
#include "filterformer/experiment.hpp"

namespace ex = filterformer::experiment;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string dataset;
  std::string model;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Options& o, bool dataset, bool model) {
  cmd->add_option("--config", o.config, "experiment config (JSON)")->required();
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "overrides the config seed");
  if (dataset) cmd->add_option("--dataset", o.dataset, "dataset directory (default: --out)");
  if (model) cmd->add_option("--model", o.model, "model file (default: <out>/model.json)");
}

int run(const std::string& command, const Options& o) {
  ex::ExperimentConfig cfg = ex::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  const fs::path out = o.out.empty() ? fs::path(o.config).parent_path() / cfg.output_dir : fs::path(o.out);
  const fs::path dataset = o.dataset.empty() ? out : fs::path(o.dataset);

  if (command == "simulate") {
    ex::cmd_simulate(cfg, out);
  } else if (command == "oracle") {
    ex::cmd_oracle(cfg, dataset, out);
  } else if (command == "train") {
    ex::cmd_train(cfg, dataset, out);
  } else {
    const fs::path model = o.model.empty() ? out / "model.json" : fs::path(o.model);
    const ex::Summary s = ex::cmd_eval(cfg, model, dataset, out);
    std::printf("sup_w2 %.6g mean_w2 %.6g n %lld\n", s.sup_w2, s.mean_w2, static_cast<long long>(s.n));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filterformer stochastic filtering lab"};
  app.require_subcommand(1);
  Options o;
  add_common(app.add_subcommand("simulate", "simulate observation paths and write a manifest"), o, false, false);
  add_common(app.add_subcommand("oracle", "run the optimal filter along every dataset path"), o, true, false);
  add_common(app.add_subcommand("train", "build the encoder and train the model"), o, true, false);
  add_common(app.add_subcommand("eval", "evaluate W2 against the oracle"), o, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), o);
  } catch (const filterformer::Error& e) {
    std::cerr << "error [" << filterformer::to_string(e.kind()) << "]: " << e.what() << "\n";
    return ex::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
