// Command-line front end: solve, train, predict, and export subcommands over
// a JSON run configuration. Exit codes: 0 success, 1 configuration error,
// 2 numeric failure.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pinn/cli.hpp"
#include "pinn/errors.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string restore;
  long long seed = 0;
  bool seed_set = false;
  long iters = 0;
  bool iters_set = false;
};

void attach_flags(CLI::App* sub, Flags& flags) {
  sub->add_option("--config", flags.config, "run configuration file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--seed", flags.seed, "override the run seed")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--out", flags.out, "override the output directory");
  sub->add_option("--iters", flags.iters, "override every phase's iteration budget")
      ->check(CLI::PositiveNumber);
  sub->add_option("--restore", flags.restore, "checkpoint to resume from")
      ->check(CLI::ExistingFile);
}

void apply_overrides(pinn::cli::RunConfig& cfg, const Flags& flags) {
  if (flags.seed_set) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.out.empty()) cfg.out = flags.out;
  if (flags.iters_set) {
    for (auto& phase : cfg.phases) {
      if (phase.kind == pinn::train::OptimizerConfig::Kind::kAdam)
        phase.iterations = flags.iters;
      else
        phase.lbfgs.max_iters = flags.iters;
    }
  }
}

void print_summary(const pinn::cli::RunReport& rep, const std::string& out_dir) {
  std::cout << rep.command << " " << rep.problem << ": "
            << (rep.ok() ? "ok" : "error") << "\n";
  std::cout << "  iterations: " << rep.iterations << "\n";
  std::cout << "  loss: total " << rep.loss.total << " (pde " << rep.loss.f << ", bc "
            << rep.loss.b << ", data " << rep.loss.i << ")\n";
  for (const auto& [name, value] : rep.metrics)
    std::cout << "  " << name << ": " << value << "\n";
  std::cout << "  artifacts in " << out_dir << ":";
  for (const auto& f : rep.files) std::cout << " " << f;
  std::cout << "\n";
  for (const auto& e : rep.errors) std::cout << "  error: " << e << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mesh-free PDE and inverse-problem solver built on neural networks"};
  app.require_subcommand(1);

  Flags flags;
  std::array<CLI::App*, 4> subs = {
      app.add_subcommand("solve", "train, then evaluate and export all artifacts"),
      app.add_subcommand("train", "fit the model and write checkpoint plus loss history"),
      app.add_subcommand("predict", "evaluate a stored checkpoint on the output grid"),
      app.add_subcommand("export", "re-emit every artifact from a stored checkpoint"),
  };
  for (CLI::App* sub : subs) attach_flags(sub, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  flags.seed_set = chosen->count("--seed") > 0;
  flags.iters_set = chosen->count("--iters") > 0;

  try {
    pinn::cli::RunConfig cfg = pinn::cli::parse_config(flags.config);
    apply_overrides(cfg, flags);
    pinn::cli::RunReport rep = pinn::cli::run(chosen->get_name(), cfg, flags.restore);
    print_summary(rep, cfg.out);
    return rep.ok() ? 0 : 2;
  } catch (const pinn::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
