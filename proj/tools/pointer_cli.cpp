#include "pointer/commands.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char **argv)
{
  CLI::App app{"Pointer states under collisional decoherence: soliton search, stochastic unravelling, "
               "master-equation reference and localisation model"};
  app.require_subcommand(1);

  pointer::cli::Options opt;
  std::string config, out;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  for (char const *name : {"soliton", "weights", "ensemble", "widthsweep", "gasmodel"}) {
    auto *sub = app.add_subcommand(name);
    sub->add_option("--config", config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", out, std::string("output directory (default: $") + pointer::cli::out_root_env +
                                      "/<command> or ./out/<command>)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const code = app.exit(e);
    return code == 0 ? 0 : pointer::cli::exit_config;
  }

  auto *sub = app.get_subcommands().front();
  opt.config = config;
  if (sub->count("--seed")) {
    opt.seed = seed;
  }
  if (sub->count("--out")) {
    opt.out = out;
  }
  if (sub->count("--workers")) {
    opt.workers = workers;
  }
  return pointer::cli::run(sub->get_name(), opt, std::cerr);
}
