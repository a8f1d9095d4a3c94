// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "emrom/pipeline.hpp"

int main(int argc, char **argv)
{
  CLI::App app{"Reduced-order model imaging and inversion for 2D orthotropic media"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string output_dir;
  struct Entry
  {
    const char *name;
    const char *help;
  };
  const Entry entries[] = {{"simulate", "generate array data for the configured phantom"},
                           {"rom", "build the ROM from data and report interpolation residuals"},
                           {"image", "ROM images (and RTM if requested) as CSV and PGM"},
                           {"invert", "Gauss-Newton inversion of the speed tensor"},
                           {"verify", "run the invariant suite and print a pass/fail table"}};
  for (const Entry &e : entries)
  {
    CLI::App *sub = app.add_subcommand(e.name, e.help);
    auto *opt = sub->add_option("-c,--config", config_path, "experiment configuration file");
    if (std::string(e.name) != "verify")
    {
      opt->required()->check(CLI::ExistingFile);
    }
    sub->add_option("-o,--output-dir", output_dir, "override io.output_dir");
  }
  CLI11_PARSE(app, argc, argv);

  try
  {
    const std::string cmd = app.get_subcommands().front()->get_name();
    emrom::ExperimentConfig config = config_path.empty() ? emrom::parse_config("") : emrom::load_config(config_path);
    if (!output_dir.empty())
    {
      config.io.output_dir = output_dir;
    }
    return emrom::run_pipeline(emrom::parse_command(cmd), config, std::cout);
  }
  catch (const emrom::Error &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
