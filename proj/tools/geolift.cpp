#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "geolift/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Latent position recovery: spectral embedding followed by Isomap"};
  app.require_subcommand(1, 1);

  std::string config_path;
  unsigned threads = 0;
  std::string out_dir;

  for (const char* name : {"simulate", "embed", "isomap", "evaluate", "pipeline"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--threads", threads, "Worker thread cap for parallel stages")->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    auto cfg = geolift::PipelineConfig::load(config_path);
    if (threads > 0) cfg.isomap.config.threads = threads;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    geolift::CommandOutput out;
    if (command == "simulate") out = geolift::cmd_simulate(cfg);
    else if (command == "embed") out = geolift::cmd_embed(cfg);
    else if (command == "isomap") out = geolift::cmd_isomap(cfg);
    else if (command == "evaluate") out = geolift::cmd_evaluate(cfg);
    else out = geolift::cmd_pipeline(cfg);

    for (const auto& f : out.files) std::cout << f.generic_string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "geolift " << command << ": " << e.what() << "\n";
    return geolift::exit_code_for(e);
  }
}
