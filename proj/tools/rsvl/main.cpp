#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Remote sensing vision-language toolkit: head training, evaluation and caption data tools", "rsvl"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML file with one [subcommand] table of flag values; command-line flags win");
  app.require_subcommand(1);
  app.fallthrough();

  std::vector<cli::Subcommand> subs{
      cli::add_train(app),        cli::add_eval_retrieval(app), cli::add_eval_zeroshot(app),
      cli::add_eval_semloc(app),  cli::add_eval_probe(app),     cli::add_stats(app),
      cli::add_caption(app),      cli::add_merge(app)};

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    const std::string name = s.app->get_name();
    try {
      auto out = s.run();
      out.report.write(s.common->report);
      if (!s.common->csv.empty()) {
        std::ofstream csv(s.common->csv);
        csv << out.csv;
        if (!csv) throw std::runtime_error("cannot write " + s.common->csv.string());
      }
      if (!s.common->quiet) std::cout << out.table;
      return 0;
    } catch (const cli::UsageError& e) {
      std::cerr << "rsvl " << name << ": " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "rsvl " << name << ": " << e.what() << '\n';
      return 2;
    }
  }
  return 1;
}
