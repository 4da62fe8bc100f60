#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "pertasym/error.hpp"
#include "pertasym/parallel.hpp"

namespace {

int exit_code(pertasym::ErrorKind k) {
  switch (k) {
    case pertasym::ErrorKind::Config:
    case pertasym::ErrorKind::Domain: return 2;
    case pertasym::ErrorKind::Io: return 3;
    default: return 4;
  }
}

cli::json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) pertasym::fail(pertasym::ErrorKind::Io, "cannot open config " + path);
  try {
    return cli::json::parse(is);
  } catch (const cli::json::parse_error& e) {
    pertasym::fail(pertasym::ErrorKind::Config, "config " + path + ": " + e.what());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perturbations of FLRW backgrounds on the torus"};
  app.require_subcommand(1);
  std::string config, out, mode;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware)");

  auto common = [&](CLI::App* s) {
    s->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
    s->add_option("--out", out, "Output directory");
    s->add_option("--seed", seed, "RNG seed");
    s->add_option("--threads", threads, "Worker threads (0 = hardware)");
  };
  auto* bg = app.add_subcommand("bg", "Solve a background");
  auto* evolve = app.add_subcommand("evolve", "Evolve a perturbation");
  auto* sing = app.add_subcommand("sing", "Singular data: build, fit, roundtrip, gowdy");
  auto* late = app.add_subcommand("late", "Late time: extract, reconstruct, regimes");
  auto* classify = app.add_subcommand("classify", "Classify an equation of state");
  auto* gowdy = app.add_subcommand("gowdy", "Gowdy evolution and prescription");
  for (auto* s : {bg, evolve, sing, late, classify, gowdy}) common(s);
  sing->add_option("mode", mode)->required()->check(CLI::IsMember({"build", "fit", "roundtrip", "gowdy"}));
  late->add_option("mode", mode)->required()->check(CLI::IsMember({"extract", "reconstruct", "regimes"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    pertasym::set_thread_count(threads);
    cli::Context c;
    c.config = load_config(config);
    if (!c.config.is_object()) pertasym::fail(pertasym::ErrorKind::Config, "config must be a JSON object");
    if (c.config.contains("seed")) {
      if (!c.config["seed"].is_number_unsigned())
        pertasym::fail(pertasym::ErrorKind::Config, "config: \"seed\" must be a non-negative integer");
      c.seed = c.config["seed"];
    }
    if (seed) c.seed = *seed;
    c.out = c.config.value("out", std::string("out"));
    if (!out.empty()) c.out = out;

    if (*bg) cli::cmd_bg(c);
    else if (*evolve) cli::cmd_evolve(c);
    else if (*sing) cli::cmd_sing(c, mode);
    else if (*late) cli::cmd_late(c, mode);
    else if (*classify) cli::cmd_classify(c);
    else cli::cmd_gowdy(c);
  } catch (const pertasym::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const cli::json::exception& e) {
    std::cerr << "error: config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
