#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "snapkit/experiments.hpp"

#ifdef SNAPKIT_HAVE_PNG
#include "render_png.hpp"
#endif

namespace {

constexpr const char* kUnits =
    "Units: frequencies in config files are cyclic (Hz) and converted to angular\n"
    "frequencies internally; times are in seconds. Exit codes: 0 success,\n"
    "2 config error, 3 synthesis failure, 4 numerical failure.";

struct CliArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  bool render = false;
  bool seed_set = false;
};

void render_grids(const std::filesystem::path& dir) {
#ifdef SNAPKIT_HAVE_PNG
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto& p = entry.path();
    if (p.extension() == ".csv" && p.filename().string().rfind("wigner", 0) == 0) {
      std::filesystem::path png = p;
      png.replace_extension(".png");
      snapkit::render_wigner_png(p, png);
    }
  }
#else
  (void)dir;
  std::cerr << "warning: --render ignored (built without zlib)\n";
#endif
}

int run(const std::string& command, const CliArgs& args) {
  snapkit::RunConfig config = snapkit::load_run_config(args.config);
  if (config.experiment != command)
    throw snapkit::ConfigError("config is for experiment '" + config.experiment +
                               "', invoked as '" + command + "'");
  if (args.seed_set) config.seed = args.seed;
  if (args.threads > 0) config.threads = args.threads;
  if (!args.out.empty()) config.out = args.out;
  config.render = args.render;
  config.validate();

  snapkit::Json report = snapkit::run_experiment(config);
  if (config.render) render_grids(config.out);
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("snapkit - cavity state preparation with displacement/SNAP "
                           "sequences\n") +
               kUnits};
  app.require_subcommand(1);

  CliArgs args;
  static const struct {
    const char* name;
    const char* help;
  } commands[] = {
      {"prepare", "synthesize gates, compile pulses, evaluate fidelity, emit a Wigner grid"},
      {"snapshots", "per-gate fidelities and Wigner grids along the sequence"},
      {"sweep", "sensitivity curves and 1%-of-max spans vs a calibration parameter"},
      {"scaling", "Fock-ladder study: synthesis, pulse, and with-loss fidelities"},
      {"tomography", "simulate or import a Wigner grid, reconstruct the density matrix"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", args.config, "run configuration (json)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "override the config seed")
        ->each([&](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads, "parallel restart/sweep workers");
    sub->add_option("--out", args.out, "override the output directory");
    sub->add_flag("--render", args.render, "also render PNG heatmaps of Wigner grids");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), args);
  } catch (const snapkit::SynthesisFailure& e) {
    std::cerr << "synthesis failure: " << e.what() << "\n";
    return 3;
  } catch (const snapkit::GrapeFailure& e) {
    std::cerr << "synthesis failure: " << e.what() << "\n";
    return 3;
  } catch (const snapkit::ReconstructionFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const snapkit::NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const snapkit::TruncationError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const snapkit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
