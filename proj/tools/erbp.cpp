#include <CLI11.hpp>

#include "erbp/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace erbp::cli;
  CLI::App app{"Entropy-reservoir Bregman projection loop: simulate, verify bounds, run experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Options o;
  std::optional<std::string> out;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI config or run manifest");
    sub->add_option("--set", o.sets, "KEY=VALUE override (repeatable)");
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--trials", o.trials, "number of trials");
    sub->add_option("--threads", o.threads, "worker threads (speed only)");
  };

  auto* run = app.add_subcommand("run", "run the loop and write trajectory CSVs");
  common(run);
  auto* verify = app.add_subcommand("verify", "check bounds on a run directory or config");
  common(verify);
  verify->add_option("target", o.target, "run directory or config file");
  verify->add_option("--bound", o.bounds, "bound id (repeatable)");
  auto* sweep = app.add_subcommand("sweep", "grid of runs, one summary row per cell");
  common(sweep);
  sweep->add_option("--grid", o.grid, "KEY=V1,V2,... (repeatable)");
  sweep->add_option("--experiment", o.target, "sweep an experiment instead of the loop");
  auto* experiment = app.add_subcommand("experiment", "bigram, double-well or label-smoothing");
  common(experiment);
  experiment->add_option("name", o.target, "experiment name");
  auto* plot_cmd = app.add_subcommand("plot", "SVG line chart from CSV columns");
  plot_cmd->add_option("inputs,--csv", o.inputs, "input CSV (repeatable, overlays)");
  plot_cmd->add_option("--x", o.x, "x column")->capture_default_str();
  plot_cmd->add_option("--y", o.y, "y column")->capture_default_str();
  plot_cmd->add_option("--out", out, "output SVG path or directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  if (run->parsed()) {
    o.out = out.value_or("out");
    return guarded([&] { return cmd_run(o); });
  }
  if (verify->parsed()) {
    o.out = out.value_or("verify_out");
    return guarded([&] { return cmd_verify(o); });
  }
  if (sweep->parsed()) {
    o.out = out.value_or("sweep_out");
    return guarded([&] { return cmd_sweep(o); });
  }
  if (experiment->parsed()) {
    o.out = out.value_or("experiment_out");
    return guarded([&] { return cmd_experiment(o); });
  }
  o.out = out.value_or("plot.svg");
  return guarded([&] { return cmd_plot(o); });
}
