#include <iostream>

#include <CLI11.hpp>

#include "ellitrack/error.hpp"
#include "ellitrack_cli/commands.hpp"

using namespace ellitrack::cli;

int main(int argc, char** argv) {
  CLI::App app{"ellitrack: detection, segmentation and tracking of elliptical objects"};
  app.require_subcommand(1);
  CommandOptions options;
  std::string config;
  std::uint64_t seed = 0;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override scene.seed and forest.seed");
    sub->add_option("--threads", options.threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", options.out, "directory for all artifacts (default: current)");
  };
  CLI::App* gen = app.add_subcommand("gen", "generate synthetic frames and ground truth");
  CLI::App* detect = app.add_subcommand("detect", "detect and segment objects in every frame");
  CLI::App* train = app.add_subcommand("train", "train the association forest from positive pairs");
  CLI::App* track = app.add_subcommand("track", "two-stage tracking into trajectories");
  CLI::App* eval = app.add_subcommand("eval", "score trajectories and masks against ground truth");
  CLI::App* render = app.add_subcommand("render", "draw trajectories over the last frame as SVG");
  for (CLI::App* sub : {gen, detect, train, track, eval, render}) add_common(sub);
  train->add_flag("--from-truth", options.from_truth, "derive positive pairs from the ground truth");

  CLI11_PARSE(app, argc, argv);
  if (!config.empty()) options.config = config;
  for (CLI::App* sub : {gen, detect, train, track, eval, render}) {
    if (sub->get_option("--seed")->count() > 0) options.seed = seed;
  }

  try {
    std::filesystem::create_directories(options.out);
    if (gen->parsed()) return cmd_gen(options, std::cout);
    if (detect->parsed()) return cmd_detect(options, std::cout);
    if (train->parsed()) return cmd_train(options, std::cout);
    if (track->parsed()) return cmd_track(options, std::cout);
    if (eval->parsed()) return cmd_eval(options, std::cout);
    if (render->parsed()) return cmd_render(options, std::cout);
  } catch (const ellitrack::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
