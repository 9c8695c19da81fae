// Command-line front end for the experiment harness.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "mzinet/data_io.hpp"
#include "mzinet/decompose.hpp"
#include "mzinet/experiments.hpp"
#include "mzinet/onn.hpp"
#include "mzinet/serialize.hpp"

namespace {

constexpr int kUsage = 1;
constexpr int kNumerical = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MZI mesh optical neural network laboratory"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint_dir;
  std::optional<int> trials;
  std::optional<int> threads;
  bool fine_grid = false;
  app.add_option("--config", config_path, "JSON experiment config (see docs/config.md)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--checkpoints", checkpoint_dir, "checkpoint directory (default <out>/checkpoints)");
  app.add_option("--trials", trials, "Monte-Carlo trials per cell")->check(CLI::PositiveNumber);
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--fine-grid", fine_grid, "sigma step 0.001 for the default noise and fidelity grids");

  const auto& names = mzinet::command_names();
  const std::string descriptions[] = {
      "train dense, grid (random and descending order) and fft models; write checkpoints and loss history",
      "accuracy surface over the sigma_PS x sigma_BS grid",
      "transfer-matrix fidelity of random meshes under noise",
      "accuracy change from localized phase errors in the second multiplier",
      "ordered vs randomized singular values under uniform noise",
      "phase quantization sweep over independently trained instances",
      "phase histograms of Haar-decomposed grids and trained fft meshes",
      "block_fft model vs grid and fft under uniform noise",
      "exact DFT check of the configured fft mesh",
      "phase noise from laser linewidth",
  };
  std::optional<int> fft_n;
  std::optional<double> linewidth, length;
  for (std::size_t i = 0; i < names.size(); ++i) {
    auto* sub = app.add_subcommand(names[i], descriptions[i]);
    if (names[i] == "fft-check") sub->add_option("--n", fft_n, "mesh size (power of two, <= 1024)");
    if (names[i] == "laser-noise") {
      sub->add_option("--linewidth", linewidth, "laser linewidth in Hz");
      sub->add_option("--length", length, "optical path length in m");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    mzinet::ExperimentConfig cfg =
        config_path.empty() ? mzinet::default_config(fine_grid) : mzinet::load_config(config_path, fine_grid);
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out_dir = *out_dir;
    if (checkpoint_dir) cfg.checkpoint_dir = *checkpoint_dir;
    if (trials) {
      cfg.noise.trials = *trials;
      cfg.fidelity.trials = *trials;
      cfg.sensitivity.trials = *trials;
    }
    if (threads) cfg.threads = *threads;
    if (fft_n) cfg.fft_check_n = *fft_n;
    if (linewidth) cfg.laser.linewidth_hz = *linewidth;
    if (length) cfg.laser.length_m = *length;
    return mzinet::run_command(command, cfg, std::cerr);
  } catch (const mzinet::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const mzinet::DecompositionError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const mzinet::NotUnitaryError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
