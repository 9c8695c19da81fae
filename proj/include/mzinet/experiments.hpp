#pragma once

// Experiment harness behind the CLI: configuration, training of the model
// families, Monte-Carlo sweeps and their CSV outputs.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mzinet/data_io.hpp"
#include "mzinet/onn.hpp"

namespace mzinet {

/// Bad configuration or arguments (CLI exit code 1).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string dir = "data/digits16";
  std::string train_images = "train-images-idx3-ubyte.gz";
  std::string train_labels = "train-labels-idx1-ubyte.gz";
  std::string test_images = "test-images-idx3-ubyte.gz";
  std::string test_labels = "test-labels-idx1-ubyte.gz";
  int downsample = 1;
  int pad = 0;
  std::size_t train_limit = 0;  // 0 keeps everything
  std::size_t test_limit = 0;
};

struct ModelConfig {
  int width = 0;  // 0: derived from the encoded input size
  int depth = 3;
  int n_classes = 10;
  double t0 = 0.5;
  double mesh_beta = 2.0;  // initial attenuator scale of directly trained meshes
};

struct TrainingConfig {
  int epochs = 30;
  int batch_size = 32;
  double dense_lr = 0.03;
  double mesh_lr = 0.02;
  double lr_decay = 0.92;
};

struct NoiseGridConfig {
  std::vector<double> sigma_ps;
  std::vector<double> sigma_bs;
  int trials = 20;
  std::size_t dump_inputs = 0;  // test inputs whose output ensembles are written out
};

struct FidelityConfig {
  int n = 64;
  std::vector<double> sigmas;
  int trials = 50;
  int stacked_k = 0;  // 0: floor(n / log2 n), the deepest stack not exceeding n layers
  int trunc_p = 0;    // 0: log2 n
};

struct SensitivityConfig {
  int layer = 1;  // zero-based multiplier index
  int block = 8;
  double sigma = 0.1;
  int trials = 3;
  int top_k = 4;
  int permutations = 2000;
};

struct QuantConfig {
  std::vector<int> bits{4, 5, 6, 7, 8, 9, 10, 24};
  int instances = 10;
};

struct PhaseHistConfig {
  int n = 16;
  int samples = 100;
  int bins = 24;
  int fft_instances = 3;
};

struct BlockFftConfig {
  int block = 8;
};

struct LaserConfig {
  double linewidth_hz = 5e7;
  double length_m = 1e-4;
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";
  std::string checkpoint_dir;  // empty: <out_dir>/checkpoints
  int bootstrap_resamples = 10000;
  DataConfig data;
  ModelConfig model;
  TrainingConfig training;
  NoiseGridConfig noise;
  FidelityConfig fidelity;
  SensitivityConfig sensitivity;
  QuantConfig quant;
  PhaseHistConfig phase_hist;
  BlockFftConfig blockfft;
  int fft_check_n = 64;
  LaserConfig laser;

  /// Throws UsageError for empty lists, non-positive counts or negative sigmas.
  void validate() const;
  std::string checkpoints() const;
};

/// sigma_k = k * step for k = 0..round(max / step).
std::vector<double> sigma_grid(double max, double step);
/// Default configuration with the noise grids filled in; `fine_grid` selects
/// the finer 0.001 step.
ExperimentConfig default_config(bool fine_grid = false);
/// Overlays `j` on the defaults. Unknown keys and wrong types raise UsageError.
ExperimentConfig config_from_json(const nlohmann::json& j, bool fine_grid = false);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// A relative data.dir in the file is resolved against the file's directory.
ExperimentConfig load_config(const std::string& path, bool fine_grid = false);

struct TaskData {
  EncodedSet train;
  EncodedSet test;
  int width = 0;
};
TaskData load_task(const ExperimentConfig& cfg);

/// One trained instance of every family derived from the same dense model.
struct ModelSet {
  OnnModel dense;
  OnnModel grid_random;
  OnnModel grid_descending;
  OnnModel fft;
  std::vector<double> dense_loss;
  std::vector<double> fft_loss;
};

/// Seed of the k-th independently trained instance; instance 0 is what the
/// train command writes.
std::uint64_t instance_seed(std::uint64_t master, int instance);
ModelSet train_models(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed, int threads = 1);
OnnModel train_block_fft(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed);
void save_checkpoints(const ModelSet& models, const std::string& dir);
/// Throws CheckpointError when a checkpoint file is missing or unreadable.
ModelSet load_checkpoints(const std::string& dir);

/// Trial index used by per-cell aggregate rows.
inline constexpr std::int64_t kAggregateTrial = -1;

/// Plot-ready table written next to the results CSV.
struct Table {
  std::string name;  // file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentOutput {
  std::vector<ResultRecord> records;
  std::vector<Table> tables;
};

ExperimentOutput train_report(const ExperimentConfig& cfg, const ModelSet& models, const TaskData& data);
ExperimentOutput sweep_noise(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test);
ExperimentOutput fidelity_sweep(const ExperimentConfig& cfg);
ExperimentOutput sensitivity_map(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test);
ExperimentOutput ordered_vs_random(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test);
ExperimentOutput quant_sweep(const ExperimentConfig& cfg, std::span<const ModelSet> instances, const EncodedSet& test);
ExperimentOutput phase_hist(const ExperimentConfig& cfg, std::span<const OnnModel> fft_models);
ExperimentOutput blockfft_sweep(const ExperimentConfig& cfg, const ModelSet& models, const OnnModel& block_model,
                                const EncodedSet& test);

struct FftCheck {
  double max_error = 0.0;
  double fidelity = 0.0;
  double convolution_error = 0.0;           // random kernel vs the O(n^2) sum
  double identity_convolution_error = 0.0;  // delta kernel
  bool passed = false;
  ExperimentOutput output;
};
/// Throws UsageError unless n is a power of two in [2, 1024].
FftCheck fft_check(int n);
ExperimentOutput laser_noise(const ExperimentConfig& cfg);

/// Per-trial values (trial >= 0, ordered by trial) of one metric in one cell.
std::vector<double> select_values(std::span<const ResultRecord> records, const std::string& metric, double sigma_ps,
                                  double sigma_bs, std::optional<int> quant_bits = std::nullopt);

/// Writes <dir>/<experiment>.csv and every table as <dir>/<name>.csv.
void write_output(const ExperimentOutput& out, const std::string& experiment, const std::string& dir);

/// Subcommand names accepted by run_command.
const std::vector<std::string>& command_names();
/// Runs one subcommand end to end, writing into cfg.out_dir. Returns the
/// process exit code: 0 success, 2 when a check fails. Usage and numerical
/// errors propagate as exceptions.
int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log);

}  // namespace mzinet
