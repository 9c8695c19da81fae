#include "mzinet/experiments.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "mzinet/parallel.hpp"
#include "mzinet/serialize.hpp"
#include "mzinet/stats.hpp"

namespace mzinet {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stream tags under the master seed.
enum Stream : std::uint64_t {
  kInstances = 1,
  kNoise = 2,
  kFidelityMesh = 3,
  kFidelityNoise = 4,
  kSensitivity = 5,
  kHaar = 6,
  kBootstrap = 7,
  kPermutation = 8,
};

std::uint64_t stream(std::uint64_t master, Stream s) { return derive_seed(master, s); }

class Reader {
 public:
  Reader(json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (!j_.is_object()) throw UsageError("config: '" + path_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string where = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw UsageError("config: '" + where + "' must be a string");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw UsageError("config: '" + where + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw UsageError("config: '" + where + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<std::int64_t>() < 0)
          throw UsageError("config: '" + where + "' must be non-negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw UsageError("config: '" + where + "' must be a number");
    } else {
      if (!it->is_array()) throw UsageError("config: '" + where + "' must be a list");
      for (const auto& v : *it) {
        if constexpr (std::is_same_v<typename T::value_type, int>) {
          if (!v.is_number_integer()) throw UsageError("config: '" + where + "' must hold integers");
        } else {
          if (!v.is_number()) throw UsageError("config: '" + where + "' must hold numbers");
        }
      }
    }
    out = it->template get<T>();
  }

  Reader section(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return Reader(it == j_.end() ? json::object() : *it, path_.empty() ? key : path_ + "." + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) throw UsageError("config: unknown key '" + (path_.empty() ? k : path_ + "." + k) + "'");
  }

 private:
  json j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError("config: " + what);
}

bool power_of_two(int n) { return n > 0 && std::has_single_bit(static_cast<unsigned>(n)); }

int log2i(int n) { return std::bit_width(static_cast<unsigned>(n)) - 1; }

void require_sigmas(const std::vector<double>& v, const std::string& name) {
  require(!v.empty(), name + " must not be empty");
  for (double s : v) require(std::isfinite(s) && s >= 0.0, name + " entries must be finite and >= 0");
}

double accuracy(const Probabilities& p, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t b = 0; b < p.batch; ++b) {
    const auto row = p.row(b);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == labels[b]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(p.batch);
}

ResultRecord record(const std::string& experiment, std::int64_t trial, double sps, double sbs, std::optional<int> bits,
                    std::string metric, double value, std::uint64_t seed) {
  ResultRecord r;
  r.experiment = experiment;
  r.trial = trial;
  r.sigma_ps = sps;
  r.sigma_bs = sbs;
  r.quant_bits = bits;
  r.metric = std::move(metric);
  r.value = value;
  r.seed = seed;
  return r;
}

std::string fmt(double v) { return format_double(v); }

SatAbsParams nonlinearity(const ExperimentConfig& cfg) { return {cfg.model.t0}; }

ModelShape shape(const ExperimentConfig& cfg, const TaskData& data) {
  return {data.width, cfg.model.depth, cfg.model.n_classes};
}

OnnModel train_dense(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed, std::vector<double>& loss) {
  const auto& t = cfg.training;
  auto r = train(make_dense_model(shape(cfg, data), nonlinearity(cfg), derive_seed(seed, 0)), data.train,
                 TrainConfig{.epochs = t.epochs, .batch_size = t.batch_size, .learning_rate = t.dense_lr,
                             .seed = derive_seed(seed, 2), .lr_decay = t.lr_decay});
  loss = std::move(r.loss_history);
  return std::move(r.model);
}

OnnModel train_mesh(const ExperimentConfig& cfg, const TaskData& data, const Layout& layout, std::uint64_t init_seed,
                    std::uint64_t train_seed, std::vector<double>& loss) {
  const auto& t = cfg.training;
  auto r = train(make_mesh_model(shape(cfg, data), layout, nonlinearity(cfg), cfg.model.mesh_beta, init_seed), data.train,
                 TrainConfig{.epochs = t.epochs, .batch_size = t.batch_size, .learning_rate = t.mesh_lr,
                             .seed = train_seed, .lr_decay = t.lr_decay});
  loss = std::move(r.loss_history);
  return std::move(r.model);
}

OnnModel train_fft(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed, std::vector<double>& loss) {
  return train_mesh(cfg, data, {LayoutKind::fft, 0}, derive_seed(seed, 1), derive_seed(seed, 3), loss);
}

// Accuracy of perturbed copies of `model` for every trial, evaluated in
// parallel; keeps the probabilities of the first `keep` inputs when asked.
struct TrialOutcome {
  double accuracy = 0.0;
  std::vector<double> kept;  // keep x classes
};

TrialOutcome noisy_trial(const OnnModel& model, const NoiseSpec& noise, std::uint64_t trial, const EncodedSet& test,
                         std::size_t keep) {
  const auto p = forward(perturb_model(model, noise, trial), test.x);
  TrialOutcome out{accuracy(p, test.labels), {}};
  keep = std::min(keep, p.batch);
  out.kept.assign(p.values.begin(), p.values.begin() + static_cast<std::ptrdiff_t>(keep * p.classes));
  return out;
}

struct Cell {
  double sps;
  double sbs;
};

struct Family {
  std::string name;
  const OnnModel* model;
};

// Runs families x cells x trials of uniform noise and returns per-trial
// outcomes indexed [cell][family][trial].
std::vector<std::vector<std::vector<TrialOutcome>>> run_noise_grid(const ExperimentConfig& cfg,
                                                                   const std::vector<Cell>& cells,
                                                                   const std::vector<Family>& families,
                                                                   const EncodedSet& test, std::size_t keep) {
  const auto trials = static_cast<std::size_t>(cfg.noise.trials);
  const std::uint64_t seed = stream(cfg.seed, kNoise);
  std::vector<std::vector<std::vector<TrialOutcome>>> out(
      cells.size(), std::vector<std::vector<TrialOutcome>>(families.size(), std::vector<TrialOutcome>(trials)));
  parallel_for(cells.size() * families.size() * trials, cfg.threads, [&](std::size_t i) {
    const std::size_t t = i % trials;
    const std::size_t f = (i / trials) % families.size();
    const std::size_t c = i / (trials * families.size());
    const NoiseSpec noise{cells[c].sps, cells[c].sbs, std::nullopt, std::nullopt, seed};
    out[c][f][t] = noisy_trial(*families[f].model, noise, t, test, keep);
  });
  return out;
}

ExperimentOutput noise_grid_output(const ExperimentConfig& cfg, const std::string& experiment,
                                   const std::vector<Cell>& cells, const std::vector<Family>& families,
                                   const EncodedSet& test, std::size_t keep) {
  const auto results = run_noise_grid(cfg, cells, families, test, keep);
  const std::uint64_t seed = stream(cfg.seed, kNoise);
  ExperimentOutput out;
  Table dump{experiment + "_outputs", {"family", "sigma_ps", "sigma_bs", "input", "label", "class", "mean", "p20", "p80"}, {}};
  const auto classes = static_cast<std::size_t>(families.front().model->n_classes);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t f = 0; f < families.size(); ++f) {
      const auto& trials = results[c][f];
      std::vector<double> acc;
      for (std::size_t t = 0; t < trials.size(); ++t) {
        acc.push_back(trials[t].accuracy);
        out.records.push_back(record(experiment, static_cast<std::int64_t>(t), cells[c].sps, cells[c].sbs, std::nullopt,
                                     "accuracy/" + families[f].name, trials[t].accuracy, derive_seed(seed, t)));
      }
      out.records.push_back(record(experiment, kAggregateTrial, cells[c].sps, cells[c].sbs, std::nullopt,
                                   "mean_accuracy/" + families[f].name, mean(acc), seed));
      const std::size_t kept = trials.front().kept.size() / classes;
      for (std::size_t in = 0; in < kept; ++in) {
        for (std::size_t k = 0; k < classes; ++k) {
          std::vector<double> v;
          for (const auto& tr : trials) v.push_back(tr.kept[in * classes + k]);
          dump.rows.push_back({families[f].name, fmt(cells[c].sps), fmt(cells[c].sbs), std::to_string(in),
                               std::to_string(test.labels[in]), std::to_string(k), fmt(mean(v)), fmt(quantile(v, 0.2)),
                               fmt(quantile(v, 0.8))});
        }
      }
    }
  }
  if (keep > 0) out.tables.push_back(std::move(dump));
  return out;
}

std::vector<Cell> diagonal_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (double s : cfg.noise.sigma_ps) cells.push_back({s, s});
  return cells;
}

void write_csv_table(const Table& t, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) f << (i ? "," : "") << cells[i];
    f << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
  if (!f) throw std::runtime_error("error writing " + path);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  require(threads >= 1, "threads must be >= 1");
  require(bootstrap_resamples >= 1, "bootstrap_resamples must be >= 1");
  require(!out_dir.empty(), "out_dir must not be empty");
  require(data.downsample >= 1, "data.downsample must be >= 1");
  require(data.pad >= 0, "data.pad must be >= 0");
  require(model.width >= 0, "model.width must be >= 0");
  require(model.depth >= 1, "model.depth must be >= 1");
  require(model.n_classes >= 1, "model.n_classes must be >= 1");
  require(model.t0 > 0.0 && model.t0 < 1.0, "model.t0 must be in (0, 1)");
  require(std::isfinite(model.mesh_beta) && model.mesh_beta > 0.0, "model.mesh_beta must be > 0");
  require(training.epochs >= 0, "training.epochs must be >= 0");
  require(training.batch_size >= 1, "training.batch_size must be >= 1");
  require(std::isfinite(training.dense_lr) && training.dense_lr >= 0.0, "training.dense_lr must be >= 0");
  require(std::isfinite(training.mesh_lr) && training.mesh_lr >= 0.0, "training.mesh_lr must be >= 0");
  require(std::isfinite(training.lr_decay) && training.lr_decay > 0.0, "training.lr_decay must be > 0");
  require_sigmas(noise.sigma_ps, "noise.sigma_ps");
  require_sigmas(noise.sigma_bs, "noise.sigma_bs");
  require(noise.trials >= 1, "noise.trials must be >= 1");
  require(power_of_two(fidelity.n) && fidelity.n >= 2, "fidelity.n must be a power of two >= 2");
  require_sigmas(fidelity.sigmas, "fidelity.sigmas");
  require(fidelity.trials >= 1, "fidelity.trials must be >= 1");
  require(fidelity.stacked_k >= 0 && fidelity.trunc_p >= 0 && fidelity.trunc_p <= fidelity.n,
          "fidelity.stacked_k and fidelity.trunc_p must be >= 0 (trunc_p <= n)");
  require(sensitivity.layer >= 0 && sensitivity.layer < model.depth, "sensitivity.layer must index a layer");
  require(sensitivity.block >= 1, "sensitivity.block must be >= 1");
  require(std::isfinite(sensitivity.sigma) && sensitivity.sigma >= 0.0, "sensitivity.sigma must be >= 0");
  require(sensitivity.trials >= 1 && sensitivity.top_k >= 1 && sensitivity.permutations >= 1,
          "sensitivity.trials, top_k and permutations must be >= 1");
  require(!quant.bits.empty(), "quant.bits must not be empty");
  for (int b : quant.bits) require(b >= 1 && b <= 30, "quant.bits entries must be in [1, 30]");
  require(quant.instances >= 1, "quant.instances must be >= 1");
  require(phase_hist.n >= 2 && phase_hist.n % 2 == 0, "phase_hist.n must be even and >= 2");
  require(phase_hist.samples >= 2 && phase_hist.bins >= 1 && phase_hist.fft_instances >= 0,
          "phase_hist.samples >= 2, bins >= 1, fft_instances >= 0");
  require(blockfft.block >= 2, "blockfft.block must be >= 2");
  require(power_of_two(fft_check_n) && fft_check_n >= 2 && fft_check_n <= 1024,
          "fft_check.n must be a power of two in [2, 1024]");
  require(laser.linewidth_hz > 0.0 && laser.length_m > 0.0, "laser values must be > 0");
}

std::string ExperimentConfig::checkpoints() const {
  return checkpoint_dir.empty() ? (fs::path(out_dir) / "checkpoints").string() : checkpoint_dir;
}

std::vector<double> sigma_grid(double max, double step) {
  if (!(step > 0.0) || !(max >= 0.0)) throw std::invalid_argument("sigma_grid: need step > 0 and max >= 0");
  const auto k = static_cast<int>(std::lround(max / step));
  const double per = std::round(1.0 / step);
  std::vector<double> out;
  // k / per keeps values like 0.006 exact to the last digit when 1/step is integral.
  for (int i = 0; i <= k; ++i) out.push_back(std::abs(per * step - 1.0) < 1e-12 ? i / per : i * step);
  return out;
}

ExperimentConfig default_config(bool fine_grid) {
  ExperimentConfig cfg;
  cfg.noise.sigma_ps = sigma_grid(0.02, fine_grid ? 0.001 : 0.002);
  cfg.noise.sigma_bs = cfg.noise.sigma_ps;
  cfg.fidelity.sigmas = sigma_grid(0.02, fine_grid ? 0.001 : 0.0025);
  return cfg;
}

ExperimentConfig config_from_json(const json& j, bool fine_grid) {
  ExperimentConfig cfg = default_config(fine_grid);
  Reader r(j, "");
  r.get("seed", cfg.seed);
  r.get("threads", cfg.threads);
  r.get("out_dir", cfg.out_dir);
  r.get("checkpoint_dir", cfg.checkpoint_dir);
  r.get("bootstrap_resamples", cfg.bootstrap_resamples);
  {
    auto s = r.section("data");
    s.get("dir", cfg.data.dir);
    s.get("train_images", cfg.data.train_images);
    s.get("train_labels", cfg.data.train_labels);
    s.get("test_images", cfg.data.test_images);
    s.get("test_labels", cfg.data.test_labels);
    s.get("downsample", cfg.data.downsample);
    s.get("pad", cfg.data.pad);
    s.get("train_limit", cfg.data.train_limit);
    s.get("test_limit", cfg.data.test_limit);
    s.finish();
  }
  {
    auto s = r.section("model");
    s.get("width", cfg.model.width);
    s.get("depth", cfg.model.depth);
    s.get("n_classes", cfg.model.n_classes);
    s.get("t0", cfg.model.t0);
    s.get("mesh_beta", cfg.model.mesh_beta);
    s.finish();
  }
  {
    auto s = r.section("training");
    s.get("epochs", cfg.training.epochs);
    s.get("batch_size", cfg.training.batch_size);
    s.get("dense_lr", cfg.training.dense_lr);
    s.get("mesh_lr", cfg.training.mesh_lr);
    s.get("lr_decay", cfg.training.lr_decay);
    s.finish();
  }
  {
    auto s = r.section("noise");
    s.get("sigma_ps", cfg.noise.sigma_ps);
    s.get("sigma_bs", cfg.noise.sigma_bs);
    s.get("trials", cfg.noise.trials);
    s.get("dump_inputs", cfg.noise.dump_inputs);
    s.finish();
  }
  {
    auto s = r.section("fidelity");
    s.get("n", cfg.fidelity.n);
    s.get("sigmas", cfg.fidelity.sigmas);
    s.get("trials", cfg.fidelity.trials);
    s.get("stacked_k", cfg.fidelity.stacked_k);
    s.get("trunc_p", cfg.fidelity.trunc_p);
    s.finish();
  }
  {
    auto s = r.section("sensitivity");
    s.get("layer", cfg.sensitivity.layer);
    s.get("block", cfg.sensitivity.block);
    s.get("sigma", cfg.sensitivity.sigma);
    s.get("trials", cfg.sensitivity.trials);
    s.get("top_k", cfg.sensitivity.top_k);
    s.get("permutations", cfg.sensitivity.permutations);
    s.finish();
  }
  {
    auto s = r.section("quant");
    s.get("bits", cfg.quant.bits);
    s.get("instances", cfg.quant.instances);
    s.finish();
  }
  {
    auto s = r.section("phase_hist");
    s.get("n", cfg.phase_hist.n);
    s.get("samples", cfg.phase_hist.samples);
    s.get("bins", cfg.phase_hist.bins);
    s.get("fft_instances", cfg.phase_hist.fft_instances);
    s.finish();
  }
  {
    auto s = r.section("blockfft");
    s.get("block", cfg.blockfft.block);
    s.finish();
  }
  {
    auto s = r.section("fft_check");
    s.get("n", cfg.fft_check_n);
    s.finish();
  }
  {
    auto s = r.section("laser");
    s.get("linewidth_hz", cfg.laser.linewidth_hz);
    s.get("length_m", cfg.laser.length_m);
    s.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& c) {
  return {
      {"seed", c.seed},
      {"threads", c.threads},
      {"out_dir", c.out_dir},
      {"checkpoint_dir", c.checkpoint_dir},
      {"bootstrap_resamples", c.bootstrap_resamples},
      {"data",
       {{"dir", c.data.dir},
        {"train_images", c.data.train_images},
        {"train_labels", c.data.train_labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels},
        {"downsample", c.data.downsample},
        {"pad", c.data.pad},
        {"train_limit", c.data.train_limit},
        {"test_limit", c.data.test_limit}}},
      {"model",
       {{"width", c.model.width},
        {"depth", c.model.depth},
        {"n_classes", c.model.n_classes},
        {"t0", c.model.t0},
        {"mesh_beta", c.model.mesh_beta}}},
      {"training",
       {{"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"dense_lr", c.training.dense_lr},
        {"mesh_lr", c.training.mesh_lr},
        {"lr_decay", c.training.lr_decay}}},
      {"noise",
       {{"sigma_ps", c.noise.sigma_ps},
        {"sigma_bs", c.noise.sigma_bs},
        {"trials", c.noise.trials},
        {"dump_inputs", c.noise.dump_inputs}}},
      {"fidelity",
       {{"n", c.fidelity.n},
        {"sigmas", c.fidelity.sigmas},
        {"trials", c.fidelity.trials},
        {"stacked_k", c.fidelity.stacked_k},
        {"trunc_p", c.fidelity.trunc_p}}},
      {"sensitivity",
       {{"layer", c.sensitivity.layer},
        {"block", c.sensitivity.block},
        {"sigma", c.sensitivity.sigma},
        {"trials", c.sensitivity.trials},
        {"top_k", c.sensitivity.top_k},
        {"permutations", c.sensitivity.permutations}}},
      {"quant", {{"bits", c.quant.bits}, {"instances", c.quant.instances}}},
      {"phase_hist",
       {{"n", c.phase_hist.n},
        {"samples", c.phase_hist.samples},
        {"bins", c.phase_hist.bins},
        {"fft_instances", c.phase_hist.fft_instances}}},
      {"blockfft", {{"block", c.blockfft.block}}},
      {"fft_check", {{"n", c.fft_check_n}}},
      {"laser", {{"linewidth_hz", c.laser.linewidth_hz}, {"length_m", c.laser.length_m}}},
  };
}

ExperimentConfig load_config(const std::string& path, bool fine_grid) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f, nullptr, true, true);
  } catch (const json::exception& e) {
    throw UsageError("config '" + path + "': " + e.what());
  }
  ExperimentConfig cfg = config_from_json(j, fine_grid);
  // A relative data directory given in the file is taken relative to the file.
  if (j.contains("data") && j["data"].contains("dir") && fs::path(cfg.data.dir).is_relative())
    cfg.data.dir = (fs::path(path).parent_path() / cfg.data.dir).lexically_normal().string();
  return cfg;
}

// ---------------------------------------------------------------------------
// Data and models

TaskData load_task(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.data.dir);
  auto prepare = [&](const std::string& images, const std::string& labels, std::size_t limit) {
    Dataset ds = load_idx((dir / images).string(), (dir / labels).string());
    if (cfg.data.downsample > 1) ds = downsample(ds, cfg.data.downsample);
    if (cfg.data.pad > 0) ds = pad(ds, cfg.data.pad, cfg.data.pad);
    if (limit > 0 && limit < ds.size()) ds = take(ds, limit);
    return ds;
  };
  const Dataset train_ds = prepare(cfg.data.train_images, cfg.data.train_labels, cfg.data.train_limit);
  const Dataset test_ds = prepare(cfg.data.test_images, cfg.data.test_labels, cfg.data.test_limit);
  if (train_ds.image_size() != test_ds.image_size()) throw UsageError("train and test images differ in size");
  TaskData t{encode_dataset(train_ds), encode_dataset(test_ds), static_cast<int>(train_ds.image_size() / 2)};
  if (cfg.model.width != 0 && cfg.model.width != t.width)
    throw UsageError("model.width " + std::to_string(cfg.model.width) + " does not match the encoded input size " +
                     std::to_string(t.width));
  if (cfg.model.n_classes > t.width) throw UsageError("model.n_classes exceeds the layer width");
  for (const auto* set : {&t.train, &t.test})
    for (int l : set->labels)
      if (l >= cfg.model.n_classes) throw UsageError("dataset label " + std::to_string(l) + " >= model.n_classes");
  return t;
}

std::uint64_t instance_seed(std::uint64_t master, int instance) {
  return derive_seed(stream(master, kInstances), static_cast<std::uint64_t>(instance));
}

ModelSet train_models(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed, int threads) {
  ModelSet m;
  parallel_for(2, threads, [&](std::size_t i) {
    if (i == 0)
      m.dense = train_dense(cfg, data, seed, m.dense_loss);
    else
      m.fft = train_fft(cfg, data, seed, m.fft_loss);
  });
  m.grid_random = grid_from_dense(m.dense, SingularOrder::random, derive_seed(seed, 4));
  m.grid_descending = grid_from_dense(m.dense, SingularOrder::descending, derive_seed(seed, 4));
  return m;
}

OnnModel train_block_fft(const ExperimentConfig& cfg, const TaskData& data, std::uint64_t seed) {
  std::vector<double> loss;
  return train_mesh(cfg, data, {LayoutKind::block_fft, cfg.blockfft.block}, derive_seed(seed, 5), derive_seed(seed, 6), loss);
}

namespace {
const char* const kCheckpointNames[] = {"dense", "grid_random", "grid_descending", "fft"};
}

void save_checkpoints(const ModelSet& models, const std::string& dir) {
  fs::create_directories(dir);
  const OnnModel* all[] = {&models.dense, &models.grid_random, &models.grid_descending, &models.fft};
  for (std::size_t i = 0; i < 4; ++i) save_model(*all[i], (fs::path(dir) / (std::string(kCheckpointNames[i]) + ".json")).string());
}

ModelSet load_checkpoints(const std::string& dir) {
  ModelSet m;
  OnnModel* all[] = {&m.dense, &m.grid_random, &m.grid_descending, &m.fft};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto path = (fs::path(dir) / (std::string(kCheckpointNames[i]) + ".json")).string();
    if (!fs::exists(path)) throw CheckpointError("missing checkpoint " + path + " (run the train command first)");
    try {
      *all[i] = load_model(path);
    } catch (const std::exception& e) {
      throw CheckpointError("unreadable checkpoint " + path + ": " + e.what());
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Experiments

ExperimentOutput train_report(const ExperimentConfig& cfg, const ModelSet& models, const TaskData& data) {
  const std::string ex = "train";
  const std::uint64_t seed = instance_seed(cfg.seed, 0);
  ExperimentOutput out;
  Table loss{"train_loss", {"epoch", "dense", "fft"}, {}};
  for (std::size_t e = 0; e < models.dense_loss.size(); ++e) {
    out.records.push_back(record(ex, static_cast<std::int64_t>(e), 0, 0, std::nullopt, "loss/dense", models.dense_loss[e], seed));
    out.records.push_back(record(ex, static_cast<std::int64_t>(e), 0, 0, std::nullopt, "loss/fft", models.fft_loss[e], seed));
    loss.rows.push_back({std::to_string(e), fmt(models.dense_loss[e]), fmt(models.fft_loss[e])});
  }
  const auto dense_p = forward(models.dense, data.test.x);
  const std::pair<const char*, const OnnModel*> fams[] = {
      {"dense", &models.dense}, {"grid_random", &models.grid_random}, {"grid_descending", &models.grid_descending}, {"fft", &models.fft}};
  for (const auto& [name, model] : fams) {
    const auto p = forward(*model, data.test.x);
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, std::string("accuracy/") + name, accuracy(p, data.test.labels), seed));
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, std::string("train_accuracy/") + name,
                                 evaluate(*model, data.train), seed));
    if (model->mode == ModelMode::grid_mesh) {
      double diff = 0.0;
      for (std::size_t i = 0; i < p.values.size(); ++i) diff = std::max(diff, std::abs(p.values[i] - dense_p.values[i]));
      out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, std::string("max_prob_diff_vs_dense/") + name, diff, seed));
    }
  }
  out.tables.push_back(std::move(loss));
  return out;
}

ExperimentOutput sweep_noise(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test) {
  std::vector<Cell> cells;
  for (double ps : cfg.noise.sigma_ps)
    for (double bs : cfg.noise.sigma_bs) cells.push_back({ps, bs});
  auto out = noise_grid_output(cfg, "sweep_noise", cells, {{"grid", &models.grid_random}, {"fft", &models.fft}}, test,
                               cfg.noise.dump_inputs);
  // Trend along the sigma_PS = sigma_BS diagonal.
  for (const char* fam : {"grid", "fft"}) {
    std::vector<double> s, a;
    for (double ps : cfg.noise.sigma_ps) {
      if (std::find(cfg.noise.sigma_bs.begin(), cfg.noise.sigma_bs.end(), ps) == cfg.noise.sigma_bs.end()) continue;
      s.push_back(ps);
      a.push_back(mean(select_values(out.records, std::string("accuracy/") + fam, ps, ps)));
    }
    if (s.size() >= 2)
      out.records.push_back(record("sweep_noise", kAggregateTrial, 0, 0, std::nullopt, std::string("diagonal_spearman/") + fam,
                                   spearman(s, a), cfg.seed));
  }
  return out;
}

ExperimentOutput fidelity_sweep(const ExperimentConfig& cfg) {
  const std::string ex = "fidelity";
  const int n = cfg.fidelity.n;
  const int k = cfg.fidelity.stacked_k > 0 ? cfg.fidelity.stacked_k : std::max(1, n / std::max(1, log2i(n)));
  const int p = cfg.fidelity.trunc_p > 0 ? cfg.fidelity.trunc_p : std::max(1, log2i(n));
  const std::pair<std::string, Layout> layouts[] = {{"grid", {LayoutKind::grid, 0}},
                                                    {"stacked_fft", {LayoutKind::stacked_fft, k}},
                                                    {"trunc_grid", {LayoutKind::trunc_grid, p}},
                                                    {"fft", {LayoutKind::fft, 0}}};
  const std::size_t nl = std::size(layouts);
  const auto trials = static_cast<std::size_t>(cfg.fidelity.trials);
  const auto& sigmas = cfg.fidelity.sigmas;
  // values[layout][trial][sigma]
  std::vector<std::vector<std::vector<double>>> values(nl, std::vector<std::vector<double>>(trials));
  parallel_for(nl * trials, cfg.threads, [&](std::size_t i) {
    const std::size_t l = i / trials, t = i % trials;
    const UnitaryMesh mesh =
        build_layout(layouts[l].second, n, ParamsInit::uniform_random, derive_seed(derive_seed(stream(cfg.seed, kFidelityMesh), l), t));
    const CMatrix u0 = mesh_transfer(mesh);
    const std::uint64_t noise_seed = derive_seed(derive_seed(stream(cfg.seed, kFidelityNoise), l), t);
    for (double s : sigmas) {
      Rng rng(noise_seed);
      values[l][t].push_back(fidelity(u0, mesh_transfer(perturb_mesh(mesh, s, s, rng))));
    }
  });
  ExperimentOutput out;
  for (std::size_t l = 0; l < nl; ++l) {
    const UnitaryMesh shape = build_layout(layouts[l].second, n);
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "mzi_count/" + layouts[l].first,
                                 static_cast<double>(shape.mzi_count()), cfg.seed));
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "depth/" + layouts[l].first,
                                 static_cast<double>(shape.layers.size()), cfg.seed));
  }
  Table curve{"fidelity_curve", {"sigma", "layout", "mean_fidelity", "p20", "p80"}, {}};
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    for (std::size_t l = 0; l < nl; ++l) {
      std::vector<double> f;
      const std::uint64_t noise_base = derive_seed(stream(cfg.seed, kFidelityNoise), l);
      for (std::size_t t = 0; t < trials; ++t) {
        f.push_back(values[l][t][si]);
        out.records.push_back(record(ex, static_cast<std::int64_t>(t), sigmas[si], sigmas[si], std::nullopt,
                                     "fidelity/" + layouts[l].first, values[l][t][si], derive_seed(noise_base, t)));
      }
      out.records.push_back(record(ex, kAggregateTrial, sigmas[si], sigmas[si], std::nullopt, "mean_fidelity/" + layouts[l].first,
                                   mean(f), noise_base));
      curve.rows.push_back({fmt(sigmas[si]), layouts[l].first, fmt(mean(f)), fmt(quantile(f, 0.2)), fmt(quantile(f, 0.8))});
    }
  }
  out.tables.push_back(std::move(curve));
  return out;
}

ExperimentOutput sensitivity_map(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test) {
  const std::string ex = "sensitivity_map";
  const auto& sc = cfg.sensitivity;
  const std::pair<std::string, const OnnModel*> orders[] = {{"ordered", &models.grid_descending}, {"random", &models.grid_random}};
  const auto layer = static_cast<std::size_t>(sc.layer);
  for (const auto& [name, m] : orders)
    if (layer >= m->multipliers.size()) throw UsageError("sensitivity.layer exceeds the model depth");
  const LinearMultiplier& ref = models.grid_random.multipliers[layer];
  const int n = ref.n();
  const int b = sc.block;

  struct Block {
    std::size_t order;
    int mesh;  // 0: V^dagger, 1: U
    int lb, le, wb, we;
  };
  std::vector<Block> blocks;
  for (std::size_t o = 0; o < 2; ++o) {
    for (int mesh = 0; mesh < 2; ++mesh) {
      const UnitaryMesh& um = mesh == 0 ? orders[o].second->multipliers[layer].v_dagger : orders[o].second->multipliers[layer].u;
      const int total = static_cast<int>(um.layers.size()) + 1;
      if (b > n || b > total) throw UsageError("sensitivity.block " + std::to_string(b) + " exceeds the mesh");
      for (int lb = 0; lb < total; lb += b)
        for (int wb = 0; wb < n; wb += b) blocks.push_back({o, mesh, lb, std::min(lb + b, total), wb, std::min(wb + b, n)});
    }
  }
  const auto trials = static_cast<std::size_t>(sc.trials);
  const std::uint64_t seed = stream(cfg.seed, kSensitivity);
  double ideal[2];
  for (std::size_t o = 0; o < 2; ++o) ideal[o] = accuracy(forward(*orders[o].second, test.x), test.labels);
  std::vector<double> delta(blocks.size() * trials);
  parallel_for(delta.size(), cfg.threads, [&](std::size_t i) {
    const Block& bk = blocks[i / trials];
    const std::size_t t = i % trials;
    NoiseSpec noise;
    noise.seed = seed;
    noise.block = BlockSpec{static_cast<int>(2 * layer) + bk.mesh, bk.lb, bk.le, bk.wb, bk.we, sc.sigma};
    delta[i] = accuracy(forward(perturb_model(*orders[bk.order].second, noise, t), test.x), test.labels) - ideal[bk.order];
  });

  ExperimentOutput out;
  Table heat{"sensitivity_heatmap", {"order", "mesh", "layer_begin", "layer_end", "wg_begin", "wg_end", "mean_delta"}, {}};
  Table trans{"sensitivity_transmissivity", {"order", "channel", "transmissivity"}, {}};
  const char* mesh_names[] = {"v_dagger", "u"};
  std::vector<double> block_mean(blocks.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const Block& bk = blocks[k];
    const std::string metric = "delta_accuracy/" + orders[bk.order].first + "/" + mesh_names[bk.mesh] + "/" +
                               std::to_string(bk.lb) + "/" + std::to_string(bk.wb);
    std::vector<double> d(delta.begin() + static_cast<std::ptrdiff_t>(k * trials),
                          delta.begin() + static_cast<std::ptrdiff_t>((k + 1) * trials));
    for (std::size_t t = 0; t < trials; ++t)
      out.records.push_back(record(ex, static_cast<std::int64_t>(t), sc.sigma, 0, std::nullopt, metric, d[t], derive_seed(seed, t)));
    block_mean[k] = mean(d);
    out.records.push_back(record(ex, kAggregateTrial, sc.sigma, 0, std::nullopt, "mean_" + metric, block_mean[k], seed));
    heat.rows.push_back({orders[bk.order].first, mesh_names[bk.mesh], std::to_string(bk.lb), std::to_string(bk.le),
                         std::to_string(bk.wb), std::to_string(bk.we), fmt(block_mean[k])});
  }

  // Waveguide bands of width b: impact of the blocks touching the attenuators
  // (output end of V^dagger, input end of U) against band transmissivity.
  const std::size_t bands = static_cast<std::size_t>((n + b - 1) / b);
  const std::size_t k_top = std::min<std::size_t>(static_cast<std::size_t>(sc.top_k), bands);
  const std::uint64_t perm_seed = stream(cfg.seed, kPermutation);
  for (std::size_t o = 0; o < 2; ++o) {
    const LinearMultiplier& lm = orders[o].second->multipliers[layer];
    const auto& name = orders[o].first;
    std::vector<double> band_t(bands, 0.0), band_impact(bands, 0.0), band_count(bands, 0.0), position(bands);
    for (int c = 0; c < n; ++c) {
      const double s = std::sin(lm.sigma.thetas[static_cast<std::size_t>(c)] / 2.0);
      const double t = lm.sigma.beta * s * s;
      band_t[static_cast<std::size_t>(c / b)] += t;
      out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "transmissivity/" + name + "/" + std::to_string(c), t, cfg.seed));
      trans.rows.push_back({name, std::to_string(c), fmt(t)});
    }
    const int total_v = static_cast<int>(lm.v_dagger.layers.size()) + 1;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      const Block& bk = blocks[k];
      if (bk.order != o) continue;
      const bool adjacent = bk.mesh == 0 ? bk.le > total_v - b : bk.lb < b;
      if (!adjacent) continue;
      const auto band = static_cast<std::size_t>(bk.wb / b);
      band_impact[band] += std::abs(block_mean[k]);
      band_count[band] += 1.0;
    }
    for (std::size_t w = 0; w < bands; ++w) {
      if (band_count[w] > 0) band_impact[w] /= band_count[w];
      position[w] = -static_cast<double>(w);  // larger means closer to the top
    }
    const auto overlap = [k_top](std::span<const double> a, std::span<const double> c) { return top_k_overlap(a, c, k_top); };
    const auto abs_rho = [](std::span<const double> a, std::span<const double> c) {
      const double r = spearman(a, c);
      return std::isfinite(r) ? std::abs(r) : 0.0;
    };
    const std::pair<std::string, double> stats[] = {
        {"top_k_overlap", overlap(band_impact, band_t)},
        {"top_k_p_value", permutation_p_value(band_impact, band_t, overlap, sc.permutations, derive_seed(perm_seed, 4 * o))},
        {"spearman_transmissivity", spearman(band_impact, band_t)},
        {"spearman_transmissivity_p_value", permutation_p_value(band_impact, band_t, abs_rho, sc.permutations, derive_seed(perm_seed, 4 * o + 1))},
        {"spearman_position", spearman(band_impact, position)},
        {"spearman_position_p_value", permutation_p_value(band_impact, position, abs_rho, sc.permutations, derive_seed(perm_seed, 4 * o + 2))},
    };
    for (const auto& [stat, v] : stats)
      out.records.push_back(record(ex, kAggregateTrial, sc.sigma, 0, std::nullopt, "stat/" + name + "/" + stat, v, perm_seed));
  }
  out.tables.push_back(std::move(heat));
  out.tables.push_back(std::move(trans));
  return out;
}

ExperimentOutput ordered_vs_random(const ExperimentConfig& cfg, const ModelSet& models, const EncodedSet& test) {
  return noise_grid_output(cfg, "ordered_vs_random", diagonal_cells(cfg),
                           {{"ordered", &models.grid_descending}, {"random", &models.grid_random}}, test, 0);
}

ExperimentOutput quant_sweep(const ExperimentConfig& cfg, std::span<const ModelSet> instances, const EncodedSet& test) {
  const std::string ex = "quant_sweep";
  std::vector<std::optional<int>> levels{std::nullopt};
  for (int b : cfg.quant.bits) levels.emplace_back(b);
  const char* fams[] = {"grid", "fft"};
  const std::size_t ni = instances.size();
  std::vector<double> acc(levels.size() * 2 * ni);
  parallel_for(acc.size(), cfg.threads, [&](std::size_t i) {
    const std::size_t inst = i % ni, f = (i / ni) % 2, q = i / (2 * ni);
    const OnnModel& m = f == 0 ? instances[inst].grid_random : instances[inst].fft;
    NoiseSpec noise;
    noise.quant_bits = levels[q];
    acc[i] = accuracy(forward(perturb_model(m, noise, 0), test.x), test.labels);
  });
  ExperimentOutput out;
  Table curve{"quant_curve", {"bits", "family", "mean_accuracy", "mean_drop"}, {}};
  for (std::size_t q = 0; q < levels.size(); ++q) {
    for (std::size_t f = 0; f < 2; ++f) {
      std::vector<double> a, drop;
      for (std::size_t inst = 0; inst < ni; ++inst) {
        const double v = acc[(q * 2 + f) * ni + inst];
        a.push_back(v);
        drop.push_back(acc[f * ni + inst] - v);
        out.records.push_back(record(ex, static_cast<std::int64_t>(inst), 0, 0, levels[q], std::string("accuracy/") + fams[f], v,
                                     instance_seed(cfg.seed, static_cast<int>(inst))));
      }
      out.records.push_back(record(ex, kAggregateTrial, 0, 0, levels[q], std::string("mean_accuracy/") + fams[f], mean(a), cfg.seed));
      out.records.push_back(record(ex, kAggregateTrial, 0, 0, levels[q], std::string("mean_drop/") + fams[f], mean(drop), cfg.seed));
      curve.rows.push_back({levels[q] ? std::to_string(*levels[q]) : "", fams[f], fmt(mean(a)), fmt(mean(drop))});
    }
  }
  out.tables.push_back(std::move(curve));
  return out;
}

ExperimentOutput phase_hist(const ExperimentConfig& cfg, std::span<const OnnModel> fft_models) {
  const std::string ex = "phase_hist";
  const auto& pc = cfg.phase_hist;
  const int n = pc.n;
  const auto bins = static_cast<std::size_t>(pc.bins);
  const double two_pi = 2.0 * std::numbers::pi;
  const std::uint64_t haar_seed = stream(cfg.seed, kHaar);
  std::vector<UnitaryMesh> meshes(static_cast<std::size_t>(pc.samples));
  parallel_for(meshes.size(), cfg.threads, [&](std::size_t s) {
    meshes[s] = clements_decompose(haar_random_unitary(static_cast<std::size_t>(n), derive_seed(haar_seed, s)));
  });
  const auto cells = phase_statistics(meshes);

  ExperimentOutput out;
  Table hist{"phase_hist_bins", {"ensemble", "region", "bin", "lo", "hi", "count"}, {}};
  Table beta{"phase_hist_beta", {"layer", "waveguide", "beta_theory", "mean_theta", "var_theta"}, {}};
  auto add_hist = [&](const std::string& ensemble, const std::string& region, std::span<const double> v) {
    const auto counts = histogram(v, 0.0, two_pi, bins);
    std::size_t total = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double w = two_pi / static_cast<double>(bins);
      hist.rows.push_back({ensemble, region, std::to_string(k), fmt(k * w), fmt((k + 1) * w), std::to_string(counts[k])});
      total += counts[k];
    }
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "count/" + ensemble + "/" + region,
                                 static_cast<double>(total), cfg.seed));
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "variance/" + ensemble + "/" + region, variance(v), cfg.seed));
  };

  auto find_cell = [&](int layer, int wg) -> const std::vector<double>& {
    for (const auto& c : cells)
      if (c.layer == layer && c.waveguide == wg) return c.thetas;
    throw std::logic_error("phase_hist: missing cell");
  };
  const auto& center = find_cell(n / 2, n / 2);
  const auto& edge = find_cell(n / 2, (n / 2) % 2);
  const auto& corner = find_cell(0, 0);
  std::vector<double> all;
  for (const auto& c : cells) {
    all.insert(all.end(), c.thetas.begin(), c.thetas.end());
    beta.rows.push_back({std::to_string(c.layer), std::to_string(c.waveguide),
                         fmt(beta_theory(c.waveguide, c.layer, n)), fmt(mean(c.thetas)), fmt(variance(c.thetas))});
  }
  add_hist("haar_grid", "all", all);
  add_hist("haar_grid", "center", center);
  add_hist("haar_grid", "edge", edge);
  add_hist("haar_grid", "corner", corner);
  const auto var = [](std::span<const double> x) { return variance(x); };
  const std::uint64_t boot = stream(cfg.seed, kBootstrap);
  out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "bootstrap/haar_grid/corner_var_gt_center",
                               bootstrap_greater(corner, center, var, cfg.bootstrap_resamples, derive_seed(boot, 0)), boot));
  out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "bootstrap/haar_grid/edge_var_gt_center",
                               bootstrap_greater(edge, center, var, cfg.bootstrap_resamples, derive_seed(boot, 1)), boot));

  if (!fft_models.empty()) {
    std::vector<double> top, mid, every;
    for (const auto& m : fft_models) {
      for (const auto& lm : m.multipliers) {
        for (const UnitaryMesh* um : {&lm.v_dagger, &lm.u}) {
          const int w = um->n;
          for (const auto& l : um->layers) {
            for (const auto& z : l.mzis) {
              const double th = wrap_phase(z.params.theta);
              every.push_back(th);
              if (z.top < w / 4) top.push_back(th);
              if (z.top >= 3 * w / 8 && z.top < 5 * w / 8) mid.push_back(th);
            }
          }
        }
      }
    }
    add_hist("fft_trained", "all", every);
    add_hist("fft_trained", "top", top);
    add_hist("fft_trained", "center", mid);
    const auto ks = ks_two_sample(mid, top);
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "ks/fft_trained/center_vs_top/statistic", ks.statistic, cfg.seed));
    out.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, "ks/fft_trained/center_vs_top/p_value", ks.p_value, cfg.seed));
  }
  out.tables.push_back(std::move(hist));
  out.tables.push_back(std::move(beta));
  return out;
}

ExperimentOutput blockfft_sweep(const ExperimentConfig& cfg, const ModelSet& models, const OnnModel& block_model,
                                const EncodedSet& test) {
  auto out = noise_grid_output(cfg, "blockfft", diagonal_cells(cfg),
                               {{"grid", &models.grid_random}, {"fft", &models.fft}, {"block_fft", &block_model}}, test, 0);
  const double top = cfg.noise.sigma_ps.back();
  for (const char* fam : {"grid", "fft", "block_fft"}) {
    const double drop = mean(select_values(out.records, std::string("accuracy/") + fam, 0.0, 0.0)) -
                        mean(select_values(out.records, std::string("accuracy/") + fam, top, top));
    out.records.push_back(record("blockfft", kAggregateTrial, top, top, std::nullopt, std::string("drop/") + fam, drop, cfg.seed));
  }
  return out;
}

FftCheck fft_check(int n) {
  if (!power_of_two(n) || n < 2 || n > 1024) throw UsageError("fft-check: n must be a power of two in [2, 1024]");
  const std::string ex = "fft_check";
  FftCheck r;
  const FftConfig cfg = fft_configure(n);
  const CMatrix t = fft_transfer(cfg);
  const CMatrix d = dft_matrix(n);
  r.max_error = max_abs_diff(t, d);
  r.fidelity = fidelity(d, t);
  Rng rng(static_cast<std::uint64_t>(n));
  const auto un = static_cast<std::size_t>(n);
  CVector kernel(un), x(un), delta(un, cdouble{});
  for (auto& v : kernel) v = cdouble(rng.normal(), rng.normal());
  for (auto& v : x) v = cdouble(rng.normal(), rng.normal());
  delta[0] = 1.0;
  const CVector y = circular_convolve(cfg, kernel, x);
  for (std::size_t i = 0; i < un; ++i) {
    cdouble direct{};
    for (std::size_t j = 0; j < un; ++j) direct += kernel[j] * x[(i + un - j) % un];
    r.convolution_error = std::max(r.convolution_error, std::abs(y[i] - direct));
  }
  const CVector id = circular_convolve(cfg, delta, x);
  for (std::size_t i = 0; i < un; ++i) r.identity_convolution_error = std::max(r.identity_convolution_error, std::abs(id[i] - x[i]));
  r.passed = r.max_error < 1e-10 && r.fidelity >= 1.0 - 1e-10 && r.convolution_error < 1e-9 * std::sqrt(static_cast<double>(n)) &&
             r.identity_convolution_error < 1e-12;
  const auto nn = static_cast<std::uint64_t>(n);
  for (const auto& [m, v] : {std::pair<const char*, double>{"max_entry_error", r.max_error},
                             {"fidelity", r.fidelity},
                             {"convolution_error", r.convolution_error},
                             {"identity_convolution_error", r.identity_convolution_error},
                             {"passed", r.passed ? 1.0 : 0.0}})
    r.output.records.push_back(record(ex, kAggregateTrial, 0, 0, std::nullopt, m, v, nn));
  return r;
}

ExperimentOutput laser_noise(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  out.records.push_back(record("laser_noise", kAggregateTrial, 0, 0, std::nullopt, "linewidth_hz", cfg.laser.linewidth_hz, 0));
  out.records.push_back(record("laser_noise", kAggregateTrial, 0, 0, std::nullopt, "length_m", cfg.laser.length_m, 0));
  out.records.push_back(record("laser_noise", kAggregateTrial, 0, 0, std::nullopt, "sigma_phi",
                               laser_phase_sigma(cfg.laser.linewidth_hz, cfg.laser.length_m), 0));
  return out;
}

std::vector<double> select_values(std::span<const ResultRecord> records, const std::string& metric, double sigma_ps,
                                  double sigma_bs, std::optional<int> quant_bits) {
  std::vector<std::pair<std::int64_t, double>> hits;
  for (const auto& r : records)
    if (r.trial >= 0 && r.metric == metric && r.sigma_ps == sigma_ps && r.sigma_bs == sigma_bs && r.quant_bits == quant_bits)
      hits.emplace_back(r.trial, r.value);
  std::sort(hits.begin(), hits.end());
  std::vector<double> v;
  for (const auto& h : hits) v.push_back(h.second);
  return v;
}

void write_output(const ExperimentOutput& out, const std::string& experiment, const std::string& dir) {
  fs::create_directories(dir);
  write_results(out.records, (fs::path(dir) / (experiment + ".csv")).string());
  for (const auto& t : out.tables) write_csv_table(t, (fs::path(dir) / (t.name + ".csv")).string());
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"train",      "sweep-noise", "fidelity", "sensitivity-map", "ordered-vs-random",
                                              "quant-sweep", "phase-hist", "blockfft", "fft-check",       "laser-noise"};
  return names;
}

namespace {

void log_means(std::ostream& log, const ExperimentOutput& out, const std::string& prefix) {
  for (const auto& r : out.records)
    if (r.trial == kAggregateTrial && r.metric.rfind(prefix, 0) == 0)
      log << "  " << r.metric << " sigma_ps=" << format_double(r.sigma_ps) << " sigma_bs=" << format_double(r.sigma_bs)
          << (r.quant_bits ? " bits=" + std::to_string(*r.quant_bits) : std::string()) << ": " << format_double(r.value) << '\n';
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::string& dir = cfg.out_dir;
  std::string experiment = command;
  std::replace(experiment.begin(), experiment.end(), '-', '_');
  auto finish = [&](const ExperimentOutput& out) {
    write_output(out, experiment, dir);
    std::ofstream(fs::path(dir) / (experiment + ".config.json")) << config_to_json(cfg).dump(2) << '\n';
    log << "wrote " << (fs::path(dir) / (experiment + ".csv")).string() << " (" << out.records.size() << " records)\n";
  };

  if (command == "train") {
    const TaskData data = load_task(cfg);
    log << "training dense and fft models (" << cfg.training.epochs << " epochs, " << data.train.size() << " examples)\n";
    const ModelSet models = train_models(cfg, data, instance_seed(cfg.seed, 0), cfg.threads);
    save_checkpoints(models, cfg.checkpoints());
    const auto out = train_report(cfg, models, data);
    log_means(log, out, "accuracy/");
    log_means(log, out, "max_prob_diff_vs_dense/");
    finish(out);
    return 0;
  }
  if (command == "sweep-noise") {
    const ModelSet models = load_checkpoints(cfg.checkpoints());
    const auto out = sweep_noise(cfg, models, load_task(cfg).test);
    log_means(log, out, "diagonal_spearman/");
    finish(out);
    return 0;
  }
  if (command == "fidelity") {
    const auto out = fidelity_sweep(cfg);
    log_means(log, out, "mean_fidelity/");
    finish(out);
    return 0;
  }
  if (command == "sensitivity-map") {
    const ModelSet models = load_checkpoints(cfg.checkpoints());
    const auto out = sensitivity_map(cfg, models, load_task(cfg).test);
    log_means(log, out, "stat/");
    finish(out);
    return 0;
  }
  if (command == "ordered-vs-random") {
    const ModelSet models = load_checkpoints(cfg.checkpoints());
    const auto out = ordered_vs_random(cfg, models, load_task(cfg).test);
    log_means(log, out, "mean_accuracy/");
    finish(out);
    return 0;
  }
  if (command == "quant-sweep") {
    const TaskData data = load_task(cfg);
    std::vector<ModelSet> instances(static_cast<std::size_t>(cfg.quant.instances));
    log << "training " << instances.size() << " instances of each family\n";
    parallel_for(instances.size(), cfg.threads, [&](std::size_t i) {
      instances[i] = train_models(cfg, data, instance_seed(cfg.seed, static_cast<int>(i)), 1);
    });
    const auto out = quant_sweep(cfg, instances, data.test);
    log_means(log, out, "mean_accuracy/");
    finish(out);
    return 0;
  }
  if (command == "phase-hist") {
    std::vector<OnnModel> fft(static_cast<std::size_t>(cfg.phase_hist.fft_instances));
    if (!fft.empty()) {
      const TaskData data = load_task(cfg);
      log << "training " << fft.size() << " fft instances\n";
      parallel_for(fft.size(), cfg.threads, [&](std::size_t i) {
        std::vector<double> loss;
        fft[i] = train_fft(cfg, data, instance_seed(cfg.seed, static_cast<int>(i)), loss);
      });
    }
    const auto out = phase_hist(cfg, fft);
    log_means(log, out, "bootstrap/");
    log_means(log, out, "ks/");
    finish(out);
    return 0;
  }
  if (command == "blockfft") {
    const TaskData data = load_task(cfg);
    const ModelSet models = load_checkpoints(cfg.checkpoints());
    log << "training block_fft(" << cfg.blockfft.block << ") model\n";
    const OnnModel block = train_block_fft(cfg, data, instance_seed(cfg.seed, 0));
    const auto out = blockfft_sweep(cfg, models, block, data.test);
    log_means(log, out, "drop/");
    finish(out);
    return 0;
  }
  if (command == "fft-check") {
    const FftCheck r = fft_check(cfg.fft_check_n);
    log << "n=" << cfg.fft_check_n << " max entry error " << format_double(r.max_error) << ", fidelity "
        << format_double(r.fidelity) << ", convolution error " << format_double(r.convolution_error)
        << ", identity kernel error " << format_double(r.identity_convolution_error) << '\n'
        << (r.passed ? "PASS" : "FAIL") << '\n';
    finish(r.output);
    return r.passed ? 0 : 2;
  }
  if (command == "laser-noise") {
    const auto out = laser_noise(cfg);
    log << "sigma_phi = " << format_double(out.records.back().value) << " rad\n";
    finish(out);
    return 0;
  }
  throw UsageError("unknown command '" + command + "'");
}

}  // namespace mzinet
