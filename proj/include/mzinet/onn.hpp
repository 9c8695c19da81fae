#pragma once

// Optical neural network: complex encoding, saturable-absorber nonlinearity,
// batched forward pass, analytic gradients, SGD training and evaluation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzinet/complex_core.hpp"
#include "mzinet/decompose.hpp"
#include "mzinet/imprecision.hpp"
#include "mzinet/mesh.hpp"

namespace mzinet {

/// Non-finite values during a forward pass or training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shifted and biased Softplus: sigma(u) = log((1 + e^{b(u - u0)}) / (1 + e^{-b u0})) / b
/// with b = 2 and u0 = log(1 / t0 - 1) / 2, so that sigma(0) = 0 and sigma'(0) = t0.
struct SatAbsParams {
  static constexpr double beta = 2.0;
  double t0 = 0.5;

  double u0() const;
  friend bool operator==(const SatAbsParams&, const SatAbsParams&) = default;
};

double satabs(double u, const SatAbsParams& p);
double satabs_derivative(double u, const SatAbsParams& p);
/// Acts on the modulus and keeps the phase; 0 maps to 0.
cdouble satabs(cdouble z, const SatAbsParams& p);

/// Top half of an H x W image (row-major) becomes the real part, bottom half
/// the imaginary part. Throws DimensionError for odd H or a size mismatch.
CVector encode_complex(std::span<const double> pixels, int height, int width);

enum class ModelMode { dense, grid_mesh, fft_mesh, block_fft_mesh };
std::string to_string(ModelMode mode);
ModelMode model_mode_from_string(const std::string& s);

/// Square linear layers of width n with satabs after every layer but the last,
/// then |.|^2 on the first n_classes outputs and a SoftMax.
struct OnnModel {
  ModelMode mode = ModelMode::dense;
  int width = 0;
  int n_classes = 10;
  SatAbsParams nonlinearity;
  std::vector<CMatrix> weights;               // dense mode
  std::vector<LinearMultiplier> multipliers;  // every other mode
  std::string lineage;

  std::size_t depth() const { return mode == ModelMode::dense ? weights.size() : multipliers.size(); }
  /// Throws DimensionError for inconsistent shapes.
  void validate() const;
  friend bool operator==(const OnnModel&, const OnnModel&) = default;
};

struct ModelShape {
  int width = 128;
  int depth = 3;
  int n_classes = 10;
};

/// Dense weights with i.i.d. CN(0, 1 / width) entries.
OnnModel make_dense_model(const ModelShape& shape, const SatAbsParams& nl, std::uint64_t seed);
/// Multipliers on `layout` meshes with uniformly random phases and attenuators
/// drawn uniformly in theta on [pi / 2, pi). Mode follows the layout kind.
OnnModel make_mesh_model(const ModelShape& shape, const Layout& layout, const SatAbsParams& nl, double beta,
                         std::uint64_t seed);

/// Row-major batch x classes probabilities.
struct Probabilities {
  std::size_t batch = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double operator()(std::size_t b, std::size_t c) const { return values[b * classes + c]; }
  std::span<const double> row(std::size_t b) const { return {values.data() + b * classes, classes}; }
};

/// Output fields of the last linear layer for a width x B batch of columns.
CMatrix forward_fields(const OnnModel& model, CMatrix x);
std::vector<double> softmax_intensities(std::span<const cdouble> fields, int n_classes);
Probabilities forward(const OnnModel& model, const CMatrix& x);
std::vector<double> forward(const OnnModel& model, std::span<const cdouble> x);

/// -log(probs[label]) with probs[label] floored at 1e-30; *floored is set when
/// the floor was hit.
double cross_entropy(std::span<const double> probs, int label, bool* floored = nullptr);

enum class ParamClass { dense_re, dense_im, mzi_theta, mzi_phi, output_phase, diag_theta, diag_beta };
std::string to_string(ParamClass c);

/// Flat view of the trainable parameters. Dense: real and imaginary parts of
/// every weight, row-major. Mesh modes, per layer: V^dagger mesh (theta, phi
/// per MZI then output phases), attenuator thetas, beta, then the U mesh.
std::vector<double> get_parameters(const OnnModel& model);
void set_parameters(OnnModel& model, std::span<const double> params);
std::vector<ParamClass> parameter_classes(const OnnModel& model);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as get_parameters
  std::size_t floored = 0;
};

/// Mean cross-entropy over the columns of x.
double mean_loss(const OnnModel& model, const CMatrix& x, std::span<const int> labels);
/// Mean cross-entropy and its exact gradient. For a complex weight w the pair
/// (dL/dRe w, dL/dIm w) equals 2 dL/d conj(w), the steepest ascent direction.
LossGradient loss_and_gradient(const OnnModel& model, const CMatrix& x, std::span<const int> labels);

/// Encoded examples as columns of a width x N matrix.
struct EncodedSet {
  CMatrix x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  EncodedSet subset(std::span<const std::size_t> indices) const;
};

struct TrainConfig {
  int epochs = 5;
  int batch_size = 32;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  SingularOrder singular_order = SingularOrder::random;
  /// Epoch e uses learning_rate * lr_decay^e.
  double lr_decay = 1.0;

  void validate() const;
};

struct TrainResult {
  OnnModel model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Plain mini-batch SGD (no momentum); batch order reshuffled each epoch from
/// derive_seed(seed, epoch).
/// Throws NumericalError when the loss stops being finite.
TrainResult train(const OnnModel& initial, const EncodedSet& data, const TrainConfig& cfg);

/// SVD of every dense weight, singular values reordered, both unitaries
/// decomposed onto grid meshes. The random order of layer k uses
/// derive_seed(seed, k).
OnnModel grid_from_dense(const OnnModel& dense, SingularOrder order, std::uint64_t seed);

/// Argmax with ties going to the lowest class index.
std::vector<int> predict(const OnnModel& model, const CMatrix& x);
double evaluate(const OnnModel& model, const EncodedSet& data);

/// counts[true][predicted].
using Confusion = std::vector<std::vector<double>>;
Confusion confusion_matrix(const OnnModel& model, const EncodedSet& data);
/// Averages output probabilities over the ensemble before the argmax.
Confusion confusion_matrix(std::span<const OnnModel> ensemble, const EncodedSet& data);
/// Mean output distribution per true class (rows sum to 1 for present classes).
Confusion mean_probability_matrix(std::span<const OnnModel> ensemble, const EncodedSet& data);

/// Perturbed copy of a mesh-mode model for one Monte-Carlo trial, drawing from
/// derive_seed(noise.seed, trial). Quantization is applied first, then phase
/// and splitter noise on every mesh and phase noise on every attenuator in
/// layer order, then the optional block fault. Throws std::invalid_argument for
/// dense models.
OnnModel perturb_model(const OnnModel& model, const NoiseSpec& noise, std::uint64_t trial);

/// Empirical theta samples per MZI position across an ensemble of meshes.
struct PhaseCell {
  int layer = 0;
  int waveguide = 0;  // top waveguide of the MZI
  std::vector<double> thetas;
};

/// Throws std::invalid_argument when the meshes do not share one layout.
std::vector<PhaseCell> phase_statistics(std::span<const UnitaryMesh> meshes);
/// n - 2 max(|d - n/2|, |l - n/2|), floored at 0.
double beta_theory(double d, double l, double n);

}  // namespace mzinet
