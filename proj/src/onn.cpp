#include "mzinet/onn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace mzinet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kProbFloor = 1e-30;
constexpr std::size_t kChunk = 256;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::size_t mesh_param_count(const UnitaryMesh& m) { return 2 * m.mzi_count() + static_cast<std::size_t>(m.n); }

std::size_t multiplier_param_count(const LinearMultiplier& lm) {
  return mesh_param_count(lm.v_dagger) + lm.sigma.thetas.size() + 1 + mesh_param_count(lm.u);
}

void check_finite(const CMatrix& x, std::size_t layer) {
  if (!x.all_finite()) throw NumericalError("non-finite activation after linear layer " + std::to_string(layer));
}

void satabs_inplace(CMatrix& x, const SatAbsParams& p) {
  for (auto& z : x.entries()) z = satabs(z, p);
}

CMatrix column_range(const CMatrix& x, std::size_t begin, std::size_t end) {
  CMatrix out(x.rows(), end - begin);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin), src.begin() + static_cast<std::ptrdiff_t>(end), out.row(r).begin());
  }
  return out;
}

void apply_linear(const OnnModel& model, std::size_t k, CMatrix& x) {
  if (model.mode == ModelMode::dense) {
    x = matmul(model.weights[k], x);
  } else {
    apply_inplace(model.multipliers[k], x);
  }
}

// Flat parameter traversal shared by get/set/classes.
template <typename MeshFn, typename ScalarFn>
void visit_mesh(UnitaryMesh& m, MeshFn&& mzi, ScalarFn&& scalar) {
  for (auto& layer : m.layers)
    for (auto& z : layer.mzis) mzi(z.params);
  for (double& p : m.output_phases) scalar(p, ParamClass::output_phase);
}

template <typename MziFn, typename ScalarFn, typename WeightFn>
void visit_parameters(OnnModel& model, MziFn&& mzi, ScalarFn&& scalar, WeightFn&& weight) {
  if (model.mode == ModelMode::dense) {
    for (auto& w : model.weights)
      for (auto& z : w.entries()) weight(z);
    return;
  }
  for (auto& lm : model.multipliers) {
    visit_mesh(lm.v_dagger, mzi, scalar);
    for (double& t : lm.sigma.thetas) scalar(t, ParamClass::diag_theta);
    scalar(lm.sigma.beta, ParamClass::diag_beta);
    visit_mesh(lm.u, mzi, scalar);
  }
}

// Runs the mesh backwards from its output `y` with output gradient `g`. On
// return y holds the mesh input, g the input gradient, and `grad` (laid out as
// in get_parameters) has accumulated dL/dtheta, dL/dphi and dL/dalpha.
void mesh_backward(const UnitaryMesh& m, CMatrix& y, CMatrix& g, std::span<double> grad) {
  const std::size_t cols = y.cols();
  const std::size_t phase_offset = 2 * m.mzi_count();
  for (int k = 0; k < m.n; ++k) {
    const auto row = static_cast<std::size_t>(k);
    const cdouble inv = std::polar(1.0, -m.output_phases[row]);
    auto yr = y.row(row);
    auto gr = g.row(row);
    double d = 0.0;
    for (std::size_t b = 0; b < cols; ++b) {
      d -= (std::conj(gr[b]) * yr[b]).imag();
      yr[b] *= inv;
      gr[b] *= inv;
    }
    grad[phase_offset + row] += d;
  }
  std::size_t offset = phase_offset;
  for (auto layer = m.layers.rbegin(); layer != m.layers.rend(); ++layer) {
    offset -= 2 * layer->mzis.size();
    for (std::size_t j = 0; j < layer->mzis.size(); ++j) {
      const Mzi& mzi = layer->mzis[j];
      const Mat2 t = mzi_matrix_full(mzi.params);
      const Mat2 dt = mzi_matrix_dtheta(mzi.params);
      const Mat2 h{std::conj(t.a), std::conj(t.c), std::conj(t.b), std::conj(t.d)};
      const cdouble it_a = cdouble(0.0, 1.0) * t.a;
      const cdouble it_c = cdouble(0.0, 1.0) * t.c;
      cdouble* ya = y.row(static_cast<std::size_t>(mzi.top)).data();
      cdouble* yb = y.row(static_cast<std::size_t>(mzi.bottom)).data();
      cdouble* ga = g.row(static_cast<std::size_t>(mzi.top)).data();
      cdouble* gb = g.row(static_cast<std::size_t>(mzi.bottom)).data();
      double d_theta = 0.0, d_phi = 0.0;
      for (std::size_t b = 0; b < cols; ++b) {
        const cdouble xa = h.a * ya[b] + h.b * yb[b];
        const cdouble xb = h.c * ya[b] + h.d * yb[b];
        const cdouble cga = std::conj(ga[b]);
        const cdouble cgb = std::conj(gb[b]);
        d_theta += (cga * (dt.a * xa + dt.b * xb) + cgb * (dt.c * xa + dt.d * xb)).real();
        d_phi += ((cga * it_a + cgb * it_c) * xa).real();
        const cdouble na = h.a * ga[b] + h.b * gb[b];
        const cdouble nb = h.c * ga[b] + h.d * gb[b];
        ya[b] = xa;
        yb[b] = xb;
        ga[b] = na;
        gb[b] = nb;
      }
      grad[offset + 2 * j] += d_theta;
      grad[offset + 2 * j + 1] += d_phi;
    }
    if (layer->pre_permutation) {
      const auto& perm = *layer->pre_permutation;
      std::vector<int> inverse(perm.size());
      for (std::size_t k = 0; k < perm.size(); ++k) inverse[static_cast<std::size_t>(perm[k])] = static_cast<int>(k);
      permute_rows(y, inverse);
      permute_rows(g, inverse);
    }
  }
}

std::size_t argmax_lowest(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c)
    if (p[c] > p[best]) best = c;
  return best;
}

void check_labels(const CMatrix& x, std::span<const int> labels, int n_classes) {
  if (x.cols() != labels.size()) throw DimensionError("batch has " + std::to_string(x.cols()) + " columns but " + std::to_string(labels.size()) + " labels");
  for (int l : labels)
    if (l < 0 || l >= n_classes) throw std::invalid_argument("label " + std::to_string(l) + " out of range");
}

}  // namespace

double SatAbsParams::u0() const { return 0.5 * std::log(1.0 / t0 - 1.0); }

double satabs(double u, const SatAbsParams& p) {
  const double u0 = p.u0();
  return (softplus(SatAbsParams::beta * (u - u0)) - softplus(-SatAbsParams::beta * u0)) / SatAbsParams::beta;
}

double satabs_derivative(double u, const SatAbsParams& p) { return sigmoid(SatAbsParams::beta * (u - p.u0())); }

cdouble satabs(cdouble z, const SatAbsParams& p) {
  const double r = std::abs(z);
  if (r == 0.0) return {};
  return z * (satabs(r, p) / r);
}

CVector encode_complex(std::span<const double> pixels, int height, int width) {
  if (height <= 0 || width <= 0 || height % 2 != 0) throw DimensionError("encode_complex: height must be positive and even");
  if (pixels.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width))
    throw DimensionError("encode_complex: pixel count does not match shape");
  const std::size_t half = pixels.size() / 2;
  CVector out(half);
  for (std::size_t k = 0; k < half; ++k) out[k] = cdouble(pixels[k], pixels[half + k]);
  return out;
}

std::string to_string(ModelMode mode) {
  switch (mode) {
    case ModelMode::dense: return "dense";
    case ModelMode::grid_mesh: return "grid_mesh";
    case ModelMode::fft_mesh: return "fft_mesh";
    case ModelMode::block_fft_mesh: return "block_fft_mesh";
  }
  return "dense";
}

ModelMode model_mode_from_string(const std::string& s) {
  for (ModelMode m : {ModelMode::dense, ModelMode::grid_mesh, ModelMode::fft_mesh, ModelMode::block_fft_mesh})
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown model mode '" + s + "'");
}

std::string to_string(ParamClass c) {
  switch (c) {
    case ParamClass::dense_re: return "dense_re";
    case ParamClass::dense_im: return "dense_im";
    case ParamClass::mzi_theta: return "mzi_theta";
    case ParamClass::mzi_phi: return "mzi_phi";
    case ParamClass::output_phase: return "output_phase";
    case ParamClass::diag_theta: return "diag_theta";
    case ParamClass::diag_beta: return "diag_beta";
  }
  return "?";
}

void OnnModel::validate() const {
  if (width <= 0 || n_classes <= 0 || n_classes > width) throw DimensionError("model: invalid width / class count");
  if (depth() == 0) throw DimensionError("model: no layers");
  if (mode == ModelMode::dense) {
    for (const auto& w : weights)
      if (static_cast<int>(w.rows()) != width || static_cast<int>(w.cols()) != width) throw DimensionError("model: dense weight shape");
  } else {
    for (const auto& lm : multipliers) {
      if (lm.v_dagger.n != width || lm.u.n != width || lm.sigma.n() != width) throw DimensionError("model: multiplier shape");
      lm.v_dagger.validate();
      lm.u.validate();
    }
  }
}

OnnModel make_dense_model(const ModelShape& shape, const SatAbsParams& nl, std::uint64_t seed) {
  OnnModel m;
  m.mode = ModelMode::dense;
  m.width = shape.width;
  m.n_classes = shape.n_classes;
  m.nonlinearity = nl;
  m.lineage = "dense init seed " + std::to_string(seed);
  Rng rng(seed);
  const double scale = std::sqrt(0.5 / shape.width);
  for (int k = 0; k < shape.depth; ++k) {
    CMatrix w(static_cast<std::size_t>(shape.width), static_cast<std::size_t>(shape.width));
    for (auto& z : w.entries()) {
      const double re = rng.normal();
      z = scale * cdouble(re, rng.normal());
    }
    m.weights.push_back(std::move(w));
  }
  m.validate();
  return m;
}

OnnModel make_mesh_model(const ModelShape& shape, const Layout& layout, const SatAbsParams& nl, double beta, std::uint64_t seed) {
  OnnModel m;
  switch (layout.kind) {
    case LayoutKind::fft:
    case LayoutKind::stacked_fft: m.mode = ModelMode::fft_mesh; break;
    case LayoutKind::block_fft: m.mode = ModelMode::block_fft_mesh; break;
    case LayoutKind::grid:
    case LayoutKind::trunc_grid: m.mode = ModelMode::grid_mesh; break;
    case LayoutKind::custom: throw std::invalid_argument("make_mesh_model: custom layouts are not generated");
  }
  m.width = shape.width;
  m.n_classes = shape.n_classes;
  m.nonlinearity = nl;
  m.lineage = to_string(layout) + " init seed " + std::to_string(seed);
  for (int k = 0; k < shape.depth; ++k) {
    const auto base = 3 * static_cast<std::uint64_t>(k);
    LinearMultiplier lm;
    lm.v_dagger = build_layout(layout, shape.width, ParamsInit::uniform_random, derive_seed(seed, base));
    lm.u = build_layout(layout, shape.width, ParamsInit::uniform_random, derive_seed(seed, base + 1));
    Rng rng(derive_seed(seed, base + 2));
    lm.sigma.beta = beta;
    lm.sigma.thetas.resize(static_cast<std::size_t>(shape.width));
    for (double& t : lm.sigma.thetas) t = rng.uniform(kPi / 2, kPi);
    m.multipliers.push_back(std::move(lm));
  }
  m.validate();
  return m;
}

CMatrix forward_fields(const OnnModel& model, CMatrix x) {
  if (static_cast<int>(x.rows()) != model.width) throw DimensionError("forward: input has " + std::to_string(x.rows()) + " rows, model width is " + std::to_string(model.width));
  const std::size_t depth = model.depth();
  for (std::size_t k = 0; k < depth; ++k) {
    apply_linear(model, k, x);
    check_finite(x, k);
    if (k + 1 < depth) satabs_inplace(x, model.nonlinearity);
  }
  return x;
}

std::vector<double> softmax_intensities(std::span<const cdouble> fields, int n_classes) {
  if (n_classes <= 0 || fields.size() < static_cast<std::size_t>(n_classes)) throw DimensionError("softmax: too few outputs");
  std::vector<double> p(static_cast<std::size_t>(n_classes));
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < p.size(); ++c) {
    p[c] = std::norm(fields[c]);
    top = std::max(top, p[c]);
  }
  double sum = 0.0;
  for (double& v : p) sum += (v = std::exp(v - top));
  for (double& v : p) v /= sum;
  return p;
}

Probabilities forward(const OnnModel& model, const CMatrix& x) {
  Probabilities out{x.cols(), static_cast<std::size_t>(model.n_classes), {}};
  out.values.reserve(out.batch * out.classes);
  CVector col(static_cast<std::size_t>(model.n_classes));
  for (std::size_t begin = 0; begin < x.cols(); begin += kChunk) {
    const std::size_t end = std::min(x.cols(), begin + kChunk);
    const CMatrix y = forward_fields(model, column_range(x, begin, end));
    for (std::size_t b = 0; b < y.cols(); ++b) {
      for (std::size_t c = 0; c < col.size(); ++c) col[c] = y(c, b);
      const auto p = softmax_intensities(col, model.n_classes);
      out.values.insert(out.values.end(), p.begin(), p.end());
    }
  }
  return out;
}

std::vector<double> forward(const OnnModel& model, std::span<const cdouble> x) {
  return forward(model, CMatrix(x.size(), 1, CVector(x.begin(), x.end()))).values;
}

double cross_entropy(std::span<const double> probs, int label, bool* floored) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) throw std::invalid_argument("cross_entropy: label out of range");
  double p = probs[static_cast<std::size_t>(label)];
  const bool hit = !(p >= kProbFloor);
  if (hit) p = kProbFloor;
  if (floored) *floored = hit;
  return -std::log(p);
}

std::vector<double> get_parameters(const OnnModel& model) {
  std::vector<double> out;
  OnnModel& m = const_cast<OnnModel&>(model);  // visitors only read here
  visit_parameters(
      m,
      [&](MziParams& p) {
        out.push_back(p.theta);
        out.push_back(p.phi);
      },
      [&](double& v, ParamClass) { out.push_back(v); },
      [&](cdouble& z) {
        out.push_back(z.real());
        out.push_back(z.imag());
      });
  return out;
}

void set_parameters(OnnModel& model, std::span<const double> params) {
  std::size_t i = 0;
  auto next = [&]() {
    if (i >= params.size()) throw DimensionError("set_parameters: too few values");
    return params[i++];
  };
  visit_parameters(
      model,
      [&](MziParams& p) {
        p.theta = next();
        p.phi = next();
      },
      [&](double& v, ParamClass) { v = next(); },
      [&](cdouble& z) {
        const double re = next();
        z = cdouble(re, next());
      });
  if (i != params.size()) throw DimensionError("set_parameters: too many values");
}

std::vector<ParamClass> parameter_classes(const OnnModel& model) {
  std::vector<ParamClass> out;
  OnnModel& m = const_cast<OnnModel&>(model);
  visit_parameters(
      m,
      [&](MziParams&) {
        out.push_back(ParamClass::mzi_theta);
        out.push_back(ParamClass::mzi_phi);
      },
      [&](double&, ParamClass c) { out.push_back(c); },
      [&](cdouble&) {
        out.push_back(ParamClass::dense_re);
        out.push_back(ParamClass::dense_im);
      });
  return out;
}

double mean_loss(const OnnModel& model, const CMatrix& x, std::span<const int> labels) {
  check_labels(x, labels, model.n_classes);
  const Probabilities p = forward(model, x);
  double sum = 0.0;
  for (std::size_t b = 0; b < p.batch; ++b) sum += cross_entropy(p.row(b), labels[b]);
  return sum / static_cast<double>(p.batch);
}

LossGradient loss_and_gradient(const OnnModel& model, const CMatrix& x, std::span<const int> labels) {
  if (static_cast<int>(x.rows()) != model.width) throw DimensionError("loss_and_gradient: input rows do not match model width");
  check_labels(x, labels, model.n_classes);
  if (x.cols() == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
  const std::size_t depth = model.depth();
  const bool dense = model.mode == ModelMode::dense;
  const std::size_t batch = x.cols();

  // Forward with caches: layer inputs, pre-activations and attenuator inputs.
  std::vector<CMatrix> inputs(depth), pre(depth), diag_in(dense ? 0 : depth);
  CMatrix a = x;
  for (std::size_t k = 0; k < depth; ++k) {
    inputs[k] = a;
    if (dense) {
      a = matmul(model.weights[k], a);
    } else {
      const auto& lm = model.multipliers[k];
      apply_inplace(lm.v_dagger, a);
      diag_in[k] = a;
      apply_inplace(lm.sigma, a);
      apply_inplace(lm.u, a);
    }
    check_finite(a, k);
    pre[k] = a;
    if (k + 1 < depth) satabs_inplace(a, model.nonlinearity);
  }

  // Head: SoftMax over |y_c|^2 and the mean cross-entropy.
  LossGradient out;
  CMatrix g(a.rows(), batch);
  const std::size_t classes = static_cast<std::size_t>(model.n_classes);
  CVector col(classes);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < classes; ++c) col[c] = a(c, b);
    const auto p = softmax_intensities(col, model.n_classes);
    bool floored = false;
    out.loss += cross_entropy(p, labels[b], &floored);
    if (floored) ++out.floored;
    for (std::size_t c = 0; c < classes; ++c) {
      const double dp = p[c] - (static_cast<int>(c) == labels[b] ? 1.0 : 0.0);
      g(c, b) = (2.0 * dp / static_cast<double>(batch)) * col[c];
    }
  }
  out.loss /= static_cast<double>(batch);
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite loss");

  // Per-layer offsets into the flat parameter vector.
  std::vector<std::size_t> offsets(depth + 1, 0);
  for (std::size_t k = 0; k < depth; ++k)
    offsets[k + 1] = offsets[k] + (dense ? 2 * model.weights[k].size() : multiplier_param_count(model.multipliers[k]));
  out.gradient.assign(offsets[depth], 0.0);

  const SatAbsParams& nl = model.nonlinearity;
  const double t0 = nl.t0;
  for (std::size_t k = depth; k-- > 0;) {
    if (k + 1 < depth) {
      // g holds dL/d(satabs output); map it through satabs at pre[k].
      auto zs = pre[k].entries();
      auto gs = g.entries();
      for (std::size_t i = 0; i < zs.size(); ++i) {
        const cdouble z = zs[i];
        const double r = std::abs(z);
        if (r < 1e-150) {
          gs[i] *= t0;
          continue;
        }
        const double s = satabs(r, nl) / r;
        const double ds = satabs_derivative(r, nl);
        gs[i] = s * gs[i] + (std::conj(gs[i]) * z).real() * (ds - s) / (r * r) * z;
      }
    }
    std::span<double> grad(out.gradient.data() + offsets[k], offsets[k + 1] - offsets[k]);
    if (dense) {
      const CMatrix& w = model.weights[k];
      const CMatrix& in = inputs[k];
      const std::size_t n = w.rows();
      for (std::size_t i = 0; i < n; ++i) {
        auto gi = g.row(i);
        for (std::size_t j = 0; j < w.cols(); ++j) {
          auto xj = in.row(j);
          cdouble s{};
          for (std::size_t b = 0; b < batch; ++b) s += gi[b] * std::conj(xj[b]);
          grad[2 * (i * w.cols() + j)] = s.real();
          grad[2 * (i * w.cols() + j) + 1] = s.imag();
        }
      }
      g = matmul(dagger(w), g);
    } else {
      const auto& lm = model.multipliers[k];
      const std::size_t v_count = mesh_param_count(lm.v_dagger);
      const std::size_t n = lm.sigma.thetas.size();
      CMatrix y = pre[k];
      mesh_backward(lm.u, y, g, grad.subspan(v_count + n + 1));
      // y now holds the attenuator output; use the cached input instead.
      const CMatrix& bin = diag_in[k];
      double d_beta = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double th = lm.sigma.thetas[i];
        const double mag = std::abs(std::sin(th / 2.0));
        const double dmag = (std::sin(th / 2.0) >= 0.0 ? 1.0 : -1.0) * std::cos(th / 2.0) / 2.0;
        auto gi = g.row(i);
        auto xi = bin.row(i);
        double re = 0.0;
        for (std::size_t b = 0; b < batch; ++b) re += (std::conj(gi[b]) * xi[b]).real();
        grad[v_count + i] += lm.sigma.beta * dmag * re;
        d_beta += mag * re;
        const double amp = lm.sigma.beta * mag;
        for (auto& z : gi) z *= amp;
      }
      grad[v_count + n] += d_beta;
      y = bin;
      mesh_backward(lm.v_dagger, y, g, grad.subspan(0, v_count));
    }
  }
  return out;
}

EncodedSet EncodedSet::subset(std::span<const std::size_t> indices) const {
  EncodedSet out{CMatrix(x.rows(), indices.size()), std::vector<int>(indices.size())};
  for (std::size_t j = 0; j < indices.size(); ++j) {
    out.labels[j] = labels.at(indices[j]);
    for (std::size_t r = 0; r < x.rows(); ++r) out.x(r, j) = x(r, indices[j]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("train: epochs must be >= 0");
  if (batch_size <= 0) throw std::invalid_argument("train: batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw std::invalid_argument("train: learning rate must be finite and >= 0");
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) throw std::invalid_argument("train: lr_decay must be finite and > 0");
}

TrainResult train(const OnnModel& initial, const EncodedSet& data, const TrainConfig& cfg) {
  cfg.validate();
  initial.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (static_cast<int>(data.x.rows()) != initial.width) throw DimensionError("train: data width does not match model");
  TrainResult result{initial, {}};
  std::vector<double> params = get_parameters(initial);
  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch, lr *= cfg.lr_decay) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    const auto order = rng.permutation(static_cast<int>(n));
    double total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t end = std::min(n, begin + bs);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin), order.begin() + static_cast<std::ptrdiff_t>(end));
      const EncodedSet batch = data.subset(idx);
      LossGradient lg;
      try {
        lg = loss_and_gradient(result.model, batch.x, batch.labels);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ", example " + std::to_string(begin) + ": " + e.what());
      }
      total += lg.loss * static_cast<double>(end - begin);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * lg.gradient[i];
      set_parameters(result.model, params);
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) throw NumericalError("training diverged at epoch " + std::to_string(epoch));
    result.loss_history.push_back(mean);
  }
  return result;
}

OnnModel grid_from_dense(const OnnModel& dense, SingularOrder order, std::uint64_t seed) {
  if (dense.mode != ModelMode::dense) throw std::invalid_argument("grid_from_dense: model is not dense");
  dense.validate();
  OnnModel out;
  out.mode = ModelMode::grid_mesh;
  out.width = dense.width;
  out.n_classes = dense.n_classes;
  out.nonlinearity = dense.nonlinearity;
  out.lineage = dense.lineage + "; grid " + to_string(order) + " seed " + std::to_string(seed);
  for (std::size_t k = 0; k < dense.weights.size(); ++k) {
    const SvdTriple t = sort_singular(svd_triple(dense.weights[k]), order, derive_seed(seed, k));
    out.multipliers.push_back(multiplier_from_triple(t));
  }
  return out;
}

std::vector<int> predict(const OnnModel& model, const CMatrix& x) {
  const Probabilities p = forward(model, x);
  std::vector<int> out(p.batch);
  for (std::size_t b = 0; b < p.batch; ++b) out[b] = static_cast<int>(argmax_lowest(p.row(b)));
  return out;
}

double evaluate(const OnnModel& model, const EncodedSet& data) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const auto pred = predict(model, data.x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == data.labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

Probabilities ensemble_mean(std::span<const OnnModel> ensemble, const EncodedSet& data) {
  if (ensemble.empty()) throw std::invalid_argument("ensemble is empty");
  Probabilities mean = forward(ensemble[0], data.x);
  for (std::size_t e = 1; e < ensemble.size(); ++e) {
    const Probabilities p = forward(ensemble[e], data.x);
    for (std::size_t i = 0; i < p.values.size(); ++i) mean.values[i] += p.values[i];
  }
  for (double& v : mean.values) v /= static_cast<double>(ensemble.size());
  return mean;
}

}  // namespace

Confusion confusion_matrix(const OnnModel& model, const EncodedSet& data) { return confusion_matrix(std::span<const OnnModel>(&model, 1), data); }

Confusion confusion_matrix(std::span<const OnnModel> ensemble, const EncodedSet& data) {
  const Probabilities p = ensemble_mean(ensemble, data);
  Confusion c(p.classes, std::vector<double>(p.classes, 0.0));
  for (std::size_t b = 0; b < p.batch; ++b) c.at(static_cast<std::size_t>(data.labels[b]))[argmax_lowest(p.row(b))] += 1.0;
  return c;
}

Confusion mean_probability_matrix(std::span<const OnnModel> ensemble, const EncodedSet& data) {
  const Probabilities p = ensemble_mean(ensemble, data);
  Confusion c(p.classes, std::vector<double>(p.classes, 0.0));
  std::vector<double> counts(p.classes, 0.0);
  for (std::size_t b = 0; b < p.batch; ++b) {
    const auto label = static_cast<std::size_t>(data.labels[b]);
    counts.at(label) += 1.0;
    for (std::size_t k = 0; k < p.classes; ++k) c[label][k] += p(b, k);
  }
  for (std::size_t r = 0; r < p.classes; ++r)
    if (counts[r] > 0)
      for (double& v : c[r]) v /= counts[r];
  return c;
}

OnnModel perturb_model(const OnnModel& model, const NoiseSpec& noise, std::uint64_t trial) {
  if (model.mode == ModelMode::dense) throw std::invalid_argument("perturb_model: dense models have no physical parameters");
  noise.validate();
  OnnModel out = model;
  Rng rng(derive_seed(noise.seed, trial));
  for (auto& lm : out.multipliers) {
    if (noise.quant_bits) {
      lm.v_dagger = quantize_phases(lm.v_dagger, *noise.quant_bits);
      lm.sigma = quantize_phases(lm.sigma, *noise.quant_bits);
      lm.u = quantize_phases(lm.u, *noise.quant_bits);
    }
    lm.v_dagger = perturb_mesh(lm.v_dagger, noise.sigma_ps, noise.sigma_bs, rng);
    lm.sigma = perturb_phases(lm.sigma, noise.sigma_ps, rng);
    lm.u = perturb_mesh(lm.u, noise.sigma_ps, noise.sigma_bs, rng);
  }
  if (noise.block) {
    const BlockSpec& b = *noise.block;
    if (b.mesh_id < 0 || static_cast<std::size_t>(b.mesh_id) >= 2 * out.multipliers.size())
      throw std::out_of_range("perturb_model: block mesh id " + std::to_string(b.mesh_id) + " out of range");
    auto& lm = out.multipliers[static_cast<std::size_t>(b.mesh_id / 2)];
    UnitaryMesh& target = b.mesh_id % 2 == 0 ? lm.v_dagger : lm.u;
    target = perturb_block(target, b, rng);
  }
  return out;
}

std::vector<PhaseCell> phase_statistics(std::span<const UnitaryMesh> meshes) {
  if (meshes.empty()) throw std::invalid_argument("phase_statistics: no meshes");
  const UnitaryMesh& ref = meshes[0];
  std::vector<PhaseCell> cells;
  for (std::size_t l = 0; l < ref.layers.size(); ++l)
    for (const auto& z : ref.layers[l].mzis) cells.push_back({static_cast<int>(l), z.top, {}});
  for (const auto& m : meshes) {
    if (m.n != ref.n || m.layout != ref.layout || m.layers.size() != ref.layers.size())
      throw std::invalid_argument("phase_statistics: meshes do not share one layout");
    std::size_t i = 0;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      if (m.layers[l].mzis.size() != ref.layers[l].mzis.size()) throw std::invalid_argument("phase_statistics: meshes do not share one layout");
      for (std::size_t j = 0; j < m.layers[l].mzis.size(); ++j) {
        const Mzi& z = m.layers[l].mzis[j];
        if (z.top != ref.layers[l].mzis[j].top || z.bottom != ref.layers[l].mzis[j].bottom)
          throw std::invalid_argument("phase_statistics: meshes do not share one layout");
        cells[i++].thetas.push_back(wrap_phase(z.params.theta));
      }
    }
  }
  return cells;
}

double beta_theory(double d, double l, double n) { return std::max(0.0, n - 2.0 * std::max(std::abs(d - n / 2), std::abs(l - n / 2))); }

}  // namespace mzinet
