#include "mzinet/serialize.hpp"

#include <fstream>
#include <sstream>

namespace mzinet {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json matrix_to_json(const CMatrix& a) {
  std::vector<double> re, im;
  re.reserve(a.size());
  im.reserve(a.size());
  for (cdouble z : a.entries()) {
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  return {{"rows", a.rows()}, {"cols", a.cols()}, {"re", re}, {"im", im}};
}

CMatrix matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto re = j.at("re").get<std::vector<double>>();
  const auto im = j.at("im").get<std::vector<double>>();
  if (re.size() != rows * cols || im.size() != rows * cols) throw FormatError("matrix: entry count does not match shape");
  CMatrix a(rows, cols);
  for (std::size_t i = 0; i < re.size(); ++i) a.entries()[i] = cdouble(re[i], im[i]);
  return a;
}

json multiplier_to_json(const LinearMultiplier& lm) {
  return {{"v_dagger", mesh_to_json(lm.v_dagger)}, {"sigma", {{"thetas", lm.sigma.thetas}, {"beta", lm.sigma.beta}}}, {"u", mesh_to_json(lm.u)}};
}

LinearMultiplier multiplier_from_json(const json& j) {
  LinearMultiplier lm;
  lm.v_dagger = mesh_from_json(j.at("v_dagger"));
  lm.sigma.thetas = j.at("sigma").at("thetas").get<std::vector<double>>();
  lm.sigma.beta = j.at("sigma").at("beta").get<double>();
  lm.u = mesh_from_json(j.at("u"));
  return lm;
}

}  // namespace

json mesh_to_json(const UnitaryMesh& m) {
  json layers = json::array();
  for (const auto& l : m.layers) {
    json mzis = json::array();
    for (const auto& z : l.mzis) mzis.push_back({z.top, z.bottom, z.params.theta, z.params.phi, z.params.dt1, z.params.dt2});
    json layer = {{"mzis", mzis}};
    if (l.pre_permutation) layer["pre_permutation"] = *l.pre_permutation;
    layers.push_back(layer);
  }
  return {{"layout", to_string(m.layout.kind)}, {"layout_param", m.layout.param}, {"n", m.n}, {"layers", layers}, {"output_phases", m.output_phases}};
}

UnitaryMesh mesh_from_json(const json& j) {
  try {
    UnitaryMesh m;
    m.layout = {layout_kind_from_string(j.at("layout").get<std::string>()), j.at("layout_param").get<int>()};
    m.n = j.at("n").get<int>();
    for (const auto& lj : j.at("layers")) {
      MeshLayer layer;
      for (const auto& zj : lj.at("mzis")) {
        if (!zj.is_array() || zj.size() != 6) throw FormatError("mesh: MZI entry must be [top, bottom, theta, phi, dt1, dt2]");
        layer.mzis.push_back({zj[0].get<int>(), zj[1].get<int>(), {zj[2].get<double>(), zj[3].get<double>(), zj[4].get<double>(), zj[5].get<double>()}});
      }
      if (lj.contains("pre_permutation")) layer.pre_permutation = lj.at("pre_permutation").get<std::vector<int>>();
      m.layers.push_back(std::move(layer));
    }
    m.output_phases = j.at("output_phases").get<std::vector<double>>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("mesh: ") + e.what());
  }
}

json model_to_json(const OnnModel& m) {
  json j = {{"format", "mzinet-model"},
            {"version", kFormatVersion},
            {"mode", to_string(m.mode)},
            {"width", m.width},
            {"n_classes", m.n_classes},
            {"satabs", {{"t0", m.nonlinearity.t0}, {"beta", SatAbsParams::beta}}},
            {"lineage", m.lineage}};
  json layers = json::array();
  if (m.mode == ModelMode::dense) {
    for (const auto& w : m.weights) layers.push_back(matrix_to_json(w));
  } else {
    for (const auto& lm : m.multipliers) layers.push_back(multiplier_to_json(lm));
  }
  j["layers"] = layers;
  return j;
}

OnnModel model_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "mzinet-model") throw FormatError("model: not a model document");
    if (j.at("version").get<int>() != kFormatVersion) throw FormatError("model: unsupported version");
    OnnModel m;
    m.mode = model_mode_from_string(j.at("mode").get<std::string>());
    m.width = j.at("width").get<int>();
    m.n_classes = j.at("n_classes").get<int>();
    m.nonlinearity.t0 = j.at("satabs").at("t0").get<double>();
    m.lineage = j.value("lineage", "");
    for (const auto& lj : j.at("layers")) {
      if (m.mode == ModelMode::dense) {
        m.weights.push_back(matrix_from_json(lj));
      } else {
        m.multipliers.push_back(multiplier_from_json(lj));
      }
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model: ") + e.what());
  }
}

void save_model(const OnnModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot create " + path);
  out << model_to_json(m).dump() << '\n';
  if (!out) throw FormatError("write failed: " + path);
}

OnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mzinet
