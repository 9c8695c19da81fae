#include "mzinet/data_io.hpp"

#include <zlib.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mzinet {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw IdxError("cannot open " + path);
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int got = 0;
  while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
  int err = 0;
  const char* msg = gzerror(f, &err);
  const std::string what = msg ? msg : "";
  gzclose(f);
  if (got < 0 || (err != Z_OK && err != Z_STREAM_END)) throw IdxTruncatedError(path + ": read failed: " + what);
  return out;
}

void write_all(const std::string& path, const std::vector<unsigned char>& bytes) {
  const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
  if (gz) {
    gzFile f = gzopen(path.c_str(), "wb9");
    if (!f) throw IdxError("cannot create " + path);
    const int put = bytes.empty() ? 0 : gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    if (gzclose(f) != Z_OK || put != static_cast<int>(bytes.size())) throw IdxError("write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IdxError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IdxError("write failed: " + path);
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at, const std::string& path) {
  if (b.size() < at + 4) throw IdxTruncatedError(path + ": truncated header");
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

}  // namespace

void Dataset::validate() const {
  if (rows <= 0 || cols <= 0) throw DimensionError("dataset: non-positive image shape");
  if (pixels.size() != size() * image_size()) throw DimensionError("dataset: pixel count does not match labels");
  for (double p : pixels)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("dataset: pixel outside [0, 1]");
  for (int l : labels)
    if (l < 0 || l > 9) throw std::invalid_argument("dataset: label outside [0, 9]");
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);
  if (const auto m = be32(img, 0, images_path); m != kImageMagic) throw IdxMagicError(images_path + ": bad magic " + std::to_string(m));
  if (const auto m = be32(lab, 0, labels_path); m != kLabelMagic) throw IdxMagicError(labels_path + ": bad magic " + std::to_string(m));
  const std::size_t count = be32(img, 4, images_path);
  const std::size_t rows = be32(img, 8, images_path);
  const std::size_t cols = be32(img, 12, images_path);
  const std::size_t label_count = be32(lab, 4, labels_path);
  if (img.size() < 16 + count * rows * cols) throw IdxTruncatedError(images_path + ": truncated pixel data");
  if (lab.size() < 8 + label_count) throw IdxTruncatedError(labels_path + ": truncated label data");
  if (count != label_count)
    throw IdxCountMismatchError("image count " + std::to_string(count) + " != label count " + std::to_string(label_count));
  Dataset ds;
  ds.rows = static_cast<int>(rows);
  ds.cols = static_cast<int>(cols);
  ds.pixels.resize(count * rows * cols);
  for (std::size_t i = 0; i < ds.pixels.size(); ++i) ds.pixels[i] = img[16 + i] / 255.0;
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) ds.labels[i] = lab[8 + i];
  ds.validate();
  return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  ds.validate();
  std::vector<unsigned char> img, lab;
  put32(img, kImageMagic);
  put32(img, static_cast<std::uint32_t>(ds.size()));
  put32(img, static_cast<std::uint32_t>(ds.rows));
  put32(img, static_cast<std::uint32_t>(ds.cols));
  for (double p : ds.pixels) img.push_back(static_cast<unsigned char>(std::lround(p * 255.0)));
  put32(lab, kLabelMagic);
  put32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) lab.push_back(static_cast<unsigned char>(l));
  write_all(images_path, img);
  write_all(labels_path, lab);
}

Dataset downsample(const Dataset& ds, int factor) {
  if (factor <= 0 || ds.rows % factor != 0 || ds.cols % factor != 0) throw DimensionError("downsample: shape not divisible by factor");
  if (factor == 1) return ds;
  Dataset out{ds.rows / factor, ds.cols / factor, {}, ds.labels, ds.split};
  const double inv = 1.0 / (factor * factor);
  out.pixels.reserve(ds.size() * out.image_size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto src = ds.image(i);
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) {
        double s = 0.0;
        for (int dr = 0; dr < factor; ++dr)
          for (int dc = 0; dc < factor; ++dc) s += src[static_cast<std::size_t>((r * factor + dr) * ds.cols + c * factor + dc)];
        out.pixels.push_back(std::min(1.0, s * inv));
      }
  }
  return out;
}

Dataset pad(const Dataset& ds, int before, int after) {
  if (before < 0 || after < 0) throw std::invalid_argument("pad: negative padding");
  Dataset out{ds.rows + before + after, ds.cols + before + after, {}, ds.labels, ds.split};
  out.pixels.assign(ds.size() * out.image_size(), 0.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto src = ds.image(i);
    double* dst = out.pixels.data() + i * out.image_size();
    for (int r = 0; r < ds.rows; ++r)
      for (int c = 0; c < ds.cols; ++c)
        dst[(r + before) * out.cols + c + before] = src[static_cast<std::size_t>(r * ds.cols + c)];
  }
  return out;
}

Dataset take(const Dataset& ds, std::size_t count) {
  count = std::min(count, ds.size());
  Dataset out{ds.rows, ds.cols, {}, {}, ds.split};
  out.pixels.assign(ds.pixels.begin(), ds.pixels.begin() + static_cast<std::ptrdiff_t>(count * ds.image_size()));
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

EncodedSet encode_dataset(const Dataset& ds) {
  EncodedSet out{CMatrix(ds.image_size() / 2, ds.size()), ds.labels};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const CVector v = encode_complex(ds.image(i), ds.rows, ds.cols);
    for (std::size_t r = 0; r < v.size(); ++r) out.x(r, i) = v[r];
  }
  return out;
}

bool ResultRecord::same_row(const ResultRecord& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return experiment == o.experiment && trial == o.trial && same(sigma_ps, o.sigma_ps) && same(sigma_bs, o.sigma_bs) &&
         quant_bits == o.quant_bits && metric == o.metric && same(value, o.value) && seed == o.seed;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

namespace {

void check_field(const std::string& s, const char* what) {
  if (s.find_first_of(",\"\n\r") != std::string::npos) throw CsvError(std::string("results: ") + what + " contains a delimiter: " + s);
}

double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw CsvError("results line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line) {
  Int v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw CsvError("results line " + std::to_string(line) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace

std::string format_results(std::span<const ResultRecord> records) {
  std::string out = kResultsHeader;
  out += '\n';
  for (const auto& r : records) {
    check_field(r.experiment, "experiment");
    check_field(r.metric, "metric");
    out += r.experiment;
    out += ',' + std::to_string(r.trial);
    out += ',' + format_double(r.sigma_ps);
    out += ',' + format_double(r.sigma_bs);
    out += ',' + (r.quant_bits ? std::to_string(*r.quant_bits) : std::string());
    out += ',' + r.metric;
    out += ',' + format_double(r.value);
    out += ',' + std::to_string(r.seed);
    out += '\n';
  }
  return out;
}

std::vector<ResultRecord> parse_results(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw CsvError("results: missing or wrong header");
  std::vector<ResultRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 8) throw CsvError("results line " + std::to_string(lineno) + ": expected 8 fields, got " + std::to_string(f.size()));
    ResultRecord r;
    r.experiment = f[0];
    r.trial = parse_int<std::int64_t>(f[1], lineno);
    r.sigma_ps = parse_double(f[2], lineno);
    r.sigma_bs = parse_double(f[3], lineno);
    if (!f[4].empty()) r.quant_bits = parse_int<int>(f[4], lineno);
    r.metric = f[5];
    r.value = parse_double(f[6], lineno);
    r.seed = parse_int<std::uint64_t>(f[7], lineno);
    out.push_back(std::move(r));
  }
  return out;
}

void write_results(std::span<const ResultRecord> records, const std::string& path) {
  const std::string text = format_results(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot create " + path);
  out << text;
  if (!out) throw CsvError("write failed: " + path);
}

std::vector<ResultRecord> read_results(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_results(ss.str());
}

}  // namespace mzinet
