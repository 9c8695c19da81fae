#pragma once

// Dataset ingestion (IDX, optionally gzip-compressed), preprocessing, and the
// results CSV.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mzinet/onn.hpp"

namespace mzinet {

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxMagicError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncatedError : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxCountMismatchError : public IdxError {
 public:
  using IdxError::IdxError;
};

/// Grayscale images in [0, 1], stored contiguously, with labels in [0, 9].
struct Dataset {
  int rows = 0;
  int cols = 0;
  std::vector<double> pixels;  // count * rows * cols
  std::vector<int> labels;
  std::string split;

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  std::span<const double> image(std::size_t i) const { return {pixels.data() + i * image_size(), image_size()}; }
  void validate() const;
};

/// Reads an IDX image file (magic 0x803) and label file (magic 0x801). Gzip
/// input is detected and inflated transparently. Pixels are scaled by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
/// Writes both files; pixels are stored as round(255 p). Paths ending in .gz
/// are gzip-compressed.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

/// Block-mean pooling by `factor` in both directions.
Dataset downsample(const Dataset& ds, int factor);
/// Zero padding: `before` rows/cols on the top/left, `after` on the bottom/right.
Dataset pad(const Dataset& ds, int before, int after);
/// First `count` examples (or all when fewer).
Dataset take(const Dataset& ds, std::size_t count);

/// Encodes every image with encode_complex into the columns of one matrix.
EncodedSet encode_dataset(const Dataset& ds);

/// One row of the results table. Wall time is kept in memory only so that the
/// CSV stays byte-identical across reruns.
struct ResultRecord {
  std::string experiment;
  std::int64_t trial = 0;
  double sigma_ps = 0.0;
  double sigma_bs = 0.0;
  std::optional<int> quant_bits;
  std::string metric;
  double value = 0.0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;

  bool same_row(const ResultRecord& o) const;
};

inline constexpr const char* kResultsHeader = "experiment,trial,sigma_ps,sigma_bs,quant_bits,metric,value,seed";

/// 17 significant digits (lossless for doubles), '.' as decimal point
/// regardless of locale.
std::string format_double(double v);

std::string format_results(std::span<const ResultRecord> records);
std::vector<ResultRecord> parse_results(const std::string& text);
void write_results(std::span<const ResultRecord> records, const std::string& path);
std::vector<ResultRecord> read_results(const std::string& path);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mzinet
