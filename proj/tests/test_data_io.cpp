#include <gtest/gtest.h>

#include <clocale>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mzinet/data_io.hpp"
#include "mzinet/serialize.hpp"

namespace mzinet {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mzinet_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
                                                 ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

Dataset four_images() {
  Dataset ds{3, 2, {}, {0, 9, 4, 1}, "fixture"};
  for (int i = 0; i < 24; ++i) ds.pixels.push_back((i * 37 % 256) / 255.0);
  ds.pixels[5] = 1.0;
  return ds;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

TEST(Idx, RoundTripPlainAndGzip) {
  TempDir dir;
  const Dataset ds = four_images();
  for (const std::string ext : {"", ".gz"}) {
    write_idx(ds, dir.file("img" + ext), dir.file("lab" + ext));
    const Dataset back = load_idx(dir.file("img" + ext), dir.file("lab" + ext));
    EXPECT_EQ(back.rows, 3);
    EXPECT_EQ(back.cols, 2);
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.pixels, ds.pixels);
  }
}

TEST(Idx, ByteLevelLayout) {
  TempDir dir;
  // Two 1x2 images: (0, 255) and (128, 1); labels 3, 7.
  write_bytes(dir.file("i"), {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 255, 128, 1});
  write_bytes(dir.file("l"), {0, 0, 8, 1, 0, 0, 0, 2, 3, 7});
  const Dataset ds = load_idx(dir.file("i"), dir.file("l"));
  EXPECT_EQ(ds.pixels, (std::vector<double>{0.0, 1.0, 128 / 255.0, 1 / 255.0}));
  EXPECT_EQ(ds.labels, (std::vector<int>{3, 7}));
}

TEST(Idx, Errors) {
  TempDir dir;
  write_bytes(dir.file("l"), {0, 0, 8, 1, 0, 0, 0, 1, 3});
  write_bytes(dir.file("bad"), {0, 0, 8, 4, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 9});
  EXPECT_THROW(load_idx(dir.file("bad"), dir.file("l")), IdxMagicError);
  write_bytes(dir.file("empty"), {});
  EXPECT_THROW(load_idx(dir.file("empty"), dir.file("l")), IdxTruncatedError);
  write_bytes(dir.file("short"), {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 9});
  EXPECT_THROW(load_idx(dir.file("short"), dir.file("l")), IdxTruncatedError);
  write_bytes(dir.file("two"), {0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 9, 10});
  EXPECT_THROW(load_idx(dir.file("two"), dir.file("l")), IdxCountMismatchError);
  EXPECT_THROW(load_idx(dir.file("missing"), dir.file("l")), IdxError);
}

TEST(Idx, BundledFixtureLoads) {
  const std::string d = MZINET_DATA_DIR "/digits16/";
  const Dataset train = load_idx(d + "train-images-idx3-ubyte.gz", d + "train-labels-idx1-ubyte.gz");
  const Dataset test = load_idx(d + "test-images-idx3-ubyte.gz", d + "test-labels-idx1-ubyte.gz");
  EXPECT_EQ(train.rows, 16);
  EXPECT_EQ(train.size(), 1297u);
  EXPECT_EQ(test.size(), 500u);
  std::vector<int> per_class(10, 0);
  for (int l : train.labels) ++per_class[static_cast<std::size_t>(l)];
  for (int c : per_class) EXPECT_GT(c, 100);
}

TEST(Preprocess, Downsample) {
  const Dataset ds = four_images();
  EXPECT_EQ(downsample(ds, 1).pixels, ds.pixels);
  Dataset c{4, 4, std::vector<double>(16, 0.3), {2}, ""};
  for (double p : downsample(c, 2).pixels) EXPECT_DOUBLE_EQ(p, 0.3);
  Dataset q{2, 2, {0, 0, 1, 1}, {1}, ""};
  EXPECT_EQ(downsample(q, 2).pixels, std::vector<double>{0.5});
  EXPECT_THROW(downsample(ds, 2), DimensionError);
}

TEST(Preprocess, PadAndEncode) {
  Dataset one{2, 2, {0.1, 0.2, 0.3, 0.4}, {5}, ""};
  const Dataset p = pad(one, 1, 1);
  EXPECT_EQ(p.rows, 4);
  EXPECT_EQ(p.pixels[5], 0.1);
  EXPECT_EQ(p.pixels[0], 0.0);
  const EncodedSet e = encode_dataset(one);
  EXPECT_EQ(e.x(0, 0), cdouble(0.1, 0.3));
  EXPECT_EQ(e.x(1, 0), cdouble(0.2, 0.4));
  EXPECT_EQ(e.labels, std::vector<int>{5});
}

TEST(Results, HeaderOnlyForEmpty) { EXPECT_EQ(format_results({}), std::string(kResultsHeader) + "\n"); }

TEST(Results, RoundTripRandomRecords) {
  Rng rng(3);
  std::vector<ResultRecord> recs;
  for (int i = 0; i < 100; ++i) {
    ResultRecord r;
    r.experiment = "exp" + std::to_string(i % 3);
    r.trial = i;
    r.sigma_ps = rng.uniform() * 0.02;
    r.sigma_bs = rng.normal() * 1e-300;
    if (i % 2) r.quant_bits = i % 11;
    r.metric = "accuracy";
    r.value = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    r.seed = rng.next_u64();
    recs.push_back(r);
  }
  TempDir dir;
  write_results(recs, dir.file("r.csv"));
  const auto back = read_results(dir.file("r.csv"));
  ASSERT_EQ(back.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) EXPECT_TRUE(back[i].same_row(recs[i])) << i;
}

TEST(Results, LocaleIndependent) {
  const char* old = std::setlocale(LC_ALL, nullptr);
  const std::string saved = old ? old : "C";
  if (std::setlocale(LC_ALL, "de_DE.UTF-8") == nullptr) std::setlocale(LC_ALL, "C");
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  std::setlocale(LC_ALL, saved.c_str());
}

TEST(Results, MalformedRows) {
  const std::string h = std::string(kResultsHeader) + "\n";
  EXPECT_THROW(parse_results("nope\n"), CsvError);
  EXPECT_THROW(parse_results(h + "a,1,0,0,,m,1\n"), CsvError);
  EXPECT_THROW(parse_results(h + "a,x,0,0,,m,1,2\n"), CsvError);
  EXPECT_THROW(parse_results(h + "a,1,0.1.2,0,,m,1,2\n"), CsvError);
  ResultRecord r;
  r.experiment = "a,b";
  EXPECT_THROW(format_results(std::vector<ResultRecord>{r}), CsvError);
}

TEST(Serialize, MeshRoundTrip) {
  auto m = build_layout({LayoutKind::block_fft, 2}, 8, ParamsInit::uniform_random, 4);
  m.layers[2].mzis[0].params.dt1 = 0.0123456789012345;
  EXPECT_EQ(mesh_from_json(nlohmann::json::parse(mesh_to_json(m).dump())), m);
  EXPECT_THROW(mesh_from_json(nlohmann::json::parse(R"({"layout":"grid"})")), FormatError);
}

TEST(Serialize, ModelRoundTrip) {
  TempDir dir;
  const auto dense = make_dense_model({8, 2, 4}, {0.3}, 1);
  save_model(dense, dir.file("d.json"));
  EXPECT_EQ(load_model(dir.file("d.json")), dense);
  const auto mesh = make_mesh_model({8, 2, 4}, {LayoutKind::fft, 0}, {0.5}, 1.5, 2);
  save_model(mesh, dir.file("m.json"));
  EXPECT_EQ(load_model(dir.file("m.json")), mesh);
  std::ofstream(dir.file("x.json")) << "{\"format\": \"other\"}";
  EXPECT_THROW(load_model(dir.file("x.json")), FormatError);
}

}  // namespace
}  // namespace mzinet
