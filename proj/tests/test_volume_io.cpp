#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unistd.h>

#include "hieroglyph/volume_io.hpp"

using namespace hieroglyph;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("hieroglyph_io_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

Volume3 random_volume(Dims d, Spacing s, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Volume3 v(d, s);
  for (auto& x : v.data) x = std::floor(u(rng));
  return v;
}

SkeletonGraph y_skeleton(Spacing sp = {}) {
  SkeletonGraph s;
  s.dims = {30, 30, 10};
  s.spacing = sp;
  s.root = {2, 15, 4};
  s.segments.push_back({line_voxels({2, 15, 4}, {12, 15, 4}), 1, -1});
  s.segments.push_back({line_voxels({12, 15, 4}, {20, 22, 5}), 2, 0});
  s.segments.push_back({line_voxels({12, 15, 4}, {20, 8, 3}), 2, 0});
  return s;
}

std::vector<std::string> sample_lines(const std::string& swc) {
  std::vector<std::string> out;
  std::istringstream in(swc);
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("raw volume with sidecar") {
  TempDir tmp;
  write_bytes(tmp / "zero.raw", std::string(8, '\0'));
  write_bytes(tmp / "zero.raw.meta", "dims 2 2 2\nspacing 1 1 1\ndtype uint8\nendian little\n");
  const Volume3 v = load_volume(tmp / "zero.raw");
  CHECK(v.dims == Dims{2, 2, 2});
  for (double x : v.data) CHECK(x == 0.0);

  write_bytes(tmp / "short.raw", std::string(7, '\0'));
  write_bytes(tmp / "short.raw.meta", "dims 2 2 2\nspacing 1 1 1\ndtype uint8\nendian little\n");
  CHECK_THROWS_AS(load_volume(tmp / "short.raw"), FormatError);

  write_bytes(tmp / "nometa.raw", std::string(8, '\0'));
  CHECK_THROWS_AS(load_volume(tmp / "nometa.raw"), IoError);
}

TEST_CASE("big-endian raw samples decode") {
  TempDir tmp;
  write_bytes(tmp / "be.raw", std::string("\x01\x02\x00\x05", 4));
  write_bytes(tmp / "be.raw.meta", "dims 2 1 1\nspacing 0.5 1 2\ndtype uint16\nendian big\n");
  const Volume3 v = load_volume(tmp / "be.raw");
  CHECK(v.data == std::vector<double>{258.0, 5.0});
  CHECK(v.spacing == Spacing{0.5, 1, 2});
}

TEST_CASE("volume round trips in every writable format and type") {
  TempDir tmp;
  const Volume3 v = random_volume({5, 4, 3}, {0.5, 0.25, 2.0}, 0, 250, 3);
  for (const char* ext : {".nrrd", ".raw"})
    for (SampleType t : {SampleType::UInt8, SampleType::UInt16, SampleType::Int16, SampleType::Float32,
                         SampleType::Float64}) {
      const fs::path p = tmp / (std::string("v_") + std::string(sample_type_name(t)) + ext);
      save_volume(v, p, t);
      CHECK(load_volume(p) == v);
    }
  Volume3 frac = v;
  frac.data[0] = 0.123456789012345;
  save_volume(frac, tmp / "f.nrrd");
  CHECK(load_volume(tmp / "f.nrrd") == frac);
}

TEST_CASE("multi-page TIFF stacks") {
  TempDir tmp;
  const Volume3 v = random_volume({4, 4, 5}, {1, 1, 1}, 0, 255, 4);
  save_volume(v, tmp / "stack.tif", SampleType::UInt8);
  const Volume3 r = load_volume(tmp / "stack.tif");
  CHECK(r.dims == Dims{4, 4, 5});
  CHECK(r == v);
  const Volume3 w = random_volume({6, 3, 2}, {0.5, 0.5, 2}, 0, 60000, 5);
  save_volume(w, tmp / "stack16.tiff", SampleType::UInt16);
  CHECK(load_volume(tmp / "stack16.tiff") == w);
  CHECK_THROWS_AS(save_volume(w, tmp / "bad.tif", SampleType::Float64), InvalidArgument);
  write_bytes(tmp / "junk.tif", "not a tiff at all");
  CHECK_THROWS_AS(load_volume(tmp / "junk.tif"), FormatError);
}

TEST_CASE("format detection and missing files") {
  CHECK(format_from_path("a.TIF") == VolumeFormat::TiffStack);
  CHECK(format_from_path("a.nhdr") == VolumeFormat::Nrrd);
  CHECK(format_from_path("a.raw") == VolumeFormat::RawMeta);
  CHECK_THROWS_AS(format_from_path("a.png"), FormatError);
  try {
    load_volume("/nonexistent/dir/v.nrrd");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/v.nrrd") != std::string::npos);
  }
}

TEST_CASE("mask labels round trip") {
  TempDir tmp;
  SegMask m({6, 5, 4}, {1, 1, 2});
  m.set_foreground({1, 1, 1});
  m.set_soma({2, 2, 2});
  save_mask(m, tmp / "m.nrrd");
  CHECK(load_mask(tmp / "m.nrrd") == m);
  const Volume3 labels = labels_from_mask(m);
  CHECK(labels[{1, 1, 1}] == 1.0);
  CHECK(labels[{2, 2, 2}] == 2.0);
  CHECK(labels[{0, 0, 0}] == 0.0);
}

TEST_CASE("histogram equalisation") {
  const Volume3 c({3, 3, 3}, {}, 4.0);
  const Volume3 ec = hist_equalize(c);
  for (double x : ec.data) CHECK(x == ec.data[0]);

  Volume3 two({4, 2, 1}, {}, 10.0);
  for (std::size_t i = 0; i < 4; ++i) two.data[i] = 200.0;
  const Volume3 e = hist_equalize(two);
  for (std::size_t i = 0; i < 8; ++i) CHECK(e.data[i] == (i < 4 ? 1.0 : 0.5));

  const Volume3 r = random_volume({9, 8, 7}, {}, 0, 1000, 6);
  const Volume3 er = hist_equalize(r, 64);
  for (std::size_t i = 0; i < r.data.size(); i += 7)
    for (std::size_t j = 0; j < r.data.size(); j += 11)
      if (r.data[i] < r.data[j]) REQUIRE(er.data[i] <= er.data[j]);
  CHECK_THROWS_AS(hist_equalize(r, 0), InvalidArgument);
}

TEST_CASE("SWC writer format") {
  SkeletonGraph s;
  s.dims = {5, 1, 1};
  s.root = {0, 0, 0};
  s.segments.push_back({line_voxels({0, 0, 0}, {3, 0, 0}), 1, -1});
  const auto lines = sample_lines(to_swc(s));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "1 1 0 0 0 0.5 -1");
  CHECK(lines[3] == "4 3 3 0 0 0.5 3");

  // One sample is the parent of two children, and they are not both on the next line.
  const auto y = sample_lines(to_swc(y_skeleton()));
  std::map<long, int> refs;
  for (const auto& l : y) {
    std::istringstream in(l);
    long id, type, parent;
    double x, yy, z, r;
    in >> id >> type >> x >> yy >> z >> r >> parent;
    ++refs[parent];
  }
  int branching = 0;
  for (const auto& [id, n] : refs)
    if (id > 0 && n == 2) ++branching;
  CHECK(branching == 1);
}

TEST_CASE("SWC round trip preserves topology and coordinates") {
  for (const Spacing sp : {Spacing{}, Spacing{0.4, 0.4, 1.7}}) {
    const SkeletonGraph s = y_skeleton(sp);
    CHECK(parse_swc(to_swc(s)) == s);
  }
  TempDir tmp;
  export_swc(y_skeleton(), tmp / "y.swc");
  CHECK(import_swc(tmp / "y.swc") == y_skeleton());
}

TEST_CASE("SWC parser contracts") {
  const SkeletonGraph two = parse_swc("1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n");
  CHECK(two.segments.size() == 1);
  CHECK(bifurcation_points(two).empty());

  // Parent declared after the child is fine when the tree is acyclic.
  const SkeletonGraph fwd = parse_swc("3 3 2 0 0 1 2\n1 1 0 0 0 1 -1\n2 3 1 0 0 1 1\n");
  CHECK(fwd.segments.size() == 1);
  CHECK(fwd.segments[0].path.size() == 3);

  CHECK_THROWS_AS(parse_swc("1 1 0 0 0 1 -1\n2 3 1 0 0 1 3\n3 3 2 0 0 1 2\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("1 1 0 0 0 1 -1\n2 3 1 0 0 1 9\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("1 1 0 0 0 1 -1\n1 3 1 0 0 1 1\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("1 1 0 0 0\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("1 1 zero 0 0 1 -1\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("# only a comment\n"), FormatError);
  CHECK_THROWS_AS(parse_swc("1 1 0 0 0 1 -1\n2 1 0 0 0 1 -1\n"), FormatError);
}

TEST_CASE("report JSON round trips") {
  EvalReport r;
  r.per_hierarchy = {{1, 3, 0, 1, 0.75}, {2, 2, 1, 0, 2.0 / 3.0}};
  r.weighted_normalized = 0.7222222222222222;
  r.weighted_paper_raw = 2.8333333333333335;
  r.bifurcations_test = 1;
  r.bifurcations_gt = 2;
  r.terminals_test = 3;
  r.terminals_gt = 4;
  r.mean_bif_dist_um = 1.25;
  CHECK(report_from_json(report_to_json(r)) == r);

  const std::string empty = report_to_json(EvalReport{});
  CHECK(empty.find("\"per_hierarchy_accuracy\": []") != std::string::npos);
  CHECK(report_from_json(empty) == EvalReport{});
  CHECK_THROWS_AS(report_from_json("{"), FormatError);
  CHECK_THROWS_AS(report_from_json("{\"schema_version\": 99}"), FormatError);

  TempDir tmp;
  export_report(r, tmp / "r.json");
  CHECK(report_from_json(read_text_file(tmp / "r.json")) == r);
}
