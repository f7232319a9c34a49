#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include "hieroglyph/metrics.hpp"
#include "hieroglyph/phantom.hpp"
#include "hieroglyph/volume_io.hpp"

using namespace hieroglyph;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("hieroglyph_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "stdout.txt";
  const std::string cmd = "\"" + std::string(HIEROGLYPH_CLI_PATH) + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  Run r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, {}};
  r.output = read_text_file(log);
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("trace writes a valid skeleton") {
  TempDir tmp("trace");
  PhantomSpec spec;
  spec.seed = 5;
  spec.dims = {56, 56, 56};
  spec.n_primary = 2;
  spec.max_depth = 2;
  const Phantom p = generate(spec);
  save_mask(p.mask, tmp / "mask.nrrd");
  const Run r = run("trace " + q(tmp / "mask.nrrd") + " -o " + q(tmp / "s.swc"), tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const SkeletonGraph s = import_swc(tmp / "s.swc");
  CHECK(count_structures(s).bifurcations == count_structures(p.truth).bifurcations);
  CHECK(count_structures(s).terminals == count_structures(p.truth).terminals);

  SegMask soma(spec.dims, {});
  for (int z = 20; z < 25; ++z)
    for (int y = 20; y < 25; ++y)
      for (int x = 20; x < 25; ++x) soma.set_soma({x, y, z});
  save_mask(soma, tmp / "soma.nrrd");
  const Run rs = run("trace " + q(tmp / "soma.nrrd") + " -o " + q(tmp / "soma.swc"), tmp.path);
  REQUIRE_MESSAGE(rs.code == 0, rs.output);
  const SkeletonGraph ss = import_swc(tmp / "soma.swc");
  CHECK(ss.segments.empty());
  CHECK(ss.root == Voxel{22, 22, 22});

  const Run missing = run("trace " + q(tmp / "nope.nrrd") + " -o " + q(tmp / "x.swc"), tmp.path);
  CHECK(missing.code == 1);
  CHECK(contains(missing.output, (tmp / "nope.nrrd").string()));
  CHECK_FALSE(fs::exists(tmp / "x.swc"));
}

TEST_CASE("morph fixed point and frame mismatch") {
  TempDir tmp("morph");
  PhantomSpec spec;
  spec.seed = 8;
  spec.dims = {56, 56, 56};
  spec.n_primary = 2;
  const Phantom p = generate(spec);
  save_volume(p.image, tmp / "f.nrrd", SampleType::Float32);
  save_mask(p.mask, tmp / "m.nrrd");
  write_text_file(tmp / "one.cfg", "frames = f.nrrd\nseg = m.nrrd\nout_dir = one\n");
  Run r = run("pipeline " + q(tmp / "one.cfg") + " --scales 1", tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK_FALSE(fs::exists(tmp / "one" / "frame_01.report.json"));
  r = run("trace " + q(tmp / "m.nrrd") + " -o " + q(tmp / "t.swc"), tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);

  // The refined first-frame skeleton is a fixed point of morphing onto its own frame.
  const fs::path s1 = tmp / "one" / "frame_01.swc";
  r = run("morph " + q(s1) + " " + q(tmp / "f.nrrd") + " -o " + q(tmp / "m.swc") + " --scales 1 --anchor " +
              q(tmp / "t.swc"),
          tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(read_text_file(tmp / "m.swc") == read_text_file(s1));
  CHECK(fs::exists(tmp / "m.morph.json"));
  r = run("morph " + q(s1) + " " + q(tmp / "f.nrrd") + " -o " + q(tmp / "m2.swc") + " --scales 1 --log " +
              q(tmp / "m2.json"),
          tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(tmp / "m2.json"));

  save_volume(Volume3({20, 20, 20}, {}, 0.0), tmp / "small.nrrd");
  const Run bad = run("morph " + q(s1) + " " + q(tmp / "small.nrrd") + " -o " + q(tmp / "b.swc"), tmp.path);
  CHECK(bad.code == 1);
  CHECK(contains(bad.output, "frame_01.swc"));
  CHECK_FALSE(fs::exists(tmp / "b.swc"));
}

TEST_CASE("phantom, pipeline and eval end to end") {
  TempDir tmp("pipeline");
  const std::string gen = "phantom -o " + q(tmp / "cell") + " --seed 7 --frames 3 --dims 56 56 56 --n-primary 2";
  Run r = run(gen, tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const std::string frame1 = read_text_file(tmp / "cell" / "frame_01.nrrd");
  r = run(gen, tmp.path);
  REQUIRE(r.code == 0);
  CHECK(read_text_file(tmp / "cell" / "frame_01.nrrd") == frame1);
  for (const char* f : {"frame_02.nrrd", "frame_03.nrrd", "gt_03.swc", "mask.nrrd", "pipeline.cfg"})
    CHECK(fs::exists(tmp / "cell" / f));

  const fs::path cfg = tmp / "cell" / "pipeline.cfg";
  r = run("pipeline " + q(cfg) + " --scales 1", tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  const fs::path out = tmp / "cell" / "results";
  std::vector<std::string> first;
  for (const char* stem : {"frame_01", "frame_02", "frame_03"}) {
    REQUIRE(fs::exists(out / (std::string(stem) + ".swc")));
    REQUIRE(fs::exists(out / (std::string(stem) + ".report.json")));
    CHECK(fs::exists(out / (std::string(stem) + ".log.json")));
    first.push_back(read_text_file(out / (std::string(stem) + ".swc")));
    first.push_back(read_text_file(out / (std::string(stem) + ".report.json")));
  }
  r = run("pipeline " + q(cfg) + " --scales 1", tmp.path);
  REQUIRE(r.code == 0);
  std::size_t k = 0;
  for (const char* stem : {"frame_01", "frame_02", "frame_03"}) {
    CHECK(read_text_file(out / (std::string(stem) + ".swc")) == first[k++]);
    CHECK(read_text_file(out / (std::string(stem) + ".report.json")) == first[k++]);
  }

  r = run("eval " + q(tmp / "cell" / "gt_01.swc") + " " + q(tmp / "cell" / "gt_01.swc") + " -o " + q(tmp / "self.json"),
          tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(report_from_json(read_text_file(tmp / "self.json")).weighted_normalized == 1.0);

  write_text_file(tmp / "broken.swc", "1 1 0 0\n");
  r = run("eval " + q(tmp / "broken.swc") + " " + q(tmp / "cell" / "gt_01.swc") + " -o " + q(tmp / "b.json"), tmp.path);
  CHECK(r.code == 1);
  CHECK(contains(r.output, "broken.swc"));

  write_text_file(tmp / "noseg.cfg", "frames = cell/frame_01.nrrd\nseg = cell/missing.nrrd\n");
  r = run("pipeline " + q(tmp / "noseg.cfg"), tmp.path);
  CHECK(r.code == 1);
  CHECK(contains(r.output, "missing.nrrd"));
}

TEST_CASE("phantom series length and invalid geometry") {
  TempDir tmp("phantom");
  Run r = run("phantom -o " + q(tmp / "long") + " --frames 13 --dims 40 40 40 --n-primary 2 --max-depth 1", tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(fs::exists(tmp / "long" / "frame_13.nrrd"));
  CHECK(fs::exists(tmp / "long" / "gt_13.swc"));
  r = run("phantom -o " + q(tmp / "bad") + " --dims 4 4 4", tmp.path);
  CHECK(r.code == 1);
  CHECK(contains(r.output, "error"));
}

TEST_CASE("configuration printing and overrides") {
  TempDir tmp("config");
  Run r = run("--show-config", tmp.path);
  REQUIRE(r.code == 0);
  CHECK(contains(r.output, "max_bif_shift = 2"));
  CHECK(contains(r.output, "scales = 1,2,3,4"));

  PhantomSpec spec;
  spec.dims = {40, 40, 40};
  spec.n_primary = 1;
  spec.max_depth = 1;
  const Phantom p = generate(spec);
  save_volume(p.image, tmp / "f.nrrd");
  save_mask(p.mask, tmp / "m.nrrd");
  write_text_file(tmp / "c.cfg", "frames = f.nrrd\nseg = m.nrrd\nscales = 1,2\nmax_bif_shift = 3\n");
  r = run("pipeline " + q(tmp / "c.cfg") + " --show-config --max-bif-shift 1.5 --polarity dark", tmp.path);
  REQUIRE_MESSAGE(r.code == 0, r.output);
  CHECK(contains(r.output, "scales = 1,2"));
  CHECK(contains(r.output, "max_bif_shift = 1.5"));
  CHECK(contains(r.output, "polarity = dark"));

  write_text_file(tmp / "typo.cfg", "frames = f.nrrd\nseg = m.nrrd\nscale = 1\n");
  r = run("pipeline " + q(tmp / "typo.cfg"), tmp.path);
  CHECK(r.code == 1);
  CHECK(contains(r.output, "scale"));

  r = run("trace", tmp.path);
  CHECK(r.code == 1);
}
