// hieroglyph command line: trace, morph, pipeline, eval, vesselness, phantom.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "hieroglyph/metrics.hpp"
#include "hieroglyph/phantom.hpp"
#include "hieroglyph/temporal.hpp"
#include "hieroglyph/tracer.hpp"
#include "hieroglyph/vesselness.hpp"
#include "hieroglyph/volume_io.hpp"

namespace fs = std::filesystem;
using namespace hieroglyph;
using cli::PipelineConfig;
using Json = nlohmann::ordered_json;

namespace {

// Flag values as given on the command line; applied over the config file.
struct Overrides {
  std::string config;
  std::string scales, polarity, max_bif_shift, tolerance_um;
  bool hist_eq = false;
  bool show_config = false;

  void add_vessel(CLI::App* app) {
    app->add_option("--scales", scales, "Vesselness sigmas in voxels, comma separated");
    app->add_option("--polarity", polarity, "bright or dark processes")->check(CLI::IsMember({"bright", "dark"}));
    app->add_flag("--hist-eq", hist_eq, "Histogram-equalise frames first");
  }
  void add_morph(CLI::App* app) {
    app->add_option("--max-bif-shift", max_bif_shift, "Max bifurcation move per frame, voxels");
  }
  void add_tolerance(CLI::App* app) {
    app->add_option("--tolerance-um", tolerance_um, "Branch matching tolerance, micrometres");
  }
  void add_config(CLI::App* app) {
    app->add_option("--config", config, "key = value config file; flags override it");
    app->add_flag("--show-config", show_config, "Print the effective configuration and exit");
  }

  PipelineConfig resolve(const std::string& config_path) const {
    PipelineConfig cfg;
    if (!config_path.empty()) {
      const fs::path p(config_path);
      cli::apply_keys(cfg, cli::parse_key_values(read_text_file(p), p.string()), p.parent_path());
    }
    if (!scales.empty()) cli::apply_key(cfg, "scales", scales);
    if (!polarity.empty()) cli::apply_key(cfg, "polarity", polarity);
    if (hist_eq) cli::apply_key(cfg, "hist_eq", "true");
    if (!max_bif_shift.empty()) cli::apply_key(cfg, "max_bif_shift", max_bif_shift);
    if (!tolerance_um.empty()) cli::apply_key(cfg, "tolerance_um", tolerance_um);
    return cfg;
  }
};

std::string frame_name(std::size_t i, std::size_t n) {
  const int width = std::max<int>(2, int(std::to_string(n).size()));
  std::string s = std::to_string(i + 1);
  return std::string(std::size_t(std::max(0, width - int(s.size()))), '0') + s;
}

SkeletonGraph load_swc(const fs::path& p, const Spacing& fallback = {}) {
  const std::string text = read_text_file(p);
  try {
    return parse_swc(text, fallback);
  } catch (const Error& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

// Writes text and reads it back; a mismatch means the output is not trustworthy.
void write_checked(const fs::path& p, const std::string& text) {
  write_text_file(p, text);
  if (read_text_file(p) != text) throw IoError("verification failed after writing " + p.string());
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

Json morph_log(const MorphResult& r) {
  Json j;
  j["total_score"] = r.total_score;
  j["iterations_used"] = r.iterations_used;
  j["flagged_segments"] = r.flagged_segments();
  Json segs = Json::array();
  for (std::size_t i = 0; i < r.segment_log.size(); ++i) {
    const auto& m = r.segment_log[i];
    Json s;
    s["segment"] = i;
    s["hierarchy"] = r.skeleton.segments[i].hierarchy;
    s["score"] = m.score;
    s["iterations"] = m.iterations;
    s["accepted_scores"] = m.accepted_scores;
    s["flagged"] = m.flagged;
    if (m.flagged) s["flag_reason"] = m.flag_reason;
    segs.push_back(std::move(s));
  }
  j["segments"] = std::move(segs);
  return j;
}

// The skeleton must fit the frame: header dims (when written) must match and every voxel must lie inside.
void check_fits(const SkeletonGraph& s, const std::string& swc_text, const Volume3& frame, const fs::path& swc) {
  const bool has_dims = swc_text.find("# dims ") != std::string::npos;
  if (has_dims && !(s.dims == frame.dims))
    throw InvalidArgument(swc.string() + ": skeleton dims " + std::to_string(s.dims.nx) + "x" +
                          std::to_string(s.dims.ny) + "x" + std::to_string(s.dims.nz) + " differ from frame dims " +
                          std::to_string(frame.dims.nx) + "x" + std::to_string(frame.dims.ny) + "x" +
                          std::to_string(frame.dims.nz));
  if (!(s.spacing == frame.spacing)) throw InvalidArgument(swc.string() + ": skeleton spacing differs from the frame's");
  for (const Voxel v : skeleton_voxels(s))
    if (!frame.dims.contains(v))
      throw InvalidArgument(swc.string() + ": voxel (" + std::to_string(v.x) + "," + std::to_string(v.y) + "," +
                            std::to_string(v.z) + ") lies outside the frame");
}

int cmd_trace(const std::string& mask_path, const std::string& out, double centring, double ball_radius) {
  TraceOptions opt;
  opt.centring = centring;
  opt.terminals.ball_radius = ball_radius;
  const SegMask m = load_mask(mask_path);
  const SkeletonGraph s = trace_initial_skeleton(m, opt);
  ensure_parent(out);
  write_checked(out, to_swc(s));
  const auto c = count_structures(s);
  std::printf("traced %zu segments, %d bifurcations, %d terminals -> %s\n", s.segments.size(), c.bifurcations,
              c.terminals, out.c_str());
  return 0;
}

int cmd_morph(const Overrides& o, const std::string& prev_path, const std::string& frame_path, const std::string& out,
              const std::string& log_path, const std::string& anchor_path) {
  const PipelineConfig cfg = o.resolve(o.config);
  if (o.show_config) {
    std::cout << cli::show_config(cfg);
    return 0;
  }
  cfg.series.morph.validate();
  const Volume3 frame = load_volume(frame_path);
  const std::string text = read_text_file(prev_path);
  SkeletonGraph prev = load_swc(prev_path, frame.spacing);
  check_fits(prev, text, frame, prev_path);
  prev.dims = frame.dims;
  std::optional<SkeletonGraph> anchor;
  if (!anchor_path.empty()) {
    anchor = load_swc(anchor_path, frame.spacing);
    check_fits(*anchor, read_text_file(anchor_path), frame, anchor_path);
    anchor->dims = frame.dims;
  }
  const VesselMap iv = frame_objective(frame, cfg.series);
  const MorphResult r = morph_skeleton(prev, iv, cfg.series.morph, anchor ? &*anchor : nullptr);
  ensure_parent(out);
  write_checked(out, to_swc(r.skeleton));
  const fs::path log = log_path.empty() ? fs::path(out).replace_extension(".morph.json") : fs::path(log_path);
  ensure_parent(log);
  write_checked(log, morph_log(r).dump(2) + "\n");
  std::printf("morphed %zu segments, score %.6g -> %s\n", r.skeleton.segments.size(), r.total_score, out.c_str());
  return 0;
}

int cmd_pipeline(const Overrides& o, const std::string& config_path) {
  const PipelineConfig cfg = o.resolve(config_path);
  if (o.show_config) {
    std::cout << cli::show_config(cfg);
    return 0;
  }
  cli::validate(cfg);

  const std::size_t n = cfg.frames.size();
  std::vector<Volume3> frames;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      frames.push_back(load_volume(cfg.frames[i]));
    } catch (const Error& e) {
      throw Error("frame " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  const SegMask seg = load_mask(cfg.seg);
  std::vector<SkeletonGraph> gt;
  for (const auto& p : cfg.gt) gt.push_back(load_swc(p));

  const auto results = run_time_series(frames, seg, cfg.series);
  fs::create_directories(cfg.out_dir);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = results[i];
    const std::string stem = "frame_" + frame_name(i, n);
    write_checked(cfg.out_dir / (stem + ".swc"), to_swc(r.skeleton));

    const auto c = count_structures(r.skeleton);
    Json log;
    log["frame"] = i + 1;
    log["source"] = cfg.frames[i].string();
    log["segments"] = r.skeleton.segments.size();
    log["bifurcations"] = c.bifurcations;
    log["terminals"] = c.terminals;
    if (i == 0) log["refine_converged"] = r.refine_converged;
    if (r.morph) log["morph"] = morph_log(*r.morph);
    write_checked(cfg.out_dir / (stem + ".log.json"), log.dump(2) + "\n");

    if (!gt.empty()) {
      try {
        const EvalReport rep = evaluate(r.skeleton, gt[i], cfg.tolerance_um);
        write_checked(cfg.out_dir / (stem + ".report.json"), report_to_json(rep));
      } catch (const Error& e) {
        throw Error("frame " + std::to_string(i + 1) + ": " + e.what());
      }
    }
    std::printf("frame %zu: %zu segments, %d bifurcations, %d terminals\n", i + 1, r.skeleton.segments.size(),
                c.bifurcations, c.terminals);
  }
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& test_path, const std::string& gt_path, const std::string& out) {
  const PipelineConfig cfg = o.resolve(o.config);
  if (!(cfg.tolerance_um > 0)) throw InvalidArgument("tolerance_um must be > 0");
  const SkeletonGraph test = load_swc(test_path);
  const SkeletonGraph gt = load_swc(gt_path);
  const EvalReport r = evaluate(test, gt, cfg.tolerance_um);
  ensure_parent(out);
  write_checked(out, report_to_json(r));
  std::printf("weighted accuracy %.6f, bifurcations %d/%d, terminals %d/%d -> %s\n", r.weighted_normalized,
              r.bifurcations_test, r.bifurcations_gt, r.terminals_test, r.terminals_gt, out.c_str());
  return 0;
}

int cmd_vesselness(const Overrides& o, const std::string& in, const std::string& out, bool iv) {
  const PipelineConfig cfg = o.resolve(o.config);
  if (o.show_config) {
    std::cout << cli::show_config(cfg);
    return 0;
  }
  Volume3 v = load_volume(in);
  Volume3 result;
  if (iv) {
    result = frame_objective(v, cfg.series).volume;
  } else {
    if (cfg.series.hist_eq) v = hist_equalize(v, cfg.series.hist_bins);
    result = vesselness_response(v, cfg.series.scales, cfg.series.vessel);
  }
  ensure_parent(out);
  save_volume(result, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

struct PhantomArgs {
  std::uint64_t seed = 1;
  int frames = 1;
  std::vector<int> dims{80, 80, 80};
  int n_primary = 3;
  int max_depth = 2;
  double length_min = 12, length_max = 18;
  double tube_radius = 1.5, soma_radius = 4.0;
  double noise = 0.0, motion = 2.0;
};

int cmd_phantom(const PhantomArgs& a, const std::string& out_dir) {
  if (a.frames < 1) throw InvalidArgument("--frames must be >= 1");
  if (a.dims.size() != 3) throw InvalidArgument("--dims takes three sizes");
  PhantomSpec spec;
  spec.seed = a.seed;
  spec.dims = {a.dims[0], a.dims[1], a.dims[2]};
  spec.n_primary = a.n_primary;
  spec.max_depth = a.max_depth;
  spec.branch_length_range = {a.length_min, a.length_max};
  spec.tube_radius = a.tube_radius;
  spec.soma_radius = a.soma_radius;
  spec.noise_sigma = a.noise;
  spec.motion_amplitude = a.frames > 1 ? a.motion : 0.0;
  const auto series = generate_series(spec, a.frames);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  const std::size_t n = series.size();
  std::string frames, gts;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = frame_name(i, n);
    const std::string img = "frame_" + id + ".nrrd", gt = "gt_" + id + ".swc";
    save_volume(series[i].image, dir / img, SampleType::Float32);
    write_checked(dir / gt, to_swc(series[i].truth));
    frames += (i ? "," : "") + img;
    gts += (i ? "," : "") + gt;
  }
  save_mask(series[0].mask, dir / "mask.nrrd");
  write_checked(dir / "pipeline.cfg", "frames = " + frames + "\nseg = mask.nrrd\ngt = " + gts + "\nout_dir = results\n");
  std::printf("wrote %zu frame(s) to %s\n", n, dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal skeletonization of tubular cells in volumetric time series"};
  app.require_subcommand(0, 1);
  bool show_defaults = false;
  app.add_flag("--show-config", show_defaults, "Print the default configuration and exit");

  Overrides o;

  auto* trace = app.add_subcommand("trace", "Trace the initial skeleton from a label mask");
  std::string mask_path, out;
  double centring = TraceOptions{}.centring, ball_radius = TerminalOptions{}.ball_radius;
  trace->add_option("mask", mask_path, "Label volume (0 background, 1 process, 2 soma)")->required();
  trace->add_option("-o,--out", out, "Output SWC")->required();
  trace->add_option("--centring", centring, "Medial-axis attraction of traced paths")->capture_default_str();
  trace->add_option("--ball-radius", ball_radius, "Terminal local-maximum radius, voxels")->capture_default_str();

  auto* morph = app.add_subcommand("morph", "Morph a skeleton onto the next frame");
  std::string prev_path, frame_path, log_path, anchor_path;
  morph->add_option("prev", prev_path, "Previous skeleton (SWC)")->required();
  morph->add_option("frame", frame_path, "Next frame volume")->required();
  morph->add_option("-o,--out", out, "Output SWC")->required();
  morph->add_option("--log", log_path, "Morph log JSON (default: <out>.morph.json)");
  morph->add_option("--anchor", anchor_path, "Skeleton bounding cumulative bifurcation drift");
  o.add_vessel(morph);
  o.add_morph(morph);
  o.add_config(morph);

  auto* pipeline = app.add_subcommand("pipeline", "Trace frame 1 and morph through the series");
  std::string config_path;
  pipeline->add_option("config", config_path, "key = value config file")->required();
  o.add_vessel(pipeline);
  o.add_morph(pipeline);
  o.add_tolerance(pipeline);
  pipeline->add_flag("--show-config", o.show_config, "Print the effective configuration and exit");

  auto* eval = app.add_subcommand("eval", "Score a skeleton against ground truth");
  std::string test_path, gt_path;
  eval->add_option("test", test_path, "Test SWC")->required();
  eval->add_option("gt", gt_path, "Ground-truth SWC")->required();
  eval->add_option("-o,--out", out, "Output report JSON")->required();
  o.add_tolerance(eval);

  auto* vessel = app.add_subcommand("vesselness", "Write the tubularity response of a volume");
  std::string in_path;
  bool iv = false;
  vessel->add_option("volume", in_path, "Input volume")->required();
  vessel->add_option("-o,--out", out, "Output volume (.nrrd or .raw)")->required();
  vessel->add_flag("--iv", iv, "Write the penalised morphing objective instead");
  o.add_vessel(vessel);
  o.add_config(vessel);

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic cell series with ground truth");
  PhantomArgs pa;
  std::string out_dir;
  phantom->add_option("-o,--out-dir", out_dir, "Output directory")->required();
  phantom->add_option("--seed", pa.seed, "Random seed")->capture_default_str();
  phantom->add_option("--frames", pa.frames, "Number of frames")->capture_default_str();
  phantom->add_option("--dims", pa.dims, "Volume size nx ny nz")->expected(3)->capture_default_str();
  phantom->add_option("--n-primary", pa.n_primary, "Processes leaving the soma")->capture_default_str();
  phantom->add_option("--max-depth", pa.max_depth, "Hierarchy levels")->capture_default_str();
  phantom->add_option("--length-min", pa.length_min, "Shortest branch, voxels")->capture_default_str();
  phantom->add_option("--length-max", pa.length_max, "Longest branch, voxels")->capture_default_str();
  phantom->add_option("--tube-radius", pa.tube_radius, "Process radius, voxels")->capture_default_str();
  phantom->add_option("--soma-radius", pa.soma_radius, "Soma radius, voxels")->capture_default_str();
  phantom->add_option("--noise", pa.noise, "Gaussian noise sigma")->capture_default_str();
  phantom->add_option("--motion", pa.motion, "Max tip displacement per frame, voxels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*trace) return cmd_trace(mask_path, out, centring, ball_radius);
    if (*morph) return cmd_morph(o, prev_path, frame_path, out, log_path, anchor_path);
    if (*pipeline) return cmd_pipeline(o, config_path);
    if (*eval) return cmd_eval(o, test_path, gt_path, out);
    if (*vessel) return cmd_vesselness(o, in_path, out, iv);
    if (*phantom) return cmd_phantom(pa, out_dir);
    if (show_defaults) {
      std::cout << cli::show_config(PipelineConfig{});
      return 0;
    }
    std::cout << app.help();
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hieroglyph: error: %s\n", e.what());
    return 1;
  }
}
