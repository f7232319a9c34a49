#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hieroglyph/temporal.hpp"

namespace hieroglyph::cli {

// Flat "key = value" document; '#' starts a comment. Lists are comma separated.
//
//   frames            comma-separated frame volumes, in time order (required)
//   seg               label volume of frame 1: 0 background, 1 process, 2 soma (required)
//   gt                comma-separated ground-truth SWCs, one per frame (optional)
//   out_dir           output directory (default "out")
//   scales            vesselness sigmas in voxels
//   alpha, beta, c    tubularity parameters; c = auto uses half the max Hessian norm
//   polarity          bright | dark
//   hist_eq, hist_bins
//   penalty           positive | mean (source of x_avg)
//   max_bif_shift, max_bif_drift, max_iters, search_margin, length_penalty,
//   improvement_epsilon, refine_initial, max_refine_passes
//   centring, ball_radius    tracer settings
//   tolerance_um      branch matching tolerance
struct PipelineConfig {
  std::vector<std::filesystem::path> frames;
  std::filesystem::path seg;
  std::vector<std::filesystem::path> gt;
  std::filesystem::path out_dir = "out";
  TimeSeriesOptions series;
  double tolerance_um = 2.0;
};

using KeyValues = std::map<std::string, std::string>;

/// Throws FormatError naming `origin` and the line on malformed or duplicate keys.
KeyValues parse_key_values(std::string_view text, const std::string& origin);

/// Applies every key to cfg. Relative paths are resolved against base_dir.
/// Throws InvalidArgument on unknown keys or bad values.
void apply_keys(PipelineConfig& cfg, const KeyValues& kv, const std::filesystem::path& base_dir);

/// Sets one key; the same parser backs config files and flag overrides.
void apply_key(PipelineConfig& cfg, const std::string& key, const std::string& value,
               const std::filesystem::path& base_dir = {});

/// Checks required keys, file existence, the gt/frame count and the option ranges.
void validate(const PipelineConfig& cfg);

/// Every key with its effective value, one "key = value" line each, in documented order.
std::string show_config(const PipelineConfig& cfg);

std::vector<double> parse_scales(std::string_view text);
Polarity parse_polarity(std::string_view text);

}  // namespace hieroglyph::cli
