#include "config.hpp"

#include <charconv>
#include <sstream>

namespace hieroglyph::cli {
namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw InvalidArgument("config key '" + key + "': not a number: '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw InvalidArgument("config key '" + key + "': not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw InvalidArgument("config key '" + key + "': not a boolean: '" + v + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || base.empty() ? q : base / q;
}

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string join(const std::vector<fs::path>& ps) {
  std::string out;
  for (std::size_t i = 0; i < ps.size(); ++i) out += (i ? "," : "") + ps[i].string();
  return out;
}

}  // namespace

std::vector<double> parse_scales(std::string_view text) {
  std::vector<double> out;
  for (const auto& s : split_list(text)) {
    const double v = to_double("scales", s);
    if (!(v > 0)) throw InvalidArgument("scales must be > 0, got " + s);
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument("scales must not be empty");
  return out;
}

Polarity parse_polarity(std::string_view text) {
  if (text == "bright") return Polarity::Bright;
  if (text == "dark") return Polarity::Dark;
  throw InvalidArgument("polarity must be bright or dark, got '" + std::string(text) + "'");
}

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues kv;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw FormatError(where + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (!kv.emplace(key, trim(std::string_view(t).substr(eq + 1))).second)
      throw FormatError(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

void apply_key(PipelineConfig& cfg, const std::string& key, const std::string& v, const fs::path& base) {
  auto& s = cfg.series;
  auto& m = s.morph;
  if (key == "frames") {
    cfg.frames.clear();
    for (const auto& p : split_list(v)) cfg.frames.push_back(resolve(base, p));
  } else if (key == "seg") {
    cfg.seg = resolve(base, v);
  } else if (key == "gt") {
    cfg.gt.clear();
    for (const auto& p : split_list(v)) cfg.gt.push_back(resolve(base, p));
  } else if (key == "out_dir") {
    cfg.out_dir = resolve(base, v);
  } else if (key == "scales") {
    s.scales = parse_scales(v);
  } else if (key == "alpha") {
    s.vessel.alpha = to_double(key, v);
  } else if (key == "beta") {
    s.vessel.beta = to_double(key, v);
  } else if (key == "c") {
    if (v == "auto") s.vessel.c.reset();
    else s.vessel.c = to_double(key, v);
  } else if (key == "polarity") {
    s.vessel.polarity = parse_polarity(v);
  } else if (key == "hist_eq") {
    s.hist_eq = to_bool(key, v);
  } else if (key == "hist_bins") {
    s.hist_bins = to_int(key, v);
  } else if (key == "penalty") {
    if (v == "positive") s.penalty = PenaltySource::PositiveResponse;
    else if (v == "mean") s.penalty = PenaltySource::ImageMean;
    else throw InvalidArgument("config key 'penalty': expected positive or mean, got '" + v + "'");
  } else if (key == "max_bif_shift") {
    m.max_bifurcation_shift = to_double(key, v);
  } else if (key == "max_bif_drift") {
    m.max_bifurcation_drift = to_double(key, v);
  } else if (key == "max_iters") {
    m.max_iters = to_int(key, v);
  } else if (key == "search_margin") {
    m.search_margin = to_int(key, v);
  } else if (key == "length_penalty") {
    m.length_penalty = to_double(key, v);
  } else if (key == "improvement_epsilon") {
    m.improvement_epsilon = to_double(key, v);
  } else if (key == "refine_initial") {
    s.refine_initial = to_bool(key, v);
  } else if (key == "max_refine_passes") {
    s.max_refine_passes = to_int(key, v);
  } else if (key == "centring") {
    s.trace.centring = to_double(key, v);
  } else if (key == "ball_radius") {
    s.trace.terminals.ball_radius = to_double(key, v);
  } else if (key == "tolerance_um") {
    cfg.tolerance_um = to_double(key, v);
  } else {
    throw InvalidArgument("unknown config key '" + key + "'");
  }
}

void apply_keys(PipelineConfig& cfg, const KeyValues& kv, const fs::path& base) {
  for (const auto& [k, v] : kv) apply_key(cfg, k, v, base);
}

void validate(const PipelineConfig& cfg) {
  if (cfg.frames.empty()) throw InvalidArgument("config is missing 'frames'");
  if (cfg.seg.empty()) throw InvalidArgument("config is missing 'seg'");
  for (const auto& p : cfg.frames)
    if (!fs::exists(p)) throw IoError("file not found: " + p.string());
  if (!fs::exists(cfg.seg)) throw IoError("file not found: " + cfg.seg.string());
  if (!cfg.gt.empty() && cfg.gt.size() != cfg.frames.size())
    throw InvalidArgument("config 'gt' lists " + std::to_string(cfg.gt.size()) + " files for " +
                          std::to_string(cfg.frames.size()) + " frames");
  for (const auto& p : cfg.gt)
    if (!fs::exists(p)) throw IoError("file not found: " + p.string());
  cfg.series.morph.validate();
  if (!(cfg.tolerance_um > 0)) throw InvalidArgument("tolerance_um must be > 0");
  if (cfg.series.hist_bins < 1) throw InvalidArgument("hist_bins must be >= 1");
  if (cfg.series.max_refine_passes < 1) throw InvalidArgument("max_refine_passes must be >= 1");
  if (!(cfg.series.trace.centring >= 0)) throw InvalidArgument("centring must be >= 0");
  if (!(cfg.series.trace.terminals.ball_radius > 0)) throw InvalidArgument("ball_radius must be > 0");
}

std::string show_config(const PipelineConfig& cfg) {
  const auto& s = cfg.series;
  const auto& m = s.morph;
  std::string scales;
  for (std::size_t i = 0; i < s.scales.size(); ++i) scales += (i ? "," : "") + num(s.scales[i]);
  std::ostringstream out;
  out << "frames = " << join(cfg.frames) << '\n'
      << "seg = " << cfg.seg.string() << '\n'
      << "gt = " << join(cfg.gt) << '\n'
      << "out_dir = " << cfg.out_dir.string() << '\n'
      << "scales = " << scales << '\n'
      << "alpha = " << num(s.vessel.alpha) << '\n'
      << "beta = " << num(s.vessel.beta) << '\n'
      << "c = " << (s.vessel.c ? num(*s.vessel.c) : "auto") << '\n'
      << "polarity = " << (s.vessel.polarity == Polarity::Bright ? "bright" : "dark") << '\n'
      << "hist_eq = " << (s.hist_eq ? "true" : "false") << '\n'
      << "hist_bins = " << s.hist_bins << '\n'
      << "penalty = " << (s.penalty == PenaltySource::PositiveResponse ? "positive" : "mean") << '\n'
      << "max_bif_shift = " << num(m.max_bifurcation_shift) << '\n'
      << "max_bif_drift = " << num(m.max_bifurcation_drift) << '\n'
      << "max_iters = " << m.max_iters << '\n'
      << "search_margin = " << m.search_margin << '\n'
      << "length_penalty = " << num(m.length_penalty) << '\n'
      << "improvement_epsilon = " << num(m.improvement_epsilon) << '\n'
      << "refine_initial = " << (s.refine_initial ? "true" : "false") << '\n'
      << "max_refine_passes = " << s.max_refine_passes << '\n'
      << "centring = " << num(s.trace.centring) << '\n'
      << "ball_radius = " << num(s.trace.terminals.ball_radius) << '\n'
      << "tolerance_um = " << num(cfg.tolerance_um) << '\n';
  return out.str();
}

}  // namespace hieroglyph::cli
