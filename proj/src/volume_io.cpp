#include "hieroglyph/volume_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace hieroglyph {
namespace fs = std::filesystem;
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::vector<char> read_binary(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + p.string());
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write failed: " + p.string());
}

std::size_t sample_size(SampleType t) {
  switch (t) {
    case SampleType::UInt8: return 1;
    case SampleType::UInt16:
    case SampleType::Int16: return 2;
    case SampleType::Float32: return 4;
    case SampleType::Float64: return 8;
  }
  return 0;
}

SampleType parse_sample_type(const std::string& name) {
  const std::string n = lower(name);
  if (n == "uint8" || n == "uchar" || n == "unsigned char" || n == "uint8_t") return SampleType::UInt8;
  if (n == "uint16" || n == "ushort" || n == "unsigned short" || n == "uint16_t") return SampleType::UInt16;
  if (n == "int16" || n == "short" || n == "signed short" || n == "int16_t") return SampleType::Int16;
  if (n == "float32" || n == "float") return SampleType::Float32;
  if (n == "float64" || n == "double") return SampleType::Float64;
  throw FormatError("unsupported dtype: " + name);
}

std::string nrrd_type_name(SampleType t) {
  switch (t) {
    case SampleType::UInt8: return "uint8";
    case SampleType::UInt16: return "uint16";
    case SampleType::Int16: return "int16";
    case SampleType::Float32: return "float";
    case SampleType::Float64: return "double";
  }
  return {};
}

template <class T>
T load_scalar(const char* p, bool swap) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if (swap) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

template <class T>
void store_scalar(char* p, T v) {
  std::memcpy(p, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(T));
}

bool host_little() { return std::endian::native == std::endian::little; }

// Decodes `count` samples starting at `src`.
void decode_samples(const char* src, std::size_t count, SampleType t, bool little, double* out) {
  const bool swap = little != host_little();
  const std::size_t sz = sample_size(t);
  for (std::size_t i = 0; i < count; ++i) {
    const char* p = src + i * sz;
    switch (t) {
      case SampleType::UInt8: out[i] = static_cast<unsigned char>(*p); break;
      case SampleType::UInt16: out[i] = load_scalar<std::uint16_t>(p, swap); break;
      case SampleType::Int16: out[i] = load_scalar<std::int16_t>(p, swap); break;
      case SampleType::Float32: out[i] = load_scalar<float>(p, swap); break;
      case SampleType::Float64: out[i] = load_scalar<double>(p, swap); break;
    }
  }
}

// Encodes little-endian samples; integer types are rounded and clamped.
std::vector<char> encode_samples(const std::vector<double>& data, SampleType t) {
  std::vector<char> out(data.size() * sample_size(t));
  for (std::size_t i = 0; i < data.size(); ++i) {
    char* p = out.data() + i * sample_size(t);
    const double v = data[i];
    switch (t) {
      case SampleType::UInt8: store_scalar(p, std::uint8_t(std::clamp(std::round(v), 0.0, 255.0))); break;
      case SampleType::UInt16: store_scalar(p, std::uint16_t(std::clamp(std::round(v), 0.0, 65535.0))); break;
      case SampleType::Int16: store_scalar(p, std::int16_t(std::clamp(std::round(v), -32768.0, 32767.0))); break;
      case SampleType::Float32: store_scalar(p, float(v)); break;
      case SampleType::Float64: store_scalar(p, v); break;
    }
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& what) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad number for " + what + ": " + s);
  return v;
}

long long parse_int(const std::string& s, const std::string& what) {
  long long v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("bad integer for " + what + ": " + s);
  return v;
}

Dims parse_dims(const std::vector<std::string>& tok, std::size_t from, const std::string& what) {
  if (tok.size() < from + 3) throw FormatError(what + ": expected three sizes");
  const Dims d{int(parse_int(tok[from], what)), int(parse_int(tok[from + 1], what)), int(parse_int(tok[from + 2], what))};
  if (!d.valid()) throw FormatError(what + ": sizes must be positive");
  return d;
}

Spacing parse_spacing(const std::vector<std::string>& tok, std::size_t from, const std::string& what) {
  if (tok.size() < from + 3) throw FormatError(what + ": expected three spacings");
  const Spacing s{parse_double(tok[from], what), parse_double(tok[from + 1], what), parse_double(tok[from + 2], what)};
  if (!s.valid()) throw FormatError(what + ": spacing must be finite and > 0");
  return s;
}

Volume3 decode_volume(const char* payload, std::size_t bytes, Dims d, Spacing s, SampleType t, bool little,
                      const std::string& origin) {
  const std::size_t need = d.count() * sample_size(t);
  if (bytes != need)
    throw FormatError(origin + ": payload is " + std::to_string(bytes) + " bytes, header implies " + std::to_string(need));
  Volume3 v(d, s);
  decode_samples(payload, d.count(), t, little, v.data.data());
  return v;
}

// ---- raw + sidecar ------------------------------------------------------

fs::path meta_path(const fs::path& p) { return fs::path(p.string() + ".meta"); }

Volume3 load_raw(const fs::path& path) {
  const fs::path mp = meta_path(path);
  std::ifstream meta(mp);
  if (!meta) throw IoError("missing sidecar header: " + mp.string());
  std::optional<Dims> dims;
  Spacing spacing;
  std::optional<SampleType> type;
  bool little = true;
  for (std::string line; std::getline(meta, line);) {
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0][0] == '#') continue;
    const std::string key = lower(tok[0]);
    if (key == "dims") dims = parse_dims(tok, 1, "dims");
    else if (key == "spacing") spacing = parse_spacing(tok, 1, "spacing");
    else if (key == "dtype" && tok.size() >= 2) type = parse_sample_type(tok[1]);
    else if (key == "endian" && tok.size() >= 2) {
      const std::string e = lower(tok[1]);
      if (e != "little" && e != "big") throw FormatError("endian must be little or big");
      little = e == "little";
    } else throw FormatError("unknown sidecar key: " + tok[0]);
  }
  if (!dims) throw FormatError(mp.string() + ": missing dims");
  if (!type) throw FormatError(mp.string() + ": missing dtype");
  const auto bytes = read_binary(path);
  return decode_volume(bytes.data(), bytes.size(), *dims, spacing, *type, little, path.string());
}

void save_raw(const Volume3& v, const fs::path& path, SampleType t) {
  write_binary(path, encode_samples(v.data, t));
  std::ostringstream meta;
  meta << "dims " << v.dims.nx << ' ' << v.dims.ny << ' ' << v.dims.nz << '\n'
       << "spacing " << fmt_double(v.spacing.x) << ' ' << fmt_double(v.spacing.y) << ' ' << fmt_double(v.spacing.z)
       << '\n'
       << "dtype " << sample_type_name(t) << '\n'
       << "endian little\n";
  write_text_file(meta_path(path), meta.str());
}

// ---- NRRD -----------------------------------------------------------------

Volume3 load_nrrd(const fs::path& path) {
  const auto bytes = read_binary(path);
  std::size_t pos = 0;
  auto next_line = [&]() -> std::optional<std::string> {
    if (pos >= bytes.size()) return std::nullopt;
    std::size_t e = pos;
    while (e < bytes.size() && bytes[e] != '\n') ++e;
    std::string line(bytes.data() + pos, e - pos);
    pos = std::min(bytes.size(), e + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  const auto magic = next_line();
  if (!magic || magic->rfind("NRRD", 0) != 0) throw FormatError(path.string() + ": not a NRRD file");

  std::map<std::string, std::string> fields;
  bool header_done = false;
  while (auto line = next_line()) {
    if (line->empty()) {
      header_done = true;
      break;
    }
    if ((*line)[0] == '#') continue;
    const auto colon = line->find(':');
    if (colon == std::string::npos) continue;
    if (colon + 1 < line->size() && (*line)[colon + 1] == '=') continue;  // key/value pairs
    fields[lower(trim(line->substr(0, colon)))] = trim(line->substr(colon + 1));
  }
  auto field = [&](const std::string& k) -> const std::string& {
    const auto it = fields.find(k);
    if (it == fields.end()) throw FormatError(path.string() + ": missing NRRD field '" + k + "'");
    return it->second;
  };
  if (field("dimension") != "3") throw FormatError(path.string() + ": only 3D NRRD is supported");
  const Dims d = parse_dims(split_ws(field("sizes")), 0, "sizes");
  const SampleType t = parse_sample_type(field("type"));
  const std::string enc = lower(field("encoding"));
  if (enc != "raw") throw FormatError(path.string() + ": unsupported NRRD encoding '" + enc + "'");
  bool little = true;
  if (fields.contains("endian")) little = lower(fields["endian"]) != "big";
  Spacing s;
  if (fields.contains("spacings")) s = parse_spacing(split_ws(fields["spacings"]), 0, "spacings");

  std::string data_file;
  if (fields.contains("data file")) data_file = fields["data file"];
  else if (fields.contains("datafile")) data_file = fields["datafile"];
  if (!data_file.empty()) {
    const auto payload = read_binary(path.parent_path() / data_file);
    return decode_volume(payload.data(), payload.size(), d, s, t, little, path.string());
  }
  if (!header_done) throw FormatError(path.string() + ": NRRD header not terminated");
  return decode_volume(bytes.data() + pos, bytes.size() - pos, d, s, t, little, path.string());
}

void save_nrrd(const Volume3& v, const fs::path& path, SampleType t) {
  std::ostringstream h;
  h << "NRRD0004\n"
    << "type: " << nrrd_type_name(t) << '\n'
    << "dimension: 3\n"
    << "sizes: " << v.dims.nx << ' ' << v.dims.ny << ' ' << v.dims.nz << '\n'
    << "spacings: " << fmt_double(v.spacing.x) << ' ' << fmt_double(v.spacing.y) << ' ' << fmt_double(v.spacing.z)
    << '\n'
    << "encoding: raw\n";
  if (sample_size(t) > 1) h << "endian: little\n";
  h << '\n';
  const std::string header = h.str();
  std::vector<char> out(header.begin(), header.end());
  const auto payload = encode_samples(v.data, t);
  out.insert(out.end(), payload.begin(), payload.end());
  write_binary(path, out);
}

// ---- TIFF (baseline, uncompressed, grayscale) -------------------------------

struct TiffReader {
  const std::vector<char>& b;
  bool swap;
  const std::string& name;

  void need(std::size_t off, std::size_t n) const {
    if (off + n > b.size()) throw FormatError(name + ": truncated TIFF");
  }
  std::uint16_t u16(std::size_t off) const {
    need(off, 2);
    return load_scalar<std::uint16_t>(b.data() + off, swap);
  }
  std::uint32_t u32(std::size_t off) const {
    need(off, 4);
    return load_scalar<std::uint32_t>(b.data() + off, swap);
  }
  // Values of an IFD entry as integers (SHORT or LONG).
  std::vector<std::uint32_t> values(std::size_t entry) const {
    const std::uint16_t type = u16(entry + 2);
    const std::uint32_t count = u32(entry + 4);
    const std::size_t size = type == 3 ? 2 : (type == 4 ? 4 : 0);
    if (size == 0) return {};
    const std::size_t total = size * count;
    const std::size_t base = total <= 4 ? entry + 8 : u32(entry + 8);
    std::vector<std::uint32_t> out(count);
    for (std::uint32_t i = 0; i < count; ++i) out[i] = size == 2 ? u16(base + 2 * i) : u32(base + 4 * i);
    return out;
  }
  std::string ascii(std::size_t entry) const {
    const std::uint32_t count = u32(entry + 4);
    const std::size_t base = count <= 4 ? entry + 8 : u32(entry + 8);
    need(base, count);
    std::string s(b.data() + base, count);
    while (!s.empty() && s.back() == '\0') s.pop_back();
    return s;
  }
};

Volume3 load_tiff(const fs::path& path) {
  const auto bytes = read_binary(path);
  const std::string name = path.string();
  if (bytes.size() < 8) throw FormatError(name + ": not a TIFF file");
  bool little;
  if (bytes[0] == 'I' && bytes[1] == 'I') little = true;
  else if (bytes[0] == 'M' && bytes[1] == 'M') little = false;
  else throw FormatError(name + ": not a TIFF file");
  const TiffReader r{bytes, little != host_little(), name};
  if (r.u16(2) != 42) throw FormatError(name + ": bad TIFF magic");

  int width = -1, height = -1;
  std::vector<double> data;
  int pages = 0;
  Spacing spacing;
  std::size_t ifd = r.u32(4);
  while (ifd != 0) {
    if (pages > 100000) throw FormatError(name + ": too many TIFF pages");
    const std::uint16_t n = r.u16(ifd);
    std::uint32_t w = 0, h = 0, bits = 1, compression = 1, spp = 1, format = 1, rows_per_strip = 0xFFFFFFFF;
    std::vector<std::uint32_t> offsets, counts;
    for (std::uint16_t i = 0; i < n; ++i) {
      const std::size_t e = ifd + 2 + 12 * std::size_t(i);
      const std::uint16_t tag = r.u16(e);
      auto first = [&] {
        const auto v = r.values(e);
        return v.empty() ? 0u : v[0];
      };
      switch (tag) {
        case 256: w = first(); break;
        case 257: h = first(); break;
        case 258: bits = first(); break;
        case 259: compression = first(); break;
        case 270:
          if (pages == 0) {
            const std::string desc = r.ascii(e);
            if (const auto at = desc.find("spacing="); at != std::string::npos) {
              std::string rest = desc.substr(at + 8);
              std::replace(rest.begin(), rest.end(), ',', ' ');
              spacing = parse_spacing(split_ws(rest), 0, "tiff spacing");
            }
          }
          break;
        case 273: offsets = r.values(e); break;
        case 277: spp = first(); break;
        case 278: rows_per_strip = first(); break;
        case 279: counts = r.values(e); break;
        case 339: format = first(); break;
        default: break;
      }
    }
    if (compression != 1) throw FormatError(name + ": compressed TIFF is not supported");
    if (spp != 1) throw FormatError(name + ": only single-channel TIFF is supported");
    SampleType t;
    if (bits == 8 && format == 1) t = SampleType::UInt8;
    else if (bits == 16 && format == 1) t = SampleType::UInt16;
    else if (bits == 16 && format == 2) t = SampleType::Int16;
    else if (bits == 32 && format == 3) t = SampleType::Float32;
    else throw FormatError(name + ": unsupported TIFF sample format (" + std::to_string(bits) + " bits)");
    if (pages == 0) {
      width = int(w);
      height = int(h);
      if (width <= 0 || height <= 0) throw FormatError(name + ": bad TIFF page size");
    } else if (int(w) != width || int(h) != height) {
      throw FormatError(name + ": TIFF pages differ in size");
    }
    if (offsets.empty() || offsets.size() != counts.size()) throw FormatError(name + ": bad TIFF strip table");
    (void)rows_per_strip;
    std::vector<char> page;
    for (std::size_t s = 0; s < offsets.size(); ++s) {
      r.need(offsets[s], counts[s]);
      page.insert(page.end(), bytes.begin() + offsets[s], bytes.begin() + offsets[s] + counts[s]);
    }
    const std::size_t px = std::size_t(width) * std::size_t(height);
    if (page.size() < px * sample_size(t)) throw FormatError(name + ": TIFF strip data too short");
    const std::size_t old = data.size();
    data.resize(old + px);
    decode_samples(page.data(), px, t, little, data.data() + old);
    ++pages;
    ifd = r.u32(ifd + 2 + 12 * std::size_t(n));
  }
  if (pages == 0) throw FormatError(name + ": TIFF has no pages");
  Volume3 v({width, height, pages}, spacing);
  v.data = std::move(data);
  return v;
}

void save_tiff(const Volume3& v, const fs::path& path, SampleType t) {
  if (t != SampleType::UInt8 && t != SampleType::UInt16)
    throw InvalidArgument("TIFF output supports uint8 and uint16 only");
  const std::uint16_t bits = t == SampleType::UInt8 ? 8 : 16;
  const std::size_t page_px = std::size_t(v.dims.nx) * std::size_t(v.dims.ny);
  const std::size_t page_bytes = page_px * sample_size(t);
  const std::string desc = "spacing=" + fmt_double(v.spacing.x) + "," + fmt_double(v.spacing.y) + "," +
                           fmt_double(v.spacing.z);

  std::vector<char> out{'I', 'I', 42, 0, 0, 0, 0, 0};
  auto put16 = [&](std::size_t off, std::uint16_t x) { store_scalar(out.data() + off, x); };
  auto put32 = [&](std::size_t off, std::uint32_t x) { store_scalar(out.data() + off, x); };
  std::size_t link = 4;  // where the next IFD offset is written
  for (int z = 0; z < v.dims.nz; ++z) {
    const std::vector<double> slice(v.data.begin() + std::ptrdiff_t(page_px * z),
                                    v.data.begin() + std::ptrdiff_t(page_px * (z + 1)));
    const auto payload = encode_samples(slice, t);
    const std::size_t data_off = out.size();
    out.insert(out.end(), payload.begin(), payload.end());
    std::size_t desc_off = 0;
    if (z == 0) {
      desc_off = out.size();
      out.insert(out.end(), desc.begin(), desc.end());
      out.push_back('\0');
    }
    if (out.size() % 2) out.push_back('\0');

    struct Entry {
      std::uint16_t tag, type;
      std::uint32_t count, value;
    };
    std::vector<Entry> entries{{256, 4, 1, std::uint32_t(v.dims.nx)}, {257, 4, 1, std::uint32_t(v.dims.ny)},
                               {258, 3, 1, bits},  {259, 3, 1, 1},  {262, 3, 1, 1}};
    if (z == 0) entries.push_back({270, 2, std::uint32_t(desc.size() + 1), std::uint32_t(desc_off)});
    entries.push_back({273, 4, 1, std::uint32_t(data_off)});
    entries.push_back({277, 3, 1, 1});
    entries.push_back({278, 4, 1, std::uint32_t(v.dims.ny)});
    entries.push_back({279, 4, 1, std::uint32_t(page_bytes)});
    entries.push_back({339, 3, 1, 1});

    const std::size_t ifd_off = out.size();
    put32(link, std::uint32_t(ifd_off));
    out.resize(out.size() + 2 + 12 * entries.size() + 4, 0);
    put16(ifd_off, std::uint16_t(entries.size()));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::size_t e = ifd_off + 2 + 12 * i;
      put16(e, entries[i].tag);
      put16(e + 2, entries[i].type);
      put32(e + 4, entries[i].count);
      if (entries[i].type == 3) put16(e + 8, std::uint16_t(entries[i].value));
      else put32(e + 8, entries[i].value);
    }
    link = ifd_off + 2 + 12 * entries.size();
    put32(link, 0);
  }
  write_binary(path, out);
}

}  // namespace

std::string_view sample_type_name(SampleType t) {
  switch (t) {
    case SampleType::UInt8: return "uint8";
    case SampleType::UInt16: return "uint16";
    case SampleType::Int16: return "int16";
    case SampleType::Float32: return "float32";
    case SampleType::Float64: return "float64";
  }
  return "?";
}

VolumeFormat format_from_path(const fs::path& p) {
  const std::string ext = lower(p.extension().string());
  if (ext == ".tif" || ext == ".tiff") return VolumeFormat::TiffStack;
  if (ext == ".nrrd" || ext == ".nhdr") return VolumeFormat::Nrrd;
  if (ext == ".raw") return VolumeFormat::RawMeta;
  throw FormatError("cannot infer volume format from extension: " + p.string());
}

Volume3 load_volume(const fs::path& path, VolumeFormat format) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  switch (format) {
    case VolumeFormat::TiffStack: return load_tiff(path);
    case VolumeFormat::RawMeta: return load_raw(path);
    case VolumeFormat::Nrrd: return load_nrrd(path);
  }
  throw FormatError("unknown volume format");
}

Volume3 load_volume(const fs::path& path) { return load_volume(path, format_from_path(path)); }

void save_volume(const Volume3& v, const fs::path& path, VolumeFormat format, SampleType type) {
  switch (format) {
    case VolumeFormat::TiffStack: return save_tiff(v, path, type);
    case VolumeFormat::RawMeta: return save_raw(v, path, type);
    case VolumeFormat::Nrrd: return save_nrrd(v, path, type);
  }
}

void save_volume(const Volume3& v, const fs::path& path, SampleType type) {
  save_volume(v, path, format_from_path(path), type);
}

SegMask load_mask(const fs::path& path) {
  SegMask m = mask_from_labels(load_volume(path));
  m.validate();
  return m;
}

void save_mask(const SegMask& m, const fs::path& path) {
  const VolumeFormat f = format_from_path(path);
  save_volume(labels_from_mask(m), path, f, SampleType::UInt8);
}

Volume3 hist_equalize(const Volume3& v, int bins) {
  if (v.data.empty()) throw InvalidArgument("cannot equalise an empty volume");
  if (bins < 1) throw InvalidArgument("bins must be positive");
  const auto [lo_it, hi_it] = std::minmax_element(v.data.begin(), v.data.end());
  const double lo = *lo_it, hi = *hi_it;
  Volume3 out = v;
  if (hi == lo) {
    std::fill(out.data.begin(), out.data.end(), 1.0);
    return out;
  }
  auto bin_of = [&](double x) {
    const int b = int(std::floor((x - lo) / (hi - lo) * bins));
    return std::clamp(b, 0, bins - 1);
  };
  std::vector<std::size_t> hist(std::size_t(bins), 0);
  for (double x : v.data) ++hist[std::size_t(bin_of(x))];
  std::vector<double> cdf(static_cast<std::size_t>(bins));
  std::size_t run = 0;
  for (int b = 0; b < bins; ++b) {
    run += hist[std::size_t(b)];
    cdf[std::size_t(b)] = double(run) / double(v.data.size());
  }
  for (double& x : out.data) x = cdf[std::size_t(bin_of(x))];
  return out;
}

// ---- SWC --------------------------------------------------------------------

std::string to_swc(const SkeletonGraph& s) {
  const auto kids = s.children();
  const double radius = 0.5 * s.spacing.min();
  std::ostringstream out;
  out << "# hieroglyph skeleton\n"
      << "# dims " << s.dims.nx << ' ' << s.dims.ny << ' ' << s.dims.nz << '\n'
      << "# spacing " << fmt_double(s.spacing.x) << ' ' << fmt_double(s.spacing.y) << ' ' << fmt_double(s.spacing.z)
      << '\n';
  int next_id = 1;
  auto emit = [&](Voxel v, int type, int parent) {
    const auto p = s.spacing.physical(v);
    out << next_id << ' ' << type << ' ' << fmt_double(p[0]) << ' ' << fmt_double(p[1]) << ' ' << fmt_double(p[2])
        << ' ' << fmt_double(radius) << ' ' << parent << '\n';
    return next_id++;
  };
  const int root_id = emit(s.root, 1, -1);

  // DFS over segments; children visited in index order.
  std::vector<std::pair<int, int>> stack;  // (segment, sample id of its attachment node)
  std::vector<int> roots;
  for (int i = 0; i < int(s.segments.size()); ++i)
    if (s.segments[i].parent < 0) roots.push_back(i);
  for (auto it = roots.rbegin(); it != roots.rend(); ++it) stack.emplace_back(*it, root_id);
  std::size_t emitted = 0;
  while (!stack.empty()) {
    const auto [seg, attach] = stack.back();
    stack.pop_back();
    if (++emitted > s.segments.size()) throw StructureError("cycle detected while writing SWC");
    int parent = attach;
    const auto& path = s.segments[seg].path;
    for (std::size_t k = 1; k < path.size(); ++k) parent = emit(path[k], 3, parent);
    for (auto it = kids[seg].rbegin(); it != kids[seg].rend(); ++it) stack.emplace_back(*it, parent);
  }
  if (emitted != s.segments.size()) throw StructureError("segments not connected to the root");
  return out.str();
}

void export_swc(const SkeletonGraph& s, const fs::path& path) { write_text_file(path, to_swc(s)); }

SkeletonGraph parse_swc(std::string_view text, const Spacing& fallback_spacing) {
  struct Sample {
    long long id;
    double x, y, z;
    long long parent;
  };
  std::vector<Sample> samples;
  std::optional<Dims> dims;
  Spacing spacing = fallback_spacing;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      const auto tok = split_ws(t.substr(1));
      if (tok.size() == 4 && tok[0] == "dims") dims = parse_dims(tok, 1, "swc dims");
      if (tok.size() == 4 && tok[0] == "spacing") spacing = parse_spacing(tok, 1, "swc spacing");
      continue;
    }
    const auto tok = split_ws(t);
    if (tok.size() < 7) throw FormatError("SWC line " + std::to_string(line_no) + ": expected 7 fields");
    const std::string where = "SWC line " + std::to_string(line_no);
    samples.push_back({parse_int(tok[0], where), parse_double(tok[2], where), parse_double(tok[3], where),
                       parse_double(tok[4], where), parse_int(tok[6], where)});
  }
  if (samples.empty()) throw FormatError("SWC has no samples");
  if (!spacing.valid()) throw FormatError("SWC spacing must be > 0");

  std::map<long long, std::size_t> by_id;
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (!by_id.emplace(samples[i].id, i).second) throw FormatError("duplicate SWC id " + std::to_string(samples[i].id));
  std::optional<std::size_t> root;
  std::vector<std::vector<std::size_t>> kids(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].parent == -1) {
      if (root) throw FormatError("SWC has multiple roots");
      root = i;
      continue;
    }
    const auto it = by_id.find(samples[i].parent);
    if (it == by_id.end()) throw FormatError("SWC id " + std::to_string(samples[i].id) + " has dangling parent");
    kids[it->second].push_back(i);
  }
  if (!root) throw FormatError("SWC has no root");
  for (auto& k : kids)
    std::sort(k.begin(), k.end(), [&](std::size_t a, std::size_t b) { return samples[a].id < samples[b].id; });

  auto voxel_of = [&](std::size_t i) {
    return Voxel{int(std::lround(samples[i].x / spacing.x)), int(std::lround(samples[i].y / spacing.y)),
                 int(std::lround(samples[i].z / spacing.z))};
  };

  SkeletonGraph s;
  s.spacing = spacing;
  s.root = voxel_of(*root);
  std::size_t visited = 1;
  std::vector<std::pair<std::size_t, int>> stack;  // (first sample of a branch, parent segment)
  for (auto it = kids[*root].rbegin(); it != kids[*root].rend(); ++it) stack.emplace_back(*it, -1);
  while (!stack.empty()) {
    auto [cur, parent] = stack.back();
    stack.pop_back();
    Segment seg;
    seg.parent = parent;
    seg.path.push_back(parent < 0 ? s.root : s.segments[std::size_t(parent)].distal());
    while (true) {
      if (++visited > samples.size()) throw FormatError("SWC contains a cycle");
      seg.path.push_back(voxel_of(cur));
      if (kids[cur].size() != 1) break;
      cur = kids[cur][0];
    }
    const int id = int(s.segments.size());
    s.segments.push_back(std::move(seg));
    for (auto it = kids[cur].rbegin(); it != kids[cur].rend(); ++it) stack.emplace_back(*it, id);
  }
  if (visited != samples.size()) throw FormatError("SWC contains a cycle or unreachable samples");

  if (dims) {
    s.dims = *dims;
  } else {
    Voxel hi = s.root;
    for (const auto& seg : s.segments)
      for (const Voxel v : seg.path) hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
    s.dims = {hi.x + 1, hi.y + 1, hi.z + 1};
  }
  return decompose_hierarchy(std::move(s));
}

SkeletonGraph import_swc(const fs::path& path, const Spacing& fallback_spacing) {
  return parse_swc(read_text_file(path), fallback_spacing);
}

// ---- report -------------------------------------------------------------------

std::string report_to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["per_hierarchy_accuracy"] = nlohmann::ordered_json::array();
  for (const auto& h : r.per_hierarchy)
    j["per_hierarchy_accuracy"].push_back(
        {{"hierarchy", h.hierarchy}, {"tp", h.tp}, {"fp", h.fp}, {"fn", h.fn}, {"accuracy", h.accuracy}});
  j["weighted_accuracy_normalized"] = r.weighted_normalized;
  j["weighted_accuracy_paper_raw"] = r.weighted_paper_raw;
  j["n_bifurcations_test"] = r.bifurcations_test;
  j["n_bifurcations_gt"] = r.bifurcations_gt;
  j["n_terminals_test"] = r.terminals_test;
  j["n_terminals_gt"] = r.terminals_gt;
  j["mean_bifurcation_distance_um"] = r.mean_bif_dist_um ? nlohmann::ordered_json(*r.mean_bif_dist_um) : nullptr;
  j["mean_terminal_distance_um"] = r.mean_term_dist_um ? nlohmann::ordered_json(*r.mean_term_dist_um) : nullptr;
  return j.dump(2) + "\n";
}

EvalReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) throw FormatError("unsupported report schema");
    EvalReport r;
    for (const auto& h : j.at("per_hierarchy_accuracy"))
      r.per_hierarchy.push_back({h.at("hierarchy").get<int>(), h.at("tp").get<int>(), h.at("fp").get<int>(),
                                 h.at("fn").get<int>(), h.at("accuracy").get<double>()});
    r.weighted_normalized = j.at("weighted_accuracy_normalized").get<double>();
    r.weighted_paper_raw = j.at("weighted_accuracy_paper_raw").get<double>();
    r.bifurcations_test = j.at("n_bifurcations_test").get<int>();
    r.bifurcations_gt = j.at("n_bifurcations_gt").get<int>();
    r.terminals_test = j.at("n_terminals_test").get<int>();
    r.terminals_gt = j.at("n_terminals_gt").get<int>();
    if (!j.at("mean_bifurcation_distance_um").is_null()) r.mean_bif_dist_um = j["mean_bifurcation_distance_um"].get<double>();
    if (!j.at("mean_terminal_distance_um").is_null()) r.mean_term_dist_um = j["mean_terminal_distance_um"].get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad report JSON: ") + e.what());
  }
}

void export_report(const EvalReport& r, const fs::path& path) { write_text_file(path, report_to_json(r)); }

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace hieroglyph
