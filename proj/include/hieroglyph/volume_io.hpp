#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hieroglyph/metrics.hpp"
#include "hieroglyph/skeleton.hpp"
#include "hieroglyph/types.hpp"

namespace hieroglyph {

enum class VolumeFormat { TiffStack, RawMeta, Nrrd };

/// tiff/tif -> TiffStack, nrrd/nhdr -> Nrrd, raw -> RawMeta. Throws FormatError otherwise.
VolumeFormat format_from_path(const std::filesystem::path& p);

enum class SampleType { UInt8, UInt16, Int16, Float32, Float64 };

std::string_view sample_type_name(SampleType t);

/// Reads a volume. Raw payloads need a sidecar "<path>.meta" with lines
///   dims <nx> <ny> <nz>
///   spacing <sx> <sy> <sz>
///   dtype uint8|uint16|int16|float32|float64
///   endian little|big
/// TIFF stacks are read page by page (uncompressed 8/16-bit grayscale); spacing
/// is 1 unless an ImageDescription carries "spacing=sx,sy,sz".
Volume3 load_volume(const std::filesystem::path& path, VolumeFormat format);
Volume3 load_volume(const std::filesystem::path& path);

/// Writes a volume. TIFF output quantises to `type` and throws InvalidArgument
/// unless it is uint8 or uint16.
void save_volume(const Volume3& v, const std::filesystem::path& path, VolumeFormat format,
                 SampleType type = SampleType::Float64);
void save_volume(const Volume3& v, const std::filesystem::path& path, SampleType type = SampleType::Float64);

/// Label volume (0 background, 1 process, 2 soma) to mask and back.
SegMask load_mask(const std::filesystem::path& path);
void save_mask(const SegMask& m, const std::filesystem::path& path);

/// Global histogram equalisation to [0, 1]: each voxel maps to the cumulative
/// fraction of voxels whose bin is <= its own.
Volume3 hist_equalize(const Volume3& v, int bins = 256);

/// SWC text: "id type x y z radius parent", coordinates in micrometres. The
/// header carries "# dims" and "# spacing" comments used to recover voxel indices.
std::string to_swc(const SkeletonGraph& s);
void export_swc(const SkeletonGraph& s, const std::filesystem::path& path);

/// Parses SWC. Voxel indices are coordinates divided by spacing: the header's
/// "# spacing" when present, else `fallback_spacing`. Segments are split at
/// branching samples and hierarchy is recomputed.
SkeletonGraph parse_swc(std::string_view text, const Spacing& fallback_spacing = {});
SkeletonGraph import_swc(const std::filesystem::path& path, const Spacing& fallback_spacing = {});

inline constexpr int kReportSchemaVersion = 1;

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(std::string_view json);
void export_report(const EvalReport& r, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace hieroglyph
