#pragma once

#include <optional>
#include <string>

#include "dsmreg/raster.h"

namespace dsmreg {

// Native on-disk formats.
//
// kAsciiGrid: ESRI ASCII grid. Header keys ncols, nrows, xllcorner|xllcenter,
//   yllcorner|yllcenter, cellsize, NODATA_value (case-insensitive); body is
//   row-major, north row first. A 6-line world file next to the grid
//   (<stem>.wld) overrides the header georeferencing.
//
// kBinary: little-endian
//   offset  0  char[4]  "DSMG"
//   offset  4  u16      version (1)
//   offset  6  u32      width
//   offset 10  u32      height
//   offset 14  f64[6]   x_origin, x_scale, x_skew, y_origin, y_skew, y_scale
//   offset 62  f64      nodata
//   offset 70  f64[width*height] heights, row-major, north row first
enum class RasterFormat { kAuto, kAsciiGrid, kBinary };

inline constexpr std::size_t kBinaryHeaderBytes = 70;
inline constexpr std::uint16_t kBinaryVersion = 1;

RasterFormat parse_format_name(const std::string& name);

struct LoadOptions {
  // Explicit world file; when unset, <stem>.wld is used if it exists (ASCII only).
  std::optional<std::string> world_file;
};

// Reads only the header and georeferencing. Pixel data stays on disk and is
// fetched by window reads. Throws ParseError, UnsupportedFormat, IoError.
DsmGrid load_dsm(const std::string& path, RasterFormat format = RasterFormat::kAuto,
                 const LoadOptions& options = {});

// Streams `grid` to disk band by band. Binary output is bit-exact; ASCII prints
// shortest round-trip decimals, so values reload exactly. Rasters whose
// transform an ASCII header cannot express also get a <stem>.wld companion.
void write_dsm(const DsmGrid& grid, const std::string& path,
               RasterFormat format = RasterFormat::kAuto);

// World file lines: x_scale, y_skew, x_skew, y_scale, x_origin, y_origin.
GeoTransform read_world_file(const std::string& path);
void write_world_file(const GeoTransform& gt, const std::string& path);

}  // namespace dsmreg
