#include "dsmreg/raster_io.h"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <fmt/format.h>

#include "dsmreg/errors.h"

namespace dsmreg {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'D', 'S', 'M', 'G'};

// Owning POSIX descriptor; pread keeps concurrent window reads independent.
class FileHandle {
 public:
  explicit FileHandle(const std::string& path) : fd_(::open(path.c_str(), O_RDONLY | O_CLOEXEC)) {
    if (fd_ < 0) {
      throw DsmError(ErrorCode::kIoError,
                     fmt::format("cannot open {}: {}", path, std::strerror(errno)));
    }
  }
  ~FileHandle() {
    if (fd_ >= 0) ::close(fd_);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;

  std::uint64_t size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) return 0;
    return static_cast<std::uint64_t>(st.st_size);
  }

  // Returns the number of bytes read (short only at end of file).
  std::size_t read_at(std::uint64_t offset, void* dst, std::size_t n) const {
    auto* out = static_cast<char*>(dst);
    std::size_t done = 0;
    while (done < n) {
      const ssize_t r = ::pread(fd_, out + done, n - done, static_cast<off_t>(offset + done));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw DsmError(ErrorCode::kIoError, fmt::format("read failed: {}", std::strerror(errno)));
      }
      if (r == 0) break;
      done += static_cast<std::size_t>(r);
    }
    return done;
  }

 private:
  int fd_;
};

template <typename T>
T from_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&value);
    std::reverse(b, b + sizeof(T));
  }
  return value;
}

template <typename T>
void append_le(std::string& out, T value) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

// ---------------------------------------------------------------------------
// Binary

class BinarySource final : public RasterSource {
 public:
  BinarySource(std::shared_ptr<FileHandle> file, std::int64_t width)
      : file_(std::move(file)), width_(width) {}

  void read(const PixelRect& rect, std::span<double> out) const override {
    const std::int64_t w = rect.width();
    for (std::int64_t v = rect.v_min; v <= rect.v_max; ++v) {
      const std::uint64_t offset =
          kBinaryHeaderBytes + static_cast<std::uint64_t>(v * width_ + rect.u_min) * 8;
      double* dst = out.data() + (v - rect.v_min) * w;
      const auto bytes = static_cast<std::size_t>(w) * 8;
      if (file_->read_at(offset, dst, bytes) != bytes) {
        throw DsmError(ErrorCode::kIoError, "binary raster truncated during window read");
      }
      if constexpr (std::endian::native == std::endian::big) {
        for (std::int64_t i = 0; i < w; ++i)
          dst[i] = from_le<double>(reinterpret_cast<const unsigned char*>(dst + i));
      }
    }
  }

 private:
  std::shared_ptr<FileHandle> file_;
  std::int64_t width_;
};

DsmGrid load_binary(const std::string& path) {
  auto file = std::make_shared<FileHandle>(path);
  unsigned char header[kBinaryHeaderBytes];
  const std::size_t got = file->read_at(0, header, sizeof header);
  if (got < 4 || std::memcmp(header, kMagic, 4) != 0) {
    throw ParseError(path, 1, 0, "missing DSMG magic");
  }
  if (got < kBinaryHeaderBytes) throw ParseError(path, 1, got, "truncated header");
  const auto version = from_le<std::uint16_t>(header + 4);
  if (version != kBinaryVersion) {
    throw ParseError(path, 1, 4, fmt::format("unsupported version {}", version));
  }
  const auto width = from_le<std::uint32_t>(header + 6);
  const auto height = from_le<std::uint32_t>(header + 10);
  if (width == 0 || height == 0) throw ParseError(path, 1, 6, "zero raster dimension");
  GeoTransform gt;
  gt.x_origin = from_le<double>(header + 14);
  gt.x_scale = from_le<double>(header + 22);
  gt.x_skew = from_le<double>(header + 30);
  gt.y_origin = from_le<double>(header + 38);
  gt.y_skew = from_le<double>(header + 46);
  gt.y_scale = from_le<double>(header + 54);
  const double nodata = from_le<double>(header + 62);
  const std::uint64_t expected =
      kBinaryHeaderBytes + static_cast<std::uint64_t>(width) * height * 8;
  if (file->size() < expected) {
    throw ParseError(path, 1, file->size(),
                     fmt::format("expected {} bytes for {}x{} raster", expected, width, height));
  }
  if (!gt.invertible()) throw ParseError(path, 1, 14, "singular geotransform");
  return DsmGrid(width, height, gt, nodata, std::make_shared<BinarySource>(file, width), 0,
                 path);
}

// ---------------------------------------------------------------------------
// ASCII grid

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ','; }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_double(std::string_view token, double& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

struct AsciiHeader {
  std::int64_t ncols = -1;
  std::int64_t nrows = -1;
  double xll = 0.0;
  double yll = 0.0;
  bool x_center = false;
  bool y_center = false;
  bool has_x = false;
  bool has_y = false;
  double cellsize = 0.0;
  double nodata = -9999.0;
  std::uint64_t data_offset = 0;
  std::size_t data_line = 1;
};

AsciiHeader parse_ascii_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DsmError(ErrorCode::kIoError, fmt::format("cannot open {}", path));
  AsciiHeader h;
  std::string line;
  std::uint64_t offset = 0;
  std::size_t line_no = 0;
  while (true) {
    const std::uint64_t line_start = offset;
    // Only the leading token of a body line is read, so loading never scales
    // with the raster width.
    line.clear();
    int c = in.get();
    if (c == std::char_traits<char>::eof()) break;
    ++line_no;
    while (c != std::char_traits<char>::eof() && c != '\n' && is_space(static_cast<char>(c))) {
      line.push_back(static_cast<char>(c));
      c = in.get();
    }
    while (c != std::char_traits<char>::eof() && !is_space(static_cast<char>(c))) {
      line.push_back(static_cast<char>(c));
      c = in.get();
    }
    std::size_t i = 0;
    while (i < line.size() && is_space(line[i])) ++i;
    std::size_t j = line.size();
    double probe = 0.0;
    if (i < j && parse_double(std::string_view(line).substr(i, j - i), probe)) {
      h.data_offset = line_start;
      h.data_line = line_no;
      break;
    }
    while (c != std::char_traits<char>::eof() && c != '\n') {
      if (line.size() > 4096) throw ParseError(path, line_no, line_start, "header line too long");
      line.push_back(static_cast<char>(c));
      c = in.get();
    }
    offset += line.size() + (c == '\n' ? 1 : 0);
    if (i == line.size()) continue;
    const std::string key = lower(line.substr(i, j - i));
    while (j < line.size() && is_space(line[j])) ++j;
    std::size_t k = j;
    while (k < line.size() && !is_space(line[k])) ++k;
    double value = 0.0;
    if (!parse_double(std::string_view(line).substr(j, k - j), value)) {
      throw ParseError(path, line_no, line_start + j,
                       fmt::format("bad value for header key '{}'", key));
    }
    if (key == "ncols") {
      h.ncols = static_cast<std::int64_t>(value);
    } else if (key == "nrows") {
      h.nrows = static_cast<std::int64_t>(value);
    } else if (key == "xllcorner" || key == "xllcenter") {
      h.xll = value;
      h.x_center = key == "xllcenter";
      h.has_x = true;
    } else if (key == "yllcorner" || key == "yllcenter") {
      h.yll = value;
      h.y_center = key == "yllcenter";
      h.has_y = true;
    } else if (key == "cellsize") {
      h.cellsize = value;
    } else if (key == "nodata_value") {
      h.nodata = value;
    } else {
      throw ParseError(path, line_no, line_start + i, fmt::format("unknown header key '{}'", key));
    }
  }
  if (h.data_offset == 0) throw ParseError(path, line_no, offset, "no raster body after header");
  if (h.ncols < 1 || h.nrows < 1) throw ParseError(path, 1, 0, "ncols/nrows missing or < 1");
  if (!h.has_x || !h.has_y) throw ParseError(path, 1, 0, "xll*/yll* missing");
  if (!(h.cellsize > 0.0)) throw ParseError(path, 1, 0, "cellsize missing or not positive");
  return h;
}

// Body access through a lazily built per-row byte-offset index: O(nrows) memory.
class AsciiSource final : public RasterSource {
 public:
  AsciiSource(std::string path, std::shared_ptr<FileHandle> file, AsciiHeader header)
      : path_(std::move(path)), file_(std::move(file)), header_(header) {}

  void read(const PixelRect& rect, std::span<double> out) const override {
    std::call_once(index_once_, [this] { build_index(); });
    const std::int64_t w = rect.width();
    std::string buf;
    for (std::int64_t v = rect.v_min; v <= rect.v_max; ++v) {
      const std::uint64_t begin = row_offsets_[static_cast<std::size_t>(v)];
      const std::uint64_t end = row_offsets_[static_cast<std::size_t>(v) + 1];
      buf.resize(static_cast<std::size_t>(end - begin));
      file_->read_at(begin, buf.data(), buf.size());
      std::int64_t col = 0;
      std::size_t i = 0;
      double* dst = out.data() + (v - rect.v_min) * w;
      while (col <= rect.u_max) {
        while (i < buf.size() && is_space(buf[i])) ++i;
        std::size_t j = i;
        while (j < buf.size() && !is_space(buf[j])) ++j;
        if (col >= rect.u_min) {
          double value = 0.0;
          if (!parse_double(std::string_view(buf).substr(i, j - i), value)) {
            const auto newlines = std::count(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(i), '\n');
            throw ParseError(path_, row_lines_[static_cast<std::size_t>(v)] + static_cast<std::size_t>(newlines),
                             begin + i, fmt::format("bad height at row {} col {}", v, col));
          }
          dst[col - rect.u_min] = value;
        }
        i = j;
        ++col;
      }
    }
  }

 private:
  void build_index() const {
    const std::uint64_t size = file_->size();
    const std::int64_t ncols = header_.ncols;
    row_offsets_.reserve(static_cast<std::size_t>(header_.nrows) + 1);
    std::vector<char> chunk(1 << 16);
    std::uint64_t pos = header_.data_offset;
    std::int64_t tokens = 0;
    std::size_t line = header_.data_line;
    bool in_token = false;
    while (pos < size && static_cast<std::int64_t>(row_offsets_.size()) < header_.nrows + 1) {
      const std::size_t n = file_->read_at(pos, chunk.data(), chunk.size());
      if (n == 0) break;
      for (std::size_t k = 0; k < n; ++k) {
        const char c = chunk[k];
        if (c == '\n') ++line;
        if (is_space(c)) {
          in_token = false;
          continue;
        }
        if (!in_token) {
          if (tokens % ncols == 0) {
            row_offsets_.push_back(pos + k);
            row_lines_.push_back(line);
            if (static_cast<std::int64_t>(row_offsets_.size()) == header_.nrows + 1) {
              throw ParseError(path_, line, pos + k,
                               fmt::format("more than {} values in body", ncols * header_.nrows));
            }
          }
          ++tokens;
          in_token = true;
        }
      }
      pos += n;
    }
    if (tokens != ncols * header_.nrows) {
      throw ParseError(path_, line, size,
                       fmt::format("body holds {} values, expected {}", tokens,
                                   ncols * header_.nrows));
    }
    row_offsets_.push_back(size);
  }

  std::string path_;
  std::shared_ptr<FileHandle> file_;
  AsciiHeader header_;
  mutable std::once_flag index_once_;
  mutable std::vector<std::uint64_t> row_offsets_;
  mutable std::vector<std::size_t> row_lines_;
};

DsmGrid load_ascii(const std::string& path, const LoadOptions& options) {
  const AsciiHeader h = parse_ascii_header(path);
  GeoTransform gt;
  gt.x_scale = h.cellsize;
  gt.y_scale = -h.cellsize;
  gt.x_origin = h.x_center ? h.xll : h.xll + 0.5 * h.cellsize;
  const double yll_center = h.y_center ? h.yll : h.yll + 0.5 * h.cellsize;
  gt.y_origin = yll_center + static_cast<double>(h.nrows - 1) * h.cellsize;

  std::optional<std::string> world = options.world_file;
  if (!world) {
    const fs::path candidate = fs::path(path).replace_extension(".wld");
    if (fs::exists(candidate)) world = candidate.string();
  }
  if (world) gt = read_world_file(*world);

  auto file = std::make_shared<FileHandle>(path);
  return DsmGrid(h.ncols, h.nrows, gt, h.nodata,
                 std::make_shared<AsciiSource>(path, std::move(file), h), 0, path);
}

RasterFormat detect_format(const std::string& path) {
  const std::string ext = lower(fs::path(path).extension().string());
  if (ext == ".asc" || ext == ".txt") return RasterFormat::kAsciiGrid;
  if (ext == ".dsmg" || ext == ".bin") return RasterFormat::kBinary;
  return RasterFormat::kAuto;
}

std::string shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_binary(const DsmGrid& grid, const std::string& path) {
  if (grid.width() > 0xffffffffLL || grid.height() > 0xffffffffLL) {
    throw DsmError(ErrorCode::kUnsupportedFormat, "raster too large for the binary format");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("cannot create {}", path));
  std::string header(kMagic, 4);
  append_le<std::uint16_t>(header, kBinaryVersion);
  append_le<std::uint32_t>(header, static_cast<std::uint32_t>(grid.width()));
  append_le<std::uint32_t>(header, static_cast<std::uint32_t>(grid.height()));
  const GeoTransform& gt = grid.geotransform();
  for (double d : {gt.x_origin, gt.x_scale, gt.x_skew, gt.y_origin, gt.y_skew, gt.y_scale,
                   grid.nodata()})
    append_le<double>(header, d);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::vector<double> row(static_cast<std::size_t>(grid.width()));
  std::string bytes;
  for (std::int64_t v = 0; v < grid.height(); ++v) {
    grid.source().read({0, grid.width() - 1, v, v}, row);
    bytes.clear();
    for (double d : row) append_le<double>(bytes, d);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("write failed for {}", path));
}

void write_ascii(const DsmGrid& grid, const std::string& path) {
  const GeoTransform& gt = grid.geotransform();
  const bool header_expressible =
      gt.x_skew == 0.0 && gt.y_skew == 0.0 && gt.x_scale > 0.0 && gt.y_scale == -gt.x_scale;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("cannot create {}", path));
  const double cellsize = std::abs(gt.x_scale);
  const double yll = gt.y_origin + gt.y_scale * static_cast<double>(grid.height() - 1);
  out << "ncols " << grid.width() << '\n'
      << "nrows " << grid.height() << '\n'
      << "xllcenter " << shortest(gt.x_origin) << '\n'
      << "yllcenter " << shortest(header_expressible ? yll : gt.y_origin) << '\n'
      << "cellsize " << shortest(cellsize) << '\n'
      << "NODATA_value " << shortest(grid.nodata()) << '\n';
  std::vector<double> row(static_cast<std::size_t>(grid.width()));
  std::string line;
  for (std::int64_t v = 0; v < grid.height(); ++v) {
    grid.source().read({0, grid.width() - 1, v, v}, row);
    line.clear();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += ' ';
      line += shortest(std::isnan(row[i]) ? grid.nodata() : row[i]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("write failed for {}", path));
  const fs::path wld = fs::path(path).replace_extension(".wld");
  if (!header_expressible) {
    write_world_file(gt, wld.string());
  } else if (fs::exists(wld)) {
    fs::remove(wld);
  }
}

}  // namespace

RasterFormat parse_format_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "auto") return RasterFormat::kAuto;
  if (n == "asc" || n == "ascii") return RasterFormat::kAsciiGrid;
  if (n == "dsmg" || n == "binary" || n == "bin") return RasterFormat::kBinary;
  throw DsmError(ErrorCode::kUnsupportedFormat, fmt::format("unknown raster format '{}'", name));
}

DsmGrid load_dsm(const std::string& path, RasterFormat format, const LoadOptions& options) {
  if (!fs::exists(path)) throw DsmError(ErrorCode::kIoError, fmt::format("{} does not exist", path));
  if (format == RasterFormat::kAuto) format = detect_format(path);
  if (format == RasterFormat::kAuto) {
    FileHandle probe(path);
    char magic[4] = {};
    if (probe.read_at(0, magic, 4) == 4 && std::memcmp(magic, kMagic, 4) == 0) {
      format = RasterFormat::kBinary;
    } else {
      throw DsmError(ErrorCode::kUnsupportedFormat,
                     fmt::format("cannot determine raster format of {}", path));
    }
  }
  return format == RasterFormat::kBinary ? load_binary(path) : load_ascii(path, options);
}

void write_dsm(const DsmGrid& grid, const std::string& path, RasterFormat format) {
  if (format == RasterFormat::kAuto) format = detect_format(path);
  switch (format) {
    case RasterFormat::kBinary: return write_binary(grid, path);
    case RasterFormat::kAsciiGrid: return write_ascii(grid, path);
    case RasterFormat::kAuto: break;
  }
  throw DsmError(ErrorCode::kUnsupportedFormat,
                 fmt::format("cannot infer raster format from extension of {}", path));
}

GeoTransform read_world_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DsmError(ErrorCode::kIoError, fmt::format("cannot open world file {}", path));
  double values[6];
  std::string line;
  std::uint64_t offset = 0;
  for (int i = 0; i < 6; ++i) {
    if (!std::getline(in, line)) {
      throw ParseError(path, i + 1, offset, "world file needs 6 numeric lines");
    }
    std::string_view s(line);
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    if (!parse_double(s, values[i])) throw ParseError(path, i + 1, offset, "not a number");
    offset += line.size() + 1;
  }
  GeoTransform gt;
  gt.x_scale = values[0];
  gt.y_skew = values[1];
  gt.x_skew = values[2];
  gt.y_scale = values[3];
  gt.x_origin = values[4];
  gt.y_origin = values[5];
  if (!gt.invertible()) throw ParseError(path, 1, 0, "singular world file transform");
  return gt;
}

void write_world_file(const GeoTransform& gt, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DsmError(ErrorCode::kIoError, fmt::format("cannot create {}", path));
  for (double d : {gt.x_scale, gt.y_skew, gt.x_skew, gt.y_scale, gt.x_origin, gt.y_origin})
    out << shortest(d) << '\n';
}

}  // namespace dsmreg
