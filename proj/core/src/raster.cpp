#include "ellitrack/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <glob.h>
#include <queue>
#include <sstream>

#include "ellitrack/error.hpp"

#ifdef ELLITRACK_HAVE_PNG
#include <png.h>
#include <csetjmp>
#endif

namespace ellitrack {

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 0 || height < 0) throw ContractError("GrayImage: negative dimensions");
  if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw ContractError("GrayImage: data length " + std::to_string(data_.size()) + " != " +
                        std::to_string(width) + "x" + std::to_string(height));
  }
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("GrayImage: intensity outside [0, 1]");
  }
}

GrayImage GrayImage::filled(int width, int height, double value) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(width) * height, value));
}

double GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return at(x, y);
}

double GrayImage::bilinear(double x, double y) const {
  const double fx0 = std::floor(x);
  const double fy0 = std::floor(y);
  const double fx = x - fx0;
  const double fy = y - fy0;
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const double v00 = clamped(x0, y0);
  const double v10 = clamped(x0 + 1, y0);
  const double v01 = clamped(x0, y0 + 1);
  const double v11 = clamped(x0 + 1, y0 + 1);
  return v00 * (1.0 - fx) * (1.0 - fy) + v10 * fx * (1.0 - fy) + v01 * (1.0 - fx) * fy +
         v11 * fx * fy;
}

int grid_half(double extent) { return static_cast<int>(std::ceil(extent)); }

Patch extract_patch(const GrayImage& image, Point2 center, Extents half_extents, double orientation) {
  if (!(half_extents.a > 0.0 && half_extents.b > 0.0)) {
    throw ContractError("extract_patch: half extents must be positive");
  }
  const int ha = grid_half(half_extents.a);
  const int hb = grid_half(half_extents.b);
  const int w = 2 * ha + 1;
  const int h = 2 * hb + 1;
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  std::vector<double> samples(static_cast<std::size_t>(w) * h);
  for (int v = -hb; v <= hb; ++v) {
    for (int u = -ha; u <= ha; ++u) {
      const double x = center.x + (u * c - v * s);
      const double y = center.y + (u * s + v * c);
      samples[static_cast<std::size_t>(v + hb) * w + (u + ha)] = image.bilinear(x, y);
    }
  }
  return Patch{center, half_extents, orientation, GrayImage(w, h, std::move(samples))};
}

// --- PixelMask --------------------------------------------------------------

PixelMask::PixelMask(int x0, int y0, int width, int height)
    : x0_(x0), y0_(y0), width_(std::max(width, 0)), height_(std::max(height, 0)),
      bits_(static_cast<std::size_t>(width_) * height_, 0) {}

bool PixelMask::contains(int x, int y) const {
  const int lx = x - x0_;
  const int ly = y - y0_;
  if (lx < 0 || ly < 0 || lx >= width_ || ly >= height_) return false;
  return local(lx, ly) != 0;
}

void PixelMask::set(int x, int y, bool value) {
  const int lx = x - x0_;
  const int ly = y - y0_;
  if (lx < 0 || ly < 0 || lx >= width_ || ly >= height_) {
    throw ContractError("PixelMask::set: pixel outside window");
  }
  local(lx, ly) = value ? 1 : 0;
}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

PixelMask PixelMask::cropped() const {
  int minx = width_, miny = height_, maxx = -1, maxy = -1;
  for (int ly = 0; ly < height_; ++ly) {
    for (int lx = 0; lx < width_; ++lx) {
      if (!local(lx, ly)) continue;
      minx = std::min(minx, lx);
      maxx = std::max(maxx, lx);
      miny = std::min(miny, ly);
      maxy = std::max(maxy, ly);
    }
  }
  if (maxx < 0) return PixelMask(0, 0, 0, 0);
  PixelMask out(x0_ + minx, y0_ + miny, maxx - minx + 1, maxy - miny + 1);
  for (int ly = miny; ly <= maxy; ++ly) {
    for (int lx = minx; lx <= maxx; ++lx) out.local(lx - minx, ly - miny) = local(lx, ly);
  }
  return out;
}

PixelMask PixelMask::largest_component() const {
  std::vector<int> label(bits_.size(), -1);
  std::vector<std::size_t> sizes;
  std::queue<std::pair<int, int>> frontier;
  for (int ly = 0; ly < height_; ++ly) {
    for (int lx = 0; lx < width_; ++lx) {
      const std::size_t idx = static_cast<std::size_t>(ly) * width_ + lx;
      if (!bits_[idx] || label[idx] >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t size = 0;
      label[idx] = id;
      frontier.emplace(lx, ly);
      while (!frontier.empty()) {
        auto [cx, cy] = frontier.front();
        frontier.pop();
        ++size;
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k];
          const int ny = cy + dy[k];
          if (nx < 0 || ny < 0 || nx >= width_ || ny >= height_) continue;
          const std::size_t nidx = static_cast<std::size_t>(ny) * width_ + nx;
          if (!bits_[nidx] || label[nidx] >= 0) continue;
          label[nidx] = id;
          frontier.emplace(nx, ny);
        }
      }
      sizes.push_back(size);
    }
  }
  PixelMask out(x0_, y0_, width_, height_);
  if (sizes.empty()) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < label.size(); ++i) out.bits_[i] = label[i] == best ? 1 : 0;
  return out;
}

std::size_t PixelMask::intersection_count(const PixelMask& other) const {
  const int bx0 = std::max(x0_, other.x0_);
  const int by0 = std::max(y0_, other.y0_);
  const int bx1 = std::min(x0_ + width_, other.x0_ + other.width_);
  const int by1 = std::min(y0_ + height_, other.y0_ + other.height_);
  std::size_t n = 0;
  for (int y = by0; y < by1; ++y) {
    for (int x = bx0; x < bx1; ++x) {
      if (local(x - x0_, y - y0_) && other.local(x - other.x0_, y - other.y0_)) ++n;
    }
  }
  return n;
}

void PixelMask::merge(const PixelMask& other) {
  const int bx0 = std::max(x0_, other.x0_);
  const int by0 = std::max(y0_, other.y0_);
  const int bx1 = std::min(x0_ + width_, other.x0_ + other.width_);
  const int by1 = std::min(y0_ + height_, other.y0_ + other.height_);
  for (int y = by0; y < by1; ++y) {
    for (int x = bx0; x < bx1; ++x) {
      if (other.local(x - other.x0_, y - other.y0_)) local(x - x0_, y - y0_) = 1;
    }
  }
}

void PixelMask::subtract(const PixelMask& other) {
  const int bx0 = std::max(x0_, other.x0_);
  const int by0 = std::max(y0_, other.y0_);
  const int bx1 = std::min(x0_ + width_, other.x0_ + other.width_);
  const int by1 = std::min(y0_ + height_, other.y0_ + other.height_);
  for (int y = by0; y < by1; ++y) {
    for (int x = bx0; x < bx1; ++x) {
      if (other.local(x - other.x0_, y - other.y0_)) local(x - x0_, y - y0_) = 0;
    }
  }
}

std::vector<PixelRun> PixelMask::runs() const {
  std::vector<PixelRun> out;
  for (int ly = 0; ly < height_; ++ly) {
    int lx = 0;
    while (lx < width_) {
      if (!local(lx, ly)) {
        ++lx;
        continue;
      }
      const int start = lx;
      while (lx < width_ && local(lx, ly)) ++lx;
      out.push_back({y0_ + ly, x0_ + start, lx - start});
    }
  }
  return out;
}

PixelMask PixelMask::from_runs(std::span<const PixelRun> runs) {
  if (runs.empty()) return PixelMask(0, 0, 0, 0);
  int minx = runs.front().x, maxx = runs.front().x + runs.front().length - 1;
  int miny = runs.front().y, maxy = runs.front().y;
  for (const auto& r : runs) {
    if (r.length <= 0) throw ContractError("PixelMask::from_runs: nonpositive run length");
    minx = std::min(minx, r.x);
    maxx = std::max(maxx, r.x + r.length - 1);
    miny = std::min(miny, r.y);
    maxy = std::max(maxy, r.y);
  }
  PixelMask out(minx, miny, maxx - minx + 1, maxy - miny + 1);
  for (const auto& r : runs) {
    for (int x = r.x; x < r.x + r.length; ++x) out.set(x, r.y);
  }
  return out;
}

double mask_iou(const PixelMask& lhs, const PixelMask& rhs) {
  const std::size_t inter = lhs.intersection_count(rhs);
  const std::size_t uni = lhs.count() + rhs.count() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PixelMask rasterize_ellipse(Point2 center, Extents axes, double orientation) {
  const double r = std::max(axes.a, axes.b);
  const int x0 = static_cast<int>(std::floor(center.x - r));
  const int y0 = static_cast<int>(std::floor(center.y - r));
  const int x1 = static_cast<int>(std::ceil(center.x + r));
  const int y1 = static_cast<int>(std::ceil(center.y + r));
  PixelMask mask(x0, y0, x1 - x0 + 1, y1 - y0 + 1);
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x;
      const double dy = y - center.y;
      const double u = dx * c + dy * s;
      const double v = -dx * s + dy * c;
      if ((u * u) / (axes.a * axes.a) + (v * v) / (axes.b * axes.b) <= 1.0) mask.set(x, y);
    }
  }
  return mask;
}

// --- I/O ----------------------------------------------------------------------

std::vector<std::filesystem::path> expand_pattern(const std::string& pattern) {
  glob_t result{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &result);
  std::vector<std::filesystem::path> paths;
  if (rc == 0) {
    for (std::size_t i = 0; i < result.gl_pathc; ++i) paths.emplace_back(result.gl_pathv[i]);
  }
  ::globfree(&result);
  std::sort(paths.begin(), paths.end(),
            [](const auto& l, const auto& r) { return l.filename().string() < r.filename().string() ||
                                                      (l.filename() == r.filename() && l < r); });
  return paths;
}

std::vector<GrayImage> load_sequence(const std::string& pattern) {
  const auto paths = expand_pattern(pattern);
  if (paths.empty()) throw IoError("no frames matched pattern '" + pattern + "'");
  std::vector<GrayImage> frames;
  frames.reserve(paths.size());
  for (const auto& p : paths) frames.push_back(read_image(p));
  return frames;
}

GrayImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open frame '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  if (in.gcount() == 8 && static_cast<unsigned char>(magic[0]) == 0x89 && magic[1] == 'P' &&
      magic[2] == 'N' && magic[3] == 'G') {
    return read_png(path);
  }
  throw IoError("unsupported image format in '" + path.string() + "' (expected P5 PGM or PNG)");
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

int parse_header_int(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string tok = next_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError("malformed PGM header (" + std::string(what) + ") in '" + path.string() + "'");
  }
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PGM '" + path.string() + "'");
  if (next_token(in) != "P5") throw IoError("not a binary P5 PGM: '" + path.string() + "'");
  const int w = parse_header_int(in, path, "width");
  const int h = parse_header_int(in, path, "height");
  const int maxval = parse_header_int(in, path, "maxval");
  if (maxval > 65535) {
    throw IoError("unsupported PGM bit depth (maxval " + std::to_string(maxval) + ") in '" +
                  path.string() + "'");
  }
  const int bytes_per = maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<unsigned char> raw(n * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("truncated PGM pixel data in '" + path.string() + "'");
  }
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int v = bytes_per == 1 ? raw[i] : (raw[2 * i] << 8) | raw[2 * i + 1];
    if (v > maxval) throw IoError("PGM sample exceeds maxval in '" + path.string() + "'");
    data[i] = static_cast<double>(v) / maxval;
  }
  return GrayImage(w, h, std::move(data));
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image, int maxval) {
  if (maxval != 255 && maxval != 65535) throw ContractError("write_pgm: maxval must be 255 or 65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write PGM '" + path.string() + "'");
  out << "P5\n" << image.width() << ' ' << image.height() << '\n' << maxval << '\n';
  std::vector<unsigned char> raw;
  raw.reserve(image.data().size() * (maxval == 255 ? 1 : 2));
  for (double v : image.data()) {
    const auto q = static_cast<unsigned>(std::lround(v * maxval));
    if (maxval == 255) {
      raw.push_back(static_cast<unsigned char>(q));
    } else {
      raw.push_back(static_cast<unsigned char>(q >> 8));
      raw.push_back(static_cast<unsigned char>(q & 0xff));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing PGM '" + path.string() + "'");
}

#ifdef ELLITRACK_HAVE_PNG

bool png_supported() { return true; }

GrayImage read_png(const std::filesystem::path& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open PNG '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    std::fclose(fp);
    throw IoError("libpng initialisation failed for '" + path.string() + "'");
  }
  std::string failure;
  std::vector<double> data;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    failure = "corrupt PNG '" + path.string() + "'";
  } else {
    png_init_io(png, fp);
    png_read_info(png, info);
    w = png_get_image_width(png, info);
    h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
      failure = "non-grayscale PNG '" + path.string() + "'";
    } else if (depth != 8 && depth != 16) {
      failure = "unsupported PNG bit depth " + std::to_string(depth) + " in '" + path.string() + "'";
    } else {
      const std::size_t row_bytes = png_get_rowbytes(png, info);
      std::vector<png_byte> row(row_bytes);
      const double maxval = depth == 8 ? 255.0 : 65535.0;
      data.resize(static_cast<std::size_t>(w) * h);
      for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
          const unsigned v = depth == 8 ? row[x] : (row[2 * x] << 8) | row[2 * x + 1];
          data[static_cast<std::size_t>(y) * w + x] = v / maxval;
        }
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  if (!failure.empty()) throw IoError(failure);
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

namespace {
void append_png_bytes(png_structp png, png_bytep bytes, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), bytes, bytes + length);
}
void flush_noop(png_structp) {}
}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw IoError("libpng initialisation failed");
  std::vector<png_byte> row(static_cast<std::size_t>(image.width()));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &out, append_png_bytes, flush_noop);
  png_set_IHDR(png, info, image.width(), image.height(), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      row[x] = static_cast<png_byte>(std::lround(image.at(x, y) * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

#else

bool png_supported() { return false; }

GrayImage read_png(const std::filesystem::path& path) {
  throw IoError("PNG support not compiled in; cannot read '" + path.string() + "'");
}

std::vector<std::uint8_t> encode_png(const GrayImage&) {
  throw IoError("PNG support not compiled in");
}

#endif

}  // namespace ellitrack
