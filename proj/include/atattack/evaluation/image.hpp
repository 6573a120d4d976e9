#ifndef ATATTACK_EVALUATION_IMAGE_HPP
#define ATATTACK_EVALUATION_IMAGE_HPP

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "atattack/core/error.hpp"

namespace atattack::evaluation {

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
struct Raster {
  int64_t width = 0;
  int64_t height = 0;
  std::vector<uint8_t> rgb;

  Raster() = default;
  Raster(int64_t w, int64_t h, std::array<uint8_t, 3> fill = {255, 255, 255})
      : width(w), height(h), rgb(static_cast<size_t>(w * h * 3)) {
    for (size_t i = 0; i < rgb.size(); i += 3) std::copy(fill.begin(), fill.end(), rgb.begin() + static_cast<long>(i));
  }

  void set(int64_t x, int64_t y, std::array<uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* p = &rgb[static_cast<size_t>((y * width + x) * 3)];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  std::array<uint8_t, 3> get(int64_t x, int64_t y) const {
    const auto* p = &rgb[static_cast<size_t>((y * width + x) * 3)];
    return {p[0], p[1], p[2]};
  }

  /// Pastes a (C,H,W) image with values in [0,1]; grayscale is replicated.
  void paste(const torch::Tensor& image, int64_t x0, int64_t y0) {
    auto img = image.detach().to(torch::kFloat32).clamp(0.0, 1.0).mul(255.0).round().to(torch::kUInt8).contiguous();
    if (img.dim() != 3 || (img.size(0) != 1 && img.size(0) != 3)) throw ShapeError("paste expects a (1|3,H,W) image");
    auto a = img.accessor<uint8_t, 3>();
    for (int64_t y = 0; y < img.size(1); ++y)
      for (int64_t x = 0; x < img.size(2); ++x) {
        if (img.size(0) == 1) set(x0 + x, y0 + y, {a[0][y][x], a[0][y][x], a[0][y][x]});
        else set(x0 + x, y0 + y, {a[0][y][x], a[1][y][x], a[2][y][x]});
      }
  }
};

inline void write_png(const std::filesystem::path& path, const Raster& r) {
  if (r.width <= 0 || r.height <= 0) throw IoError("cannot write an empty image");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed while writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int64_t y = 0; y < r.height; ++y)
    png_write_row(png, const_cast<png_bytep>(&r.rgb[static_cast<size_t>(y * r.width * 3)]));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads any 8-bit PNG and converts it to RGB.
inline Raster read_png(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
  if (!fp) throw IoError("cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("not a readable PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_expand(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  Raster r;
  r.width = png_get_image_width(png, info);
  r.height = png_get_image_height(png, info);
  r.rgb.resize(static_cast<size_t>(r.width * r.height * 3));
  std::vector<png_bytep> rows(static_cast<size_t>(r.height));
  for (int64_t y = 0; y < r.height; ++y) rows[static_cast<size_t>(y)] = &r.rgb[static_cast<size_t>(y * r.width * 3)];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return r;
}

namespace detail {

// 3x5 glyphs, one row per nibble (bit 2 = leftmost column).
inline const std::array<uint8_t, 5>* glyph(char c) {
  static const std::array<std::array<uint8_t, 5>, 14> font{{
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
      {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
      {0, 0, 0, 0, 2}, {0, 0, 7, 0, 0}, {5, 1, 2, 4, 5}, {0, 0, 0, 0, 0}}};
  if (c >= '0' && c <= '9') return &font[static_cast<size_t>(c - '0')];
  switch (c) {
    case '.': return &font[10];
    case '-': return &font[11];
    case '%': return &font[12];
    case ' ': return &font[13];
    default: return nullptr;
  }
}

}  // namespace detail

/// Draws digits, '.', '-', '%' and spaces at `scale` pixels per font pixel.
inline void draw_text(Raster& r, const std::string& s, int64_t x0, int64_t y0, std::array<uint8_t, 3> c,
                      int64_t scale = 2) {
  for (char ch : s) {
    if (const auto* g = detail::glyph(ch))
      for (int64_t gy = 0; gy < 5; ++gy)
        for (int64_t gx = 0; gx < 3; ++gx)
          if ((*g)[static_cast<size_t>(gy)] & (4 >> gx))
            for (int64_t dy = 0; dy < scale; ++dy)
              for (int64_t dx = 0; dx < scale; ++dx) r.set(x0 + gx * scale + dx, y0 + gy * scale + dy, c);
    x0 += 4 * scale;
  }
}

inline void draw_line(Raster& r, double x0, double y0, double x1, double y1, std::array<uint8_t, 3> c,
                      int thickness = 1) {
  const double len = std::max(std::abs(x1 - x0), std::abs(y1 - y0));
  const int64_t n = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(len)));
  for (int64_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    const auto x = static_cast<int64_t>(std::lround(x0 + t * (x1 - x0)));
    const auto y = static_cast<int64_t>(std::lround(y0 + t * (y1 - y0)));
    for (int dy = 0; dy < thickness; ++dy)
      for (int dx = 0; dx < thickness; ++dx) r.set(x + dx, y + dy, c);
  }
}

/// One named curve of a line plot.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

inline const std::array<std::array<uint8_t, 3>, 6>& palette() {
  static const std::array<std::array<uint8_t, 3>, 6> p{
      {{31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {23, 190, 207}}};
  return p;
}

struct PlotOptions {
  int64_t width = 640;
  int64_t height = 420;
  bool log_x = false;
  std::optional<std::pair<double, double>> y_range;
};

/// Renders curves on shared axes. Series colours follow palette() in order;
/// axis ticks show the data range at both ends.
inline Raster line_plot(const std::vector<Series>& series, const PlotOptions& opt = {}) {
  if (series.empty()) throw ConfigError("line plot without series");
  const int64_t left = 70, right = 20, top = 20, bottom = 40;
  Raster r(opt.width, opt.height);
  auto tx = [&](double v) { return opt.log_x ? std::log10(std::max(v, 1e-12)) : v; };
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw ConfigError("series '" + s.name + "' has mismatched x/y lengths");
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (opt.y_range) std::tie(ymin, ymax) = *opt.y_range;
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double pw = static_cast<double>(opt.width - left - right), ph = static_cast<double>(opt.height - top - bottom);
  auto px = [&](double v) { return static_cast<double>(left) + (tx(v) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return static_cast<double>(top) + (1.0 - (v - ymin) / (ymax - ymin)) * ph; };
  const std::array<uint8_t, 3> grid{225, 225, 225}, axis{0, 0, 0};
  for (int i = 0; i <= 4; ++i) {
    const double gy = static_cast<double>(top) + ph * i / 4.0;
    draw_line(r, static_cast<double>(left), gy, static_cast<double>(left) + pw, gy, grid);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", ymax - (ymax - ymin) * i / 4.0);
    draw_text(r, buf, 4, static_cast<int64_t>(gy) - 5, axis);
  }
  draw_line(r, static_cast<double>(left), static_cast<double>(top), static_cast<double>(left), static_cast<double>(top) + ph, axis);
  draw_line(r, static_cast<double>(left), static_cast<double>(top) + ph, static_cast<double>(left) + pw,
            static_cast<double>(top) + ph, axis);
  char lo[32], hi[32];
  std::snprintf(lo, sizeof lo, "%.3g", opt.log_x ? std::pow(10.0, xmin) : xmin);
  std::snprintf(hi, sizeof hi, "%.3g", opt.log_x ? std::pow(10.0, xmax) : xmax);
  draw_text(r, lo, left, opt.height - bottom + 10, axis);
  draw_text(r, hi, opt.width - right - 8 * static_cast<int64_t>(std::string(hi).size()), opt.height - bottom + 10, axis);
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& c = palette()[k % palette().size()];
    const auto& s = series[k];
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (i > 0) draw_line(r, px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), c, 2);
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx)
          r.set(std::lround(px(s.x[i])) + dx, std::lround(py(s.y[i])) + dy, c);
    }
  }
  return r;
}

/// Maps a (rows, cols) tensor onto a blue-to-yellow colour ramp, `cell` pixels per entry.
inline Raster heatmap(const torch::Tensor& values, int64_t cell = 8) {
  if (values.dim() != 2) throw ShapeError("heatmap expects a 2-d tensor");
  auto v = values.to(torch::kFloat64).contiguous();
  const double lo = v.min().item<double>(), hi = v.max().item<double>();
  const double span = hi > lo ? hi - lo : 1.0;
  auto a = v.accessor<double, 2>();
  Raster r(v.size(1) * cell, v.size(0) * cell);
  for (int64_t i = 0; i < v.size(0); ++i)
    for (int64_t j = 0; j < v.size(1); ++j) {
      const double t = (a[i][j] - lo) / span;
      const std::array<uint8_t, 3> c{static_cast<uint8_t>(std::lround(68 + t * (253 - 68))),
                                     static_cast<uint8_t>(std::lround(1 + t * (231 - 1))),
                                     static_cast<uint8_t>(std::lround(84 + t * (37 - 84)))};
      for (int64_t y = 0; y < cell; ++y)
        for (int64_t x = 0; x < cell; ++x) r.set(j * cell + x, i * cell + y, c);
    }
  return r;
}

}  // namespace atattack::evaluation

#endif  // ATATTACK_EVALUATION_IMAGE_HPP
