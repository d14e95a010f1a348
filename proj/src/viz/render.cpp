#include "mcld/viz/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mcld::viz {

Color class_color(int cls) {
  static const Color kPalette[] = {
      {230, 25, 75},  {60, 180, 75},   {255, 225, 25}, {0, 130, 200},
      {245, 130, 48}, {145, 30, 180},  {70, 240, 240}, {240, 50, 230},
      {210, 245, 60}, {128, 128, 128}, {0, 128, 128},  {170, 110, 40},
  };
  const int n = static_cast<int>(sizeof(kPalette) / sizeof(kPalette[0]));
  return kPalette[((cls % n) + n) % n];
}

Canvas::Canvas(int width, int height, Color background)
    : width_(width), height_(height),
      pixels_(static_cast<size_t>(width) * height * 3) {
  fill_rect(0, 0, width - 1, height - 1, background);
}

void Canvas::set(int x, int y, Color c) {
  if (x < 0 || x >= width_ || y < 0 || y >= height_) return;
  const size_t i = (static_cast<size_t>(y) * width_ + x) * 3;
  pixels_[i] = c.r;
  pixels_[i + 1] = c.g;
  pixels_[i + 2] = c.b;
}

void Canvas::fill_rect(int x0, int y0, int x1, int y1, Color c) {
  for (int y = std::max(0, y0); y <= std::min(height_ - 1, y1); ++y) {
    for (int x = std::max(0, x0); x <= std::min(width_ - 1, x1); ++x) {
      set(x, y, c);
    }
  }
}

void Canvas::disc(int cx, int cy, int radius, Color c) {
  for (int y = cy - radius; y <= cy + radius; ++y) {
    for (int x = cx - radius; x <= cx + radius; ++x) {
      const int dx = x - cx, dy = y - cy;
      if (dx * dx + dy * dy <= radius * radius) set(x, y, c);
    }
  }
}

void Canvas::frame(Color c) {
  fill_rect(0, 0, width_ - 1, 0, c);
  fill_rect(0, height_ - 1, width_ - 1, height_ - 1, c);
  fill_rect(0, 0, 0, height_ - 1, c);
  fill_rect(width_ - 1, 0, width_ - 1, height_ - 1, c);
}

void Canvas::save_ppm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << "P6\n" << width_ << " " << height_ << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels_.data()),
            static_cast<std::streamsize>(pixels_.size()));
}

Color heat_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // white -> deep blue
  const auto ch = [t](double lo) {
    return static_cast<uint8_t>(std::lround(255.0 + t * (lo - 255.0)));
  };
  return Color{ch(20.0), ch(40.0), ch(120.0)};
}

}  // namespace mcld::viz
