#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcld::viz {

struct Color {
  uint8_t r = 0, g = 0, b = 0;
};

// Fixed palette for class-colored scatters.
Color class_color(int cls);

// Minimal RGB raster with deterministic binary PPM (P6) output.
class Canvas {
 public:
  Canvas(int width, int height, Color background);

  int width() const { return width_; }
  int height() const { return height_; }

  void set(int x, int y, Color c);
  void fill_rect(int x0, int y0, int x1, int y1, Color c);
  void disc(int cx, int cy, int radius, Color c);
  void frame(Color c);

  const std::vector<uint8_t>& pixels() const { return pixels_; }
  void save_ppm(const std::string& path) const;

 private:
  int width_, height_;
  std::vector<uint8_t> pixels_;  // interleaved RGB
};

// White-to-dark single-hue ramp; t in [0,1], 0 renders lightest.
Color heat_color(double t);

}  // namespace mcld::viz
