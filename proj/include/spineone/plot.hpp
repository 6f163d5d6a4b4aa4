#pragma once

#include <limits>
#include <string>
#include <vector>

#include "spineone/image.hpp"
#include "spineone/png_io.hpp"

namespace spineone::plot {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

// Stable palette for multi-series figures, cycled by index.
Rgb series_color(int index);

// 5x7 bitmap text. Lowercase is drawn as uppercase; characters without a
// glyph render as a box. Advance is 6 * scale pixels per character.
void draw_text(Rgb8Image& img, int row, int col, const std::string& text, Rgb color,
               int scale = 1);
int text_width(const std::string& text, int scale = 1);

void draw_line(Rgb8Image& img, int r0, int c0, int r1, int c1, Rgb color);

struct Series {
  std::string label;
  std::vector<double> x, y;  // same length, drawn in order
  Rgb color;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  int width = 640, height = 440;
  // NaN = derive the limit from the data with a small pad.
  double y_min = std::numeric_limits<double>::quiet_NaN();
  double y_max = std::numeric_limits<double>::quiet_NaN();
};

// Line chart with axes, tick labels, and a legend (drawn when any series has
// a non-empty label).
Rgb8Image render_xy_plot(const std::vector<Series>& series, const PlotSpec& spec);

struct OverlayMark {
  double row = 0.0, col = 0.0;  // image coordinates (pre-scale)
  Rgb color;
  std::string text;  // optional tag drawn beside the cross
};

// Grayscale rendering of one slice (min/max normalized) with cross markers,
// magnified by an integer scale factor.
Rgb8Image render_overlay(const Plane& slice, const std::vector<OverlayMark>& marks,
                         int scale = 1);

}  // namespace spineone::plot
