#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "spineone/common.hpp"
#include "spineone/plot.hpp"

namespace spineone::plot {

namespace {

// 5x7 glyphs, one byte per row, bit 4 = leftmost column.
struct Glyph {
  char ch;
  uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
};

constexpr uint8_t kBoxGlyph[7] = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};

const uint8_t* find_glyph(char c) {
  const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont)
    if (g.ch == u) return g.rows;
  return kBoxGlyph;
}

void fill_rect(Rgb8Image& img, int r0, int c0, int r1, int c1, Rgb color) {
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) img.set(r, c, color.r, color.g, color.b);
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

Rgb series_color(int index) {
  static const Rgb palette[] = {
      {31, 119, 180}, {214, 39, 40},  {44, 160, 44},
      {255, 127, 14}, {148, 103, 189}, {140, 86, 75},
  };
  const int n = static_cast<int>(sizeof(palette) / sizeof(palette[0]));
  return palette[((index % n) + n) % n];
}

int text_width(const std::string& text, int scale) {
  return static_cast<int>(text.size()) * 6 * scale;
}

void draw_text(Rgb8Image& img, int row, int col, const std::string& text, Rgb color,
               int scale) {
  int c0 = col;
  for (char ch : text) {
    const uint8_t* rows = find_glyph(ch);
    for (int gr = 0; gr < 7; ++gr)
      for (int gc = 0; gc < 5; ++gc)
        if (rows[gr] & (1 << (4 - gc)))
          fill_rect(img, row + gr * scale, c0 + gc * scale, row + (gr + 1) * scale - 1,
                    c0 + (gc + 1) * scale - 1, color);
    c0 += 6 * scale;
  }
}

void draw_line(Rgb8Image& img, int r0, int c0, int r1, int c1, Rgb color) {
  // Bresenham, all octants.
  const int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
  const int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
  int err = (dc > dr ? dc : -dr) / 2;
  while (true) {
    img.set(r0, c0, color.r, color.g, color.b);
    if (r0 == r1 && c0 == c1) break;
    const int e2 = err;
    if (e2 > -dc) {
      err -= dr;
      c0 += sc;
    }
    if (e2 < dr) {
      err += dc;
      r0 += sr;
    }
  }
}

Rgb8Image render_xy_plot(const std::vector<Series>& series, const PlotSpec& spec) {
  require(spec.width >= 160 && spec.height >= 120, Err::BadArgument,
          "plot canvas too small");
  const Rgb black{0, 0, 0}, gray{200, 200, 200};
  Rgb8Image img(spec.height, spec.width);  // constructor fills white

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  bool have = false;
  for (const auto& s : series) {
    require(s.x.size() == s.y.size(), Err::BadArgument, "series x/y length mismatch");
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!have) {
        x_lo = x_hi = s.x[i];
        y_lo = y_hi = s.y[i];
        have = true;
      } else {
        x_lo = std::min(x_lo, s.x[i]);
        x_hi = std::max(x_hi, s.x[i]);
        y_lo = std::min(y_lo, s.y[i]);
        y_hi = std::max(y_hi, s.y[i]);
      }
    }
  }
  if (std::isfinite(spec.y_min)) y_lo = spec.y_min;
  if (std::isfinite(spec.y_max)) y_hi = spec.y_max;
  if (x_hi <= x_lo) x_hi = x_lo + 1;
  if (y_hi <= y_lo) y_hi = y_lo + 1;

  const int left = 58, right = spec.width - 14, top = 26, bottom = spec.height - 34;
  const auto to_col = [&](double x) {
    return left + static_cast<int>(std::lround((x - x_lo) / (x_hi - x_lo) * (right - left)));
  };
  const auto to_row = [&](double y) {
    return bottom - static_cast<int>(std::lround((y - y_lo) / (y_hi - y_lo) * (bottom - top)));
  };

  // Frame, ticks, and tick labels.
  draw_line(img, top, left, bottom, left, black);
  draw_line(img, bottom, left, bottom, right, black);
  draw_line(img, top, right, bottom, right, gray);
  draw_line(img, top, left, top, right, gray);
  const int n_ticks = 5;
  for (int t = 0; t <= n_ticks; ++t) {
    const double fx = x_lo + (x_hi - x_lo) * t / n_ticks;
    const double fy = y_lo + (y_hi - y_lo) * t / n_ticks;
    const int tc = to_col(fx), tr = to_row(fy);
    draw_line(img, bottom, tc, bottom + 3, tc, black);
    draw_line(img, tr, left - 3, tr, left, black);
    const std::string xs = format_tick(fx), ys = format_tick(fy);
    draw_text(img, bottom + 6, tc - text_width(xs) / 2, xs, black);
    draw_text(img, tr - 3, left - 6 - text_width(ys), ys, black);
  }

  if (!spec.title.empty())
    draw_text(img, 8, (spec.width - text_width(spec.title)) / 2, spec.title, black);
  if (!spec.x_label.empty())
    draw_text(img, spec.height - 12, (spec.width - text_width(spec.x_label)) / 2,
              spec.x_label, black);
  if (!spec.y_label.empty()) draw_text(img, 8, 4, spec.y_label, black);

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    for (size_t i = 0; i + 1 < s.x.size(); ++i)
      draw_line(img, to_row(s.y[i]), to_col(s.x[i]), to_row(s.y[i + 1]),
                to_col(s.x[i + 1]), s.color);
    for (size_t i = 0; i < s.x.size(); ++i) {
      const int r = to_row(s.y[i]), c = to_col(s.x[i]);
      fill_rect(img, r - 1, c - 1, r + 1, c + 1, s.color);
    }
  }

  bool any_label = false;
  for (const auto& s : series) any_label = any_label || !s.label.empty();
  if (any_label) {
    int lr = top + 6;
    int lw = 0;
    for (const auto& s : series) lw = std::max(lw, text_width(s.label));
    const int lc = right - lw - 26;
    for (const auto& s : series) {
      draw_line(img, lr + 3, lc, lr + 3, lc + 14, s.color);
      draw_line(img, lr + 4, lc, lr + 4, lc + 14, s.color);
      draw_text(img, lr, lc + 18, s.label, black);
      lr += 12;
    }
  }
  return img;
}

Rgb8Image render_overlay(const Plane& slice, const std::vector<OverlayMark>& marks,
                         int scale) {
  require(slice.h > 0 && slice.w > 0, Err::BadArgument, "empty slice");
  require(scale >= 1, Err::BadArgument, "overlay scale must be >= 1");
  float lo = slice.v[0], hi = slice.v[0];
  for (float x : slice.v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const float span = hi > lo ? hi - lo : 1.0f;

  Rgb8Image img(slice.h * scale, slice.w * scale);
  for (int r = 0; r < slice.h; ++r)
    for (int c = 0; c < slice.w; ++c) {
      const auto g =
          static_cast<uint8_t>(std::lround((slice.at(r, c) - lo) / span * 255.0f));
      fill_rect(img, r * scale, c * scale, (r + 1) * scale - 1, (c + 1) * scale - 1,
                {g, g, g});
    }

  const int arm = 3 * scale;
  for (const auto& m : marks) {
    const int r = static_cast<int>(std::lround(m.row * scale));
    const int c = static_cast<int>(std::lround(m.col * scale));
    draw_line(img, r - arm, c, r + arm, c, m.color);
    draw_line(img, r, c - arm, r, c + arm, m.color);
    if (!m.text.empty()) draw_text(img, r - 3, c + arm + 3, m.text, m.color);
  }
  return img;
}

}  // namespace spineone::plot
