// Copyright 2026 The psl-sim Authors
// SPDX-License-Identifier: Apache-2.0

#include "psl/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace psl::cli {
namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 160, kTop = 40, kBottom = 56;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const {
    return kLeft + (x1 > x0 ? (x - x0) / (x1 - x0) : 0.5) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y1 > y0 ? (y - y0) / (y1 - y0) : 0.5) * (kHeight - kTop - kBottom);
  }
};

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << xml_escape(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& x_label,
          const std::string& y_label, bool x_ticks) {
  const double bx = kHeight - kBottom;
  o << "<line x1=\"" << kLeft << "\" y1=\"" << bx << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << bx
    << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << bx
    << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(f.py(v) + 4) << "\" text-anchor=\"end\">"
      << tick(v) << "</text>\n";
  }
  if (x_ticks) {
    for (int i = 0; i <= 4; ++i) {
      const double v = f.x0 + (f.x1 - f.x0) * i / 4.0;
      o << "<text x=\"" << num(f.px(v)) << "\" y=\"" << bx + 16 << "\" text-anchor=\"middle\">"
        << tick(v) << "</text>\n";
    }
  }
  o << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 12
    << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n"
    << "<text transform=\"translate(16," << (kTop + bx) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(y_label) << "</text>\n";
}

}  // namespace

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  Frame f{INFINITY, -INFINITY, 0.0, 1.0};
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      f.x0 = std::min(f.x0, x);
      f.x1 = std::max(f.x1, x);
      f.y0 = std::min(f.y0, y);
      f.y1 = std::max(f.y1, y);
    }
  }
  if (!std::isfinite(f.x0)) f = {0.0, 1.0, 0.0, 1.0};

  std::ostringstream o;
  header(o, title);
  axes(o, f, x_label, y_label, true);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[k].points) o << num(f.px(x)) << ',' << num(f.py(y)) << ' ';
    o << "\"/>\n";
    const double ly = kTop + 16.0 * static_cast<double>(k);
    o << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
      << color << "\"/>\n<text x=\"" << kWidth - kRight + 28 << "\" y=\"" << ly + 9 << "\">"
      << xml_escape(series[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<Bar>& bars) {
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1)), 0.0, 1.0};
  for (const auto& b : bars) {
    f.y0 = std::min(f.y0, b.value);
    f.y1 = std::max(f.y1, b.value);
  }
  std::ostringstream o;
  header(o, title);
  axes(o, f, "", y_label, false);
  const double slot = (kWidth - kLeft - kRight) / f.x1;
  for (std::size_t k = 0; k < bars.size(); ++k) {
    const double x = f.px(static_cast<double>(k)) + slot * 0.15;
    const double top = f.py(std::max(bars[k].value, 0.0));
    const double base = f.py(std::min(bars[k].value, 0.0));
    o << "<rect x=\"" << num(x) << "\" y=\"" << num(top) << "\" width=\"" << num(slot * 0.7)
      << "\" height=\"" << num(base - top) << "\" fill=\"" << kPalette[k % std::size(kPalette)]
      << "\"><title>" << xml_escape(bars[k].label) << ": " << tick(bars[k].value) << "</title></rect>\n"
      << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << kHeight - kBottom + 16
      << "\" text-anchor=\"middle\" font-size=\"10\">" << xml_escape(bars[k].label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace psl::cli
