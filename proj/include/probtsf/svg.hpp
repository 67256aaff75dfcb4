#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace probtsf::svg {

// Minimal multi-panel SVG plotting: line series, filled bands, bars and
// reference lines on linear axes. Output depends only on the inputs.

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finalize() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
};

class Panel {
 public:
  Panel(std::string title, std::string xlabel, std::string ylabel)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

  void line(const std::vector<double>& x, const std::vector<double>& y, const std::string& color,
            bool dashed = false, const std::string& label = {}) {
    for (double v : x) xr_.include(v);
    for (double v : y) yr_.include(v);
    items_.push_back({Kind::line, x, y, {}, color, dashed, label});
  }

  void band(const std::vector<double>& x, const std::vector<double>& lo, const std::vector<double>& hi,
            const std::string& color, const std::string& label = {}) {
    for (double v : x) xr_.include(v);
    for (double v : lo) yr_.include(v);
    for (double v : hi) yr_.include(v);
    items_.push_back({Kind::band, x, lo, hi, color, false, label});
  }

  // Bars of the given width centred at x.
  void bars(const std::vector<double>& x, const std::vector<double>& h, double width,
            const std::string& color, const std::string& label = {}) {
    for (double v : x) {
      xr_.include(v - width / 2);
      xr_.include(v + width / 2);
    }
    yr_.include(0.0);
    for (double v : h) yr_.include(v);
    items_.push_back({Kind::bars, x, h, {width}, color, false, label});
  }

  void hline(double y, const std::string& color) {
    yr_.include(y);
    hlines_.push_back({y, color});
  }

  void set_ylim(double lo, double hi) { ylim_ = {lo, hi}; }

  void render(std::ostringstream& out, double ox, double oy, double w, double h) const {
    Range xr = xr_, yr = yr_;
    xr.finalize();
    yr.finalize();
    if (ylim_.lo <= ylim_.hi) yr = ylim_;
    const double ml = 55, mr = 10, mt = 24, mb = 36;
    const double pw = w - ml - mr, ph = h - mt - mb;
    const auto X = [&](double v) { return ox + ml + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    const auto Y = [&](double v) {
      const double c = std::clamp(v, yr.lo, yr.hi);
      return oy + mt + (1.0 - (c - yr.lo) / (yr.hi - yr.lo)) * ph;
    };

    out << "<g>\n";
    out << "<rect x=\"" << num(ox + ml) << "\" y=\"" << num(oy + mt) << "\" width=\"" << num(pw)
        << "\" height=\"" << num(ph) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << num(ox + ml + pw / 2) << "\" y=\"" << num(oy + 16)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(title_) << "</text>\n";
    out << "<text x=\"" << num(ox + ml + pw / 2) << "\" y=\"" << num(oy + h - 4)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << escape(xlabel_) << "</text>\n";
    out << "<text x=\"" << num(ox + 12) << "\" y=\"" << num(oy + mt + ph / 2)
        << "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 " << num(ox + 12) << ' '
        << num(oy + mt + ph / 2) << ")\">" << escape(ylabel_) << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = xr.lo + (xr.hi - xr.lo) * i / 4.0;
      const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
      out << "<text x=\"" << num(X(xv)) << "\" y=\"" << num(oy + mt + ph + 14)
          << "\" text-anchor=\"middle\" font-size=\"9\">" << tick(xv) << "</text>\n";
      out << "<text x=\"" << num(ox + ml - 4) << "\" y=\"" << num(Y(yv) + 3)
          << "\" text-anchor=\"end\" font-size=\"9\">" << tick(yv) << "</text>\n";
    }
    for (const auto& item : items_) {
      switch (item.kind) {
        case Kind::band: {
          out << "<polygon fill=\"" << item.color << "\" fill-opacity=\"0.3\" stroke=\"none\" points=\"";
          for (std::size_t i = 0; i < item.x.size(); ++i) out << num(X(item.x[i])) << ',' << num(Y(item.z[i])) << ' ';
          for (std::size_t i = item.x.size(); i-- > 0;) out << num(X(item.x[i])) << ',' << num(Y(item.y[i])) << ' ';
          out << "\"/>\n";
          break;
        }
        case Kind::bars: {
          const double bw = item.z.front();
          for (std::size_t i = 0; i < item.x.size(); ++i) {
            const double x0 = X(item.x[i] - bw / 2), x1 = X(item.x[i] + bw / 2);
            const double y1 = Y(item.y[i]), y0 = Y(0.0);
            out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y1) << "\" width=\"" << num(x1 - x0)
                << "\" height=\"" << num(std::max(0.0, y0 - y1)) << "\" fill=\"" << item.color
                << "\" fill-opacity=\"0.6\"/>\n";
          }
          break;
        }
        case Kind::line: {
          out << "<polyline fill=\"none\" stroke=\"" << item.color << "\" stroke-width=\"1.5\""
              << (item.dashed ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
          for (std::size_t i = 0; i < item.x.size(); ++i) {
            if (std::isfinite(item.y[i])) out << num(X(item.x[i])) << ',' << num(Y(item.y[i])) << ' ';
          }
          out << "\"/>\n";
          break;
        }
      }
    }
    for (const auto& [y, color] : hlines_) {
      out << "<line x1=\"" << num(ox + ml) << "\" x2=\"" << num(ox + ml + pw) << "\" y1=\"" << num(Y(y))
          << "\" y2=\"" << num(Y(y)) << "\" stroke=\"" << color << "\" stroke-dasharray=\"4,3\"/>\n";
    }
    double ly = oy + mt + 12;
    for (const auto& item : items_) {
      if (item.label.empty()) continue;
      out << "<text x=\"" << num(ox + ml + pw - 4) << "\" y=\"" << num(ly)
          << "\" text-anchor=\"end\" font-size=\"10\" fill=\"" << item.color << "\">"
          << escape(item.label) << "</text>\n";
      ly += 12;
    }
    out << "</g>\n";
  }

 private:
  enum class Kind { line, band, bars };
  struct Item {
    Kind kind;
    std::vector<double> x, y, z;
    std::string color;
    bool dashed;
    std::string label;
  };

  static std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }

  std::string title_, xlabel_, ylabel_;
  Range xr_, yr_, ylim_{1.0, 0.0};
  std::vector<Item> items_;
  std::vector<std::pair<double, std::string>> hlines_;
};

// Panels laid out on a grid, row-major.
class Figure {
 public:
  Figure(std::size_t cols, double panel_w = 300, double panel_h = 220)
      : cols_(cols), pw_(panel_w), ph_(panel_h) {}

  Panel& add(std::string title, std::string xlabel, std::string ylabel) {
    panels_.emplace_back(std::move(title), std::move(xlabel), std::move(ylabel));
    return panels_.back();
  }

  std::string str() const {
    const std::size_t rows = (panels_.size() + cols_ - 1) / cols_;
    const double W = pw_ * static_cast<double>(cols_), H = ph_ * static_cast<double>(rows);
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(W) << "\" height=\"" << num(H)
        << "\" viewBox=\"0 0 " << num(W) << ' ' << num(H) << "\" font-family=\"sans-serif\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < panels_.size(); ++i) {
      panels_[i].render(out, pw_ * static_cast<double>(i % cols_), ph_ * static_cast<double>(i / cols_), pw_, ph_);
    }
    out << "</svg>\n";
    return out.str();
  }

 private:
  std::size_t cols_;
  double pw_, ph_;
  std::vector<Panel> panels_;
};

}  // namespace probtsf::svg
