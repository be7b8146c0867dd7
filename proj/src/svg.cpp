#include "qbass/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace qbass::svg {

namespace {

constexpr double kWidth = 720, kHeight = 420;
constexpr double kLeft = 60, kRight = 60, kTop = 40, kBottom = 50;
const char* const kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string tick(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = kInf, hi = -kInf;
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (lo > hi) lo = 0, hi = 1;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
  }
};

}  // namespace

std::string chart(const std::string& title, const std::vector<Bars>& bar_sets, const std::vector<Line>& lines) {
  Range xr, hr{0.0, -kInf}, yr;
  for (const auto& b : bar_sets) {
    for (double x : b.x) xr.add(x);
    for (double h : b.height) hr.add(h);
  }
  for (const auto& l : lines) {
    for (double x : l.x) xr.add(x);
    for (double y : l.y) yr.add(y);
  }
  xr.pad();
  const double xpad = 0.05 * (xr.hi - xr.lo);
  xr.lo -= xpad;
  xr.hi += xpad;
  if (hr.hi <= 0) hr.hi = 1;
  yr.pad();

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto sh = [&](double h) { return kTop + ph - h / hr.hi * ph; };
  auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  s << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double x = xr.lo + t * (xr.hi - xr.lo) / 4;
    s << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">" << tick(x)
      << "</text>\n";
    if (!bar_sets.empty()) {
      const double h = t * hr.hi / 4;
      s << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sh(h) + 4) << "\" text-anchor=\"end\">" << tick(h)
        << "</text>\n";
    }
    if (!lines.empty()) {
      const double y = yr.lo + t * (yr.hi - yr.lo) / 4;
      s << "<text x=\"" << num(kLeft + pw + 6) << "\" y=\"" << num(sy(y) + 4) << "\">" << tick(y) << "</text>\n";
    }
  }

  const double slot = std::max(2.0, pw / 120.0);
  size_t colour = 0, legend = 0;
  auto legend_entry = [&](const std::string& label, const char* c) {
    const double ly = kHeight - 14;
    const double lx = kLeft + 130.0 * static_cast<double>(legend++);
    s << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\"" << c << "\"/>\n";
    s << "<text x=\"" << num(lx + 14) << "\" y=\"" << num(ly) << "\">" << escape(label) << "</text>\n";
  };
  for (size_t k = 0; k < bar_sets.size(); ++k) {
    const auto& b = bar_sets[k];
    const char* c = kPalette[colour++ % 6];
    const double offset = (static_cast<double>(k) - 0.5 * static_cast<double>(bar_sets.size() - 1)) * slot;
    for (size_t i = 0; i < b.x.size() && i < b.height.size(); ++i) {
      const double top = sh(b.height[i]);
      s << "<rect x=\"" << num(sx(b.x[i]) + offset - slot / 2) << "\" y=\"" << num(top) << "\" width=\"" << num(slot)
        << "\" height=\"" << num(kTop + ph - top) << "\" fill=\"" << c << "\" fill-opacity=\"0.8\"/>\n";
    }
    legend_entry(b.label, c);
  }
  for (const auto& l : lines) {
    const char* c = kPalette[colour++ % 6];
    s << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < l.x.size() && i < l.y.size(); ++i) {
      if (std::isfinite(l.y[i])) s << num(sx(l.x[i])) << ',' << num(sy(l.y[i])) << ' ';
    }
    s << "\"/>\n";
    legend_entry(l.label, c);
  }
  s << "</svg>\n";
  return s.str();
}

Bars bars(const std::string& label, const DiscreteMeasure& m) {
  if (m.dim() != 1) throw DomainError("plot: measure " + label + " must be one-dimensional");
  Bars b{label, {}, {}};
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    b.x.push_back(m.atoms()(0, i));
    b.height.push_back(m.weight(i));
  }
  return b;
}

Line line(const std::string& label, const ConvexFunction& f, double lo, double hi, int n) {
  if (f.dim() != 1) throw DomainError("plot: function " + label + " must be one-dimensional");
  Line l{label, {}, {}};
  for (int i = 0; i < n; ++i) {
    const double x = lo + (hi - lo) * i / (n - 1);
    l.x.push_back(x);
    l.y.push_back(evaluate(f, Point::Constant(1, x)));
  }
  return l;
}

}  // namespace qbass::svg
