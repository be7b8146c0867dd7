#pragma once

#include "qbass/convexfn.hpp"
#include "qbass/measures.hpp"

#include <string>
#include <vector>

namespace qbass::svg {

struct Bars {
  std::string label;
  std::vector<double> x, height;
};

struct Line {
  std::string label;
  std::vector<double> x, y;
};

/// Static bar + line chart. Bars share the left axis, lines the right one.
std::string chart(const std::string& title, const std::vector<Bars>& bars, const std::vector<Line>& lines);

/// Weights of a 1D measure; DomainError for d != 1.
Bars bars(const std::string& label, const DiscreteMeasure& m);

/// f sampled at n points on [lo, hi]; +inf values are skipped.
Line line(const std::string& label, const ConvexFunction& f, double lo, double hi, int n = 200);

}  // namespace qbass::svg
