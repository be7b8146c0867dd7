#pragma once

#include "qbass/measures.hpp"

namespace qbass {

/// Standard normal quantile, |error| below 1e-13 on (0, 1).
double normal_quantile(double p);

/// m equal-weight atoms at sigma * Phi^{-1}((k - 1/2) / m), k = 1..m.
/// Symmetric pairs are mirrored so the barycenter is exactly 0.
DiscreteMeasure quantize_gaussian(int m, double sigma);

}  // namespace qbass
