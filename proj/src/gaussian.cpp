#include "qbass/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace qbass {

namespace {

// Acklam's rational approximation to the normal quantile (relative error
// about 1.15e-9), central region |p - 1/2| <= 0.475 and two tails.
constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                        1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                        6.680131188771972e+01,  -1.328068155288572e+01};
constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                        -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                        3.754408661907416e+00};
constexpr double p_low = 0.02425;

double acklam(double p) {
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) return -acklam(1.0 - p);
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  double x = acklam(p);
  // One Halley step on Phi(x) - p with Phi from erfc.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

DiscreteMeasure quantize_gaussian(int m, double sigma) {
  if (m < 2) throw DomainError("quantize_gaussian: m must be >= 2");
  if (!(sigma > 0.0)) throw DomainError("quantize_gaussian: sigma must be > 0");
  PointSet atoms(1, m);
  for (int k = 0; k < (m + 1) / 2; ++k) {
    const double z = sigma * normal_quantile((k + 0.5) / m);
    atoms(0, k) = z;
    atoms(0, m - 1 - k) = -z;
  }
  if (m % 2 == 1) atoms(0, m / 2) = 0.0;
  return DiscreteMeasure::uniform(atoms);
}

}  // namespace qbass
