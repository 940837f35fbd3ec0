#include "paramnet/augmented.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paramnet/errors.hpp"

namespace paramnet {

AugmentedVector::AugmentedVector(RealVector v) : values(std::move(v)) {
  if (values.size() % 2 != 0) {
    throw Error(ErrorKind::InvalidLength,
                "augmented vector must have even length, got " +
                    std::to_string(values.size()));
  }
}

AugmentedVector to_augmented(const ComplexVector& x) {
  AugmentedVector out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) out.set_sample(n, x[n]);
  return out;
}

ComplexVector from_augmented(std::span<const double> x) {
  if (x.size() % 2 != 0) {
    throw Error(ErrorKind::InvalidLength,
                "augmented vector must have even length, got " +
                    std::to_string(x.size()));
  }
  const std::size_t n = x.size() / 2;
  ComplexVector out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {x[i], x[i + n]};
  return out;
}

ComplexVector from_augmented(const AugmentedVector& x) {
  return from_augmented(std::span<const double>(x.values));
}

Constellation::Constellation(RealVector points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorKind::InvalidParameter,
                "constellation needs at least 2 points");
  }
  for (std::size_t k = 0; k < points_.size(); ++k) {
    if (!std::isfinite(points_[k]) ||
        (k > 0 && !(points_[k] > points_[k - 1]))) {
      throw Error(ErrorKind::InvalidParameter,
                  "constellation points must be finite and strictly "
                  "increasing");
    }
  }
}

Constellation Constellation::qam16() { return Constellation({-3, -1, 1, 3}); }

Constellation Constellation::qam16_unit_energy() {
  return qam16().scaled(1.0 / std::sqrt(10.0));
}

Constellation Constellation::scaled(double factor) const {
  if (!(factor > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "scale factor must be > 0");
  }
  RealVector p(points_);
  for (double& v : p) v *= factor;
  return Constellation(std::move(p));
}

double Constellation::average_symbol_energy() const {
  double acc = 0.0;
  for (double v : points_) acc += v * v;
  return 2.0 * acc / static_cast<double>(points_.size());
}

double Constellation::project(double x) const {
  // First point whose upper decision boundary lies at or beyond x.
  for (std::size_t k = 0; k + 1 < points_.size(); ++k) {
    const double mid = 0.5 * (points_[k] + points_[k + 1]);
    if (x <= mid) return points_[k];
  }
  return points_.back();
}

bool Constellation::contains(double x) const {
  return std::binary_search(points_.begin(), points_.end(), x);
}

RealVector hard_project(std::span<const double> x, const Constellation& m) {
  RealVector out(x.size());
  std::transform(x.begin(), x.end(), out.begin(),
                 [&](double v) { return m.project(v); });
  return out;
}

double symbol_error_rate(const ComplexVector& estimate,
                         const ComplexVector& truth, const Constellation& m) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorKind::InvalidLength,
                "estimate has " + std::to_string(estimate.size()) +
                    " symbols, truth has " + std::to_string(truth.size()));
  }
  if (truth.empty()) return 0.0;
  std::size_t errors = 0;
  for (std::size_t n = 0; n < truth.size(); ++n) {
    const bool re_ok = m.project(estimate[n].real()) == truth[n].real();
    const bool im_ok = m.project(estimate[n].imag()) == truth[n].imag();
    if (!(re_ok && im_ok)) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(truth.size());
}

ComplexVector random_symbols(std::size_t n, const Constellation& m,
                             Rng& rng) {
  const auto pts = m.points();
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  ComplexVector out(n);
  for (auto& z : out) {
    const double re = pts[pick(rng)];
    const double im = pts[pick(rng)];
    z = {re, im};
  }
  return out;
}

ComplexVector random_qam16(std::size_t n, Rng& rng) {
  return random_symbols(n, Constellation::qam16(), rng);
}

}  // namespace paramnet
