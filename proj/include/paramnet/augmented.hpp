#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "paramnet/rng.hpp"

namespace paramnet {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using RealVector = std::vector<double>;

/// Real representation of an N-sample complex signal: the N real parts
/// followed by the N imaginary parts.
struct AugmentedVector {
  RealVector values;

  AugmentedVector() = default;
  explicit AugmentedVector(std::size_t complex_size)
      : values(2 * complex_size, 0.0) {}
  /// Throws InvalidLength if `v` has odd length.
  explicit AugmentedVector(RealVector v);

  std::size_t complex_size() const { return values.size() / 2; }
  std::size_t size() const { return values.size(); }

  double& re(std::size_t n) { return values[n]; }
  double& im(std::size_t n) { return values[n + complex_size()]; }
  double re(std::size_t n) const { return values[n]; }
  double im(std::size_t n) const { return values[n + complex_size()]; }

  Complex sample(std::size_t n) const { return {re(n), im(n)}; }
  void set_sample(std::size_t n, Complex z) {
    re(n) = z.real();
    im(n) = z.imag();
  }

  bool operator==(const AugmentedVector&) const = default;
};

AugmentedVector to_augmented(const ComplexVector& x);
ComplexVector from_augmented(const AugmentedVector& x);
/// Throws InvalidLength on odd length.
ComplexVector from_augmented(std::span<const double> x);

/// Strictly increasing real alphabet used on each axis.
class Constellation {
 public:
  /// Throws InvalidParameter unless there are >= 2 finite, strictly
  /// increasing points.
  explicit Constellation(RealVector points);

  /// Per-axis 16QAM alphabet {-3, -1, 1, 3}.
  static Constellation qam16();
  /// {-3, -1, 1, 3} / sqrt(10): 16QAM with unit average symbol energy.
  static Constellation qam16_unit_energy();

  Constellation scaled(double factor) const;
  /// Mean |s|^2 of the square QAM built on this alphabet (2x the per-axis
  /// mean square).
  double average_symbol_energy() const;

  std::span<const double> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double min() const { return points_.front(); }
  double max() const { return points_.back(); }

  /// Nearest point; ties go to the smaller point.
  double project(double x) const;
  bool contains(double x) const;

  bool operator==(const Constellation&) const = default;

 private:
  RealVector points_;
};

RealVector hard_project(std::span<const double> x, const Constellation& m);

/// Fraction of complex symbols whose projected real or imaginary part
/// differs from the truth. Empty inputs give 0.
double symbol_error_rate(const ComplexVector& estimate,
                         const ComplexVector& truth, const Constellation& m);

/// Square-QAM symbols: each axis drawn independently and uniformly from the
/// points of `m`.
ComplexVector random_symbols(std::size_t n, const Constellation& m, Rng& rng);

/// Uniform 16QAM symbols, each axis drawn independently from {-3,-1,1,3}.
ComplexVector random_qam16(std::size_t n, Rng& rng);

}  // namespace paramnet
