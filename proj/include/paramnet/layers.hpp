#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "paramnet/augmented.hpp"

namespace paramnet {

/// Positions of the known pilot symbols and the unknown data symbols inside
/// an N-sample frame. Sparse encoding of the two allocation matrices of the
/// data-augmented layer.
struct PilotPattern {
  std::size_t total = 0;
  std::vector<std::size_t> pilot_indices;
  std::vector<std::size_t> data_indices;

  /// One pilot followed by `period - 1` data symbols, repeated.
  /// Throws InvalidParameter unless `period >= 1` divides `total`.
  static PilotPattern periodic(std::size_t total, std::size_t period);
  /// Builds the data set as the complement. Throws InvalidParameter on
  /// out-of-range, duplicate or unsorted pilot indices.
  static PilotPattern from_pilots(std::size_t total,
                                  std::vector<std::size_t> pilot_indices);

  std::size_t n_pilots() const { return pilot_indices.size(); }
  std::size_t n_data() const { return data_indices.size(); }

  bool operator==(const PilotPattern&) const = default;
};

// -- Data-augmented layer ---------------------------------------------------

AugmentedVector data_augmented_forward(const AugmentedVector& pilots,
                                       std::span<const double> u,
                                       const PilotPattern& pattern);
/// Gradient with respect to u (gather of g at data positions).
RealVector data_augmented_vjp(const AugmentedVector& g,
                              const PilotPattern& pattern);

// -- Soft-thresholding denoiser ---------------------------------------------

/// Posterior mean of a uniform symbol from `m` given an observation `x`
/// corrupted by Gaussian noise: sum_s s*exp(-(x-s)^2/sigma_s_sq) / sum_s
/// exp(-(x-s)^2/sigma_s_sq), elementwise.
RealVector soft_threshold_forward(std::span<const double> x,
                                  double sigma_s_sq, const Constellation& m);

struct SoftThresholdGrad {
  RealVector x;
  double sigma_s_sq = 0.0;
};

SoftThresholdGrad soft_threshold_vjp(std::span<const double> x,
                                     std::span<const double> g,
                                     double sigma_s_sq,
                                     const Constellation& m);

// -- IQ imbalance -----------------------------------------------------------

/// x -> mu*x + nu*conj(x), per sample.
AugmentedVector iq_forward(const AugmentedVector& x, Complex mu, Complex nu);

struct IqGrad {
  AugmentedVector x;
  /// Ordered [Re mu, Re nu, Im mu, Im nu].
  std::array<double, 4> theta{};
};

IqGrad iq_vjp(const AugmentedVector& x, const AugmentedVector& g, Complex mu,
              Complex nu);

// -- FIR channel ------------------------------------------------------------

/// Causal complex convolution, zero-padded for negative indices; output has
/// the input's length.
AugmentedVector fir_forward(const AugmentedVector& x,
                            std::span<const Complex> h);

struct FirGrad {
  AugmentedVector x;
  /// Ordered [Re h, Im h].
  RealVector taps;
};

FirGrad fir_vjp(const AugmentedVector& x, const AugmentedVector& g,
                std::span<const Complex> h);

// -- Piecewise-constant phase -----------------------------------------------

/// Rotates sample n by exp(j*phases[n / block_len]).
AugmentedVector phase_forward(const AugmentedVector& x,
                              std::span<const double> phases,
                              std::size_t block_len);

struct PhaseGrad {
  AugmentedVector x;
  RealVector phases;
};

PhaseGrad phase_vjp(const AugmentedVector& x, const AugmentedVector& g,
                    std::span<const double> phases, std::size_t block_len);

// -- Network ----------------------------------------------------------------

/// Whether the soft-thresholding layer sits between the data-augmented layer
/// and the linear impairment layers.
enum class Architecture { SoftThreshold, Linear };

/// All trainable scalars of the network.
struct NetworkParams {
  RealVector u;
  double sigma_s_sq = 1.0;
  std::array<double, 4> iq_tx{1, 0, 0, 0};
  RealVector fir;
  std::array<double, 4> iq_rx{1, 0, 0, 0};
  RealVector phases;

  /// Initial point: u = 0, sigma_s_sq = 1, identity IQ layers, unit-impulse
  /// FIR of `fir_length` taps, `phase_blocks` zero phases.
  static NetworkParams initial(const PilotPattern& pattern,
                               std::size_t fir_length,
                               std::size_t phase_blocks,
                               double sigma_s_sq = 1.0);
  /// Same shapes, every scalar zero.
  static NetworkParams zeros_like(const NetworkParams& p);

  static Complex iq_mu(const std::array<double, 4>& t) { return {t[0], t[2]}; }
  static Complex iq_nu(const std::array<double, 4>& t) { return {t[1], t[3]}; }
  static std::array<double, 4> iq_theta(Complex mu, Complex nu) {
    return {mu.real(), nu.real(), mu.imag(), nu.imag()};
  }

  ComplexVector fir_taps() const;
  void set_fir_taps(std::span<const Complex> h);

  std::size_t scalar_count(Architecture arch) const;
  /// Order: u, sigma_s_sq (SoftThreshold only), iq_tx, fir, iq_rx, phases.
  RealVector flatten(Architecture arch) const;
  /// Inverse of flatten. Throws InvalidLength on size mismatch.
  void unflatten(std::span<const double> flat, Architecture arch);

  bool operator==(const NetworkParams&) const = default;
};

enum class LayerKind { DataAugmented, SoftThreshold, IqTx, Fir, IqRx, Phase };

/// Layer inputs recorded by network_forward, in application order.
struct ForwardCache {
  struct Entry {
    LayerKind kind;
    AugmentedVector input;
  };
  Architecture architecture = Architecture::SoftThreshold;
  std::vector<Entry> entries;
};

struct NetworkOutput {
  AugmentedVector y_hat;
  ForwardCache cache;
};

/// data-augmented -> [soft threshold] -> IQ-Tx -> FIR -> IQ-Rx -> phase.
NetworkOutput network_forward(const AugmentedVector& pilots,
                              const NetworkParams& params,
                              const PilotPattern& pattern,
                              const Constellation& m,
                              Architecture arch = Architecture::SoftThreshold);

/// Reverse-mode pass for upstream gradient `g` on y_hat. For the Linear
/// architecture the sigma_s_sq gradient is 0. Throws InvalidState when the
/// cache does not match `params`/`pattern`.
NetworkParams network_backward(const ForwardCache& cache,
                               const AugmentedVector& g,
                               const NetworkParams& params,
                               const PilotPattern& pattern,
                               const Constellation& m);

}  // namespace paramnet
