#pragma once

#include <cstddef>
#include <cstdint>

#include "paramnet/augmented.hpp"
#include "paramnet/layers.hpp"

namespace paramnet {

/// What the SNR is measured against.
enum class SnrReference {
  /// Average constellation symbol energy: sigma_b^2 = Es / 10^(snr/10).
  SymbolEnergy,
  /// Mean power at the receiver input, measured by a noiseless probe.
  ReceiverPower,
};

struct IqPair {
  Complex mu{1.0, 0.0};
  Complex nu{0.0, 0.0};

  bool operator==(const IqPair&) const = default;
};

/// Ground-truth transmission chain: IQ-Tx -> FIR -> IQ-Rx -> Wiener phase
/// noise -> additive Gaussian noise.
struct ChainConfig {
  std::size_t n_symbols = 200;
  IqPair iq_tx{{0.9, -0.4}, {0.4, 0.1}};
  ComplexVector fir_taps{{0.9, 0.1}, {0.1, 0.1}, {0.01, 0.05},
                         {0.02, -0.003}, {0.004, 0.012}};
  IqPair iq_rx{{1.8, 0.13}, {0.1, 0.2}};
  double phase_noise_var = 0.000125;  // rad^2 per sample
  std::size_t pilot_period = 10;
  Constellation constellation = Constellation::qam16_unit_energy();
  SnrReference snr_reference = SnrReference::SymbolEnergy;
  /// Seeds the receiver power probe only.
  std::uint64_t seed = 0;

  /// Identity impairments, no phase noise.
  static ChainConfig transparent(std::size_t n_symbols = 200);

  /// Throws InvalidParameter on a violated invariant.
  void validate() const;

  bool operator==(const ChainConfig&) const = default;
};

struct TrialData {
  AugmentedVector y;
  ComplexVector s_true;
  PilotPattern pattern;
  ComplexVector data_truth;
  double sigma_b_sq = 0.0;

  /// Augmented pilot symbols, in pattern order.
  AugmentedVector pilots() const;

  bool operator==(const TrialData&) const = default;
};

/// phi[n] = sum_{k<=n} psi[k], psi ~ N(0, sigma_p_sq).
RealVector wiener_phase(std::size_t n, double sigma_p_sq, Rng& rng);

/// Impairment chain without phase noise or additive noise.
AugmentedVector apply_linear_chain(const ChainConfig& config,
                                   const ComplexVector& symbols);

/// Noise variance giving `snr_db` at the receiver input, measured on a
/// noiseless probe transmission of `probe_symbols` symbols.
double snr_to_noise_var(const ChainConfig& config, double snr_db,
                        std::size_t probe_symbols = 10000);

/// Total complex noise variance for `snr_db` under `config.snr_reference`.
/// +infinity gives 0.
double noise_var_for_snr(const ChainConfig& config, double snr_db);

/// One transmission of `config.n_symbols` symbols at the given SNR. Pass
/// +infinity for a noiseless trial. Deterministic in `seed`.
TrialData simulate_trial(const ChainConfig& config, double snr_db,
                         std::uint64_t seed);

/// As simulate_trial with an explicit total complex noise variance.
TrialData simulate_trial_with_noise(const ChainConfig& config,
                                    double sigma_b_sq, std::uint64_t seed);

}  // namespace paramnet
