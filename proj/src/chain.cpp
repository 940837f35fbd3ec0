#include "paramnet/chain.hpp"

#include <cmath>
#include <string>

#include "paramnet/errors.hpp"

namespace paramnet {

ChainConfig ChainConfig::transparent(std::size_t n_symbols) {
  ChainConfig c;
  c.n_symbols = n_symbols;
  c.iq_tx = {};
  c.fir_taps = {{1.0, 0.0}};
  c.iq_rx = {};
  c.phase_noise_var = 0.0;
  return c;
}

void ChainConfig::validate() const {
  if (pilot_period == 0 || n_symbols % pilot_period != 0) {
    throw Error(ErrorKind::InvalidParameter,
                "n_symbols (" + std::to_string(n_symbols) +
                    ") must be a multiple of pilot_period (" +
                    std::to_string(pilot_period) + ")");
  }
  if (!(phase_noise_var >= 0.0) || !std::isfinite(phase_noise_var)) {
    throw Error(ErrorKind::InvalidParameter,
                "phase_noise_var must be finite and >= 0");
  }
  if (fir_taps.empty()) {
    throw Error(ErrorKind::InvalidParameter, "fir_taps must be nonempty");
  }
}

AugmentedVector TrialData::pilots() const {
  ComplexVector p;
  p.reserve(pattern.n_pilots());
  for (std::size_t idx : pattern.pilot_indices) p.push_back(s_true[idx]);
  return to_augmented(p);
}

RealVector wiener_phase(std::size_t n, double sigma_p_sq, Rng& rng) {
  if (!(sigma_p_sq >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter,
                "phase noise variance must be >= 0");
  }
  RealVector phi(n, 0.0);
  if (sigma_p_sq == 0.0) return phi;
  std::normal_distribution<double> psi(0.0, std::sqrt(sigma_p_sq));
  double acc = 0.0;
  for (auto& p : phi) {
    acc += psi(rng);
    p = acc;
  }
  return phi;
}

AugmentedVector apply_linear_chain(const ChainConfig& config,
                                   const ComplexVector& symbols) {
  AugmentedVector x = to_augmented(symbols);
  x = iq_forward(x, config.iq_tx.mu, config.iq_tx.nu);
  x = fir_forward(x, config.fir_taps);
  return iq_forward(x, config.iq_rx.mu, config.iq_rx.nu);
}

double snr_to_noise_var(const ChainConfig& config, double snr_db,
                        std::size_t probe_symbols) {
  if (probe_symbols < 1000) {
    throw Error(ErrorKind::InvalidParameter,
                "power probe needs at least 1000 symbols");
  }
  config.validate();
  Rng rng = make_rng(config.seed, Stream::PowerProbe);
  const AugmentedVector rx =
      apply_linear_chain(
      config, random_symbols(probe_symbols, config.constellation, rng));
  double power = 0.0;
  for (double v : rx.values) power += v * v;
  power /= static_cast<double>(probe_symbols);
  return power / std::pow(10.0, snr_db / 10.0);
}

TrialData simulate_trial_with_noise(const ChainConfig& config,
                                    double sigma_b_sq, std::uint64_t seed) {
  config.validate();
  if (!(sigma_b_sq >= 0.0) || !std::isfinite(sigma_b_sq)) {
    throw Error(ErrorKind::InvalidParameter,
                "noise variance must be finite and >= 0");
  }
  TrialData t;
  t.pattern = PilotPattern::periodic(config.n_symbols, config.pilot_period);
  t.sigma_b_sq = sigma_b_sq;

  Rng sym_rng = make_rng(seed, Stream::Symbols);
  t.s_true = random_symbols(config.n_symbols, config.constellation, sym_rng);

  AugmentedVector x = apply_linear_chain(config, t.s_true);

  Rng phase_rng = make_rng(seed, Stream::PhaseNoise);
  const RealVector phi =
      wiener_phase(config.n_symbols, config.phase_noise_var, phase_rng);
  for (std::size_t n = 0; n < config.n_symbols; ++n) {
    x.set_sample(n, std::polar(1.0, phi[n]) * x.sample(n));
  }

  if (sigma_b_sq > 0.0) {
    Rng noise_rng = make_rng(seed, Stream::AdditiveNoise);
    std::normal_distribution<double> b(0.0, std::sqrt(sigma_b_sq / 2.0));
    for (double& v : x.values) v += b(noise_rng);
  }
  t.y = std::move(x);

  t.data_truth.reserve(t.pattern.n_data());
  for (std::size_t idx : t.pattern.data_indices) {
    t.data_truth.push_back(t.s_true[idx]);
  }
  return t;
}

double noise_var_for_snr(const ChainConfig& config, double snr_db) {
  if (std::isnan(snr_db)) {
    throw Error(ErrorKind::InvalidParameter, "SNR must not be NaN");
  }
  switch (config.snr_reference) {
    case SnrReference::SymbolEnergy:
      return config.constellation.average_symbol_energy() /
             std::pow(10.0, snr_db / 10.0);
    case SnrReference::ReceiverPower:
      return snr_to_noise_var(config, snr_db);
  }
  return 0.0;
}

TrialData simulate_trial(const ChainConfig& config, double snr_db,
                         std::uint64_t seed) {
  return simulate_trial_with_noise(config, noise_var_for_snr(config, snr_db),
                                   seed);
}

}  // namespace paramnet
