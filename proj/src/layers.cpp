#include "paramnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "paramnet/errors.hpp"

namespace paramnet {
namespace {

void require_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::InvalidLength,
                std::string(what) + ": expected length " +
                    std::to_string(want) + ", got " + std::to_string(got));
  }
}

void require_positive_variance(double sigma_s_sq) {
  if (!(sigma_s_sq > 0.0) || !std::isfinite(sigma_s_sq)) {
    throw Error(ErrorKind::InvalidParameter,
                "sigma_s_sq must be positive and finite");
  }
}

void require_blocks(std::size_t n, std::size_t n_phases,
                    std::size_t block_len) {
  if (block_len == 0 || n_phases == 0 || n != n_phases * block_len) {
    throw Error(ErrorKind::InvalidParameter,
                "phase layer: " + std::to_string(n) +
                    " samples do not split into " + std::to_string(n_phases) +
                    " blocks of " + std::to_string(block_len));
  }
}

// Gibbs weights of the denoiser for one input, shifted by the largest
// exponent so that at least one weight is exactly 1.
struct GibbsMoments {
  double mean_s = 0.0;  // E[s]
  double var_s = 0.0;   // Var[s]
  double cov_sd = 0.0;  // Cov[s, (x-s)^2]
};

// Moments are accumulated as offsets from the most probable point so that
// the saturated regime does not lose everything to cancellation (E[s] stays
// monotone in x and Var[s] nonnegative).
GibbsMoments gibbs_moments(double x, double sigma_s_sq,
                           std::span<const double> points) {
  double max_exp = -std::numeric_limits<double>::infinity();
  double anchor = points.front();
  for (double s : points) {
    const double e = -(x - s) * (x - s) / sigma_s_sq;
    if (e > max_exp) {
      max_exp = e;
      anchor = s;
    }
  }
  const double d_anchor = (x - anchor) * (x - anchor);
  double z = 0.0, et = 0.0, et2 = 0.0, ee = 0.0, ete = 0.0;
  for (double s : points) {
    const double d = (x - s) * (x - s);
    const double w = std::exp(-d / sigma_s_sq - max_exp);
    const double t = s - anchor;
    const double e = d - d_anchor;
    z += w;
    et += w * t;
    et2 += w * t * t;
    ee += w * e;
    ete += w * t * e;
  }
  et /= z;
  et2 /= z;
  ee /= z;
  ete /= z;
  GibbsMoments m;
  m.mean_s = anchor + et;
  m.var_s = std::max(0.0, et2 - et * et);
  m.cov_sd = ete - et * ee;
  return m;
}

}  // namespace

PilotPattern PilotPattern::periodic(std::size_t total, std::size_t period) {
  if (period == 0 || total % period != 0) {
    throw Error(ErrorKind::InvalidParameter,
                "pilot period " + std::to_string(period) +
                    " must be >= 1 and divide " + std::to_string(total));
  }
  std::vector<std::size_t> pilots;
  for (std::size_t n = 0; n < total; n += period) pilots.push_back(n);
  return from_pilots(total, std::move(pilots));
}

PilotPattern PilotPattern::from_pilots(std::size_t total,
                                       std::vector<std::size_t> pilot_indices) {
  PilotPattern p;
  p.total = total;
  for (std::size_t k = 0; k < pilot_indices.size(); ++k) {
    if (pilot_indices[k] >= total ||
        (k > 0 && pilot_indices[k] <= pilot_indices[k - 1])) {
      throw Error(ErrorKind::InvalidParameter,
                  "pilot indices must be sorted, unique and < " +
                      std::to_string(total));
    }
  }
  std::size_t next = 0;
  for (std::size_t n = 0; n < total; ++n) {
    if (next < pilot_indices.size() && pilot_indices[next] == n) {
      ++next;
    } else {
      p.data_indices.push_back(n);
    }
  }
  p.pilot_indices = std::move(pilot_indices);
  return p;
}

AugmentedVector data_augmented_forward(const AugmentedVector& pilots,
                                       std::span<const double> u,
                                       const PilotPattern& pattern) {
  require_length(pilots.size(), 2 * pattern.n_pilots(), "pilots");
  require_length(u.size(), 2 * pattern.n_data(), "u");
  const std::size_t nx = pattern.n_pilots();
  const std::size_t nu = pattern.n_data();
  AugmentedVector out(pattern.total);
  for (std::size_t k = 0; k < nx; ++k) {
    out.re(pattern.pilot_indices[k]) = pilots.values[k];
    out.im(pattern.pilot_indices[k]) = pilots.values[k + nx];
  }
  for (std::size_t k = 0; k < nu; ++k) {
    out.re(pattern.data_indices[k]) = u[k];
    out.im(pattern.data_indices[k]) = u[k + nu];
  }
  return out;
}

RealVector data_augmented_vjp(const AugmentedVector& g,
                              const PilotPattern& pattern) {
  require_length(g.size(), 2 * pattern.total, "g");
  const std::size_t nu = pattern.n_data();
  RealVector out(2 * nu);
  for (std::size_t k = 0; k < nu; ++k) {
    out[k] = g.re(pattern.data_indices[k]);
    out[k + nu] = g.im(pattern.data_indices[k]);
  }
  return out;
}

RealVector soft_threshold_forward(std::span<const double> x,
                                  double sigma_s_sq, const Constellation& m) {
  require_positive_variance(sigma_s_sq);
  RealVector out(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    out[n] = gibbs_moments(x[n], sigma_s_sq, m.points()).mean_s;
  }
  return out;
}

SoftThresholdGrad soft_threshold_vjp(std::span<const double> x,
                                     std::span<const double> g,
                                     double sigma_s_sq,
                                     const Constellation& m) {
  require_positive_variance(sigma_s_sq);
  require_length(g.size(), x.size(), "g");
  SoftThresholdGrad out;
  out.x.resize(x.size());
  const double inv_var = 1.0 / sigma_s_sq;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const GibbsMoments mo = gibbs_moments(x[n], sigma_s_sq, m.points());
    // dS/dx = (2/var) Var[s];  dS/dvar = Cov[s, d] / var^2
    out.x[n] = g[n] * 2.0 * inv_var * mo.var_s;
    out.sigma_s_sq += g[n] * mo.cov_sd * inv_var * inv_var;
  }
  return out;
}

AugmentedVector iq_forward(const AugmentedVector& x, Complex mu, Complex nu) {
  AugmentedVector out(x.complex_size());
  for (std::size_t n = 0; n < x.complex_size(); ++n) {
    const Complex z = x.sample(n);
    out.set_sample(n, mu * z + nu * std::conj(z));
  }
  return out;
}

IqGrad iq_vjp(const AugmentedVector& x, const AugmentedVector& g, Complex mu,
              Complex nu) {
  require_length(g.size(), x.size(), "g");
  IqGrad out{AugmentedVector(x.complex_size()), {}};
  Complex grad_mu = 0.0;
  Complex grad_nu = 0.0;
  for (std::size_t n = 0; n < x.complex_size(); ++n) {
    const Complex z = x.sample(n);
    const Complex gz = g.sample(n);
    out.x.set_sample(n, std::conj(mu) * gz + nu * std::conj(gz));
    grad_mu += gz * std::conj(z);
    grad_nu += gz * z;
  }
  out.theta = NetworkParams::iq_theta(grad_mu, grad_nu);
  return out;
}

AugmentedVector fir_forward(const AugmentedVector& x,
                            std::span<const Complex> h) {
  if (h.empty()) {
    throw Error(ErrorKind::InvalidParameter, "FIR needs at least one tap");
  }
  const std::size_t n_samples = x.complex_size();
  AugmentedVector out(n_samples);
  for (std::size_t n = 0; n < n_samples; ++n) {
    Complex acc = 0.0;
    const std::size_t taps = std::min(h.size(), n + 1);
    for (std::size_t k = 0; k < taps; ++k) acc += h[k] * x.sample(n - k);
    out.set_sample(n, acc);
  }
  return out;
}

FirGrad fir_vjp(const AugmentedVector& x, const AugmentedVector& g,
                std::span<const Complex> h) {
  if (h.empty()) {
    throw Error(ErrorKind::InvalidParameter, "FIR needs at least one tap");
  }
  require_length(g.size(), x.size(), "g");
  const std::size_t n_samples = x.complex_size();
  const std::size_t d = h.size();
  FirGrad out{AugmentedVector(n_samples), RealVector(2 * d, 0.0)};
  // grad_x[m] = sum_k conj(h[k]) g[m+k]
  for (std::size_t m = 0; m < n_samples; ++m) {
    Complex acc = 0.0;
    for (std::size_t k = 0; k < d && m + k < n_samples; ++k) {
      acc += std::conj(h[k]) * g.sample(m + k);
    }
    out.x.set_sample(m, acc);
  }
  // grad_h[k] = sum_n g[n] conj(x[n-k])
  for (std::size_t k = 0; k < d; ++k) {
    Complex acc = 0.0;
    for (std::size_t n = k; n < n_samples; ++n) {
      acc += g.sample(n) * std::conj(x.sample(n - k));
    }
    out.taps[k] = acc.real();
    out.taps[k + d] = acc.imag();
  }
  return out;
}

AugmentedVector phase_forward(const AugmentedVector& x,
                              std::span<const double> phases,
                              std::size_t block_len) {
  require_blocks(x.complex_size(), phases.size(), block_len);
  AugmentedVector out(x.complex_size());
  for (std::size_t n = 0; n < x.complex_size(); ++n) {
    out.set_sample(n, std::polar(1.0, phases[n / block_len]) * x.sample(n));
  }
  return out;
}

PhaseGrad phase_vjp(const AugmentedVector& x, const AugmentedVector& g,
                    std::span<const double> phases, std::size_t block_len) {
  require_length(g.size(), x.size(), "g");
  require_blocks(x.complex_size(), phases.size(), block_len);
  PhaseGrad out{AugmentedVector(x.complex_size()),
                RealVector(phases.size(), 0.0)};
  for (std::size_t n = 0; n < x.complex_size(); ++n) {
    const Complex rot = std::polar(1.0, phases[n / block_len]);
    const Complex gz = g.sample(n);
    const Complex y = rot * x.sample(n);
    out.x.set_sample(n, std::conj(rot) * gz);
    out.phases[n / block_len] += (gz * std::conj(y)).imag();
  }
  return out;
}

NetworkParams NetworkParams::initial(const PilotPattern& pattern,
                                     std::size_t fir_length,
                                     std::size_t phase_blocks,
                                     double sigma_s_sq) {
  if (fir_length == 0) {
    throw Error(ErrorKind::InvalidParameter, "FIR needs at least one tap");
  }
  require_positive_variance(sigma_s_sq);
  require_blocks(pattern.total, phase_blocks,
                 phase_blocks == 0 ? 0 : pattern.total / phase_blocks);
  NetworkParams p;
  p.u.assign(2 * pattern.n_data(), 0.0);
  p.sigma_s_sq = sigma_s_sq;
  p.fir.assign(2 * fir_length, 0.0);
  p.fir[0] = 1.0;
  p.phases.assign(phase_blocks, 0.0);
  return p;
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& p) {
  NetworkParams z;
  z.u.assign(p.u.size(), 0.0);
  z.sigma_s_sq = 0.0;
  z.iq_tx = {};
  z.fir.assign(p.fir.size(), 0.0);
  z.iq_rx = {};
  z.phases.assign(p.phases.size(), 0.0);
  return z;
}

ComplexVector NetworkParams::fir_taps() const {
  const std::size_t d = fir.size() / 2;
  ComplexVector h(d);
  for (std::size_t k = 0; k < d; ++k) h[k] = {fir[k], fir[k + d]};
  return h;
}

void NetworkParams::set_fir_taps(std::span<const Complex> h) {
  fir.assign(2 * h.size(), 0.0);
  for (std::size_t k = 0; k < h.size(); ++k) {
    fir[k] = h[k].real();
    fir[k + h.size()] = h[k].imag();
  }
}

std::size_t NetworkParams::scalar_count(Architecture arch) const {
  return u.size() + (arch == Architecture::SoftThreshold ? 1 : 0) + 4 +
         fir.size() + 4 + phases.size();
}

RealVector NetworkParams::flatten(Architecture arch) const {
  RealVector flat;
  flat.reserve(scalar_count(arch));
  flat.insert(flat.end(), u.begin(), u.end());
  if (arch == Architecture::SoftThreshold) flat.push_back(sigma_s_sq);
  flat.insert(flat.end(), iq_tx.begin(), iq_tx.end());
  flat.insert(flat.end(), fir.begin(), fir.end());
  flat.insert(flat.end(), iq_rx.begin(), iq_rx.end());
  flat.insert(flat.end(), phases.begin(), phases.end());
  return flat;
}

void NetworkParams::unflatten(std::span<const double> flat, Architecture arch) {
  require_length(flat.size(), scalar_count(arch), "flat parameters");
  auto it = flat.begin();
  auto take = [&it](auto& dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  take(u);
  if (arch == Architecture::SoftThreshold) sigma_s_sq = *it++;
  take(iq_tx);
  take(fir);
  take(iq_rx);
  take(phases);
}

namespace {

void check_params(const NetworkParams& params, const PilotPattern& pattern) {
  require_length(params.u.size(), 2 * pattern.n_data(), "u");
  if (params.fir.empty() || params.fir.size() % 2 != 0) {
    throw Error(ErrorKind::InvalidParameter,
                "FIR parameters must hold a nonzero, even number of reals");
  }
  if (params.phases.empty() || pattern.total % params.phases.size() != 0) {
    throw Error(ErrorKind::InvalidParameter,
                "phase block count must divide the frame length");
  }
}

std::vector<LayerKind> layer_sequence(Architecture arch) {
  if (arch == Architecture::SoftThreshold) {
    return {LayerKind::DataAugmented, LayerKind::SoftThreshold,
            LayerKind::IqTx,          LayerKind::Fir,
            LayerKind::IqRx,          LayerKind::Phase};
  }
  return {LayerKind::DataAugmented, LayerKind::IqTx, LayerKind::Fir,
          LayerKind::IqRx, LayerKind::Phase};
}

}  // namespace

NetworkOutput network_forward(const AugmentedVector& pilots,
                              const NetworkParams& params,
                              const PilotPattern& pattern,
                              const Constellation& m, Architecture arch) {
  check_params(params, pattern);
  const ComplexVector h = params.fir_taps();
  const std::size_t block_len = pattern.total / params.phases.size();

  NetworkOutput out;
  out.cache.architecture = arch;
  AugmentedVector x = pilots;
  for (LayerKind kind : layer_sequence(arch)) {
    out.cache.entries.push_back({kind, x});
    switch (kind) {
      case LayerKind::DataAugmented:
        x = data_augmented_forward(x, params.u, pattern);
        break;
      case LayerKind::SoftThreshold:
        x.values = soft_threshold_forward(x.values, params.sigma_s_sq, m);
        break;
      case LayerKind::IqTx:
        x = iq_forward(x, NetworkParams::iq_mu(params.iq_tx),
                       NetworkParams::iq_nu(params.iq_tx));
        break;
      case LayerKind::Fir:
        x = fir_forward(x, h);
        break;
      case LayerKind::IqRx:
        x = iq_forward(x, NetworkParams::iq_mu(params.iq_rx),
                       NetworkParams::iq_nu(params.iq_rx));
        break;
      case LayerKind::Phase:
        x = phase_forward(x, params.phases, block_len);
        break;
    }
  }
  out.y_hat = std::move(x);
  return out;
}

NetworkParams network_backward(const ForwardCache& cache,
                               const AugmentedVector& g,
                               const NetworkParams& params,
                               const PilotPattern& pattern,
                               const Constellation& m) {
  check_params(params, pattern);
  const auto expected = layer_sequence(cache.architecture);
  bool consistent = cache.entries.size() == expected.size();
  for (std::size_t i = 0; consistent && i < expected.size(); ++i) {
    const auto& e = cache.entries[i];
    const std::size_t want = i == 0 ? 2 * pattern.n_pilots()
                                    : 2 * pattern.total;
    consistent = e.kind == expected[i] && e.input.size() == want;
  }
  if (!consistent) {
    throw Error(ErrorKind::InvalidState,
                "forward cache does not match the network parameters");
  }
  require_length(g.size(), 2 * pattern.total, "upstream gradient");

  const ComplexVector h = params.fir_taps();
  const std::size_t block_len = pattern.total / params.phases.size();
  NetworkParams grad = NetworkParams::zeros_like(params);
  AugmentedVector gx = g;
  for (auto it = cache.entries.rbegin(); it != cache.entries.rend(); ++it) {
    const AugmentedVector& in = it->input;
    switch (it->kind) {
      case LayerKind::Phase: {
        auto r = phase_vjp(in, gx, params.phases, block_len);
        grad.phases = std::move(r.phases);
        gx = std::move(r.x);
        break;
      }
      case LayerKind::IqRx: {
        auto r = iq_vjp(in, gx, NetworkParams::iq_mu(params.iq_rx),
                        NetworkParams::iq_nu(params.iq_rx));
        grad.iq_rx = r.theta;
        gx = std::move(r.x);
        break;
      }
      case LayerKind::Fir: {
        auto r = fir_vjp(in, gx, h);
        grad.fir = std::move(r.taps);
        gx = std::move(r.x);
        break;
      }
      case LayerKind::IqTx: {
        auto r = iq_vjp(in, gx, NetworkParams::iq_mu(params.iq_tx),
                        NetworkParams::iq_nu(params.iq_tx));
        grad.iq_tx = r.theta;
        gx = std::move(r.x);
        break;
      }
      case LayerKind::SoftThreshold: {
        auto r = soft_threshold_vjp(in.values, gx.values, params.sigma_s_sq, m);
        grad.sigma_s_sq = r.sigma_s_sq;
        gx.values = std::move(r.x);
        break;
      }
      case LayerKind::DataAugmented:
        grad.u = data_augmented_vjp(gx, pattern);
        break;
    }
  }
  return grad;
}

}  // namespace paramnet
