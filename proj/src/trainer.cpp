#include "paramnet/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <ostream>

#include "number_format.hpp"

namespace paramnet {

Method Method::projected_gradient(std::size_t period) {
  if (period == 0) {
    throw Error(ErrorKind::InvalidParameter, "projection period must be >= 1");
  }
  return {Kind::ProjectedGradient, period};
}

Method Method::parse(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "simple") return simple();
  if (lower == "proposed") return proposed();
  if (lower.rfind("pg_", 0) == 0 && lower.size() > 3) {
    std::size_t period = 0;
    const char* first = lower.data() + 3;
    const char* last = lower.data() + lower.size();
    auto [ptr, ec] = std::from_chars(first, last, period);
    if (ec == std::errc() && ptr == last && period > 0) {
      return projected_gradient(period);
    }
  }
  throw Error(ErrorKind::UsageError,
              "unknown method '" + std::string(name) +
                  "' (expected simple, pg_<period> or proposed)");
}

std::vector<Method> Method::all_standard() {
  return {simple(), projected_gradient(500), projected_gradient(1000),
          projected_gradient(2000), proposed()};
}

std::string Method::name() const {
  switch (kind) {
    case Kind::Simple: return "simple";
    case Kind::ProjectedGradient:
      return "pg_" + std::to_string(projection_period);
    case Kind::Proposed: return "proposed";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "learning_rate must be > 0");
  }
  if (!(lambda >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "lambda must be >= 0");
  }
  if (iterations < 1) {
    throw Error(ErrorKind::InvalidParameter, "iterations must be >= 1");
  }
  if (trace_every < 1) {
    throw Error(ErrorKind::InvalidParameter, "trace_every must be >= 1");
  }
  if (!(initial_sigma_s_sq > 0.0) || !(sigma_s_sq_floor > 0.0)) {
    throw Error(ErrorKind::InvalidParameter,
                "initial sigma_s_sq and its floor must be > 0");
  }
  if (method.kind == Method::Kind::ProjectedGradient &&
      method.projection_period == 0) {
    throw Error(ErrorKind::InvalidParameter, "projection period must be >= 1");
  }
}

double mean_squared_error(const AugmentedVector& y,
                          const AugmentedVector& y_hat) {
  if (y.size() != y_hat.size()) {
    throw Error(ErrorKind::InvalidLength,
                "y has length " + std::to_string(y.size()) +
                    ", y_hat has length " + std::to_string(y_hat.size()));
  }
  if (y.size() == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y.values[i] - y_hat.values[i];
    acc += r * r;
  }
  return acc / static_cast<double>(y.size());
}

double loss(const AugmentedVector& y, const AugmentedVector& y_hat,
            double sigma_s_sq, double lambda) {
  return mean_squared_error(y, y_hat) + lambda * sigma_s_sq;
}

Objective::Objective(const TrialData& trial, const Constellation& m,
                     Architecture arch, double lambda)
    : trial_(trial),
      pilots_(trial.pilots()),
      m_(m),
      arch_(arch),
      lambda_(arch == Architecture::SoftThreshold ? lambda : 0.0) {}

Evaluation Objective::value(const NetworkParams& params) const {
  const NetworkOutput out =
      network_forward(pilots_, params, trial_.pattern, m_, arch_);
  Evaluation e;
  e.mse = mean_squared_error(trial_.y, out.y_hat);
  e.loss = e.mse + lambda_ * params.sigma_s_sq;
  return e;
}

Evaluation Objective::value_and_gradient(const NetworkParams& params) const {
  const NetworkOutput out =
      network_forward(pilots_, params, trial_.pattern, m_, arch_);
  Evaluation e;
  e.mse = mean_squared_error(trial_.y, out.y_hat);
  e.loss = e.mse + lambda_ * params.sigma_s_sq;

  // d mse / d y_hat = -(y - y_hat) / N over the 2N augmented entries.
  AugmentedVector g(out.y_hat.complex_size());
  const double scale = 2.0 / static_cast<double>(trial_.y.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.values[i] = -scale * (trial_.y.values[i] - out.y_hat.values[i]);
  }
  e.gradient = network_backward(out.cache, g, params, trial_.pattern, m_);
  e.gradient.sigma_s_sq += lambda_;
  if (arch_ == Architecture::Linear) e.gradient.sigma_s_sq = 0.0;
  return e;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamOptions& opts) {
  if (grads.size() != params.size() ||
      state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(ErrorKind::InvalidLength,
                "ADAM: parameter, gradient and state shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opts.beta1, t);
  const double c2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = opts.beta1 * m + (1.0 - opts.beta1) * grads[i];
    v = opts.beta2 * v + (1.0 - opts.beta2) * grads[i] * grads[i];
    params[i] -= lr * (m / c1) / (std::sqrt(v / c2) + opts.epsilon);
  }
}

void TrainTrace::write_csv(std::ostream& os) const {
  os << kCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.iteration << ',' << detail::format_double(r.sigma_s_sq) << ','
       << detail::format_double(r.mse) << ',' << detail::format_double(r.ser)
       << '\n';
  }
}

DivergenceError::DivergenceError(std::size_t iteration, TrainTrace partial)
    : Error(ErrorKind::DivergenceDetected,
            "non-finite loss or parameters at iteration " +
                std::to_string(iteration)),
      iteration_(iteration),
      trace_(std::move(partial)) {}

ComplexVector detect_symbols(const NetworkParams& params,
                             const Constellation& m) {
  const std::size_t n = params.u.size() / 2;
  ComplexVector out(n);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = {m.project(params.u[k]), m.project(params.u[k + n])};
  }
  return out;
}

std::size_t projection_count(const Method& method, std::size_t iterations) {
  if (method.kind != Method::Kind::ProjectedGradient) return 0;
  return iterations / method.projection_period;
}

namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

NetworkParams initial_params(const TrialData& trial,
                             const TrainConfig& config) {
  NetworkParams p = NetworkParams::initial(trial.pattern, config.fir_length,
                                           config.phase_blocks,
                                           config.initial_sigma_s_sq);
  if (config.u_init == UInit::Observed) {
    if (trial.y.complex_size() != trial.pattern.total) {
      throw Error(ErrorKind::InvalidLength,
                  "observation length does not match the pilot pattern");
    }
    const std::size_t nu = trial.pattern.n_data();
    for (std::size_t k = 0; k < nu; ++k) {
      p.u[k] = trial.y.re(trial.pattern.data_indices[k]);
      p.u[k + nu] = trial.y.im(trial.pattern.data_indices[k]);
    }
  }
  return p;
}

TrainResult train(const TrialData& trial, const TrainConfig& config,
                  const Constellation& m) {
  config.validate();
  const Architecture arch = config.method.architecture();
  const Objective objective(trial, m, arch, config.lambda);

  TrainResult result;
  NetworkParams& params = result.params;
  params = initial_params(trial, config);
  AdamState adam(params.scalar_count(arch));

  for (std::size_t it = 1; it <= config.iterations; ++it) {
    const Evaluation e = objective.value_and_gradient(params);
    if (!std::isfinite(e.loss)) throw DivergenceError(it, result.trace);

    RealVector flat = params.flatten(arch);
    adam_step(flat, e.gradient.flatten(arch), adam, config.learning_rate);
    if (!all_finite(flat)) throw DivergenceError(it, result.trace);
    params.unflatten(flat, arch);

    if (arch == Architecture::SoftThreshold) {
      params.sigma_s_sq = std::max(params.sigma_s_sq, config.sigma_s_sq_floor);
    }
    if (config.method.kind == Method::Kind::ProjectedGradient &&
        it % config.method.projection_period == 0) {
      params.u = hard_project(params.u, m);
    }

    if (it % config.trace_every == 0 || it == config.iterations) {
      const Evaluation now = objective.value(params);
      if (!std::isfinite(now.loss)) throw DivergenceError(it, result.trace);
      result.trace.rows.push_back(
          {it, params.sigma_s_sq, now.mse,
           symbol_error_rate(detect_symbols(params, m), trial.data_truth, m)});
    }
  }
  return result;
}

}  // namespace paramnet
