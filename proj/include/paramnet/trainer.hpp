#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "paramnet/chain.hpp"
#include "paramnet/errors.hpp"
#include "paramnet/layers.hpp"

namespace paramnet {

/// Training variants compared in the experiments.
struct Method {
  enum class Kind { Simple, ProjectedGradient, Proposed };

  Kind kind = Kind::Proposed;
  std::size_t projection_period = 0;  // ProjectedGradient only

  static Method simple() { return {Kind::Simple, 0}; }
  static Method projected_gradient(std::size_t period);
  static Method proposed() { return {Kind::Proposed, 0}; }

  /// "simple", "pg_<period>" or "proposed" (case-insensitive). Throws
  /// UsageError otherwise.
  static Method parse(std::string_view name);
  /// The five sweep columns: simple, pg_500, pg_1000, pg_2000, proposed.
  static std::vector<Method> all_standard();

  std::string name() const;
  Architecture architecture() const {
    return kind == Kind::Proposed ? Architecture::SoftThreshold
                                  : Architecture::Linear;
  }

  bool operator==(const Method&) const = default;
};

/// Starting point of the unknown data vector u.
enum class UInit {
  Zeros,
  /// The received samples at the data positions.
  Observed,
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double lambda = 1e-3;
  std::size_t iterations = 20000;
  Method method = Method::proposed();
  std::size_t trace_every = 100;
  std::size_t fir_length = 5;
  std::size_t phase_blocks = 20;
  double initial_sigma_s_sq = 1.0;
  UInit u_init = UInit::Observed;
  /// Lower clamp applied to sigma_s_sq after every update.
  double sigma_s_sq_floor = 1e-6;

  void validate() const;
};

// -- Loss -------------------------------------------------------------------

/// (1/(2N)) * ||y - y_hat||^2 with N the number of complex samples, i.e. the
/// mean of the squared augmented entries.
double mean_squared_error(const AugmentedVector& y,
                          const AugmentedVector& y_hat);

/// mean_squared_error(y, y_hat) + lambda * sigma_s_sq.
double loss(const AugmentedVector& y, const AugmentedVector& y_hat,
            double sigma_s_sq, double lambda);

struct Evaluation {
  double mse = 0.0;
  double loss = 0.0;
  NetworkParams gradient;  // only filled by value_and_gradient
};

/// Training objective on one trial. The Linear architecture carries no
/// regularization term.
class Objective {
 public:
  Objective(const TrialData& trial, const Constellation& m, Architecture arch,
            double lambda);

  Evaluation value(const NetworkParams& params) const;
  Evaluation value_and_gradient(const NetworkParams& params) const;

  Architecture architecture() const { return arch_; }

 private:
  const TrialData& trial_;
  AugmentedVector pilots_;
  const Constellation& m_;
  Architecture arch_;
  double lambda_;
};

// -- ADAM -------------------------------------------------------------------

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  RealVector first_moment;
  RealVector second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n)
      : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected ADAM update of `params` in place. Throws InvalidLength
/// on shape mismatch.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, double lr, const AdamOptions& opts = {});

// -- Training ---------------------------------------------------------------

struct TraceRow {
  std::size_t iteration = 0;
  double sigma_s_sq = 0.0;
  double mse = 0.0;
  double ser = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct TrainTrace {
  std::vector<TraceRow> rows;

  static constexpr std::string_view kCsvHeader = "iteration,sigma_s_sq,mse,ser";
  void write_csv(std::ostream& os) const;

  bool operator==(const TrainTrace&) const = default;
};

struct TrainResult {
  NetworkParams params;
  TrainTrace trace;
};

/// Raised when the loss or the parameters become non-finite; carries the
/// trace recorded so far.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t iteration, TrainTrace partial);

  std::size_t iteration() const { return iteration_; }
  const TrainTrace& trace() const { return trace_; }

 private:
  std::size_t iteration_;
  TrainTrace trace_;
};

/// Hard decisions on u: symbol n is proj(u[n]) + j proj(u[n + N_u]).
ComplexVector detect_symbols(const NetworkParams& params,
                             const Constellation& m);

/// NetworkParams::initial with u set according to `config.u_init`.
NetworkParams initial_params(const TrialData& trial, const TrainConfig& config);

/// Full-batch training from initial_params. Rows are traced
/// after every `trace_every`-th update and after the last one.
TrainResult train(const TrialData& trial, const TrainConfig& config,
                  const Constellation& m);

/// Number of hard projections a ProjectedGradient run performs.
std::size_t projection_count(const Method& method, std::size_t iterations);

}  // namespace paramnet
