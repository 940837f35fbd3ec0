#include "paramnet/experiments.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "number_format.hpp"

namespace paramnet {

ExperimentSpec ExperimentSpec::single_defaults() {
  ExperimentSpec s;
  s.train.iterations = 20000;
  s.methods = {Method::simple(), Method::proposed()};
  return s;
}

ExperimentSpec ExperimentSpec::sweep_defaults() {
  ExperimentSpec s;
  s.train.iterations = 10000;
  return s;
}

void ExperimentSpec::validate() const {
  chain.validate();
  train.validate();
  if (methods.empty()) {
    throw Error(ErrorKind::UsageError, "at least one method is required");
  }
  if (trials_per_snr < 1) {
    throw Error(ErrorKind::UsageError, "trials per SNR must be >= 1");
  }
  if (chain.n_symbols % train.phase_blocks != 0) {
    throw Error(ErrorKind::InvalidParameter,
                "phase_blocks must divide n_symbols");
  }
}

// -- Config parsing ---------------------------------------------------------

namespace {

[[noreturn]] void parse_fail(const YAML::Mark& mark, const std::string& msg) {
  throw Error(ErrorKind::ParseError,
              "line " + std::to_string(mark.line + 1) + ", column " +
                  std::to_string(mark.column + 1) + ": " + msg);
}

double as_real(const YAML::Node& n) {
  if (!n.IsScalar()) parse_fail(n.Mark(), "expected a number");
  return n.as<double>();
}

std::size_t as_count(const YAML::Node& n) {
  if (!n.IsScalar()) parse_fail(n.Mark(), "expected a non-negative integer");
  const auto v = n.as<long long>();
  if (v < 0) parse_fail(n.Mark(), "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

Complex as_complex(const YAML::Node& n) {
  if (!n.IsSequence() || n.size() != 2) {
    parse_fail(n.Mark(), "expected a complex number as [re, im]");
  }
  return {as_real(n[0]), as_real(n[1])};
}

RealVector as_real_list(const YAML::Node& n) {
  if (!n.IsSequence()) parse_fail(n.Mark(), "expected a list of numbers");
  RealVector out;
  for (const auto& item : n) out.push_back(as_real(item));
  return out;
}

void apply_key(ExperimentSpec& spec, const std::string& key,
               const YAML::Node& v) {
  ChainConfig& c = spec.chain;
  TrainConfig& t = spec.train;
  if (key == "n_symbols") {
    c.n_symbols = as_count(v);
  } else if (key == "pilot_period") {
    c.pilot_period = as_count(v);
  } else if (key == "iq_tx_mu") {
    c.iq_tx.mu = as_complex(v);
  } else if (key == "iq_tx_nu") {
    c.iq_tx.nu = as_complex(v);
  } else if (key == "iq_rx_mu") {
    c.iq_rx.mu = as_complex(v);
  } else if (key == "iq_rx_nu") {
    c.iq_rx.nu = as_complex(v);
  } else if (key == "fir_taps") {
    if (!v.IsSequence()) parse_fail(v.Mark(), "expected a list of [re, im]");
    c.fir_taps.clear();
    for (const auto& item : v) c.fir_taps.push_back(as_complex(item));
  } else if (key == "phase_noise_var") {
    c.phase_noise_var = as_real(v);
  } else if (key == "constellation") {
    if (v.IsSequence()) {
      c.constellation = Constellation(as_real_list(v));
    } else {
      const auto name = v.as<std::string>();
      if (name == "qam16_unit") {
        c.constellation = Constellation::qam16_unit_energy();
      } else if (name == "qam16") {
        c.constellation = Constellation::qam16();
      } else {
        parse_fail(v.Mark(), "constellation must be qam16_unit, qam16 or a "
                             "list of points");
      }
    }
  } else if (key == "snr_reference") {
    const auto name = v.as<std::string>();
    if (name == "symbol_energy") {
      c.snr_reference = SnrReference::SymbolEnergy;
    } else if (name == "receiver_power") {
      c.snr_reference = SnrReference::ReceiverPower;
    } else {
      parse_fail(v.Mark(),
                 "snr_reference must be symbol_energy or receiver_power");
    }
  } else if (key == "probe_seed") {
    c.seed = v.as<std::uint64_t>();
  } else if (key == "learning_rate") {
    t.learning_rate = as_real(v);
  } else if (key == "lambda") {
    t.lambda = as_real(v);
  } else if (key == "iterations") {
    t.iterations = as_count(v);
  } else if (key == "trace_every") {
    t.trace_every = as_count(v);
  } else if (key == "fir_length") {
    t.fir_length = as_count(v);
  } else if (key == "phase_blocks") {
    t.phase_blocks = as_count(v);
  } else if (key == "initial_sigma_s_sq") {
    t.initial_sigma_s_sq = as_real(v);
  } else if (key == "u_init") {
    const auto name = v.as<std::string>();
    if (name == "observed") {
      t.u_init = UInit::Observed;
    } else if (name == "zeros") {
      t.u_init = UInit::Zeros;
    } else {
      parse_fail(v.Mark(), "u_init must be observed or zeros");
    }
  } else if (key == "snr_db") {
    spec.snr_db = as_real(v);
  } else if (key == "snr_list") {
    spec.snr_list = v.IsSequence() ? as_real_list(v)
                                   : parse_snr_list(v.as<std::string>());
  } else if (key == "trials") {
    spec.trials_per_snr = as_count(v);
  } else if (key == "methods") {
    if (v.IsSequence()) {
      spec.methods.clear();
      for (const auto& item : v) {
        spec.methods.push_back(Method::parse(item.as<std::string>()));
      }
    } else {
      spec.methods = parse_methods(v.as<std::string>());
    }
  } else if (key == "seed") {
    spec.seed = v.as<std::uint64_t>();
  } else if (key == "output_dir") {
    spec.output_dir = v.as<std::string>();
  } else if (key == "threads") {
    spec.threads = as_count(v);
  } else {
    throw Error(ErrorKind::ParseError, "unknown key '" + key + "'");
  }
}

}  // namespace

void apply_config_text(ExperimentSpec& spec, const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    parse_fail(e.mark, e.msg);
  }
  if (root.IsNull()) return;
  if (!root.IsMap()) parse_fail(root.Mark(), "expected a flat key: value map");
  for (const auto& kv : root) {
    const YAML::Mark mark = kv.first.Mark();
    const auto key = kv.first.as<std::string>();
    try {
      apply_key(spec, key, kv.second);
    } catch (const YAML::Exception& e) {
      parse_fail(mark, "key '" + key + "': " + e.msg);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ParseError &&
          std::string(e.what()).find("line ") != std::string::npos) {
        throw;
      }
      parse_fail(mark, "key '" + key + "': " + e.what());
    }
  }
}

void apply_config_file(ExperimentSpec& spec,
                       const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::IoError, "cannot read config " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    apply_config_text(spec, ss.str());
  } catch (const Error& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

std::vector<double> parse_snr_list(const std::string& text) {
  auto to_double = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error(ErrorKind::UsageError, "bad SNR value '" + s + "'");
    }
  };
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) {
      throw Error(ErrorKind::UsageError,
                  "SNR range must be start:stop:step, got '" + text + "'");
    }
    const double start = to_double(parts[0]);
    const double stop = to_double(parts[1]);
    const double step = to_double(parts[2]);
    if (!(step > 0.0) || stop < start) {
      throw Error(ErrorKind::UsageError, "bad SNR range '" + text + "'");
    }
    const auto n = static_cast<std::size_t>(
        std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(start + static_cast<double>(i) * step);
    }
  } else {
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(to_double(p));
  }
  if (out.empty()) throw Error(ErrorKind::UsageError, "empty SNR list");
  return out;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> out;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) {
    if (!p.empty()) out.push_back(Method::parse(p));
  }
  if (out.empty()) throw Error(ErrorKind::UsageError, "empty method list");
  return out;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t snr_index,
                         std::size_t trial) {
  return derive_seed(master, {snr_index, trial});
}

// -- Runners ----------------------------------------------------------------

namespace {

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs body(i) for i in [0, n) on a pool; rethrows the first exception.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t count = std::min(threads, std::max<std::size_t>(n, 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < count; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
}

MethodOutcome train_method(const TrialData& trial, const ExperimentSpec& spec,
                           const Method& method) {
  TrainConfig config = spec.train;
  config.method = method;
  MethodOutcome out;
  out.method = method;
  try {
    TrainResult r = train(trial, config, spec.chain.constellation);
    out.final_ser = r.trace.rows.back().ser;
    out.iterations_completed = config.iterations;
    out.trace = std::move(r.trace);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.final_ser = 1.0;
    out.iterations_completed = e.iteration() - 1;
    out.trace = e.trace();
  }
  return out;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::IoError,
                "cannot create output directory " + dir.string());
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return os;
}

void finish_output(std::ofstream& os, const std::filesystem::path& path) {
  os.flush();
  if (!os) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

const char* status_of(const MethodOutcome& o) {
  return o.diverged ? "diverged" : "ok";
}

}  // namespace

std::vector<MethodOutcome> run_single_trial(const ExperimentSpec& spec) {
  spec.validate();
  ensure_dir(spec.output_dir);
  const TrialData trial = simulate_trial(spec.chain, spec.snr_db, spec.seed);

  std::vector<MethodOutcome> outcomes(spec.methods.size());
  parallel_for(spec.methods.size(), resolve_threads(spec.threads),
               [&](std::size_t i) {
                 outcomes[i] = train_method(trial, spec, spec.methods[i]);
               });

  for (const auto& o : outcomes) {
    const auto path = spec.output_dir / ("single_" + o.method.name() + ".csv");
    auto os = open_output(path);
    o.trace.write_csv(os);
    finish_output(os, path);
  }
  const auto status_path = spec.output_dir / "single_status.csv";
  auto os = open_output(status_path);
  os << "method,status,final_ser,iterations_completed\n";
  for (const auto& o : outcomes) {
    os << o.method.name() << ',' << status_of(o) << ','
       << detail::format_double(o.final_ser) << ',' << o.iterations_completed
       << '\n';
  }
  finish_output(os, status_path);
  return outcomes;
}

SweepResult run_monte_carlo(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.snr_list.empty()) {
    throw Error(ErrorKind::UsageError, "sweep needs a nonempty SNR list");
  }
  ensure_dir(spec.output_dir);

  const std::size_t n_snr = spec.snr_list.size();
  const std::size_t n_trials = spec.trials_per_snr;
  const std::size_t n_methods = spec.methods.size();
  const std::size_t n_cells = n_snr * n_trials * n_methods;

  // Noise variance depends only on the SNR; compute once per point.
  std::vector<double> noise_var(n_snr);
  for (std::size_t s = 0; s < n_snr; ++s) {
    noise_var[s] = noise_var_for_snr(spec.chain, spec.snr_list[s]);
  }

  std::vector<MethodOutcome> cells(n_cells);
  parallel_for(n_cells, resolve_threads(spec.threads), [&](std::size_t idx) {
    const std::size_t m = idx % n_methods;
    const std::size_t trial = (idx / n_methods) % n_trials;
    const std::size_t s = idx / (n_methods * n_trials);
    const TrialData data = simulate_trial_with_noise(
        spec.chain, noise_var[s], trial_seed(spec.seed, s, trial));
    MethodOutcome o = train_method(data, spec, spec.methods[m]);
    o.trace.rows.clear();
    cells[idx] = std::move(o);
  });

  SweepResult result;
  result.snr_db = spec.snr_list;
  result.methods = spec.methods;
  result.mean_ser.assign(n_snr, std::vector<double>(n_methods, 0.0));
  for (std::size_t idx = 0; idx < n_cells; ++idx) {
    const std::size_t m = idx % n_methods;
    const std::size_t s = idx / (n_methods * n_trials);
    result.mean_ser[s][m] += cells[idx].final_ser;
    if (cells[idx].diverged) ++result.divergent_runs;
  }
  for (auto& row : result.mean_ser) {
    for (double& v : row) v /= static_cast<double>(n_trials);
  }

  const auto summary_path = spec.output_dir / "ser_vs_snr.csv";
  auto os = open_output(summary_path);
  os << "snr_db";
  for (const auto& m : spec.methods) os << ',' << m.name();
  os << '\n';
  for (std::size_t s = 0; s < n_snr; ++s) {
    os << detail::format_double(spec.snr_list[s]);
    for (double v : result.mean_ser[s]) os << ',' << detail::format_double(v);
    os << '\n';
  }
  finish_output(os, summary_path);

  const auto trials_path = spec.output_dir / "ser_vs_snr_trials.csv";
  auto ts = open_output(trials_path);
  ts << "snr_db,trial,method,ser,status\n";
  for (std::size_t idx = 0; idx < n_cells; ++idx) {
    const std::size_t trial = (idx / n_methods) % n_trials;
    const std::size_t s = idx / (n_methods * n_trials);
    const auto& o = cells[idx];
    ts << detail::format_double(spec.snr_list[s]) << ',' << trial << ','
       << o.method.name() << ',' << detail::format_double(o.final_ser) << ','
       << status_of(o) << '\n';
  }
  finish_output(ts, trials_path);
  return result;
}

// -- CLI --------------------------------------------------------------------

namespace {

struct CliFlags {
  std::string config;
  double snr = 0.0;
  std::string snr_list;
  std::size_t iterations = 0;
  std::size_t trials = 0;
  std::string methods;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t trace_every = 0;
  std::size_t threads = 0;
};

struct CliOptions {
  CLI::Option* config;
  CLI::Option* snr;
  CLI::Option* snr_list;
  CLI::Option* iterations;
  CLI::Option* trials;
  CLI::Option* methods;
  CLI::Option* seed;
  CLI::Option* out;
  CLI::Option* trace_every;
  CLI::Option* threads;
};

CliOptions add_flags(CLI::App& cmd, CliFlags& f, const ExperimentSpec& d) {
  auto names = [&] {
    std::string s;
    for (const auto& m : d.methods) s += (s.empty() ? "" : ",") + m.name();
    return s;
  }();
  auto snrs = [&] {
    std::string s;
    for (double v : d.snr_list) {
      s += (s.empty() ? "" : ",") + detail::format_double(v);
    }
    return s;
  }();
  CliOptions o{};
  o.config = cmd.add_option("--config", f.config,
                            "Experiment spec file (flat YAML, see "
                            "configs/default.yaml); flags override it");
  o.snr = cmd.add_option("--snr", f.snr,
                         "SNR in dB of the single trial (default " +
                             detail::format_double(d.snr_db) + ")");
  o.snr_list = cmd.add_option(
      "--snr-list", f.snr_list,
      "Sweep SNRs: start:stop:step or comma list (default " + snrs + ")");
  o.iterations = cmd.add_option(
      "--iterations", f.iterations,
      "ADAM iterations per run (default " +
          std::to_string(d.train.iterations) + ")");
  o.trials = cmd.add_option("--trials", f.trials,
                            "Monte Carlo trials per SNR (default " +
                                std::to_string(d.trials_per_snr) + ")");
  o.methods = cmd.add_option(
      "--methods", f.methods,
      "Comma list of simple, pg_<period>, proposed (default " + names + ")");
  o.seed = cmd.add_option("--seed", f.seed,
                          "Master seed (default " + std::to_string(d.seed) +
                              ")");
  o.out = cmd.add_option("--out", f.out,
                         "Output directory (default current directory)");
  o.trace_every = cmd.add_option(
      "--trace-every", f.trace_every,
      "Trace period in iterations (default " +
          std::to_string(d.train.trace_every) + ")");
  o.threads = cmd.add_option("--threads", f.threads,
                             "Worker threads, 0 = all cores (default 0)");
  return o;
}

ExperimentSpec build_spec(bool sweep, const CliFlags& f, const CliOptions& o) {
  ExperimentSpec spec = sweep ? ExperimentSpec::sweep_defaults()
                              : ExperimentSpec::single_defaults();
  if (o.config->count()) apply_config_file(spec, f.config);
  if (o.snr->count()) spec.snr_db = f.snr;
  if (o.snr_list->count()) spec.snr_list = parse_snr_list(f.snr_list);
  if (o.iterations->count()) spec.train.iterations = f.iterations;
  if (o.trials->count()) spec.trials_per_snr = f.trials;
  if (o.methods->count()) spec.methods = parse_methods(f.methods);
  if (o.seed->count()) spec.seed = f.seed;
  if (o.out->count()) spec.output_dir = f.out;
  if (o.trace_every->count()) spec.train.trace_every = f.trace_every;
  if (o.threads->count()) spec.threads = f.threads;
  spec.validate();
  return spec;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"Joint impairment estimation and symbol detection with a "
               "parametric network"};
  app.name("paramnet");
  app.require_subcommand(1);

  CliFlags single_flags, sweep_flags;
  auto* single = app.add_subcommand(
      "single", "Train every method on one shared trial and write traces");
  auto* sweep = app.add_subcommand(
      "sweep", "Monte Carlo SER-vs-SNR sweep over the selected methods");
  const CliOptions single_opts =
      add_flags(*single, single_flags, ExperimentSpec::single_defaults());
  const CliOptions sweep_opts =
      add_flags(*sweep, sweep_flags, ExperimentSpec::sweep_defaults());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (single->parsed()) {
      const ExperimentSpec spec = build_spec(false, single_flags, single_opts);
      const auto outcomes = run_single_trial(spec);
      for (const auto& o : outcomes) {
        out << o.method.name() << ": final SER "
            << detail::format_double(o.final_ser)
            << (o.diverged ? " (diverged)" : "") << '\n';
      }
    } else {
      const ExperimentSpec spec = build_spec(true, sweep_flags, sweep_opts);
      const SweepResult r = run_monte_carlo(spec);
      out << "snr_db";
      for (const auto& m : r.methods) out << ' ' << m.name();
      out << '\n';
      for (std::size_t s = 0; s < r.snr_db.size(); ++s) {
        out << detail::format_double(r.snr_db[s]);
        for (double v : r.mean_ser[s]) out << ' ' << detail::format_double(v);
        out << '\n';
      }
      if (r.divergent_runs > 0) {
        out << r.divergent_runs << " divergent run(s), scored as SER 1\n";
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::UsageError:
      case ErrorKind::ParseError:
      case ErrorKind::InvalidParameter:
        return 1;
      default:
        return 2;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace paramnet
