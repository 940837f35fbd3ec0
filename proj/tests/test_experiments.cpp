#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "paramnet/experiments.hpp"
#include "support.hpp"

using namespace paramnet;
using paramnet::test::scratch_dir;
using paramnet::test::slurp;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "paramnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

ExperimentSpec tiny_spec(const std::filesystem::path& dir) {
  auto spec = ExperimentSpec::sweep_defaults();
  spec.train.iterations = 30;
  spec.train.trace_every = 10;
  spec.snr_list = {10, 20};
  spec.trials_per_snr = 2;
  spec.output_dir = dir;
  return spec;
}

}  // namespace

TEST_CASE("defaults") {
  const auto single = ExperimentSpec::single_defaults();
  CHECK(single.train.iterations == 20000);
  CHECK(single.snr_db == 20.0);
  CHECK(single.methods ==
        std::vector<Method>{Method::simple(), Method::proposed()});
  const auto sweep = ExperimentSpec::sweep_defaults();
  CHECK(sweep.train.iterations == 10000);
  CHECK(sweep.snr_list == std::vector<double>{0, 5, 10, 15, 20, 25});
  CHECK(sweep.methods == Method::all_standard());
  CHECK(sweep.train.lambda == 1e-3);
  CHECK(sweep.train.learning_rate == 1e-3);
  CHECK(sweep.chain == ChainConfig{});
}

TEST_CASE("SNR list and method parsing") {
  CHECK(parse_snr_list("0:25:5") == std::vector<double>{0, 5, 10, 15, 20, 25});
  CHECK(parse_snr_list("5:20:5") == std::vector<double>{5, 10, 15, 20});
  CHECK(parse_snr_list("3") == std::vector<double>{3});
  CHECK(parse_snr_list("5,12.5,-1") == std::vector<double>{5, 12.5, -1});
  for (const char* bad : {"", "a", "0:10", "10:0:5", "0:10:0", "1,x"}) {
    CHECK_THROWS_KIND(parse_snr_list(bad), ErrorKind::UsageError);
  }

  CHECK(parse_methods("proposed,pg_1000") ==
        std::vector<Method>{Method::proposed(), Method::projected_gradient(1000)});
  CHECK_THROWS_KIND(parse_methods("proposed,gauss"), ErrorKind::UsageError);
  CHECK_THROWS_KIND(parse_methods(""), ErrorKind::UsageError);
}

TEST_CASE("config text") {
  auto spec = ExperimentSpec::sweep_defaults();
  apply_config_text(spec,
                    "n_symbols: 100\n"
                    "iq_tx_mu: [1.5, -0.5]\n"
                    "fir_taps: [[1, 0], [0.5, 0.25]]\n"
                    "constellation: [-1, 1]\n"
                    "snr_reference: receiver_power\n"
                    "iterations: 77\n"
                    "u_init: zeros\n"
                    "snr_list: \"0:10:5\"\n"
                    "methods: simple,pg_7\n"
                    "seed: 18446744073709551615\n");
  CHECK(spec.chain.n_symbols == 100);
  CHECK(spec.chain.iq_tx.mu == Complex(1.5, -0.5));
  CHECK(spec.chain.fir_taps == ComplexVector{{1, 0}, {0.5, 0.25}});
  CHECK(spec.chain.constellation == Constellation({-1, 1}));
  CHECK(spec.chain.snr_reference == SnrReference::ReceiverPower);
  CHECK(spec.train.iterations == 77);
  CHECK(spec.train.u_init == UInit::Zeros);
  CHECK(spec.snr_list == std::vector<double>{0, 5, 10});
  CHECK(spec.methods ==
        std::vector<Method>{Method::simple(), Method::projected_gradient(7)});
  CHECK(spec.seed == 18446744073709551615ULL);

  auto message_of = [](const std::string& text) {
    auto s = ExperimentSpec::sweep_defaults();
    try {
      apply_config_text(s, text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ParseError);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message_of("seed: 1\nbogus_key: 3\n").find("line 2") !=
        std::string::npos);
  CHECK(message_of("seed: 1\nfir_taps: [1, 2\n").find("line") !=
        std::string::npos);
  CHECK(message_of("seed: 1\n\niq_rx_nu: 4\n").find("line 3") !=
        std::string::npos);
  CHECK(message_of("methods: [simple, magic]\n").find("line 1") !=
        std::string::npos);
  CHECK(message_of("u_init: random\n").find("line 1") != std::string::npos);
  CHECK(message_of("- a\n- b\n").find("line 1") != std::string::npos);
  CHECK(message_of("trials: -4\n").find("line 1") != std::string::npos);

  auto untouched = ExperimentSpec::sweep_defaults();
  apply_config_text(untouched, "");
  CHECK(untouched.chain == ChainConfig{});
}

TEST_CASE("example config reproduces the defaults") {
  const std::filesystem::path file =
      std::filesystem::path(PARAMNET_SOURCE_DIR) / "configs" / "default.yaml";
  for (auto spec : {ExperimentSpec::single_defaults(),
                    ExperimentSpec::sweep_defaults()}) {
    const auto before = spec;
    apply_config_file(spec, file);
    CHECK(spec.chain == before.chain);
    CHECK(spec.train.iterations == before.train.iterations);
    CHECK(spec.train.lambda == before.train.lambda);
    CHECK(spec.train.learning_rate == before.train.learning_rate);
    CHECK(spec.train.trace_every == before.train.trace_every);
    CHECK(spec.train.u_init == before.train.u_init);
    CHECK(spec.snr_list == ExperimentSpec::sweep_defaults().snr_list);
    CHECK(spec.trials_per_snr == 100);
    CHECK(spec.seed == 1);
  }
  auto spec = ExperimentSpec::sweep_defaults();
  CHECK_THROWS_KIND(apply_config_file(spec, "/nonexistent/paramnet.yaml"),
                    ErrorKind::IoError);
}

TEST_CASE("trial seeds") {
  CHECK(trial_seed(1, 0, 0) == trial_seed(1, 0, 0));
  CHECK(trial_seed(1, 0, 1) != trial_seed(1, 0, 0));
  CHECK(trial_seed(1, 1, 0) != trial_seed(1, 0, 1));
  CHECK(trial_seed(2, 0, 0) != trial_seed(1, 0, 0));
}

TEST_CASE("single trial outputs") {
  const auto dir = scratch_dir("single");
  auto spec = ExperimentSpec::single_defaults();
  spec.train.iterations = 30;
  spec.train.trace_every = 10;
  spec.output_dir = dir / "a";
  const auto outcomes = run_single_trial(spec);
  REQUIRE(outcomes.size() == 2);

  const auto simple = slurp(dir / "a" / "single_simple.csv");
  const auto proposed = slurp(dir / "a" / "single_proposed.csv");
  CHECK(first_line(simple) == "iteration,sigma_s_sq,mse,ser");
  CHECK(first_line(proposed) == "iteration,sigma_s_sq,mse,ser");
  CHECK(count_lines(proposed) == 4);
  CHECK(first_line(slurp(dir / "a" / "single_status.csv")) ==
        "method,status,final_ser,iterations_completed");
  CHECK(outcomes[1].final_ser == outcomes[1].trace.rows.back().ser);
  CHECK(outcomes[1].iterations_completed == 30);

  spec.output_dir = dir / "b";
  run_single_trial(spec);
  for (const char* f : {"single_simple.csv", "single_proposed.csv",
                        "single_status.csv"}) {
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
  }

  spec.train.iterations = 1;
  spec.output_dir = dir / "c";
  run_single_trial(spec);
  CHECK(count_lines(slurp(dir / "c" / "single_proposed.csv")) == 2);
}

TEST_CASE("sweep outputs") {
  const auto dir = scratch_dir("sweep");
  auto spec = tiny_spec(dir / "a");
  spec.threads = 1;
  const auto r = run_monte_carlo(spec);
  REQUIRE(r.mean_ser.size() == 2);
  for (const auto& row : r.mean_ser) {
    REQUIRE(row.size() == 5);
    for (double v : row) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  const auto csv = slurp(dir / "a" / "ser_vs_snr.csv");
  CHECK(first_line(csv) == "snr_db,simple,pg_500,pg_1000,pg_2000,proposed");
  CHECK(count_lines(csv) == 3);
  const auto trials = slurp(dir / "a" / "ser_vs_snr_trials.csv");
  CHECK(first_line(trials) == "snr_db,trial,method,ser,status");
  CHECK(count_lines(trials) == 1 + 2 * 2 * 5);

  // worker count never changes the bytes
  spec.threads = 4;
  spec.output_dir = dir / "b";
  run_monte_carlo(spec);
  CHECK(slurp(dir / "b" / "ser_vs_snr.csv") == csv);
  CHECK(slurp(dir / "b" / "ser_vs_snr_trials.csv") == trials);

  spec.snr_list.clear();
  CHECK_THROWS_KIND(run_monte_carlo(spec), ErrorKind::UsageError);
}

TEST_CASE("one trial per SNR reports that trial's SER") {
  const auto dir = scratch_dir("one_trial");
  auto spec = tiny_spec(dir);
  spec.trials_per_snr = 1;
  spec.snr_list = {15};
  spec.methods = {Method::proposed(), Method::simple()};
  const auto r = run_monte_carlo(spec);

  const auto data = simulate_trial_with_noise(
      spec.chain, noise_var_for_snr(spec.chain, 15), trial_seed(spec.seed, 0, 0));
  for (std::size_t m = 0; m < 2; ++m) {
    auto cfg = spec.train;
    cfg.method = spec.methods[m];
    const auto t = train(data, cfg, spec.chain.constellation);
    CHECK(r.mean_ser[0][m] == t.trace.rows.back().ser);
  }
}

TEST_CASE("noiseless sweep is error free") {
  const auto dir = scratch_dir("noiseless");
  auto spec = tiny_spec(dir);
  spec.chain = ChainConfig::transparent();
  spec.snr_list = {400};
  spec.train.iterations = 2000;
  spec.train.trace_every = 1000;
  const auto r = run_monte_carlo(spec);
  for (double v : r.mean_ser[0]) CHECK(v == 0.0);
  CHECK(r.divergent_runs == 0);
}

TEST_CASE("command line") {
  const auto dir = scratch_dir("cli");

  const auto help = run_cli({"sweep", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--snr-list") != std::string::npos);
  CHECK(help.out.find("10000") != std::string::npos);
  CHECK(run_cli({"single", "--help"}).out.find("20000") != std::string::npos);

  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"dance"}).code == 1);
  CHECK(run_cli({"sweep", "--trials", "many"}).code == 1);

  const auto unknown = run_cli({"single", "--methods", "proposed,quantum",
                                "--out", (dir / "x").string()});
  CHECK(unknown.code == 1);
  CHECK(unknown.err.find("quantum") != std::string::npos);

  {
    std::ofstream(dir / "bad.yaml") << "seed: 3\nfir_taps: [[1, 0], [2]]\n";
    const auto bad = run_cli({"single", "--config", (dir / "bad.yaml").string(),
                              "--out", (dir / "x").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("line 2") != std::string::npos);
  }

  const auto unwritable =
      run_cli({"single", "--iterations", "2", "--out", "/proc/paramnet_denied"});
  CHECK(unwritable.code == 2);

  // flags override the config file
  std::ofstream(dir / "short.yaml") << "iterations: 9\ntrace_every: 2\n";
  const auto ok = run_cli({"single", "--config", (dir / "short.yaml").string(),
                           "--iterations", "5", "--out", (dir / "o").string()});
  REQUIRE(ok.code == 0);
  const auto trace = slurp(dir / "o" / "single_proposed.csv");
  CHECK(count_lines(trace) == 4);  // header + 2, 4, 5
  CHECK(trace.find("\n5,") != std::string::npos);

  // repeated invocations are byte-identical
  for (const char* sub : {"a", "b"}) {
    const auto r = run_cli({"sweep", "--snr-list", "0:20:10", "--trials", "2",
                            "--iterations", "40", "--seed", "7",
                            "--methods", "simple,pg_20,proposed",
                            "--out", (dir / sub).string()});
    REQUIRE(r.code == 0);
  }
  CHECK(slurp(dir / "a" / "ser_vs_snr.csv") == slurp(dir / "b" / "ser_vs_snr.csv"));
  CHECK(first_line(slurp(dir / "a" / "ser_vs_snr.csv")) ==
        "snr_db,simple,pg_20,proposed");
}
