#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "paramnet/chain.hpp"
#include "paramnet/trainer.hpp"
#include "support.hpp"

using namespace paramnet;
namespace orc = paramnet::oracle;

TEST_CASE("loss examples") {
  const AugmentedVector y(RealVector{1, 2, 3, 4});
  CHECK(loss(y, y, 1.0, 0.001) == doctest::Approx(0.001));
  const AugmentedVector off(RealVector{2, 3, 4, 5});
  CHECK(mean_squared_error(y, off) == 1.0);
  CHECK(loss(y, off, 2.5, 0.0) == 1.0);
  CHECK(loss(y, off, 2.5, 0.001) == doctest::Approx(1.0 + 0.0025));
  const AugmentedVector half(RealVector{1, 2, 3, 6});
  CHECK(mean_squared_error(y, half) == 1.0);  // 4 / 4
  CHECK_THROWS_KIND(loss(y, AugmentedVector(1), 1.0, 0.0),
                    ErrorKind::InvalidLength);
}

TEST_CASE("ADAM") {
  RealVector p{1.0, -2.0, 3.0};
  AdamState s(3);
  adam_step(p, RealVector(3, 0.0), s, 1e-3);
  CHECK(p == RealVector{1.0, -2.0, 3.0});

  RealVector q{0.0, 0.0, 0.0};
  AdamState t(3);
  const RealVector g{0.5, -2e-3, 40.0};
  adam_step(q, g, t, 1e-3);
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = -1e-3 * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(q[i] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(std::abs(std::abs(q[i]) - 1e-3) <= 1e-8);
  }
  CHECK(t.step == 1);

  RealVector a{1, 2}, b{1, 2};
  AdamState sa(2), sb(2);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    const auto gr = orc::normal_vector(2, rng);
    adam_step(a, gr, sa, 1e-2);
    adam_step(b, gr, sb, 1e-2);
  }
  CHECK(a == b);
  CHECK(sa.step == 50);

  CHECK_THROWS_KIND(adam_step(a, RealVector(3, 0.0), sa, 1e-3),
                    ErrorKind::InvalidLength);
  AdamState wrong(5);
  CHECK_THROWS_KIND(adam_step(a, RealVector(2, 0.0), wrong, 1e-3),
                    ErrorKind::InvalidLength);
}

TEST_CASE("a constant positive gradient drives sigma down to the floor") {
  // the regularizer alone: gradient lambda on the sigma coordinate
  RealVector sigma{1.0};
  AdamState s(1);
  const RealVector g{1e-3};
  double prev = sigma[0];
  bool hit_floor = false;
  for (int k = 0; k < 3000; ++k) {
    adam_step(sigma, g, s, 1e-3);
    sigma[0] = std::max(sigma[0], 1e-6);
    if (prev > 1e-6) {
      CHECK(sigma[0] < prev);
    } else {
      CHECK(sigma[0] == 1e-6);
      hit_floor = true;
    }
    prev = sigma[0];
  }
  CHECK(hit_floor);
}

TEST_CASE("method names") {
  CHECK(Method::parse("simple") == Method::simple());
  CHECK(Method::parse("Proposed") == Method::proposed());
  CHECK(Method::parse("pg_500") == Method::projected_gradient(500));
  CHECK(Method::parse("PG_2000").name() == "pg_2000");
  CHECK_THROWS_KIND(Method::parse("newton"), ErrorKind::UsageError);
  CHECK_THROWS_KIND(Method::parse("pg_"), ErrorKind::UsageError);
  CHECK_THROWS_KIND(Method::parse("pg_0"), ErrorKind::UsageError);

  std::vector<std::string> names;
  for (const auto& m : Method::all_standard()) names.push_back(m.name());
  CHECK(names == std::vector<std::string>{"simple", "pg_500", "pg_1000",
                                          "pg_2000", "proposed"});
  CHECK(Method::simple().architecture() == Architecture::Linear);
  CHECK(Method::projected_gradient(5).architecture() == Architecture::Linear);
  CHECK(Method::proposed().architecture() == Architecture::SoftThreshold);
}

TEST_CASE("projection schedule") {
  CHECK(projection_count(Method::projected_gradient(500), 10000) == 20);
  CHECK(projection_count(Method::projected_gradient(2000), 10000) == 5);
  CHECK(projection_count(Method::proposed(), 10000) == 0);
  CHECK(projection_count(Method::simple(), 10000) == 0);
}

TEST_CASE("detect_symbols") {
  const auto q = Constellation::qam16();
  NetworkParams p;
  p.u = {0.7, -2.6};
  CHECK(detect_symbols(p, q) == ComplexVector{{1, -3}});
  p.u = RealVector(6, 0.0);
  CHECK(detect_symbols(p, q) == ComplexVector(3, Complex(-1, -1)));
  p.u = {3, -1, 1, -3};
  CHECK(detect_symbols(p, q) == ComplexVector{{3, 1}, {-1, -3}});
}

TEST_CASE("initial parameters") {
  const ChainConfig chain;
  const auto trial = simulate_trial(chain, 20.0, 3);
  TrainConfig cfg;
  const auto observed = initial_params(trial, cfg);
  CHECK(observed.scalar_count(Architecture::SoftThreshold) == 399);
  for (std::size_t k = 0; k < 180; ++k) {
    const auto n = trial.pattern.data_indices[k];
    CHECK(observed.u[k] == trial.y.re(n));
    CHECK(observed.u[k + 180] == trial.y.im(n));
  }
  cfg.u_init = UInit::Zeros;
  CHECK(initial_params(trial, cfg).u == RealVector(360, 0.0));
}

TEST_CASE("training config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0;
  CHECK_THROWS_KIND(c.validate(), ErrorKind::InvalidParameter);
  c = TrainConfig{};
  c.lambda = -1;
  CHECK_THROWS_KIND(c.validate(), ErrorKind::InvalidParameter);
  c = TrainConfig{};
  c.iterations = 0;
  CHECK_THROWS_KIND(c.validate(), ErrorKind::InvalidParameter);
}

TEST_CASE("objective gradient") {
  const ChainConfig chain;
  const auto& m = chain.constellation;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> var(0.05, 1.5);

  for (int rep = 0; rep < 20; ++rep) {
    const auto trial = simulate_trial(chain, 15.0, 100 + rep);
    auto p = orc::random_params(trial.pattern, rng, 0.2);
    for (auto& v : p.u) v *= 0.3;
    p.sigma_s_sq = var(rng);
    for (auto arch : {Architecture::SoftThreshold, Architecture::Linear}) {
      const Objective obj(trial, m, arch, 1e-3);
      const auto an = obj.value_and_gradient(p).gradient.flatten(arch);
      auto f = [&](const std::vector<double>& flat) {
        auto r = p;
        r.unflatten(flat, arch);
        return obj.value(r).loss;
      };
      CHECK(orc::worst_fd_error(f, p.flatten(arch), an) <= 1e-4);
    }
  }

  // lambda adds exactly lambda to the sigma coordinate and nothing elsewhere
  const auto trial = simulate_trial(chain, 15.0, 5);
  const auto p = orc::random_params(trial.pattern, rng, 0.2);
  const Objective with(trial, m, Architecture::SoftThreshold, 0.25);
  const Objective without(trial, m, Architecture::SoftThreshold, 0.0);
  const auto gw = with.value_and_gradient(p).gradient;
  const auto g0 = without.value_and_gradient(p).gradient;
  CHECK(gw.sigma_s_sq - g0.sigma_s_sq == doctest::Approx(0.25).epsilon(1e-12));
  auto gw_rest = gw, g0_rest = g0;
  gw_rest.sigma_s_sq = g0_rest.sigma_s_sq = 0.0;
  CHECK(gw_rest == g0_rest);

  // the linear architecture ignores lambda
  const Objective lin(trial, m, Architecture::Linear, 0.25);
  const Objective lin0(trial, m, Architecture::Linear, 0.0);
  CHECK(lin.value(p).loss == lin0.value(p).loss);
}

TEST_CASE("training") {
  const ChainConfig chain;
  const auto& m = chain.constellation;
  const auto trial = simulate_trial(chain, 20.0, 17);

  TrainConfig cfg;
  cfg.iterations = 250;
  cfg.trace_every = 100;

  SUBCASE("trace rows and bit-reproducibility") {
    const auto a = train(trial, cfg, m);
    const auto b = train(trial, cfg, m);
    CHECK(a.params == b.params);
    CHECK(a.trace == b.trace);
    REQUIRE(a.trace.rows.size() == 3);
    CHECK(a.trace.rows[0].iteration == 100);
    CHECK(a.trace.rows[1].iteration == 200);
    CHECK(a.trace.rows[2].iteration == 250);
    for (const auto& r : a.trace.rows) {
      CHECK(r.mse >= 0.0);
      CHECK(r.ser >= 0.0);
      CHECK(r.ser <= 1.0);
    }

    std::ostringstream os;
    a.trace.write_csv(os);
    const auto csv = os.str();
    CHECK(csv.rfind("iteration,sigma_s_sq,mse,ser\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  }

  SUBCASE("linear methods keep sigma fixed") {
    for (auto method : {Method::simple(), Method::projected_gradient(50)}) {
      cfg.method = method;
      const auto r = train(trial, cfg, m);
      for (const auto& row : r.trace.rows) CHECK(row.sigma_s_sq == 1.0);
      CHECK(r.params.sigma_s_sq == 1.0);
    }
  }

  SUBCASE("projected gradient leaves u on the grid after a projection") {
    cfg.method = Method::projected_gradient(50);
    cfg.iterations = 200;
    const auto on = train(trial, cfg, m);
    CHECK(std::all_of(on.params.u.begin(), on.params.u.end(),
                      [&](double v) { return m.contains(v); }));
    cfg.iterations = 201;
    const auto off = train(trial, cfg, m);
    CHECK(!std::all_of(off.params.u.begin(), off.params.u.end(),
                       [&](double v) { return m.contains(v); }));
  }

  SUBCASE("single iteration gives a single row") {
    cfg.iterations = 1;
    const auto r = train(trial, cfg, m);
    REQUIRE(r.trace.rows.size() == 1);
    CHECK(r.trace.rows[0].iteration == 1);
  }

  SUBCASE("divergence is reported with the partial trace") {
    cfg.method = Method::simple();
    cfg.learning_rate = 1e300;
    cfg.trace_every = 1;
    bool caught = false;
    try {
      train(trial, cfg, m);
    } catch (const DivergenceError& e) {
      caught = true;
      CHECK(e.kind() == ErrorKind::DivergenceDetected);
      CHECK(e.iteration() >= 1);
      CHECK(e.trace().rows.size() < e.iteration());
    }
    CHECK(caught);
  }
}

TEST_CASE("noiseless transparent chain is learned exactly") {
  const auto chain = ChainConfig::transparent();
  const auto trial = simulate_trial_with_noise(chain, 0.0, 3);
  TrainConfig cfg;
  cfg.iterations = 2000;
  CHECK(train(trial, cfg, chain.constellation).trace.rows.back().ser == 0.0);

  // starting from u = 0 works too, it just needs a longer run
  cfg.u_init = UInit::Zeros;
  cfg.iterations = 6000;
  CHECK(train(trial, cfg, chain.constellation).trace.rows.back().ser == 0.0);
}
