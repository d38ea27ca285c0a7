#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mvtpp/hawkes.hpp"
#include "support.hpp"

using namespace mvtpp;

TEST_CASE("presets return the published matrices") {
  const HawkesParams ind = hawkes_preset("hawkes_ind");
  CHECK(ind.mu == std::vector<double>{0.1, 0.05});
  CHECK(ind.alpha[0][0] == 0.2);
  CHECK(ind.alpha[0][1] == 0.0);
  CHECK(ind.alpha[1][1] == 0.4);
  CHECK(ind.beta[1][1] == 2.0);

  const HawkesParams dep2 = hawkes_preset("hawkes_dep2");
  CHECK(dep2.mu == std::vector<double>{0.713, 0.057, 0.844, 0.254, 0.344});
  CHECK(dep2.beta[4][2] == 8.718);
  CHECK(dep2.alpha[1][1] == 0.0);

  CHECK_THROWS_AS(hawkes_preset("nope"), ValidationError);
}

TEST_CASE("params json round trip") {
  HawkesParams p = hawkes_preset("hawkes_dep1");
  p.kernel = HawkesKernel::Alpha;
  const HawkesParams q = hawkes_params_from_json(hawkes_params_to_json(p));
  CHECK(q.mu == p.mu);
  CHECK(q.alpha == p.alpha);
  CHECK(q.beta == p.beta);
  CHECK(q.kernel == HawkesKernel::Alpha);
}

TEST_CASE("intensity substitution on the independent preset") {
  const HawkesParams p = hawkes_preset("hawkes_ind");
  EventSequence empty;
  empty.t_start = 0;
  empty.t_end = 100;
  CHECK(intensity_at(p, empty, 3.0) == std::vector<double>{0.1, 0.05});

  EventSequence one = empty;
  one.arrival_times = {0.0};
  one.marks = {0};
  const std::vector<double> at0 = intensity_at(p, one, 0.0);
  CHECK(at0[0] == doctest::Approx(0.3));
  CHECK(at0[1] == doctest::Approx(0.05));
  const std::vector<double> at_ln2 = intensity_at(p, one, std::log(2.0));
  CHECK(at_ln2[0] == doctest::Approx(0.2));

  CHECK_THROWS_AS(intensity_at(p, one, -1.0), ValidationError);
}

TEST_CASE("intensity decays monotonically toward mu between events") {
  const HawkesParams p = hawkes_preset("hawkes_dep1");
  EventSequence seq;
  seq.t_start = 0;
  seq.t_end = 100;
  seq.arrival_times = {1.0, 2.0};
  seq.marks = {0, 1};
  double prev0 = std::numeric_limits<double>::infinity();
  for (double t = 2.0; t < 12.0; t += 0.25) {
    const std::vector<double> lam = intensity_at(p, seq, t);
    CHECK(lam[0] <= prev0 + 1e-12);
    CHECK(lam[0] >= p.mu[0]);
    prev0 = lam[0];
  }
}

TEST_CASE("stationary rates solve the branching fixed point") {
  SUBCASE("alpha = 0 gives mu") {
    HawkesParams p;
    p.mu = {2.0, 3.0};
    p.alpha = {{0.0, 0.0}, {0.0, 0.0}};
    p.beta = {{1.0, 1.0}, {1.0, 1.0}};
    const std::vector<double> r = stationary_rate(p);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(3.0));
  }
  SUBCASE("independent preset") {
    const std::vector<double> r = stationary_rate(hawkes_preset("hawkes_ind"));
    CHECK(r[0] == doctest::Approx(0.125).epsilon(1e-9));
    CHECK(r[1] == doctest::Approx(0.0833333333).epsilon(1e-6));
  }
  SUBCASE("dependent preset I") {
    const std::vector<double> r = stationary_rate(hawkes_preset("hawkes_dep1"));
    CHECK(r[0] == doctest::Approx(0.1388888889).epsilon(1e-6));
    CHECK(r[1] == doctest::Approx(0.1111111111).epsilon(1e-6));
  }
  SUBCASE("dep2 is explosive under the alpha-beta kernel but stationary without the prefactor") {
    HawkesParams p = hawkes_preset("hawkes_dep2");
    CHECK(spectral_radius(p.branching()) > 1.0);
    CHECK_THROWS_AS(stationary_rate(p), NumericalError);
    p.kernel = HawkesKernel::Alpha;
    CHECK(spectral_radius(p.branching()) < 1.0);
    CHECK_NOTHROW(stationary_rate(p));
  }
}

TEST_CASE("simulation is deterministic per seed") {
  const HawkesParams p = hawkes_preset("hawkes_dep1");
  const EventSequence a = simulate_hawkes(p, 100.0, 7);
  const EventSequence b = simulate_hawkes(p, 100.0, 7);
  const EventSequence c = simulate_hawkes(p, 100.0, 8);
  CHECK(a.arrival_times == b.arrival_times);
  CHECK(a.marks == b.marks);
  CHECK(a.arrival_times != c.arrival_times);
  CHECK_NOTHROW(a.validate(p.num_marks()));
}

TEST_CASE("poisson special case: mean count and KS on inter-event times") {
  HawkesParams p;
  p.mu = {2.0};
  p.alpha = {{0.0}};
  p.beta = {{1.0}};

  double total = 0.0;
  std::vector<double> gaps;
  for (int seed = 0; seed < 2000; ++seed) {
    const EventSequence seq = simulate_hawkes(p, 100.0, static_cast<std::uint64_t>(seed));
    total += static_cast<double>(seq.size());
    double prev = 0.0;
    for (double t : seq.arrival_times) {
      gaps.push_back(t - prev);
      prev = t;
    }
  }
  const double mean_count = total / 2000.0;
  CHECK(mean_count > 190.0);
  CHECK(mean_count < 210.0);

  // KS against Exp(2) at significance 0.01 on 10^4 draws
  gaps.resize(10000);
  const double d = testsupport::ks_statistic(gaps, [](double x) { return 1.0 - std::exp(-2.0 * x); });
  CHECK(d < 1.628 / std::sqrt(10000.0));
}

TEST_CASE("empirical rates converge to the stationary oracle") {
  auto empirical_rates = [](const HawkesParams& p, int num_seq, double t_end) {
    std::vector<double> counts(static_cast<std::size_t>(p.num_marks()), 0.0);
    for (int i = 0; i < num_seq; ++i) {
      const EventSequence seq =
          simulate_hawkes_dataset(p, 1, t_end, static_cast<std::uint64_t>(i)).sequences[0];
      for (int m : seq.marks) counts[static_cast<std::size_t>(m)] += 1.0;
    }
    for (double& c : counts) c /= static_cast<double>(num_seq) * t_end;
    return counts;
  };

  SUBCASE("independent preset, published kernel") {
    const HawkesParams p = hawkes_preset("hawkes_ind");
    const std::vector<double> rates = empirical_rates(p, 400, 500.0);
    const std::vector<double> expected = stationary_rate(p);
    for (std::size_t k = 0; k < rates.size(); ++k)
      CHECK(rates[k] == doctest::Approx(expected[k]).epsilon(0.05));
  }
  SUBCASE("dependent preset I") {
    const HawkesParams p = hawkes_preset("hawkes_dep1");
    const std::vector<double> rates = empirical_rates(p, 400, 500.0);
    const std::vector<double> expected = stationary_rate(p);
    for (std::size_t k = 0; k < rates.size(); ++k)
      CHECK(rates[k] == doctest::Approx(expected[k]).epsilon(0.05));
  }
  SUBCASE("dependent preset II, data kernel") {
    HawkesParams p = hawkes_preset("hawkes_dep2");
    p.kernel = HawkesKernel::Alpha;
    const std::vector<double> rates = empirical_rates(p, 40, 200.0);
    const std::vector<double> expected = stationary_rate(p);
    for (std::size_t k = 0; k < rates.size(); ++k)
      CHECK(rates[k] == doctest::Approx(expected[k]).epsilon(0.05));
  }
}

TEST_CASE("runaway cascades hit the event cap with a diagnostic") {
  HawkesParams p;
  p.mu = {1.0};
  p.alpha = {{1.1}};  // supercritical
  p.beta = {{1.0}};
  SimOptions opts;
  opts.max_events = 500;
  CHECK_THROWS_AS(simulate_hawkes(p, 1e7, 1, opts), NumericalError);
}
