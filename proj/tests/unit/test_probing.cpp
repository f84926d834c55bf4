#include <doctest.h>

#include <random>

#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/probing/message_bus.hpp"
#include "gridwatch/probing/probe_trace.hpp"
#include "gridwatch/probing/window.hpp"
#include "support/fixtures.hpp"

using namespace gridwatch;
using namespace gridwatch::probing;
using fixtures::id;
using grid::ProsumerId;

namespace {

constexpr int kL = 30;
constexpr double kTau = 5.0;

// Readings of every line of `target`, sample l of line k given by f(k, l).
template <class F>
std::vector<ProbeSample> readings(const grid::Network& net, ProsumerId target, int k, F f) {
  std::vector<ProbeSample> out;
  for (auto n : net.neighbors(target)) {
    for (int l = 1; l <= kL; ++l) out.push_back({k, target, n, l, f(n, l)});
  }
  return out;
}

dopf::ReferenceSchedule scheduled_refs() {
  return dopf::ReferenceSchedule({{id(1), {23.56, 0}},
                                  {id(2), {49.56, 0}},
                                  {id(3), {39.04, 0}},
                                  {id(4), {-44.0, 0}},
                                  {id(5), {-66.0, 0}}});
}

// Splits `total` unevenly over the four lines of prosumer 2.
double share(ProsumerId n, double total) {
  switch (n.value) {
    case 1: return 0.4 * total;
    case 3: return 0.3 * total;
    case 4: return 0.2 * total;
    default: return 0.1 * total;
  }
}

MeasurementWindow window_for(const std::vector<ProbeSample>& samples, ProsumerId observer,
                             ProsumerId target, int k = 1) {
  MessageBus bus(fixtures::five_bus());
  publish_probes(bus, k, samples);
  bus.deliver(k);
  return collect_window(bus, observer, target, k, kL);
}

}  // namespace

TEST_CASE("routes") {
  MessageBus bus(fixtures::graph(4, {{1, 2}, {2, 3}, {3, 4}, {1, 4}}));
  CHECK(bus.route(id(1), id(1)) == std::vector<ProsumerId>{id(1)});
  CHECK(bus.route(id(1), id(2)) == std::vector<ProsumerId>{id(1), id(2)});
  CHECK(bus.route(id(1), id(3)) == std::vector<ProsumerId>{id(1), id(2), id(3)});
  CHECK(bus.route(id(1), id(3), id(2)) == std::vector<ProsumerId>{id(1), id(4), id(3)});

  MessageBus path(fixtures::graph(4, {{1, 2}, {2, 3}, {3, 4}}));
  CHECK(path.route(id(1), id(3), id(2)) == std::vector<ProsumerId>{id(1), id(2), id(3)});
  CHECK_THROWS_AS(path.route(id(1), id(4)), ValidationError);
}

TEST_CASE("window of observer 3 on prosumer 2 covers every tie line") {
  const auto net = fixtures::five_bus();
  const auto w = window_for(readings(net, id(2), 1, [](ProsumerId n, int) { return share(n, 49.56); }),
                            id(3), id(2));
  CHECK(w.complete());
  REQUIRE(w.lines.size() == 4);
  for (auto n : {1, 3, 4, 5}) {
    REQUIRE(w.lines.count(id(n)) == 1);
    CHECK(w.lines.at(id(n)).size() == static_cast<std::size_t>(kL));
  }
}

TEST_CASE("window preconditions") {
  MessageBus bus(fixtures::five_bus());
  CHECK_THROWS_AS(collect_window(bus, id(1), id(4), 1, kL), ValidationError);
  CHECK_THROWS_AS(collect_window(bus, id(3), id(2), 1, 0), ValidationError);
}

TEST_CASE("a dropped message leaves the window incomplete") {
  const auto net = fixtures::five_bus();
  MessageBus bus(net);
  bus.set_drop_rule([](const Envelope& e, std::size_t) {
    return e.sender == ProsumerId{5} && e.recipient == ProsumerId{3};
  });
  publish_probes(bus, 1, readings(net, id(2), 1, [](ProsumerId n, int) { return share(n, 49.56); }));
  CHECK(bus.deliver(1) == 1);
  try {
    collect_window(bus, id(3), id(2), 1, kL);
    FAIL("expected an incomplete window");
  } catch (const IncompleteWindow& e) {
    CHECK(e.missing_line() == id(5));
    CHECK_FALSE(e.partial().complete());
  }
  CHECK_NOTHROW(collect_window(bus, id(1), id(2), 1, kL));
}

TEST_CASE("energy mismatch examples") {
  const auto net = fixtures::five_bus();
  const auto refs = scheduled_refs();

  SUBCASE("exact delivery") {
    const auto w = window_for(readings(net, id(2), 1, [](ProsumerId n, int) { return share(n, 49.56); }),
                              id(3), id(2));
    CHECK(std::abs(energy_mismatch(w, refs, kTau).d_mw) < 1e-12);
  }
  SUBCASE("fifteen percent above the reference") {
    const auto w = window_for(
        readings(net, id(2), 1, [](ProsumerId n, int) { return share(n, 1.15 * 49.56); }), id(3), id(2));
    const auto r = energy_mismatch(w, refs, kTau);
    CHECK(r.d_mw == doctest::Approx(7.434).epsilon(1e-12));
    CHECK(r.raw_energy == doctest::Approx(7.434 * kTau).epsilon(1e-12));
    CHECK(r.observer == id(3));
    CHECK(r.target == id(2));
  }
  SUBCASE("ten percent under for half the interval") {
    const auto w = window_for(readings(net, id(2), 1,
                                       [](ProsumerId n, int l) {
                                         return share(n, l <= kL / 2 ? 0.9 * 49.56 : 49.56);
                                       }),
                              id(3), id(2));
    CHECK(energy_mismatch(w, refs, kTau).d_mw == doctest::Approx(-2.478).epsilon(1e-12));
  }
}

TEST_CASE("dead zone") {
  CHECK(dead_zone(0.05, 0.1) == 0.0);
  CHECK(dead_zone(7.434, 0.1) == 7.434);
  CHECK(dead_zone(-0.1, 0.1) == 0.0);
  CHECK(dead_zone(0.1, 0.1) == 0.0);
  CHECK(dead_zone(-0.1000001, 0.1) == -0.1000001);
  CHECK_THROWS_AS(dead_zone(1.0, 0.0), ValidationError);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = u(rng);
    CHECK(dead_zone(dead_zone(d, 0.1), 0.1) == dead_zone(d, 0.1));
    CHECK(dead_zone(-d, 0.1) == -dead_zone(d, 0.1));
  }
}

TEST_CASE("mismatch properties on random profiles") {
  const auto net = fixtures::five_bus();
  const auto refs = scheduled_refs();
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::pair<int, int>, double> profile;
    for (auto n : net.neighbors(id(2))) {
      for (int l = 1; l <= kL; ++l) profile[{n.value, l}] = share(n, 49.56) + 3.0 * u(rng);
    }
    const auto base = readings(net, id(2), 1, [&](ProsumerId n, int l) { return profile[{n.value, l}]; });
    const double d0 = energy_mismatch(window_for(base, id(3), id(2)), refs, kTau).d_mw;

    {  // scaling maps d to a (d + p_ref) - p_ref
      const double a = 1.0 + 0.5 * u(rng);
      const auto scaled = readings(net, id(2), 1, [&](ProsumerId n, int l) { return a * profile[{n.value, l}]; });
      const double d1 = energy_mismatch(window_for(scaled, id(3), id(2)), refs, kTau).d_mw;
      CHECK(d1 == doctest::Approx(a * (d0 + 49.56) - 49.56).epsilon(1e-12));
    }
    {  // balanced samples give exactly zero
      // Dyadic readings and reference, so every partial sum is exact.
      const dopf::ReferenceSchedule dyadic({{id(2), {49.5, 0}}});
      std::uniform_int_distribution<int> q(-2560, 2560);
      std::map<std::pair<int, int>, double> exact;
      for (int l = 1; l <= kL; ++l) {
        double rest = 49.5;
        for (int n : {1, 3, 4}) {
          exact[{n, l}] = q(rng) / 256.0;
          rest -= exact[{n, l}];
        }
        exact[{5, l}] = rest;
      }
      const auto balanced = readings(net, id(2), 1, [&](ProsumerId n, int l) { return exact[{n.value, l}]; });
      CHECK(energy_mismatch(window_for(balanced, id(3), id(2)), dyadic, kTau).d_mw == 0.0);
    }
    {  // every observer computes the same d
      for (auto obs : net.neighbors(id(2))) {
        CHECK(energy_mismatch(window_for(base, obs, id(2)), refs, kTau).d_mw == d0);
      }
    }
  }
}

TEST_CASE("probe trace round trip") {
  std::vector<ProbeSample> samples;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int k = 1; k <= 3; ++k) {
    for (int l = 1; l <= 4; ++l) samples.push_back({k, id(2), id(l % 2 ? 1 : 3), l, u(rng)});
  }
  const auto text = format_probe_trace(samples);
  CHECK(text.rfind("interval,from,to,sample_index,power_mw\n", 0) == 0);
  const auto parsed = parse_probe_trace(text);
  REQUIRE(parsed.size() == 3);
  std::vector<ProbeSample> flat;
  for (const auto& [k, v] : parsed) flat.insert(flat.end(), v.begin(), v.end());
  CHECK(flat == samples);
}

TEST_CASE("malformed probe traces name the line") {
  try {
    parse_probe_trace("interval,from,to,sample_index,power_mw\n1,2,3,1,4.5\n1,2,x,1,4.5\n");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.where().rfind("probes:3", 0) == 0);
  }
  CHECK_THROWS_AS(parse_probe_trace("a,b,c\n"), ValidationError);
  CHECK_THROWS_AS(parse_probe_trace("interval,from,to,sample_index,power_mw\n1,2,3\n"), ValidationError);
}
