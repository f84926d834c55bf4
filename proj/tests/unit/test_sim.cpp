#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gridwatch/common/error.hpp"
#include "gridwatch/probing/window.hpp"
#include "gridwatch/sim/scenario.hpp"
#include "gridwatch/sim/simulation.hpp"
#include "gridwatch/sim/trace_io.hpp"
#include "oracles/recursion_oracle.hpp"
#include "support/fixtures.hpp"

using namespace gridwatch;
using namespace gridwatch::sim;
using fixtures::id;
using grid::ProsumerId;

namespace {

Scenario scenario(const std::string& name) { return load_scenario(fixtures::data("scenarios/" + name)); }

const char* kMinimal = R"({
  "sim": { "K": 3, "tau_min": 5 },
  "detector": { "n0": 3, "a": 1, "eps_dz_mw": 0.1 },
  "penalty": { "c": 1.06, "c_th": 1300 },
  "reference": { "mode": "fixed", "values": { "1": 23.56, "2": 49.56, "3": 39.04, "4": -44, "5": -66 } },
  "injections": []
})";

// Per-sample sum of the readings prosumer `id` reports on its lines.
double line_sum(const std::vector<probing::ProbeSample>& samples, ProsumerId from, int sample) {
  double s = 0.0;
  for (const auto& p : samples) {
    if (p.from == from && p.sample_index == sample) s += p.power_mw;
  }
  return s;
}

std::vector<const PairRow*> pair_rows(const SimTrace& t, int observer, int target) {
  std::vector<const PairRow*> out;
  for (const auto& r : t.pairs) {
    if (r.observer == id(observer) && r.target == id(target)) out.push_back(&r);
  }
  return out;
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("scenario B parses") {
  const auto scn = scenario("scenario_b.json");
  CHECK(scn.horizon == 24);
  CHECK(scn.tau_min == 5.0);
  CHECK(scn.samples == 30);
  CHECK(scn.detector.n0 == 3.0);
  CHECK(scn.detector.eps_dz == 0.1);
  CHECK(scn.penalty.c == 1.06);
  CHECK(scn.penalty.c_th == 1300.0);
  CHECK(scn.penalty.vote_ratio == 0.5);
  CHECK(scn.reference.values.at(id(2)) == 49.56);
  CHECK(scn.reference.post_isolation_values.at(id(1)) == 83.01);
  REQUIRE(scn.injections.size() == 2);
  CHECK(scn.injections[0].active(4));
  CHECK_FALSE(scn.injections[0].active(5));
  CHECK(scn.injections[1].active(8));
  CHECK(scn.injections[1].active(1000));
  CHECK_NOTHROW(validate_against(scn, fixtures::five_bus()));
}

TEST_CASE("scenario defaults and errors") {
  const auto scn = parse_scenario(kMinimal);
  CHECK(scn.samples == 30);
  CHECK(scn.penalty.vote_ratio == 0.5);
  CHECK(scn.injections.empty());
  CHECK(scn.seed == 0);

  const auto expect_where = [](const std::string& text, const std::string& where) {
    try {
      parse_scenario(text);
      FAIL("expected a validation error");
    } catch (const ValidationError& e) {
      CHECK(e.where() == where);
    }
  };
  std::string bad = kMinimal;
  bad.replace(bad.find("\"injections\": []"), 16,
              R"("injections": [ { "target": 2, "start_k": 5, "end_k": 5, "mode": "scale", "magnitude": 1.1 } ])");
  expect_where(bad, "injections[0].end_k");

  bad = kMinimal;
  bad.replace(bad.find("\"K\": 3"), 6, "\"K\": 0");
  expect_where(bad, "sim.K");

  bad = kMinimal;
  bad.replace(bad.find("\"fixed\""), 7, "\"guess\"");
  CHECK_THROWS_AS(parse_scenario(bad), ValidationError);

  CHECK_THROWS_AS(parse_scenario("{"), ValidationError);
  CHECK_THROWS_AS(load_scenario(fixtures::data("scenarios/none.json")), ValidationError);
}

TEST_CASE("scenario checked against the network") {
  const auto net = fixtures::five_bus();
  auto scn = parse_scenario(kMinimal);
  scn.injections.push_back({id(9), 1, std::nullopt, AnomalyInjection::Mode::kScale, 1.1});
  try {
    validate_against(scn, net);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.where() == "injections[0].target");
  }

  scn = parse_scenario(kMinimal);
  scn.reference.values.erase(id(4));
  try {
    validate_against(scn, net);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.where() == "reference.values.4");
  }
}

TEST_CASE("actual power follows the injections") {
  const auto scn = scenario("scenario_b.json");
  const auto refs = dopf::fixed_reference(fixtures::five_bus(), scn.reference.values);
  CHECK(actual_power(scn, refs, id(2), 3) == 49.56);
  CHECK(actual_power(scn, refs, id(2), 4) == doctest::Approx(56.994).epsilon(1e-14));
  CHECK(actual_power(scn, refs, id(2), 5) == 49.56);
  CHECK(actual_power(scn, refs, id(2), 8) == doctest::Approx(44.604).epsilon(1e-14));
  CHECK(actual_power(scn, refs, id(3), 8) == 39.04);

  AnomalyInjection offset{id(4), 1, std::nullopt, AnomalyInjection::Mode::kOffset, -3.0};
  CHECK(offset.apply(-44.0) == -47.0);
}

TEST_CASE("synthesized probes sum to the actual power") {
  const auto scn = scenario("scenario_b.json");
  const auto net = fixtures::five_bus();
  const auto refs = dopf::fixed_reference(net, scn.reference.values);
  for (auto split : {LineSplit::kAdmittance, LineSplit::kDc}) {
    for (int k : {1, 4, 8}) {
      const auto samples = synthesize_probes(scn, net, refs, k, split);
      CHECK(samples.size() == 7u * 2u * 30u);
      for (const auto& p : net.prosumers()) {
        for (int l : {1, 30}) {
          CHECK(line_sum(samples, p.id, l) ==
                doctest::Approx(actual_power(scn, refs, p.id, k)).epsilon(1e-12));
        }
      }
    }
  }
  const auto k8 = synthesize_probes(scn, net, refs, 8, LineSplit::kAdmittance);
  CHECK(line_sum(k8, id(2), 7) == doctest::Approx(44.604).epsilon(1e-12));
}

TEST_CASE("synthesized probes give the expected mismatch") {
  const auto scn = scenario("scenario_b.json");
  const auto net = fixtures::five_bus();
  const auto refs = dopf::fixed_reference(net, scn.reference.values);
  for (auto [k, expected] : std::vector<std::pair<int, double>>{{3, 0.0}, {4, 7.434}, {8, -4.956}}) {
    probing::MessageBus bus(net);
    probing::publish_probes(bus, k, synthesize_probes(scn, net, refs, k, LineSplit::kAdmittance));
    bus.deliver(k);
    const auto r = probing::energy_mismatch(probing::collect_window(bus, id(3), id(2), k, 30), refs, 5.0);
    CHECK(r.d_mw == doctest::Approx(expected).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("quiescent run stays silent") {
  const auto trace = run_scenario(scenario("quiescent.json"), fixtures::five_bus());
  CHECK(trace.intervals_run == 24);
  CHECK(trace.pairs.size() == 24u * 14u);
  CHECK(trace.targets.size() == 24u * 5u);
  CHECK(trace.events.empty());
  for (const auto& r : trace.pairs) {
    CHECK(std::abs(r.d_raw_mw) < 1e-9);
    CHECK(r.d_mw == 0.0);
    CHECK(r.factor == 0.0);
    CHECK(r.penalty == 0.0);
    CHECK_FALSE(r.vote);
    CHECK_FALSE(r.skipped);
  }
}

TEST_CASE("scenario A decays after the excursion") {
  const auto trace = run_scenario(scenario("scenario_a.json"), fixtures::five_bus());
  CHECK(trace.events.empty());
  for (int obs : {1, 3, 4, 5}) {
    const auto rows = pair_rows(trace, obs, 2);
    REQUIRE(rows.size() == 24);
    CHECK(rows[3]->d_mw == doctest::Approx(7.434).epsilon(1e-9));
    CHECK(rows[3]->factor == doctest::Approx(55.264356).epsilon(1e-9));
    for (int k = 5; k < 24; ++k) CHECK(rows[k]->factor < rows[k - 1]->factor);
    for (const auto* r : rows) CHECK_FALSE(r->vote);
  }
}

TEST_CASE("rows follow the scalar replay") {
  const auto scn = scenario("scenario_b_calibrated.json");
  const auto trace = run_scenario(scn, fixtures::five_bus());
  const oracle::RecursionParams p{scn.detector.n0, scn.detector.a, scn.detector.eps_dz, scn.penalty.c};
  const detection::DetectorBank bank(fixtures::five_bus());
  for (const auto& [key, st] : bank.states()) {
    const auto rows = pair_rows(trace, key.first.value, key.second.value);
    std::vector<double> raw;
    for (const auto* r : rows) raw.push_back(r->d_raw_mw);
    const auto want = oracle::replay(raw, p);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      CHECK(oracle::close_rel(rows[i]->factor, want[i].factor, 1e-12));
      CHECK(oracle::close_rel(rows[i]->penalty, want[i].penalty, 1e-12));
      CHECK(rows[i]->vote == (want[i].penalty > scn.penalty.c_th));
    }
  }
}

TEST_CASE("calibrated scenario isolates prosumer 2 at interval 22") {
  const auto scn = scenario("scenario_b_calibrated.json");
  const auto trace = run_scenario(scn, fixtures::five_bus());
  REQUIRE(trace.events.size() == 1);
  const auto& e = trace.events.front();
  CHECK(e.interval == 22);
  CHECK(e.target == id(2));
  CHECK(e.effective_from == 23);
  CHECK(e.epoch_after == 1);
  CHECK_FALSE(e.partitioned);
  CHECK(e.schedule.p_ref(id(1)) == 83.01);
  CHECK(e.schedule.p_ref(id(3)) == 50.0);
  CHECK(e.schedule.p_ref(id(2)) == -20.0);

  for (const auto& r : trace.pairs) {
    if (r.interval <= 22) {
      CHECK(r.epoch == 0);
      continue;
    }
    CHECK(r.epoch == 1);
    CHECK(r.target != id(2));
    CHECK(r.observer != id(2));
    CHECK(r.factor == 0.0);
  }
  std::size_t after = 0;
  for (const auto& t : trace.targets) {
    if (t.interval > 22) {
      ++after;
      CHECK(t.target != id(2));
    }
  }
  CHECK(after == 2u * 4u);
  for (const auto& p : trace.probes) {
    if (p.interval > 22) CHECK((p.from != id(2) && p.to != id(2)));
  }

  CHECK(isolation_interval(trace, id(2)) == 22);
  CHECK_FALSE(isolation_interval(trace, id(3)));
}

TEST_CASE("literal threshold isolates only on a longer horizon") {
  CHECK(run_scenario(scenario("scenario_b.json"), fixtures::five_bus()).events.empty());
  const auto trace = run_scenario(scenario("scenario_b_extended.json"), fixtures::five_bus());
  CHECK(isolation_interval(trace, id(2)) == 28);
}

TEST_CASE("stop on isolation ends the run") {
  auto scn = scenario("scenario_b_calibrated.json");
  scn.stop_on_isolation = true;
  const auto trace = run_scenario(scn, fixtures::five_bus());
  CHECK(trace.intervals_run == 22);
  CHECK(trace.events.size() == 1);
}

TEST_CASE("single interval horizon") {
  auto scn = scenario("scenario_b.json");
  scn.horizon = 1;
  const auto trace = run_scenario(scn, fixtures::five_bus());
  CHECK(trace.intervals_run == 1);
  CHECK(trace.pairs.size() == 14);
}

TEST_CASE("runs are deterministic") {
  const auto scn = scenario("scenario_b_calibrated.json");
  const auto a = run_scenario(scn, fixtures::five_bus());
  const auto b = run_scenario(scn, fixtures::five_bus());
  CHECK(format_detector_trace(a) == format_detector_trace(b));
  CHECK(format_penalty_trace(a) == format_penalty_trace(b));
  CHECK(format_utility_log(a, 0.5) == format_utility_log(b, 0.5));
  CHECK(format_events(a) == format_events(b));
}

TEST_CASE("replayed probes reproduce the synthesized run") {
  const auto scn = scenario("scenario_b_calibrated.json");
  const auto net = fixtures::five_bus();
  const auto synth = run_scenario(scn, net);
  ProbeReplay replay;
  for (const auto& p : synth.probes) replay[p.interval].push_back(p);
  const auto again = run_scenario(scn, net, replay);
  CHECK(format_detector_trace(again) == format_detector_trace(synth));
  CHECK(format_events(again) == format_events(synth));
}

TEST_CASE("injections on different prosumers are independent") {
  const auto net = fixtures::five_bus();
  auto base = scenario("scenario_a.json");
  auto both = base;
  both.injections.push_back({id(4), 10, 14, AnomalyInjection::Mode::kOffset, -6.0});
  const auto ta = run_scenario(base, net);
  const auto tb = run_scenario(both, net);
  for (int obs : {1, 3, 4, 5}) {
    const auto ra = pair_rows(ta, obs, 2);
    const auto rb = pair_rows(tb, obs, 2);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
      CHECK(rb[i]->d_mw == doctest::Approx(ra[i]->d_mw).epsilon(1e-9).scale(1.0));
      CHECK(rb[i]->factor == doctest::Approx(ra[i]->factor).epsilon(1e-9).scale(1.0));
    }
  }
  const auto r43 = pair_rows(tb, 3, 4);
  CHECK(r43[9]->d_mw == doctest::Approx(-6.0).epsilon(1e-9));
  CHECK(r43[8]->d_mw == 0.0);
}

TEST_CASE("lost messages skip the window and carry F") {
  auto scn = scenario("scenario_a.json");
  scn.horizon = 6;
  Simulation sim(scn, fixtures::five_bus(), make_provider(scn));
  sim.set_drop_rule([](const probing::Envelope& e, std::size_t) {
    return e.interval == 5 && e.sender == ProsumerId{5} && e.recipient == ProsumerId{3};
  });
  const auto trace = sim.run();
  const auto rows = pair_rows(trace, 3, 2);
  REQUIRE(rows.size() == 6);
  CHECK(rows[4]->skipped);
  CHECK(rows[4]->factor == rows[3]->factor);
  CHECK_FALSE(rows[5]->skipped);
  CHECK(rows[5]->factor == doctest::Approx(rows[3]->factor / 3.0).epsilon(1e-12));
  CHECK(pair_rows(trace, 1, 2)[4]->factor == doctest::Approx(rows[3]->factor / 3.0).epsilon(1e-12));
}

TEST_CASE("threshold calibration window") {
  auto scn = scenario("scenario_b.json");
  const auto win = calibrate_threshold(scn, fixtures::five_bus(), id(2), 22, 1e-12);
  REQUIRE(win);
  CHECK(win->lo == doctest::Approx(200.2630658).epsilon(1e-9));
  CHECK(win->hi == doctest::Approx(267.6457363).epsilon(1e-9));
  CHECK(win->midpoint() > win->lo);
  CHECK(win->midpoint() < win->hi);

  scn.penalty.c_th = win->midpoint();
  CHECK(isolation_interval(run_scenario(scn, fixtures::five_bus()), id(2)) == 22);
  CHECK_FALSE(calibrate_threshold(scn, fixtures::five_bus(), id(4), 22));
}

TEST_CASE("trace files") {
  const auto scn = scenario("scenario_b_calibrated.json");
  const auto trace = run_scenario(scn, fixtures::five_bus());
  CHECK(format_detector_trace(trace).rfind("interval,epoch,observer,target,skipped,d_raw_mw,d_mw,D,N,F\n", 0) == 0);
  CHECK(format_penalty_trace(trace).rfind("interval,epoch,observer,target,F,penalty_raw,penalty,saturated,vote\n", 0) ==
        0);
  CHECK(format_events(trace).rfind("interval,target,effective_from,epoch_after,partitioned\n", 0) == 0);

  const auto dir = std::filesystem::temp_directory_path() / "gridwatch_test_sim";
  std::filesystem::remove_all(dir);
  const auto files = write_trace(dir, trace, scn);
  CHECK(files.size() == 9);
  for (const auto& f : files) CHECK(std::filesystem::exists(f));
  CHECK(read(dir / "detector.csv") == format_detector_trace(trace));
  std::filesystem::remove_all(dir);
}

TEST_CASE("module errors name the interval") {
  auto scn = scenario("scenario_b_calibrated.json");
  scn.reference.mode = ReferenceConfig::Mode::kSolve;
  dopf::DopfOptions opt;
  Simulation sim(scn, fixtures::five_bus(), make_provider(scn, opt));
  SimTrace trace;
  try {
    for (int k = 0; k < 24; ++k) sim.step(trace);
    FAIL("expected the post-isolation solve to fail");
  } catch (const SimulationError& e) {
    CHECK(e.interval() > 0);
  }
}
