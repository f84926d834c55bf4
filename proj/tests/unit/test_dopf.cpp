#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gridwatch/dopf/branch_flow.hpp"
#include "gridwatch/dopf/local_problem.hpp"
#include "gridwatch/dopf/schedule.hpp"
#include "gridwatch/dopf/solver.hpp"
#include "oracles/acopf_reference.hpp"
#include "oracles/dispatch_oracle.hpp"
#include "support/finite_diff.hpp"
#include "support/fixtures.hpp"

using namespace gridwatch;
using namespace gridwatch::dopf;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fixtures::id;

namespace {

std::vector<LocalState> local_round(const Subproblems& sub, const std::vector<VectorXd>& xs,
                                    double lambda) {
  std::vector<LocalState> states;
  for (std::size_t b = 0; b < sub.size_of_blocks(); ++b) {
    const auto& m = sub.models()[b];
    std::vector<AuxValues> targets;
    std::vector<double> weights;
    for (std::size_t k = 0; k < m.degree(); ++k) {
      const auto& mn = sub.at(m.neighbors()[k]);
      targets.push_back(mirror(mn.aux(xs[sub.block_of(m.neighbors()[k])], mn.slot_of(m.owner()))));
      weights.push_back(lambda);
    }
    states.push_back(local_solve(m, xs[b], targets, weights));
  }
  return states;
}

std::vector<VectorXd> flat(const Subproblems& sub) {
  std::vector<VectorXd> xs;
  for (const auto& m : sub.models()) xs.push_back(m.flat_start());
  return xs;
}

DopfOptions dc_options() {
  DopfOptions o;
  o.model = FlowModel::kDc;
  return o;
}

}  // namespace

TEST_CASE("quadratic cost derivative") {
  const grid::QuadraticCost c{0.5, 2.0, 0.0};
  CHECK(c.derivative(10.0) == 12.0);
  CHECK(c(10.0) == 70.0);
}

TEST_CASE("zero-cost prosumer has a zero objective gradient") {
  const auto dec = grid::decouple(fixtures::graph(2, {{1, 2}}));
  const LocalModel m(dec, id(2), FlowModel::kAc);
  CHECK(m.cost_gradient(m.flat_start()).isZero(0.0));
  CHECK(m.cost(m.flat_start()) == 0.0);
}

TEST_CASE("branch flow derivatives match finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double g = 1.0 + u(rng), b = -10.0 + 3.0 * u(rng);
    std::array<double, 4> x{1.0 + 0.05 * u(rng), 0.3 * u(rng), 1.0 + 0.05 * u(rng), 0.3 * u(rng)};
    for (auto fn : {&active_flow, &reactive_flow}) {
      const auto t = fn(g, b, x[0], x[1], x[2], x[3]);
      for (int i = 0; i < 4; ++i) {
        auto a = x, c = x;
        a[i] += fd::kStep;
        c[i] -= fd::kStep;
        const auto ta = fn(g, b, a[0], a[1], a[2], a[3]);
        const auto tc = fn(g, b, c[0], c[1], c[2], c[3]);
        CHECK(std::abs((ta.value - tc.value) / (2 * fd::kStep) - t.grad[i]) < 1e-5 * std::max(1.0, std::abs(t.grad[i])));
        for (int j = 0; j < 4; ++j) {
          const double num = (ta.grad[j] - tc.grad[j]) / (2 * fd::kStep);
          CHECK(std::abs(num - t.hess[i][j]) < 1e-5 * std::max(1.0, std::abs(t.hess[i][j])));
        }
      }
    }
  }
}

TEST_CASE("local model derivatives match finite differences on random networks") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto net = fixtures::random_network(rng);
    const auto dec = grid::decouple(net);
    for (auto model : {FlowModel::kAc, FlowModel::kDc}) {
      for (const auto& p : net.prosumers()) {
        const LocalModel m(dec, p.id, model);
        const VectorXd x = fd::random_point(m, rng);
        const VectorXd g = m.cost_gradient(x);
        CHECK(fd::worst_relative(g, fd::gradient([&](const VectorXd& z) { return m.cost(z); }, x)) < 1e-5);

        const MatrixXd J = m.jacobian(x);
        const MatrixXd Jfd = fd::jacobian([&](const VectorXd& z) { return m.residuals(z); }, x);
        CHECK(fd::worst_relative(J, Jfd) < 1e-5);

        VectorXd kappa(m.num_constraints());
        for (Eigen::Index i = 0; i < kappa.size(); ++i) kappa(i) = std::uniform_real_distribution<double>(-5, 5)(rng);
        const MatrixXd Hc = m.constraint_hessian(x, kappa);
        const MatrixXd Hfd = fd::jacobian([&](const VectorXd& z) { return VectorXd(m.jacobian(z).transpose() * kappa); }, x);
        CHECK(fd::worst_relative(Hc, Hfd) < 1e-5);
      }
    }
  }
}

TEST_CASE("local NLP derivatives match finite differences") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = fixtures::random_network(rng);
    const auto dec = grid::decouple(net);
    for (const auto& p : net.prosumers()) {
      const LocalModel m(dec, p.id, FlowModel::kAc);
      std::vector<AuxValues> targets(m.degree());
      for (auto& t : targets) t = {0.1 * u(rng), 1.0 + 0.02 * u(rng), 0.2 * u(rng), 0.1 * u(rng)};
      const LocalNlp nlp(m, targets, std::vector<double>(m.degree(), 10.0));
      VectorXd z = nlp.initial_point(fd::random_point(m, rng));
      z = z.cwiseMax(nlp.lower()).cwiseMin(nlp.upper());
      CHECK(fd::worst_relative(nlp.gradient(z), fd::gradient([&](const VectorXd& w) { return nlp.objective(w); }, z)) < 1e-5);
      CHECK(fd::worst_relative(nlp.jacobian(z), fd::jacobian([&](const VectorXd& w) { return nlp.constraints(w); }, z)) < 1e-5);
    }
  }
}

TEST_CASE("consensus mismatch") {
  SUBCASE("mirrored values agree") {
    const AuxValues a{0.1, 1.02, 0.3, -0.1};
    const AuxValues b{0.1, 1.02, -0.3, 0.1};
    CHECK(consensus_mismatch(a, b, FlowModel::kAc) == 0.0);
  }
  SUBCASE("direct sum of gaps") {
    const AuxValues a{0.1, 1.05, 0.4, 0.2};
    const AuxValues b{0.0, 1.00, 0.6, 0.3};
    CHECK(consensus_mismatch(a, b, FlowModel::kAc) == doctest::Approx(1.65).epsilon(1e-12));
    CHECK(consensus_mismatch(a, b, FlowModel::kDc) == doctest::Approx(1.1).epsilon(1e-12));
  }
  SUBCASE("randomized states against a second computation") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto dec = grid::decouple(fixtures::five_bus());
    const Subproblems sub(dec, FlowModel::kAc);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<VectorXd> xs;
      for (const auto& m : sub.models()) xs.push_back(fd::random_point(m, rng));
      const auto rs = consensus_residuals(sub, xs);
      REQUIRE(rs.size() == dec.pairs().size());
      for (std::size_t p = 0; p < rs.size(); ++p) {
        const auto& pr = dec.pairs()[p];
        const auto& mi = sub.at(pr.i);
        const auto& mj = sub.at(pr.j);
        const auto ai = mi.aux(xs[sub.block_of(pr.i)], mi.slot_of(pr.j));
        const auto aj = mj.aux(xs[sub.block_of(pr.j)], mj.slot_of(pr.i));
        const double expect = std::abs(ai.angle - aj.angle) + std::abs(ai.v - aj.v) +
                              std::abs(ai.p + aj.p) + std::abs(ai.q + aj.q);
        CHECK(rs[p].value == doctest::Approx(expect).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("single prosumer local solve") {
  auto p = fixtures::generator(1, 0.01, 10.0, 50.0, 20.0, true);
  p.cost.c0 = 30.0;
  const auto net = grid::Network::create(100.0, {p}, {});
  const auto dec = grid::decouple(net);
  const LocalModel m(dec, id(1), FlowModel::kAc);
  const auto st = local_solve(m, m.flat_start(), {}, {});
  CHECK(st.x(m.p_gen()) * 100.0 == doctest::Approx(20.0).epsilon(1e-9));
  CHECK(st.objective == doctest::Approx(p.cost(20.0)).epsilon(1e-9));

  const auto r = solve_dopf(dec);
  CHECK(r.iterations == 0);
  CHECK(std::abs(r.schedule.p_ref(id(1))) < 1e-9);
}

TEST_CASE("load outside generation bounds is infeasible") {
  const auto net = grid::Network::create(100.0, {fixtures::generator(1, 0.01, 10.0, 10.0, 20.0, true)}, {});
  const auto dec = grid::decouple(net);
  const LocalModel m(dec, id(1), FlowModel::kAc);
  CHECK_THROWS_AS(local_solve(m, m.flat_start(), {}, {}), InfeasibleError);
  CHECK_THROWS_AS(solve_dopf(dec), InfeasibleError);
}

TEST_CASE("two-node DC toy matches exhaustive search") {
  const auto net = fixtures::dc_toy_2();
  const auto result = solve_dopf(grid::decouple(net), dc_options());
  const auto best = oracle::grid_search_2({1, 0, 0, 10, 0}, {1, 0, 0, 10, 10}, 1e-3);
  CHECK(std::abs(result.schedule.p_ref(id(1)) - (best.p[0] - 0.0)) < 1e-4);
  CHECK(std::abs(result.schedule.p_ref(id(2)) - (best.p[1] - 10.0)) < 1e-4);
  CHECK(std::abs(result.total_cost - best.cost) < 1e-3);
}

TEST_CASE("three-node DC toy matches exhaustive search") {
  const auto result = solve_dopf(grid::decouple(fixtures::dc_toy_3()), dc_options());
  const auto best = oracle::grid_search_3({0.5, 2.0, 0, 40, 5}, {1.0, 1.0, 0, 40, 20}, {2.0, 0.0, 0, 40, 15}, 1e-3);
  const double loads[] = {5.0, 20.0, 15.0};
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(result.schedule.p_ref(id(i + 1)) - (best.p[static_cast<std::size_t>(i)] - loads[i])) < 1e-3);
  }
  CHECK(std::abs(result.total_cost - best.cost) < 1e-3);
}

TEST_CASE("consensus step") {
  SUBCASE("zero step at a consensus point with zero gradient") {
    // Zero costs and loads; only the slack may generate.
    auto slack = fixtures::generator(1, 0.0, 0.0, 50.0, 0.0, true);
    slack.p_mw.min = -50.0;
    const auto net = grid::Network::create(
        100.0, {slack, fixtures::consumer(2, 0.0), fixtures::consumer(3, 0.0)},
        {fixtures::line(1, 2), fixtures::line(2, 3)});
    const auto dec = grid::decouple(net);
    const Subproblems sub(dec, FlowModel::kAc);
    const auto states = local_round(sub, flat(sub), 10.0);
    auto ws = build_derivatives(sub, states);
    regularize(ws);
    const auto step = consensus_step(sub, ws, states);
    CHECK(step.max_abs() < 1e-9);
  }
  SUBCASE("one step near the optimum lands on the exhaustive-search dispatch") {
    const auto dec = grid::decouple(fixtures::dc_toy_2());
    const Subproblems sub(dec, FlowModel::kDc);
    auto xs = flat(sub);
    xs[0](sub.models()[0].p_gen()) = 0.051;
    xs[1](sub.models()[1].p_gen()) = 0.049;
    const auto states = local_round(sub, xs, 10.0);
    auto ws = build_derivatives(sub, states);
    regularize(ws);
    const auto step = consensus_step(sub, ws, states);
    const auto best = oracle::grid_search_2({1, 0, 0, 10, 0}, {1, 0, 0, 10, 10}, 1e-3);
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& m = sub.models()[b];
      const double p = 100.0 * (states[b].x(m.p_gen()) + step.delta[b](m.p_gen()));
      CHECK(std::abs(p - best.p[b]) < 1e-6);
    }
  }
  SUBCASE("unregularized rank-deficient Hessian is reported") {
    const auto dec = grid::decouple(fixtures::dc_toy_2());
    const Subproblems sub(dec, FlowModel::kDc);
    const auto states = local_round(sub, flat(sub), 10.0);
    auto ws = build_derivatives(sub, states);
    for (auto& b : ws.blocks) {
      b.hessian.setZero();
      std::fill(b.active.begin(), b.active.end(), false);
    }
    CHECK_THROWS_AS(consensus_step(sub, ws, states), SingularSystemError);
    regularize(ws);
    CHECK(ws.regularized);
    CHECK_NOTHROW(consensus_step(sub, ws, states));
  }
}

TEST_CASE("regularize shifts to the requested smallest eigenvalue") {
  SolverWorkspace ws;
  BlockDerivatives b;
  b.hessian = MatrixXd::Zero(3, 3);
  b.hessian(0, 0) = 2.0;
  b.hessian(1, 1) = -1.0;
  ws.blocks.push_back(b);
  regularize(ws, 1e-8);
  const Eigen::SelfAdjointEigenSolver<MatrixXd> es(ws.blocks[0].hessian);
  CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1e-8).epsilon(1e-6));
  CHECK(ws.blocks[0].shift == doctest::Approx(1.0 + 1e-8));
}

TEST_CASE("line search") {
  const auto dec = grid::decouple(fixtures::dc_toy_2());
  const Subproblems sub(dec, FlowModel::kDc);
  const auto states = local_round(sub, flat(sub), 10.0);
  auto ws = build_derivatives(sub, states);
  regularize(ws);
  const auto step = consensus_step(sub, ws, states);
  const double mu = 2.0 * step.max_multiplier() + 1.0;

  SUBCASE("full step on a convex toy") {
    const auto ls = line_search(sub, states, step, mu);
    CHECK(ls.alpha == 1.0);
    CHECK(ls.merit_accepted <= ls.merit_start);
  }
  SUBCASE("overshooting step is shortened") {
    auto big = step;
    big.kkt.reset();
    for (auto& d : big.delta) d *= 50.0;
    const auto ls = line_search(sub, states, big, mu);
    CHECK(ls.alpha < 1.0);
    CHECK(ls.merit_accepted <= ls.merit_start);
    CHECK(merit(sub, ls.point, mu) == ls.merit_accepted);
    std::vector<VectorXd> y;
    for (const auto& s : states) y.push_back(s.x);
    for (double a = 1.0; a > ls.alpha; a *= 0.5) {
      auto t = y;
      for (std::size_t b = 0; b < t.size(); ++b) t[b] += a * big.delta[b];
      CHECK(merit(sub, t, mu) > ls.merit_start);
    }
  }
  SUBCASE("zero step") {
    auto zero = step;
    for (auto& d : zero.delta) d.setZero();
    const auto ls = line_search(sub, states, zero, mu);
    CHECK(ls.alpha == 1.0);
    CHECK(ls.merit_accepted == ls.merit_start);
  }
}

TEST_CASE("five-bus AC solve against the centralized reference") {
  const auto dec = grid::decouple(fixtures::five_bus());
  const auto r = solve_dopf(dec);
  CHECK(r.residuals.size() == 7);
  for (const auto& res : r.residuals) CHECK(res.value < 1e-4);
  for (int i = 0; i < 5; ++i) {
    CHECK(std::abs(r.schedule.p_ref(id(i + 1)) - oracle::ieee5::kNetP[i]) < 1e-3);
    CHECK(std::abs(r.schedule.entries().at(id(i + 1)).q_mvar - oracle::ieee5::kNetQ[i]) < 1e-2);
  }
  CHECK(r.total_cost == doctest::Approx(oracle::ieee5::kCost).epsilon(1e-6));
  // Net injections cover exactly the line losses.
  CHECK(std::abs(r.schedule.total_p_mw() - r.losses_mw) < 1e-3);
  for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(std::isfinite(r.history[k].merit));
  CHECK(r.history.back().max_residual < 1e-4);
}

TEST_CASE("DC solves balance power exactly") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = fixtures::random_network(rng);
    const auto r = solve_dopf(grid::decouple(net), dc_options());
    CHECK(std::abs(r.schedule.total_p_mw()) < 1e-3);
    for (const auto& res : r.residuals) CHECK(res.value < 1e-4);
  }
}

TEST_CASE("solver options are validated") {
  const auto dec = grid::decouple(fixtures::dc_toy_2());
  DopfOptions o = dc_options();
  o.eps_consensus = 0.0;
  CHECK_THROWS_AS(solve_dopf(dec, o), ValidationError);
  o = dc_options();
  o.max_iterations = 0;
  CHECK_THROWS_AS(solve_dopf(dec, o), ValidationError);
}

TEST_CASE("iteration cap raises non-convergence with history") {
  DopfOptions o;
  o.max_iterations = 2;
  try {
    solve_dopf(grid::decouple(fixtures::five_bus()), o);
    FAIL("expected non-convergence");
  } catch (const DopfNonConvergence& e) {
    CHECK(e.history().size() == 3);
    CHECK(solver_report(e).find("\"status\"") != std::string::npos);
  }
}

TEST_CASE("fixed reference schedules") {
  const auto net = fixtures::five_bus();
  const std::map<grid::ProsumerId, double> values{
      {id(1), 23.56}, {id(2), 49.56}, {id(3), 39.04}, {id(4), -44.0}, {id(5), -66.0}};
  const auto s = fixed_reference(net, values, 3);
  CHECK(s.p_ref(id(1)) == 23.56);
  CHECK(s.p_ref(id(2)) == 49.56);
  CHECK(s.p_ref(id(3)) == 39.04);
  CHECK(s.valid_from() == 3);

  const auto reduced = grid::isolate(net, id(2)).network;
  const auto post = fixed_reference(
      reduced, {{id(1), 83.01}, {id(2), -20.0}, {id(3), 50.0}, {id(4), -44.0}, {id(5), -66.0}}, 23);
  CHECK(post.p_ref(id(1)) == 83.01);
  CHECK(post.p_ref(id(2)) == -20.0);
  CHECK(post.p_ref(id(3)) == 50.0);

  auto partial = values;
  partial.erase(id(4));
  try {
    fixed_reference(net, partial);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.where() == "reference.4");
  }

  const auto empty = grid::Network::create(100.0, {}, {}, false);
  CHECK(fixed_reference(empty, {}).empty());
}

TEST_CASE("solver schedule and equal fixed values are interchangeable") {
  const auto r = solve_dopf(grid::decouple(fixtures::dc_toy_2()), dc_options());
  std::map<grid::ProsumerId, double> values;
  for (const auto& [pid, e] : r.schedule.entries()) values[pid] = e.p_mw;
  const auto fixed = fixed_reference(fixtures::dc_toy_2(), values);
  for (const auto& [pid, e] : r.schedule.entries()) CHECK(fixed.p_ref(pid) == r.schedule.p_ref(pid));
}

TEST_CASE("random AC networks converge to consensus") {
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = fixtures::random_network(rng);
    const auto dec = grid::decouple(net);
    const Subproblems sub(dec, FlowModel::kAc);
    const auto r = solve_dopf(dec);
    for (const auto& pr : dec.pairs()) {
      const auto& mi = sub.at(pr.i);
      const auto& mj = sub.at(pr.j);
      const auto ai = mi.aux(r.states[sub.block_of(pr.i)].x, mi.slot_of(pr.j));
      const auto aj = mj.aux(r.states[sub.block_of(pr.j)].x, mj.slot_of(pr.i));
      CHECK(std::abs(ai.p + aj.p) < 1e-4);
      CHECK(std::abs(ai.v - aj.v) < 1e-4);
    }
    CHECK(std::abs(r.schedule.total_p_mw() - r.losses_mw) < 1e-2);
  }
}
