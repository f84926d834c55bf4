#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "gridwatch/grid/case_file.hpp"
#include "gridwatch/grid/network.hpp"

namespace fixtures {

using gridwatch::grid::Network;
using gridwatch::grid::Prosumer;
using gridwatch::grid::ProsumerId;
using gridwatch::grid::TieLine;

inline std::filesystem::path data(const std::string& rel) {
  return std::filesystem::path(GRIDWATCH_DATA_DIR) / rel;
}

inline Network five_bus() { return gridwatch::grid::load_case(data("cases/ieee5_modified.json")); }

inline ProsumerId id(int v) { return ProsumerId{v}; }

inline Prosumer generator(int v, double c2, double c1, double p_max, double load, bool slack = false) {
  Prosumer p;
  p.id = ProsumerId{v};
  p.cost = {c2, c1, 0.0};
  p.p_mw = {0.0, p_max};
  p.q_mvar = {-100.0, 100.0};
  p.v_pu = {0.9, 1.1};
  p.load_p_mw = load;
  p.is_slack = slack;
  return p;
}

inline Prosumer consumer(int v, double load, bool slack = false) {
  Prosumer p;
  p.id = ProsumerId{v};
  p.load_p_mw = load;
  p.is_slack = slack;
  return p;
}

inline TieLine line(int a, int b, double g = 1.0, double bb = -5.0) {
  return TieLine{ProsumerId{a}, ProsumerId{b}, {g, bb}};
}

/// Ids 1..n, slack 1, edges as given.
inline Network graph(int n, const std::vector<std::pair<int, int>>& edges,
                     bool require_connected = true) {
  std::vector<Prosumer> ps;
  for (int v = 1; v <= n; ++v) ps.push_back(consumer(v, 0.0, v == 1));
  std::vector<TieLine> ls;
  for (auto [a, b] : edges) ls.push_back(line(a, b));
  return Network::create(100.0, ps, ls, require_connected);
}

/// Two-node DC toy: c2 = 1 at both nodes, loads 0 and 10 MW.
inline Network dc_toy_2() {
  return Network::create(100.0,
                         {generator(1, 1.0, 0.0, 10.0, 0.0, true), generator(2, 1.0, 0.0, 10.0, 10.0)},
                         {line(1, 2, 0.0, -10.0)});
}

/// Three-node DC triangle with distinct quadratic costs and loads 5, 20, 15 MW.
inline Network dc_toy_3() {
  return Network::create(100.0,
                         {generator(1, 0.5, 2.0, 40.0, 5.0, true), generator(2, 1.0, 1.0, 40.0, 20.0),
                          generator(3, 2.0, 0.0, 40.0, 15.0)},
                         {line(1, 2, 0.0, -10.0), line(2, 3, 0.0, -8.0), line(1, 3, 0.0, -6.0)});
}

/// Connected random network of 2..5 prosumers: a random spanning tree plus
/// extra lines, random costs, loads and admittances.
inline Network random_network(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = size(rng);
  std::vector<Prosumer> ps;
  for (int v = 1; v <= n; ++v) {
    Prosumer p = generator(v, 0.001 + 0.02 * u(rng), 10.0 + 10.0 * u(rng), 80.0 + 100.0 * u(rng),
                           40.0 * u(rng), v == 1);
    p.load_q_mvar = 10.0 * u(rng);
    p.v_pu = {0.94, 1.06};
    ps.push_back(p);
  }
  std::vector<TieLine> ls;
  for (int v = 2; v <= n; ++v) {
    const int parent = 1 + static_cast<int>(u(rng) * (v - 1));
    ls.push_back(line(parent, v, 0.5 + 4.0 * u(rng), -(2.0 + 15.0 * u(rng))));
  }
  for (int a = 1; a <= n; ++a) {
    for (int b = a + 1; b <= n; ++b) {
      bool present = false;
      for (const auto& l : ls) present = present || (l.touches(ProsumerId{a}) && l.touches(ProsumerId{b}));
      if (!present && u(rng) < 0.3) ls.push_back(line(a, b, 0.5 + 4.0 * u(rng), -(2.0 + 15.0 * u(rng))));
    }
  }
  return Network::create(100.0, ps, ls);
}

/// Raw mismatch sequence mixing large draws, repeats, dead-zone values and
/// zeros, so every branch of the rate term is exercised.
inline std::vector<double> random_mismatch_sequence(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_int_distribution<int> kind(0, 5);
  std::uniform_real_distribution<double> big(-20.0, 20.0);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  std::vector<double> seq;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) {
    switch (kind(rng)) {
      case 0: seq.push_back(seq.empty() ? 0.0 : seq.back()); break;
      case 1: seq.push_back(small(rng)); break;
      case 2: seq.push_back(0.0); break;
      default: seq.push_back(big(rng)); break;
    }
  }
  return seq;
}

}  // namespace fixtures
