#pragma once

#include <compare>
#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gridwatch::grid {

/// Identifier of a prosumer (a bus of the prosumer network).
struct ProsumerId {
  int value = 0;

  constexpr auto operator<=>(const ProsumerId&) const = default;
};

std::string to_string(ProsumerId id);
std::ostream& operator<<(std::ostream& os, ProsumerId id);

struct Bounds {
  double min = 0.0;
  double max = 0.0;

  bool contains(double x) const noexcept { return min <= x && x <= max; }
  bool valid() const noexcept { return min <= max; }
};

/// Quadratic generation cost in $/h with power in MW.
struct QuadraticCost {
  double c2 = 0.0;  // $/MW^2h
  double c1 = 0.0;  // $/MWh
  double c0 = 0.0;  // $/h

  double operator()(double p_mw) const noexcept { return (c2 * p_mw + c1) * p_mw + c0; }
  double derivative(double p_mw) const noexcept { return 2.0 * c2 * p_mw + c1; }
  double second_derivative() const noexcept { return 2.0 * c2; }
};

/// A network node. Net injection is generation minus `load_p_mw`; generation is
/// positive, consumption negative.
struct Prosumer {
  ProsumerId id;
  QuadraticCost cost;
  Bounds p_mw;     // generation bounds
  Bounds q_mvar;   // reactive generation bounds
  Bounds v_pu{0.9, 1.1};
  double load_p_mw = 0.0;
  double load_q_mvar = 0.0;
  bool is_slack = false;
};

/// Series tie line between two prosumers, admittance in per unit on the system base.
struct TieLine {
  ProsumerId a;
  ProsumerId b;
  std::complex<double> admittance;

  bool touches(ProsumerId id) const noexcept { return a == id || b == id; }
  ProsumerId other(ProsumerId id) const noexcept { return a == id ? b : a; }
};

/// Immutable prosumer graph. Prosumers are kept sorted by id; lines keep their
/// input order.
class Network {
 public:
  /// Validates every invariant and throws ValidationError naming the offending
  /// entity. Connectivity is only enforced when `require_connected` is set.
  static Network create(double base_mva, std::vector<Prosumer> prosumers,
                        std::vector<TieLine> lines, bool require_connected = true);

  double base_mva() const noexcept { return base_mva_; }
  const std::vector<Prosumer>& prosumers() const noexcept { return prosumers_; }
  const std::vector<TieLine>& lines() const noexcept { return lines_; }
  std::size_t size() const noexcept { return prosumers_.size(); }

  bool contains(ProsumerId id) const noexcept;
  const Prosumer& prosumer(ProsumerId id) const;
  std::size_t index_of(ProsumerId id) const;
  std::optional<ProsumerId> slack() const noexcept;

  /// Ids sharing a tie line with `id`, ascending.
  std::vector<ProsumerId> neighbors(ProsumerId id) const;
  /// Neighbors and neighbors of neighbors, excluding `id`, ascending.
  std::vector<ProsumerId> two_hop(ProsumerId id) const;
  /// Indices into lines() of the lines incident to `id`, ordered by neighbor id.
  std::vector<std::size_t> incident_lines(ProsumerId id) const;
  std::optional<std::size_t> line_between(ProsumerId a, ProsumerId b) const;

  /// Connected components as sorted id lists, ordered by their smallest id.
  std::vector<std::vector<ProsumerId>> components() const;
  bool connected() const { return components().size() <= 1; }

 private:
  Network() = default;

  double base_mva_ = 100.0;
  std::vector<Prosumer> prosumers_;
  std::vector<TieLine> lines_;
  std::vector<std::vector<std::size_t>> incidence_;  // per prosumer index
};

struct IsolationResult {
  Network network;
  bool partitioned = false;
  /// Components of the reduced network; more than one when partitioned.
  std::vector<std::vector<ProsumerId>> components;
};

/// Removes prosumer `id` and its tie lines. Throws for the slack or an unknown id.
IsolationResult isolate(const Network& net, ProsumerId id);

/// Attachment of one side of a split tie line: the auxiliary bus b_ij hangs off
/// prosumer i through twice the line admittance.
struct AuxPair {
  std::size_t line_index = 0;
  ProsumerId i;
  ProsumerId j;
  std::complex<double> attachment;  // admittance of both i-b_ij and j-b_ji
};

/// A network with every tie line replaced by a pair of auxiliary buses. Not a
/// Network itself, so it cannot be decoupled a second time.
class DecoupledNetwork {
 public:
  const Network& base() const noexcept { return base_; }
  const std::vector<AuxPair>& pairs() const noexcept { return pairs_; }

  /// For prosumer `id`: the pair index of each incident line, ordered by
  /// neighbor id (same order as Network::neighbors).
  std::vector<std::size_t> pairs_of(ProsumerId id) const;

  friend DecoupledNetwork decouple(const Network& net);

 private:
  explicit DecoupledNetwork(Network base) : base_(std::move(base)) {}

  Network base_;
  std::vector<AuxPair> pairs_;
};

DecoupledNetwork decouple(const Network& net);

/// Admittance of two admittances in series.
std::complex<double> series(std::complex<double> a, std::complex<double> b);

}  // namespace gridwatch::grid

template <>
struct std::hash<gridwatch::grid::ProsumerId> {
  std::size_t operator()(gridwatch::grid::ProsumerId id) const noexcept {
    return std::hash<int>{}(id.value);
  }
};
