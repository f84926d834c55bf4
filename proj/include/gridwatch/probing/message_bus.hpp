#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::probing {

/// One tie-line probe reading: flow at `from`'s end toward `to`, positive when
/// `from` exports.
struct ProbeSample {
  int interval = 0;
  grid::ProsumerId from;
  grid::ProsumerId to;
  int sample_index = 1;  // 1..L
  double power_mw = 0.0;

  friend bool operator==(const ProbeSample&, const ProbeSample&) = default;
};

struct Envelope {
  int interval = 0;
  grid::ProsumerId sender;
  grid::ProsumerId recipient;
  std::vector<grid::ProsumerId> route;  // sender, relays..., recipient
  std::vector<ProbeSample> samples;
};

/// Synchronous store-and-forward bus over the prosumer graph. Messages travel
/// at most two hops; a two-hop message is relayed by the lowest-id common
/// neighbor of sender and recipient, avoiding `avoid` when another relay exists.
/// Delivery order is send order, so every run with the same sends produces the
/// same inboxes.
class MessageBus {
 public:
  /// Returns true to drop the envelope at hop `hop` (0 = first link).
  using DropRule = std::function<bool(const Envelope&, std::size_t hop)>;

  explicit MessageBus(grid::Network net);

  const grid::Network& network() const noexcept { return net_; }
  void set_network(grid::Network net);
  void set_drop_rule(DropRule rule) { drop_ = std::move(rule); }

  /// Route from `sender` to `recipient`. Throws ValidationError when the two
  /// are more than two hops apart.
  std::vector<grid::ProsumerId> route(grid::ProsumerId sender, grid::ProsumerId recipient,
                                      std::optional<grid::ProsumerId> avoid = std::nullopt) const;

  void send(int interval, grid::ProsumerId sender, grid::ProsumerId recipient,
            std::vector<ProbeSample> samples,
            std::optional<grid::ProsumerId> avoid = std::nullopt);

  /// Moves every queued interval-`interval` message into its recipient's inbox.
  /// Returns the number of envelopes dropped.
  std::size_t deliver(int interval);

  const std::vector<Envelope>& inbox(grid::ProsumerId who, int interval) const;
  std::size_t pending() const noexcept { return queue_.size(); }
  /// Forgets inboxes older than `interval`.
  void discard_before(int interval);

 private:
  grid::Network net_;
  DropRule drop_;
  std::vector<Envelope> queue_;
  std::map<std::pair<int, grid::ProsumerId>, std::vector<Envelope>> inboxes_;
};

/// Every prosumer k forwards, for each neighbor i, its readings of line (i, k)
/// at i's end to all other neighbors of i. Samples are grouped per interval and
/// line; a target's own readings are never sent on its behalf.
void publish_probes(MessageBus& bus, int interval, const std::vector<ProbeSample>& samples);

}  // namespace gridwatch::probing
