#include "gridwatch/probing/message_bus.hpp"

#include <algorithm>
#include <climits>

#include "gridwatch/common/error.hpp"

namespace gridwatch::probing {

MessageBus::MessageBus(grid::Network net) : net_(std::move(net)) {}

void MessageBus::set_network(grid::Network net) { net_ = std::move(net); }

std::vector<grid::ProsumerId> MessageBus::route(grid::ProsumerId sender,
                                                grid::ProsumerId recipient,
                                                std::optional<grid::ProsumerId> avoid) const {
  if (!net_.contains(sender)) {
    throw ValidationError("bus.sender", "unknown prosumer " + grid::to_string(sender));
  }
  if (!net_.contains(recipient)) {
    throw ValidationError("bus.recipient", "unknown prosumer " + grid::to_string(recipient));
  }
  if (sender == recipient) return {sender};
  if (net_.line_between(sender, recipient)) return {sender, recipient};

  const auto a = net_.neighbors(sender);
  const auto b = net_.neighbors(recipient);
  std::vector<grid::ProsumerId> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  if (common.empty()) {
    throw ValidationError("bus.route", grid::to_string(sender) + " -> " +
                                           grid::to_string(recipient) +
                                           " is longer than two hops");
  }
  auto relay = common.front();
  for (auto c : common) {
    if (!avoid || c != *avoid) {
      relay = c;
      break;
    }
  }
  return {sender, relay, recipient};
}

void MessageBus::send(int interval, grid::ProsumerId sender, grid::ProsumerId recipient,
                      std::vector<ProbeSample> samples, std::optional<grid::ProsumerId> avoid) {
  Envelope e;
  e.interval = interval;
  e.sender = sender;
  e.recipient = recipient;
  e.route = route(sender, recipient, avoid);
  e.samples = std::move(samples);
  queue_.push_back(std::move(e));
}

std::size_t MessageBus::deliver(int interval) {
  std::size_t dropped = 0;
  std::vector<Envelope> keep;
  for (auto& e : queue_) {
    if (e.interval != interval) {
      keep.push_back(std::move(e));
      continue;
    }
    bool lost = false;
    for (std::size_t hop = 0; hop + 1 < e.route.size() && !lost; ++hop) {
      lost = drop_ && drop_(e, hop);
    }
    if (e.route.size() == 1 && drop_) lost = drop_(e, 0);
    if (lost) {
      ++dropped;
      continue;
    }
    inboxes_[{interval, e.recipient}].push_back(std::move(e));
  }
  queue_ = std::move(keep);
  return dropped;
}

const std::vector<Envelope>& MessageBus::inbox(grid::ProsumerId who, int interval) const {
  static const std::vector<Envelope> empty;
  auto it = inboxes_.find({interval, who});
  return it == inboxes_.end() ? empty : it->second;
}

void MessageBus::discard_before(int interval) {
  inboxes_.erase(inboxes_.begin(), inboxes_.lower_bound({interval, grid::ProsumerId{INT_MIN}}));
}

void publish_probes(MessageBus& bus, int interval, const std::vector<ProbeSample>& samples) {
  const auto& net = bus.network();
  std::map<std::pair<grid::ProsumerId, grid::ProsumerId>, std::vector<ProbeSample>> by_line;
  for (const auto& s : samples) {
    if (s.interval != interval) continue;
    by_line[{s.from, s.to}].push_back(s);
  }
  for (auto& [line, group] : by_line) {
    const auto [target, reporter] = line;
    if (!net.contains(target) || !net.contains(reporter)) continue;
    for (auto observer : net.neighbors(target)) {
      bus.send(interval, reporter, observer, group, target);
    }
  }
}

}  // namespace gridwatch::probing
