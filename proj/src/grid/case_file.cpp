#include "gridwatch/grid/case_file.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "gridwatch/common/error.hpp"
#include "gridwatch/common/keytree.hpp"

namespace gridwatch::grid {

Network parse_case(std::string_view text) {
  const auto doc = KeyTree::parse(text);
  doc.reject_unknown({"system", "prosumers", "lines"});

  const auto system = doc.at("system");
  system.reject_unknown({"base_mva", "slack"});
  const double base_mva = system.at("base_mva").number();
  std::optional<ProsumerId> named_slack;
  if (auto s = system.find("slack")) named_slack = ProsumerId{s->integer()};

  std::vector<Prosumer> prosumers;
  std::set<ProsumerId> slack_ids;
  for (const auto& node : doc.at("prosumers").items()) {
    node.reject_unknown({"id", "c2", "c1", "c0", "p_min", "p_max", "q_min", "q_max", "v_min",
                         "v_max", "load_p", "load_q", "slack"});
    Prosumer p;
    p.id = ProsumerId{node.at("id").integer()};
    p.cost = {node.number_or("c2", 0.0), node.number_or("c1", 0.0), node.number_or("c0", 0.0)};
    p.p_mw = {node.number_or("p_min", 0.0), node.number_or("p_max", 0.0)};
    p.q_mvar = {node.number_or("q_min", 0.0), node.number_or("q_max", 0.0)};
    p.v_pu = {node.number_or("v_min", 0.9), node.number_or("v_max", 1.1)};
    for (const auto& [b, lo, hi] : {std::tuple{p.p_mw, "p_min", "p_max"}, std::tuple{p.q_mvar, "q_min", "q_max"},
                                     std::tuple{p.v_pu, "v_min", "v_max"}}) {
      if (b.min > b.max) {
        throw ValidationError(node.path() + "." + lo, std::string("exceeds ") + hi);
      }
    }
    p.load_p_mw = node.number_or("load_p", 0.0);
    p.load_q_mvar = node.number_or("load_q", 0.0);
    if (auto s = node.find("slack"); s && s->boolean()) slack_ids.insert(p.id);
    prosumers.push_back(p);
  }
  if (named_slack) {
    bool found = false;
    for (const auto& p : prosumers) found = found || p.id == *named_slack;
    if (!found) throw ValidationError("system.slack", "unknown prosumer " + to_string(*named_slack));
    slack_ids.insert(*named_slack);
  }
  if (slack_ids.size() > 1) throw ValidationError("system.slack", "multiple slack buses");
  for (auto& p : prosumers) p.is_slack = slack_ids.count(p.id) > 0;

  std::vector<TieLine> lines;
  for (const auto& node : doc.at("lines").items()) {
    node.reject_unknown({"from", "to", "g", "b"});
    lines.push_back(TieLine{ProsumerId{node.at("from").integer()},
                            ProsumerId{node.at("to").integer()},
                            {node.number_or("g", 0.0), node.number_or("b", 0.0)}});
  }
  return Network::create(base_mva, std::move(prosumers), std::move(lines));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Network load_case(const std::filesystem::path& path) {
  try {
    return parse_case(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.filename().string() + ":" + e.where(), e.message());
  }
}

}  // namespace gridwatch::grid
