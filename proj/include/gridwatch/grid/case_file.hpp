#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gridwatch/grid/network.hpp"

namespace gridwatch::grid {

// Case documents have three sections:
//
//   system:    { base_mva, slack }
//   prosumers: [ { id, c2, c1, c0, p_min, p_max, q_min, q_max, v_min, v_max,
//                  load_p, load_q, slack? } ]
//   lines:     [ { from, to, g, b } ]
//
// Powers are MW / MVAr, admittances per unit on base_mva. The slack may be named
// in `system.slack`, flagged per prosumer, or both; exactly one must result.
Network parse_case(std::string_view text);
Network load_case(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace gridwatch::grid
