#pragma once

#include "fform/pose.hpp"

#include <istream>
#include <string_view>
#include <vector>

namespace fform {

/// One annotation record (a JSON object per line, see docs/ego_group_format.md)
/// to a Scene with truth. Throws ParseError / ValidationError.
Scene convert_egogroup_record(std::string_view line, std::size_t line_number = 1);

std::vector<Scene> convert_egogroup(std::istream& in);

} // namespace fform
