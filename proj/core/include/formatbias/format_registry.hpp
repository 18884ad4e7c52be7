#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "formatbias/types.hpp"

namespace formatbias {

/// All 15 format specs in registry order (MCQ, Wrapping, List, Mapping).
const std::vector<FormatSpec>& all_formats();

/// Returns nullptr when the id is not registered.
const FormatSpec* find_format(std::string_view id);

/// Throws UnknownFormatError for unregistered ids.
const FormatSpec& get_format(std::string_view id);

std::vector<FormatSpec> list_formats(std::optional<Category> category = {});

/// Registry contents as a JSON document (id -> fields) so external tools
/// can pin the byte-exact tokens.
std::string registry_json();

}  // namespace formatbias
