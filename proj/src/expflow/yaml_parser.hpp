#pragma once

#include "expflow/node.hpp"

#include <string>

namespace expflow {

// Parses the experiment specification grammar: block mappings and sequences,
// single-line flow collections, `!Name` type tags on mappings, plain and
// quoted scalars, `#` comments. Anchors, aliases and multi-document streams
// are rejected. Indentation is spaces only.
//
// Throws Error(Errc::parse_error) with line/column, or
// Error(Errc::duplicate_name) for repeated top-level names.
SpecDocument parse_spec(const std::string& text, const std::string& source_path = "");

} // namespace expflow
