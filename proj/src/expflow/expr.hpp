#pragma once

#include "expflow/error.hpp"

#include <string>
#include <vector>

namespace expflow {

// One element of a placeholder path: an identifier or a [n] index.
struct PathElem {
    bool is_index = false;
    std::string ident;
    size_t index = 0;
};

struct ExprSegment {
    bool is_placeholder = false;
    std::string literal;         // when !is_placeholder
    std::vector<PathElem> path;  // when is_placeholder
    std::string path_text;       // original dotted form, for messages
};

struct Expression {
    std::string raw;
    std::vector<ExprSegment> segments;

    bool has_placeholder() const {
        for (const auto& s : segments)
            if (s.is_placeholder) return true;
        return false;
    }
};

// Splits `raw` into literal and `${path}` segments. `$$` is a literal `$`;
// any other `$` not starting a placeholder is a parse error.
Expression parse_expression(const std::string& raw, SourceSpan span = {});

// Cheap pre-check: does the string contain any '$' worth parsing?
inline bool may_contain_expression(const std::string& s) {
    return s.find('$') != std::string::npos;
}

} // namespace expflow
