#include "expflow/expr.hpp"

#include <cctype>

namespace expflow {
namespace {

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

[[noreturn]] void fail(const std::string& raw, SourceSpan span, const std::string& what) {
    throw Error(Errc::parse_error, what + " in expression '" + raw + "'", span);
}

std::vector<PathElem> parse_path(const std::string& raw, const std::string& text,
                                 SourceSpan span) {
    std::vector<PathElem> path;
    size_t i = 0;
    while (true) {
        if (i >= text.size() || !ident_start(text[i]))
            fail(raw, span, "expected identifier");
        size_t start = i;
        while (i < text.size() && ident_char(text[i])) ++i;
        path.push_back(PathElem{false, text.substr(start, i - start), 0});
        while (i < text.size() && text[i] == '[') {
            ++i;
            size_t num_start = i;
            while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])))
                ++i;
            if (num_start == i || i >= text.size() || text[i] != ']')
                fail(raw, span, "bad index");
            path.push_back(PathElem{true, "", std::stoul(text.substr(num_start, i - num_start))});
            ++i;
        }
        if (i >= text.size()) break;
        if (text[i] != '.') fail(raw, span, "bad placeholder path");
        ++i;
    }
    return path;
}

} // namespace

Expression parse_expression(const std::string& raw, SourceSpan span) {
    Expression expr;
    expr.raw = raw;
    std::string literal;
    size_t i = 0;
    while (i < raw.size()) {
        char c = raw[i];
        if (c != '$') {
            literal += c;
            ++i;
            continue;
        }
        if (i + 1 < raw.size() && raw[i + 1] == '$') {
            literal += '$';
            i += 2;
            continue;
        }
        if (i + 1 >= raw.size() || raw[i + 1] != '{')
            fail(raw, span, "stray '$' (use '$$' for a literal dollar)");
        size_t close = raw.find('}', i + 2);
        if (close == std::string::npos)
            fail(raw, span, "unterminated '${'");
        if (!literal.empty()) {
            expr.segments.push_back(ExprSegment{false, literal, {}, ""});
            literal.clear();
        }
        std::string path_text = raw.substr(i + 2, close - i - 2);
        ExprSegment seg;
        seg.is_placeholder = true;
        seg.path = parse_path(raw, path_text, span);
        seg.path_text = path_text;
        expr.segments.push_back(std::move(seg));
        i = close + 1;
    }
    if (!literal.empty())
        expr.segments.push_back(ExprSegment{false, literal, {}, ""});
    return expr;
}

} // namespace expflow
