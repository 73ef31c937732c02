#include "expflow/yaml_parser.hpp"

#include <cctype>
#include <sstream>
#include <vector>

namespace expflow {
namespace {

struct Line {
    int number = 0;  // 1-based
    int indent = 0;  // leading spaces
    std::string content; // comment-stripped, no leading indent, no trailing ws
};

[[noreturn]] void fail(int line, int col, const std::string& msg) {
    std::ostringstream os;
    os << msg;
    throw Error(Errc::parse_error, os.str(), SourceSpan{line, col, line, col});
}

// Strips a trailing comment. A '#' starts a comment at the beginning of the
// content or when preceded by whitespace, outside of quotes.
std::string strip_comment(const std::string& s) {
    char in_quote = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (in_quote) {
            if (in_quote == '"' && c == '\\') {
                ++i;
            } else if (c == in_quote) {
                in_quote = 0;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            in_quote = c;
        } else if (c == '#' && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t')) {
            return s.substr(0, i);
        }
    }
    return s;
}

std::string rtrim(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    return s;
}

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> out;
    int number = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string raw = text.substr(pos, nl == std::string::npos ? std::string::npos
                                                                   : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++number;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        int indent = 0;
        size_t i = 0;
        for (; i < raw.size() && (raw[i] == ' ' || raw[i] == '\t'); ++i) {
            if (raw[i] == '\t')
                fail(number, static_cast<int>(i) + 1,
                     "tab character in indentation");
            ++indent;
        }
        std::string content = rtrim(strip_comment(raw.substr(i)));
        if (content.empty()) continue;
        if (content == "---" || content == "...")
            fail(number, indent + 1, "multi-document streams are not supported");
        out.push_back(Line{number, indent, content});
        if (nl == std::string::npos) break;
    }
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<Line> lines) : lines_(std::move(lines)) {}

    SpecDocument parse_document(const std::string& source_path) {
        SpecDocument doc;
        doc.source_path = source_path;
        while (pos_ < lines_.size()) {
            const Line& ln = lines_[pos_];
            if (ln.indent != 0)
                fail(ln.number, ln.indent + 1, "unexpected indentation at top level");
            auto [key, value, key_col] = parse_entry(ln, 0);
            if (key == "format_version" && value->is_scalar()) {
                doc.format_version = value->scalar_value;
                continue;
            }
            if (!valid_object_name(key))
                fail(ln.number, key_col, "invalid object name '" + key + "'");
            if (doc.find(key))
                throw Error(Errc::duplicate_name,
                            "duplicate top-level name '" + key + "'",
                            SourceSpan{ln.number, key_col, ln.number, key_col});
            doc.objects.emplace_back(key, value);
        }
        return doc;
    }

private:
    std::vector<Line> lines_;
    size_t pos_ = 0;

    // Parses one `key: value` entry whose key line is lines_[pos_]; advances
    // past the entry including any nested block. Returns key, value, key col.
    // consume_line is false when the entry text came from a dash line that
    // was already consumed (compact mappings).
    std::tuple<std::string, NodePtr, int> parse_entry(const Line& ln, int indent,
                                                      bool consume_line = true) {
        const std::string& s = ln.content;
        size_t colon = find_key_colon(s, ln.number, ln.indent);
        std::string key = rtrim(s.substr(0, colon));
        if (key.empty())
            fail(ln.number, ln.indent + 1, "empty mapping key");
        if (key[0] == '"' || key[0] == '\'') {
            size_t end = 0;
            key = parse_quoted(key, 0, &end, ln.number, ln.indent + 1);
        }
        std::string rest = s.substr(colon + 1);
        size_t skip = 0;
        while (skip < rest.size() && rest[skip] == ' ') ++skip;
        rest = rest.substr(skip);
        if (consume_line) ++pos_;
        NodePtr value = parse_value(rest, ln, indent,
                                    ln.indent + static_cast<int>(colon) + 2);
        return {key, value, ln.indent + 1};
    }

    // Finds the colon terminating the key (outside quotes), requiring it to
    // be followed by space or end of line.
    size_t find_key_colon(const std::string& s, int line, int indent) {
        char in_quote = 0;
        for (size_t i = 0; i < s.size(); ++i) {
            char c = s[i];
            if (in_quote) {
                if (in_quote == '"' && c == '\\') ++i;
                else if (c == in_quote) in_quote = 0;
                continue;
            }
            if (c == '"' || c == '\'') {
                in_quote = c;
            } else if (c == ':' && (i + 1 == s.size() || s[i + 1] == ' ')) {
                return i;
            }
        }
        fail(line, indent + 1, "expected 'key: value' mapping entry");
    }

    // Parses the value part of a mapping entry or sequence item. `rest` is
    // the text after the key (may be empty -> nested block or null).
    // `owner` is the line carrying the key/dash; nested blocks must be
    // indented deeper than owner.indent.
    NodePtr parse_value(const std::string& rest, const Line& owner, int indent,
                        int value_col) {
        if (rest.empty()) {
            // Nested block on following lines, or null.
            if (pos_ < lines_.size() && lines_[pos_].indent > owner.indent)
                return parse_block(lines_[pos_].indent);
            return ObjectNode::make_scalar(ScalarType::null, "",
                                           span_of(owner, value_col));
        }
        if (rest[0] == '!') {
            size_t i = 1;
            while (i < rest.size() && rest[i] != ' ') ++i;
            std::string tag = rest.substr(1, i - 1);
            if (tag.empty() || !valid_object_name(tag))
                fail(owner.number, value_col, "invalid type tag");
            while (i < rest.size() && rest[i] == ' ') ++i;
            std::string after = rest.substr(i);
            NodePtr node;
            if (after.empty()) {
                if (pos_ < lines_.size() && lines_[pos_].indent > owner.indent) {
                    node = parse_block(lines_[pos_].indent);
                } else {
                    node = ObjectNode::make_mapping(span_of(owner, value_col));
                }
            } else {
                size_t p = 0;
                node = parse_flow(after, p, owner, value_col + static_cast<int>(i));
                if (p != after.size())
                    fail(owner.number, value_col, "trailing characters after flow value");
            }
            if (!node->is_mapping())
                fail(owner.number, value_col,
                     "type tag '!" + tag + "' requires a mapping value");
            node->type_tag = tag;
            return node;
        }
        if (rest[0] == '&' || rest[0] == '*')
            fail(owner.number, value_col, "anchors and aliases are not supported");
        if (rest[0] == '{' || rest[0] == '[') {
            size_t p = 0;
            NodePtr node = parse_flow(rest, p, owner, value_col);
            if (p != rest.size())
                fail(owner.number, value_col, "trailing characters after flow value");
            return node;
        }
        if (rest[0] == '|' || rest[0] == '>')
            fail(owner.number, value_col, "block scalars are not supported");
        if (rest == "-" || rest.rfind("- ", 0) == 0)
            fail(owner.number, value_col,
                 "nested sequence entries must start on their own line");
        return parse_scalar(rest, owner, value_col);
    }

    NodePtr parse_block(int indent) {
        const Line& first = lines_[pos_];
        if (first.content[0] == '-' &&
            (first.content.size() == 1 || first.content[1] == ' ')) {
            return parse_block_sequence(indent);
        }
        return parse_block_mapping(indent);
    }

    NodePtr parse_block_mapping(int indent) {
        NodePtr node = ObjectNode::make_mapping(
            SourceSpan{lines_[pos_].number, indent + 1, 0, 0});
        while (pos_ < lines_.size()) {
            const Line& ln = lines_[pos_];
            if (ln.indent < indent) break;
            if (ln.indent > indent)
                fail(ln.number, ln.indent + 1, "unexpected indentation");
            if (ln.content[0] == '-' &&
                (ln.content.size() == 1 || ln.content[1] == ' '))
                fail(ln.number, ln.indent + 1,
                     "sequence entry in mapping context");
            auto [key, value, key_col] = parse_entry(ln, indent);
            if (node->find(key))
                fail(ln.number, key_col, "duplicate mapping key '" + key + "'");
            node->entries.emplace_back(key, value);
        }
        return node;
    }

    NodePtr parse_block_sequence(int indent) {
        NodePtr node = ObjectNode::make_sequence(
            SourceSpan{lines_[pos_].number, indent + 1, 0, 0});
        while (pos_ < lines_.size()) {
            const Line& ln = lines_[pos_];
            if (ln.indent < indent) break;
            if (ln.indent > indent)
                fail(ln.number, ln.indent + 1, "unexpected indentation");
            if (!(ln.content[0] == '-' &&
                  (ln.content.size() == 1 || ln.content[1] == ' ')))
                fail(ln.number, ln.indent + 1, "expected '-' sequence entry");
            std::string rest = ln.content.size() > 1 ? ln.content.substr(2) : "";
            size_t skip = 0;
            while (skip < rest.size() && rest[skip] == ' ') ++skip;
            rest = rest.substr(skip);
            int item_col = ln.indent + 3 + static_cast<int>(skip);
            ++pos_;
            if (!rest.empty() && is_mapping_entry_start(rest)) {
                // Compact mapping: first entry shares the dash line, further
                // entries are indented to the item column.
                node->items.push_back(
                    parse_compact_mapping(rest, ln, item_col - 1));
            } else {
                node->items.push_back(parse_value(rest, ln, indent, item_col));
            }
        }
        return node;
    }

    NodePtr parse_compact_mapping(const std::string& first, const Line& owner,
                                  int indent) {
        NodePtr node = ObjectNode::make_mapping(span_of(owner, indent + 1));
        Line virt{owner.number, indent, first};
        auto [key, value, key_col] = parse_entry(virt, indent, false);
        (void)key_col;
        node->entries.emplace_back(key, value);
        while (pos_ < lines_.size()) {
            const Line& ln = lines_[pos_];
            if (ln.indent != indent) break;
            if (ln.content[0] == '-' &&
                (ln.content.size() == 1 || ln.content[1] == ' '))
                break;
            auto [k, v, kc] = parse_entry(ln, indent);
            if (node->find(k))
                fail(ln.number, kc, "duplicate mapping key '" + k + "'");
            node->entries.emplace_back(k, v);
        }
        return node;
    }

    static bool is_mapping_entry_start(const std::string& s) {
        char in_quote = 0;
        for (size_t i = 0; i < s.size(); ++i) {
            char c = s[i];
            if (in_quote) {
                if (in_quote == '"' && c == '\\') ++i;
                else if (c == in_quote) in_quote = 0;
                continue;
            }
            if (c == '"' || c == '\'') in_quote = c;
            else if (c == '{' || c == '[') return false;
            else if (c == ':' && (i + 1 == s.size() || s[i + 1] == ' ')) return true;
        }
        return false;
    }

    NodePtr parse_flow(const std::string& s, size_t& p, const Line& owner,
                       int base_col) {
        skip_spaces(s, p);
        if (p >= s.size())
            fail(owner.number, base_col, "unterminated flow value");
        int col = base_col + static_cast<int>(p);
        if (s[p] == '{') {
            ++p;
            NodePtr node = ObjectNode::make_mapping(span_of(owner, col));
            skip_spaces(s, p);
            if (p < s.size() && s[p] == '}') {
                ++p;
                return node;
            }
            while (true) {
                skip_spaces(s, p);
                size_t key_start = p;
                while (p < s.size() && s[p] != ':' ) ++p;
                if (p >= s.size())
                    fail(owner.number, col, "unterminated flow mapping");
                std::string key = rtrim(s.substr(key_start, p - key_start));
                ++p; // ':'
                if (key.empty())
                    fail(owner.number, base_col + static_cast<int>(key_start) + 1,
                         "empty flow mapping key");
                if (key[0] == '"' || key[0] == '\'') {
                    size_t end = 0;
                    key = parse_quoted(key, 0, &end, owner.number, col);
                }
                NodePtr value = parse_flow_value(s, p, owner, base_col);
                if (node->find(key))
                    fail(owner.number, col, "duplicate mapping key '" + key + "'");
                node->entries.emplace_back(key, value);
                skip_spaces(s, p);
                if (p < s.size() && s[p] == ',') {
                    ++p;
                    continue;
                }
                if (p < s.size() && s[p] == '}') {
                    ++p;
                    return node;
                }
                fail(owner.number, base_col + static_cast<int>(p),
                     "expected ',' or '}' in flow mapping");
            }
        }
        if (s[p] == '[') {
            ++p;
            NodePtr node = ObjectNode::make_sequence(span_of(owner, col));
            skip_spaces(s, p);
            if (p < s.size() && s[p] == ']') {
                ++p;
                return node;
            }
            while (true) {
                node->items.push_back(parse_flow_value(s, p, owner, base_col));
                skip_spaces(s, p);
                if (p < s.size() && s[p] == ',') {
                    ++p;
                    continue;
                }
                if (p < s.size() && s[p] == ']') {
                    ++p;
                    return node;
                }
                fail(owner.number, base_col + static_cast<int>(p),
                     "expected ',' or ']' in flow sequence");
            }
        }
        fail(owner.number, col, "expected flow collection");
    }

    NodePtr parse_flow_value(const std::string& s, size_t& p, const Line& owner,
                             int base_col) {
        skip_spaces(s, p);
        if (p >= s.size())
            fail(owner.number, base_col, "unterminated flow value");
        int col = base_col + static_cast<int>(p);
        char c = s[p];
        if (c == '{' || c == '[') return parse_flow(s, p, owner, base_col);
        if (c == '&' || c == '*')
            fail(owner.number, col, "anchors and aliases are not supported");
        if (c == '!') {
            size_t i = p + 1;
            while (i < s.size() && s[i] != ' ' && s[i] != '{') ++i;
            std::string tag = s.substr(p + 1, i - p - 1);
            if (tag.empty() || !valid_object_name(tag))
                fail(owner.number, col, "invalid type tag");
            p = i;
            skip_spaces(s, p);
            if (p >= s.size() || s[p] != '{')
                fail(owner.number, col,
                     "type tag '!" + tag + "' requires a mapping value");
            NodePtr node = parse_flow(s, p, owner, base_col);
            node->type_tag = tag;
            return node;
        }
        if (c == '"' || c == '\'') {
            size_t end = 0;
            std::string v = parse_quoted(s, p, &end, owner.number, col);
            p = end;
            return ObjectNode::make_scalar(ScalarType::string, v, span_of(owner, col));
        }
        size_t start = p;
        while (p < s.size() && s[p] != ',' && s[p] != '}' && s[p] != ']') ++p;
        std::string token = rtrim(s.substr(start, p - start));
        ScalarType t = classify_plain_scalar(token);
        return ObjectNode::make_scalar(t, t == ScalarType::null ? "" : token,
                                       span_of(owner, col));
    }

    NodePtr parse_scalar(const std::string& s, const Line& owner, int col) {
        if (s[0] == '"' || s[0] == '\'') {
            size_t end = 0;
            std::string v = parse_quoted(s, 0, &end, owner.number, col);
            if (end != s.size())
                fail(owner.number, col + static_cast<int>(end),
                     "trailing characters after quoted scalar");
            return ObjectNode::make_scalar(ScalarType::string, v, span_of(owner, col));
        }
        ScalarType t = classify_plain_scalar(s);
        return ObjectNode::make_scalar(t, t == ScalarType::null ? "" : s,
                                       span_of(owner, col));
    }

    std::string parse_quoted(const std::string& s, size_t start, size_t* end,
                             int line, int col) {
        char q = s[start];
        std::string out;
        size_t i = start + 1;
        while (i < s.size()) {
            char c = s[i];
            if (q == '"' && c == '\\') {
                if (i + 1 >= s.size()) fail(line, col, "bad escape sequence");
                char e = s[i + 1];
                switch (e) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(line, col, "bad escape sequence");
                }
                i += 2;
                continue;
            }
            if (c == q) {
                if (q == '\'' && i + 1 < s.size() && s[i + 1] == '\'') {
                    out += '\'';
                    i += 2;
                    continue;
                }
                *end = i + 1;
                return out;
            }
            out += c;
            ++i;
        }
        fail(line, col, "unterminated quoted scalar");
    }

    static void skip_spaces(const std::string& s, size_t& p) {
        while (p < s.size() && s[p] == ' ') ++p;
    }

    static SourceSpan span_of(const Line& ln, int col) {
        return SourceSpan{ln.number, col, ln.number, col};
    }
};

} // namespace

SpecDocument parse_spec(const std::string& text, const std::string& source_path) {
    Parser parser(split_lines(text));
    return parser.parse_document(source_path);
}

} // namespace expflow
