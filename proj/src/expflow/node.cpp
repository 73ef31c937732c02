#include "expflow/node.hpp"

#include <algorithm>
#include <sstream>

namespace expflow {

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_name: return "DuplicateNameError";
    case Errc::unknown_reference: return "UnknownReferenceError";
    case Errc::cycle: return "CycleError";
    case Errc::unknown_env: return "UnknownEnvError";
    case Errc::type_error: return "TypeError";
    case Errc::duplicate_type: return "DuplicateTypeError";
    case Errc::manifest_format: return "ManifestFormatError";
    case Errc::unknown_behavior_binding: return "UnknownBehaviorBindingError";
    case Errc::missing_binding: return "MissingBindingError";
    case Errc::spawn_failed: return "SpawnError";
    case Errc::env_prepare_failed: return "EnvPrepareError";
    case Errc::missing_input: return "MissingInputError";
    case Errc::not_found: return "NotFoundError";
    case Errc::io_error: return "IoError";
    case Errc::multiple_producers: return "MultipleProducersError";
    case Errc::invalid_stage: return "InvalidStageError";
    case Errc::unknown_stage_ref: return "UnknownStageRefError";
    case Errc::unknown_pipeline: return "UnknownPipelineError";
    case Errc::pipeline_mismatch: return "PipelineMismatchError";
    case Errc::service_start_failed: return "ServiceStartError";
    case Errc::invalid_metric: return "InvalidMetricError";
    case Errc::dest_not_empty: return "DestNotEmptyError";
    case Errc::unknown_variable: return "UnknownVariableError";
    case Errc::workspace_locked: return "WorkspaceLockedError";
    case Errc::usage: return "UsageError";
    }
    return "Error";
}

NodePtr ObjectNode::make_scalar(ScalarType t, std::string value, SourceSpan span) {
    auto n = std::make_shared<ObjectNode>();
    n->kind = NodeKind::scalar;
    n->scalar_type = t;
    n->scalar_value = std::move(value);
    n->span = span;
    return n;
}

NodePtr ObjectNode::make_sequence(SourceSpan span) {
    auto n = std::make_shared<ObjectNode>();
    n->kind = NodeKind::sequence;
    n->span = span;
    return n;
}

NodePtr ObjectNode::make_mapping(SourceSpan span) {
    auto n = std::make_shared<ObjectNode>();
    n->kind = NodeKind::mapping;
    n->span = span;
    return n;
}

const NodePtr* ObjectNode::find(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return &v;
    return nullptr;
}

NodePtr* ObjectNode::find(const std::string& key) {
    for (auto& [k, v] : entries)
        if (k == key) return &v;
    return nullptr;
}

void ObjectNode::set(const std::string& key, NodePtr value) {
    for (auto& [k, v] : entries) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries.emplace_back(key, std::move(value));
}

NodePtr ObjectNode::clone() const {
    auto n = std::make_shared<ObjectNode>();
    n->kind = kind;
    n->type_tag = type_tag;
    n->span = span;
    n->scalar_type = scalar_type;
    n->scalar_value = scalar_value;
    n->items.reserve(items.size());
    for (const auto& item : items)
        n->items.push_back(item->clone());
    n->entries.reserve(entries.size());
    for (const auto& [k, v] : entries)
        n->entries.emplace_back(k, v->clone());
    return n;
}

std::string ObjectNode::to_string() const {
    switch (scalar_type) {
    case ScalarType::null: return "null";
    case ScalarType::boolean:
    case ScalarType::number:
    case ScalarType::string: return scalar_value;
    }
    return scalar_value;
}

bool structurally_equal(const ObjectNode& a, const ObjectNode& b) {
    if (a.kind != b.kind || a.type_tag != b.type_tag) return false;
    switch (a.kind) {
    case NodeKind::scalar:
        return a.scalar_type == b.scalar_type && a.scalar_value == b.scalar_value;
    case NodeKind::sequence:
        if (a.items.size() != b.items.size()) return false;
        for (size_t i = 0; i < a.items.size(); ++i)
            if (!structurally_equal(*a.items[i], *b.items[i])) return false;
        return true;
    case NodeKind::mapping:
        if (a.entries.size() != b.entries.size()) return false;
        for (size_t i = 0; i < a.entries.size(); ++i) {
            if (a.entries[i].first != b.entries[i].first) return false;
            if (!structurally_equal(*a.entries[i].second, *b.entries[i].second))
                return false;
        }
        return true;
    }
    return false;
}

const NodePtr* SpecDocument::find(const std::string& name) const {
    for (const auto& [k, v] : objects)
        if (k == name) return &v;
    return nullptr;
}

bool valid_object_name(const std::string& name) {
    if (name.empty()) return false;
    char c0 = name[0];
    if (!(std::isalpha(static_cast<unsigned char>(c0)) || c0 == '_')) return false;
    return std::all_of(name.begin() + 1, name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
    });
}

namespace {

bool plain_scalar_safe(const std::string& s) {
    if (s.empty()) return false;
    char c0 = s[0];
    if (std::string("#!&*-?:{}[],\"' \t@`|>%").find(c0) != std::string::npos)
        return false;
    for (size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\n' || c == '\t' || c == '#' || c == '{' || c == '}' ||
            c == '[' || c == ']' || c == ',')
            return false;
        if (c == ':' && (i + 1 == s.size() || s[i + 1] == ' ')) return false;
    }
    if (s.back() == ' ') return false;
    // Do not let a plain string re-parse as a number/bool/null.
    static const char* reserved[] = {"true", "false", "null", "~"};
    for (const char* r : reserved)
        if (s == r) return false;
    return true;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default: out += c;
        }
    }
    out += '"';
    return out;
}

} // namespace

ScalarType classify_plain_scalar(const std::string& s) {
    if (s == "null" || s == "~" || s.empty()) return ScalarType::null;
    if (s == "true" || s == "false") return ScalarType::boolean;
    size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    bool digits = false, dot = false, exp = false;
    for (; i < s.size(); ++i) {
        char c = s[i];
        if (std::isdigit(static_cast<unsigned char>(c))) {
            digits = true;
        } else if (c == '.' && !dot && !exp) {
            dot = true;
        } else if ((c == 'e' || c == 'E') && digits && !exp) {
            exp = true;
            digits = false;
            if (i + 1 < s.size() && (s[i + 1] == '+' || s[i + 1] == '-')) ++i;
        } else {
            return ScalarType::string;
        }
    }
    return digits ? ScalarType::number : ScalarType::string;
}

namespace {

std::string scalar_text(const ObjectNode& n) {
    switch (n.scalar_type) {
    case ScalarType::null: return "null";
    case ScalarType::boolean:
    case ScalarType::number: return n.scalar_value;
    case ScalarType::string:
        if (plain_scalar_safe(n.scalar_value) &&
            classify_plain_scalar(n.scalar_value) == ScalarType::string)
            return n.scalar_value;
        return quote(n.scalar_value);
    }
    return "null";
}

void emit(std::ostream& os, const ObjectNode& n, int indent) {
    std::string pad(static_cast<size_t>(indent) * 2, ' ');
    switch (n.kind) {
    case NodeKind::scalar:
        os << scalar_text(n);
        break;
    case NodeKind::sequence:
        if (n.items.empty()) {
            os << "[]";
            break;
        }
        for (const auto& item : n.items) {
            os << '\n' << pad << '-';
            if (item->is_scalar()) {
                os << ' ' << scalar_text(*item);
            } else if (item->is_sequence() && item->items.empty()) {
                os << " []";
            } else if (item->is_mapping() && item->entries.empty()) {
                os << ' ';
                if (!item->type_tag.empty()) os << '!' << item->type_tag << ' ';
                os << "{}";
            } else if (item->is_mapping() && item->type_tag.empty()) {
                // compact mapping: first entry folded onto the dash line
                std::ostringstream sub;
                emit(sub, *item, indent + 1);
                std::string text = sub.str();
                text.erase(0, pad.size() + 3);
                os << ' ' << text;
            } else {
                // tagged mapping or nested sequence: block under the dash
                if (!item->type_tag.empty()) os << " !" << item->type_tag;
                emit(os, *item, indent + 1);
            }
        }
        break;
    case NodeKind::mapping:
        if (n.entries.empty()) {
            os << "{}";
            break;
        }
        for (const auto& [k, v] : n.entries) {
            os << '\n' << pad << k << ':';
            if (!v->type_tag.empty()) os << " !" << v->type_tag;
            if (v->is_scalar()) {
                os << ' ';
                emit(os, *v, indent + 1);
            } else if ((v->is_sequence() && v->items.empty()) ||
                       (v->is_mapping() && v->entries.empty())) {
                os << ' ';
                emit(os, *v, indent + 1);
            } else {
                emit(os, *v, indent + 1);
            }
        }
        break;
    }
}

} // namespace

std::string serialize(const ObjectNode& node, int indent) {
    std::ostringstream os;
    emit(os, node, indent);
    return os.str();
}

std::string serialize(const SpecDocument& doc) {
    std::ostringstream os;
    for (const auto& [name, node] : doc.objects) {
        os << name << ':';
        if (!node->type_tag.empty()) os << " !" << node->type_tag;
        if (node->is_scalar() || (node->is_sequence() && node->items.empty()) ||
            (node->is_mapping() && node->entries.empty())) {
            os << ' ' << serialize(*node, 1);
        } else {
            os << serialize(*node, 1);
        }
        os << '\n';
    }
    return os.str();
}

} // namespace expflow
