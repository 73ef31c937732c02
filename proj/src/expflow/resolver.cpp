#include "expflow/resolver.hpp"

#include "expflow/expr.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace expflow {
namespace {

// ---- composition -----------------------------------------------------------

// Merge base fields under local ones: local wins, mappings merge one level
// at a time, sequences and scalars replace wholesale.
NodePtr merge_over(const NodePtr& base, const NodePtr& local) {
    if (!base->is_mapping() || !local->is_mapping()) return local;
    NodePtr out = ObjectNode::make_mapping(local->span);
    out->type_tag = local->type_tag.empty() ? base->type_tag : local->type_tag;
    for (const auto& [k, v] : base->entries) {
        if (const NodePtr* lv = local->find(k)) {
            out->entries.emplace_back(k, merge_over(v, *lv));
        } else {
            out->entries.emplace_back(k, v->clone());
        }
    }
    for (const auto& [k, v] : local->entries) {
        if (!out->find(k)) out->entries.emplace_back(k, v->clone());
    }
    return out;
}

class Composer {
public:
    explicit Composer(const SpecDocument& doc) : doc_(doc) {}

    NodePtr expand(const NodePtr& node, std::vector<std::string>& visiting) {
        if (node->is_sequence()) {
            NodePtr out = ObjectNode::make_sequence(node->span);
            out->type_tag = node->type_tag;
            for (const auto& item : node->items)
                out->items.push_back(expand(item, visiting));
            return out;
        }
        if (!node->is_mapping()) return node->clone();

        NodePtr out = ObjectNode::make_mapping(node->span);
        out->type_tag = node->type_tag;
        for (const auto& [k, v] : node->entries)
            if (k != "base") out->entries.emplace_back(k, expand(v, visiting));

        const NodePtr* base_ref = node->find("base");
        if (!base_ref) return out;

        if (!(*base_ref)->is_scalar())
            throw Error(Errc::unknown_reference, "'base' must name a top-level object",
                        (*base_ref)->span);
        const std::string& target = (*base_ref)->scalar_value;
        const NodePtr* base_obj = doc_.find(target);
        if (!base_obj)
            throw Error(Errc::unknown_reference,
                        "'base' references unknown object '" + target + "'",
                        (*base_ref)->span);
        if (std::find(visiting.begin(), visiting.end(), target) != visiting.end()) {
            std::ostringstream os;
            os << "base cycle: ";
            for (const auto& n : visiting) os << n << " -> ";
            os << target;
            throw Error(Errc::cycle, os.str(), (*base_ref)->span);
        }
        visiting.push_back(target);
        NodePtr base_expanded = expand(*base_obj, visiting);
        visiting.pop_back();
        if (!base_expanded->is_mapping())
            throw Error(Errc::unknown_reference,
                        "'base' target '" + target + "' is not a mapping",
                        (*base_ref)->span);
        return merge_over(base_expanded, out);
    }

private:
    const SpecDocument& doc_;
};

// ---- interpolation ---------------------------------------------------------

struct Lookup {
    const NodePtr* node = nullptr;
    bool from_env = false;
    std::string env_value;
};

class Interpolator {
public:
    Interpolator(ResolvedDocument& doc, const std::map<std::string, std::string>& env)
        : doc_(doc), env_(env) {}

    // One pass over every scalar; returns true when anything changed.
    // Placeholders whose target still contains placeholders are deferred.
    bool pass() {
        changed_ = false;
        pending_ = 0;
        for (auto& [name, node] : doc_.objects) {
            self_ = node;
            walk(node);
        }
        return changed_;
    }

    size_t pending() const { return pending_; }
    const SourceSpan& pending_span() const { return pending_span_; }
    const std::string& pending_text() const { return pending_text_; }

private:
    ResolvedDocument& doc_;
    const std::map<std::string, std::string>& env_;
    NodePtr self_;
    bool changed_ = false;
    size_t pending_ = 0;
    // Scalars whose value is final; they are never re-parsed as expressions
    // (an expanded `$$` escape must not read as a stray `$` next pass).
    std::set<const ObjectNode*> done_;
    SourceSpan pending_span_;
    std::string pending_text_;

    void walk(NodePtr& node) {
        switch (node->kind) {
        case NodeKind::scalar:
            if (node->scalar_type == ScalarType::string &&
                may_contain_expression(node->scalar_value) &&
                !done_.count(node.get()))
                interpolate(node);
            break;
        case NodeKind::sequence:
            for (auto& item : node->items) walk(item);
            break;
        case NodeKind::mapping:
            for (auto& [k, v] : node->entries) walk(v);
            break;
        }
    }

    void interpolate(NodePtr& node) {
        Expression expr = parse_expression(node->scalar_value, node->span);
        if (!expr.has_placeholder()) {
            // only `$$` escapes: expand them now
            std::string text;
            for (const auto& seg : expr.segments) text += seg.literal;
            node = ObjectNode::make_scalar(ScalarType::string, text, node->span);
            done_.insert(node.get());
            changed_ = true;
            return;
        }

        // Whole-scalar placeholder keeps the target's scalar type.
        if (expr.segments.size() == 1 && expr.segments[0].is_placeholder) {
            Lookup hit = find(expr.segments[0], node->span);
            if (hit.from_env) {
                node = ObjectNode::make_scalar(ScalarType::string, hit.env_value,
                                               node->span);
                done_.insert(node.get());
                changed_ = true;
                return;
            }
            const NodePtr& target = *hit.node;
            if (!target->is_scalar())
                throw Error(Errc::type_error,
                            "placeholder '${" + expr.segments[0].path_text +
                                "}' resolves to a " +
                                (target->is_mapping() ? "mapping" : "sequence") +
                                " in string position",
                            node->span);
            if (target->scalar_type == ScalarType::string &&
                may_contain_expression(target->scalar_value) &&
                !done_.count(target.get())) {
                defer(node, expr.segments[0].path_text);
                return;
            }
            NodePtr copy = target->clone();
            copy->span = node->span;
            node = copy;
            done_.insert(node.get());
            changed_ = true;
            return;
        }

        std::string text;
        for (const auto& seg : expr.segments) {
            if (!seg.is_placeholder) {
                text += seg.literal;
                continue;
            }
            Lookup hit = find(seg, node->span);
            if (hit.from_env) {
                text += hit.env_value;
                continue;
            }
            const NodePtr& target = *hit.node;
            if (!target->is_scalar())
                throw Error(Errc::type_error,
                            "placeholder '${" + seg.path_text + "}' resolves to a " +
                                (target->is_mapping() ? "mapping" : "sequence") +
                                " in string position",
                            node->span);
            if (target->scalar_type == ScalarType::string &&
                may_contain_expression(target->scalar_value) &&
                !done_.count(target.get())) {
                defer(node, seg.path_text);
                return;
            }
            text += target->to_string();
        }
        node = ObjectNode::make_scalar(ScalarType::string, text, node->span);
        done_.insert(node.get());
        changed_ = true;
    }

    void defer(const NodePtr& node, const std::string& path_text) {
        ++pending_;
        pending_span_ = node->span;
        pending_text_ = path_text;
    }

    Lookup find(const ExprSegment& seg, SourceSpan span) {
        const auto& path = seg.path;
        size_t i = 1;
        const NodePtr* cur = nullptr;
        const std::string& root = path[0].ident;
        if (root == "env") {
            if (path.size() != 2 || path[1].is_index)
                throw Error(Errc::unknown_reference,
                            "'env' takes exactly one variable name: '${" +
                                seg.path_text + "}'",
                            span);
            auto it = env_.find(path[1].ident);
            if (it == env_.end())
                throw Error(Errc::unknown_env,
                            "environment variable '" + path[1].ident + "' is unset",
                            span);
            return Lookup{nullptr, true, it->second};
        }
        if (root == "self") {
            cur = &self_;
        } else {
            cur = doc_.find(root);
            if (!cur)
                throw Error(Errc::unknown_reference,
                            "'${" + seg.path_text + "}' names nothing: no object '" +
                                root + "'",
                            span);
        }
        for (; i < path.size(); ++i) {
            const PathElem& el = path[i];
            if (el.is_index) {
                if (!(*cur)->is_sequence() || el.index >= (*cur)->items.size())
                    throw Error(Errc::unknown_reference,
                                "'${" + seg.path_text + "}' names nothing", span);
                cur = &(*cur)->items[el.index];
            } else {
                if (!(*cur)->is_mapping())
                    throw Error(Errc::unknown_reference,
                                "'${" + seg.path_text + "}' names nothing", span);
                const NodePtr* next = (*cur)->find(el.ident);
                if (!next)
                    throw Error(Errc::unknown_reference,
                                "'${" + seg.path_text + "}' names nothing: no field '" +
                                    el.ident + "'",
                                span);
                cur = next;
            }
        }
        return Lookup{cur, false, ""};
    }
};

} // namespace

ResolvedDocument resolve(const SpecDocument& doc, const TypeRegistry& registry,
                         const std::map<std::string, std::string>& env) {
    (void)registry;
    ResolvedDocument out;
    out.source_path = doc.source_path;
    out.format_version = doc.format_version;

    Composer composer(doc);
    for (const auto& [name, node] : doc.objects) {
        std::vector<std::string> visiting{name};
        out.objects.emplace_back(name, composer.expand(node, visiting));
    }

    Interpolator interp(out, env);
    size_t max_passes = std::max<size_t>(doc.objects.size(), 1);
    for (size_t pass = 0; pass <= max_passes; ++pass) {
        bool changed = interp.pass();
        if (interp.pending() == 0) return out;
        if (!changed || pass == max_passes)
            throw Error(Errc::cycle,
                        "reference cycle: '${" + interp.pending_text() +
                            "}' never resolves",
                        interp.pending_span());
    }
    return out;
}

std::string format_diagnostic(const Diagnostic& d) {
    std::ostringstream os;
    switch (d.severity) {
    case Severity::error: os << "error"; break;
    case Severity::warning: os << "warning"; break;
    case Severity::info: os << "info"; break;
    }
    os << ": " << d.message;
    if (d.span.line > 0) os << " [line " << d.span.line << ", col " << d.span.column << "]";
    return os.str();
}

namespace {

const char* kind_word(NodeKind k) {
    switch (k) {
    case NodeKind::scalar: return "scalar";
    case NodeKind::sequence: return "sequence";
    case NodeKind::mapping: return "mapping";
    }
    return "?";
}

void validate_node(const std::string& where, const NodePtr& node,
                   const TypeRegistry& registry, std::vector<Diagnostic>* out) {
    if (node->is_sequence()) {
        for (size_t i = 0; i < node->items.size(); ++i)
            validate_node(where + "[" + std::to_string(i) + "]", node->items[i],
                          registry, out);
        return;
    }
    if (!node->is_mapping()) return;

    if (!node->type_tag.empty()) {
        const TypeDescriptor* desc = registry.find(node->type_tag);
        if (!desc) {
            std::string suggestion = nearest_name(node->type_tag, registry.names());
            std::string msg = where + ": unknown type tag '" + node->type_tag + "'";
            if (!suggestion.empty()) msg += "; did you mean '" + suggestion + "'?";
            out->push_back(Diagnostic{Severity::error, node->span, msg});
        } else {
            for (const auto& [field, kind] : desc->required_fields) {
                const NodePtr* v = node->find(field);
                if (!v) {
                    out->push_back(Diagnostic{
                        Severity::error, node->span,
                        where + ": missing required field " + field});
                } else if ((*v)->kind != kind) {
                    out->push_back(Diagnostic{
                        Severity::error, (*v)->span,
                        where + ": field '" + field + "' must be a " +
                            kind_word(kind) + ", got " + kind_word((*v)->kind)});
                }
            }
            for (const auto& [field, kind] : desc->optional_fields) {
                const NodePtr* v = node->find(field);
                if (v && (*v)->kind != kind)
                    out->push_back(Diagnostic{
                        Severity::error, (*v)->span,
                        where + ": field '" + field + "' must be a " +
                            kind_word(kind) + ", got " + kind_word((*v)->kind)});
            }
        }
    }
    for (const auto& [k, v] : node->entries)
        validate_node(where + "." + k, v, registry, out);
}

} // namespace

std::vector<Diagnostic> validate(const ResolvedDocument& doc,
                                 const TypeRegistry& registry) {
    std::vector<Diagnostic> out;
    for (const auto& [name, node] : doc.objects)
        validate_node(name, node, registry, &out);
    return out;
}

} // namespace expflow
