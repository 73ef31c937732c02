#pragma once

#include "expflow/error.hpp"

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace expflow {

enum class NodeKind { scalar, sequence, mapping };

// Scalars keep their original lexical form; numbers are never converted to
// binary floats so digests stay stable across platforms.
enum class ScalarType { string, number, boolean, null };

class ObjectNode;
using NodePtr = std::shared_ptr<ObjectNode>;

class ObjectNode {
public:
    NodeKind kind = NodeKind::scalar;
    std::string type_tag; // empty = untyped; only legal on mappings
    SourceSpan span;

    // scalar
    ScalarType scalar_type = ScalarType::null;
    std::string scalar_value; // lexical form ("0.1", "true", "hello")

    // sequence
    std::vector<NodePtr> items;

    // mapping: declaration order preserved
    std::vector<std::pair<std::string, NodePtr>> entries;

    static NodePtr make_scalar(ScalarType t, std::string value, SourceSpan span = {});
    static NodePtr make_sequence(SourceSpan span = {});
    static NodePtr make_mapping(SourceSpan span = {});

    bool is_scalar() const { return kind == NodeKind::scalar; }
    bool is_sequence() const { return kind == NodeKind::sequence; }
    bool is_mapping() const { return kind == NodeKind::mapping; }

    const NodePtr* find(const std::string& key) const;
    NodePtr* find(const std::string& key);
    void set(const std::string& key, NodePtr value);

    NodePtr clone() const;

    // Stringification used by interpolation and canonical manifests.
    // Mapping/sequence nodes have no string form.
    std::string to_string() const;
};

bool structurally_equal(const ObjectNode& a, const ObjectNode& b);

struct SpecDocument {
    // Declaration order preserved and observable.
    std::vector<std::pair<std::string, NodePtr>> objects;
    std::string source_path;
    std::string format_version = "1";

    const NodePtr* find(const std::string& name) const;
};

// Canonical block-style emission; parse(serialize(doc)) is structurally
// equal to doc.
std::string serialize(const SpecDocument& doc);
std::string serialize(const ObjectNode& node, int indent = 0);

bool valid_object_name(const std::string& name);

// How an unquoted scalar token reads: number, boolean, null or plain string.
ScalarType classify_plain_scalar(const std::string& text);

} // namespace expflow
