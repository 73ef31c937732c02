#pragma once

#include "expflow/error.hpp"
#include "expflow/node.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace expflow {

// Closed set of behavior kinds the core knows how to interpret. Plugins bind
// their type tags to one of these; they never load code.
enum class BehaviorKind {
    stage_executor,
    pipeline,
    environment,
    metrics_logger,
    webhook_notifier,
};

const char* behavior_kind_name(BehaviorKind kind);
bool parse_behavior_kind(const std::string& name, BehaviorKind* out);

struct TypeDescriptor {
    std::string name;
    std::map<std::string, NodeKind> required_fields;
    std::map<std::string, NodeKind> optional_fields;
    std::map<std::string, std::string> defaults; // optional scalar defaults
    BehaviorKind behavior_binding = BehaviorKind::stage_executor;
};

class TypeRegistry {
public:
    // Registry with the built-in tags: Stage, Pipeline, Env, MetricsLogger,
    // WebhookNotifier.
    static TypeRegistry with_builtins();

    // Throws DuplicateTypeError when the name is taken (built-ins included)
    // and Errc::manifest_format when required/optional field names overlap.
    void register_type(const TypeDescriptor& desc, const std::string& origin);

    const TypeDescriptor* find(const std::string& name) const;
    const std::string* origin_of(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    std::map<std::string, TypeDescriptor> descriptors_;
    std::map<std::string, std::string> origin_;
};

struct ToolAdapter {
    std::string name;
    std::vector<std::string> command_template; // argv, may contain ${binding}
    std::set<int> success_codes{0};
    std::string working_dir = ".";
};

struct PluginManifest {
    std::string name;
    std::vector<TypeDescriptor> types;
    std::vector<ToolAdapter> adapters;
};

// Parses a plugin.yml. No code is executed at load time.
PluginManifest load_manifest(const std::string& path);

struct AdapterResult {
    int exit_code = -1;
    std::string out;
    std::string err;
    bool success = false;
};

// Interpolates the argv template with `bindings` and spawns the process
// directly (no shell). Throws MissingBindingError before any spawn when a
// placeholder is unbound, SpawnError when the executable cannot be started.
AdapterResult invoke_adapter(const ToolAdapter& adapter,
                             const std::map<std::string, std::string>& bindings);

// Smallest edit distance over candidates; ties resolved lexicographically.
// Empty result when candidates is empty.
std::string nearest_name(const std::string& name,
                         const std::vector<std::string>& candidates);

} // namespace expflow
