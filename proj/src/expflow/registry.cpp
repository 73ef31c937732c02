#include "expflow/registry.hpp"

#include "expflow/expr.hpp"
#include "expflow/subprocess.hpp"
#include "expflow/yaml_parser.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace expflow {

const char* behavior_kind_name(BehaviorKind kind) {
    switch (kind) {
    case BehaviorKind::stage_executor: return "stage-executor";
    case BehaviorKind::pipeline: return "pipeline";
    case BehaviorKind::environment: return "environment";
    case BehaviorKind::metrics_logger: return "metrics-logger";
    case BehaviorKind::webhook_notifier: return "webhook-notifier";
    }
    return "?";
}

bool parse_behavior_kind(const std::string& name, BehaviorKind* out) {
    static const std::pair<const char*, BehaviorKind> table[] = {
        {"stage-executor", BehaviorKind::stage_executor},
        {"pipeline", BehaviorKind::pipeline},
        {"environment", BehaviorKind::environment},
        {"metrics-logger", BehaviorKind::metrics_logger},
        {"webhook-notifier", BehaviorKind::webhook_notifier},
    };
    for (const auto& [n, k] : table) {
        if (name == n) {
            if (out) *out = k;
            return true;
        }
    }
    return false;
}

TypeRegistry TypeRegistry::with_builtins() {
    TypeRegistry reg;
    TypeDescriptor stage;
    stage.name = "Stage";
    stage.required_fields = {{"script", NodeKind::sequence}};
    stage.optional_fields = {{"inputs", NodeKind::sequence},
                             {"outputs", NodeKind::sequence},
                             {"params", NodeKind::mapping},
                             {"env", NodeKind::mapping},
                             {"always_run", NodeKind::scalar}};
    stage.behavior_binding = BehaviorKind::stage_executor;

    TypeDescriptor pipeline;
    pipeline.name = "Pipeline";
    pipeline.required_fields = {{"stages", NodeKind::sequence}};
    pipeline.optional_fields = {{"services", NodeKind::sequence}};
    pipeline.behavior_binding = BehaviorKind::pipeline;

    TypeDescriptor env;
    env.name = "Env";
    env.optional_fields = {{"prepare", NodeKind::sequence},
                           {"vars", NodeKind::mapping}};
    env.behavior_binding = BehaviorKind::environment;

    TypeDescriptor metrics;
    metrics.name = "MetricsLogger";
    metrics.behavior_binding = BehaviorKind::metrics_logger;

    TypeDescriptor notifier;
    notifier.name = "WebhookNotifier";
    notifier.required_fields = {{"url", NodeKind::scalar}};
    notifier.optional_fields = {{"retry_delay_ms", NodeKind::scalar}};
    notifier.behavior_binding = BehaviorKind::webhook_notifier;

    for (const auto& d : {stage, pipeline, env, metrics, notifier})
        reg.register_type(d, "builtin");
    return reg;
}

void TypeRegistry::register_type(const TypeDescriptor& desc, const std::string& origin) {
    if (desc.name.empty() || !valid_object_name(desc.name))
        throw Error(Errc::manifest_format, "invalid type name '" + desc.name + "'");
    for (const auto& [field, kind] : desc.required_fields) {
        (void)kind;
        if (desc.optional_fields.count(field))
            throw Error(Errc::manifest_format,
                        "type '" + desc.name + "': field '" + field +
                            "' is both required and optional");
    }
    if (descriptors_.count(desc.name))
        throw Error(Errc::duplicate_type,
                    "type '" + desc.name + "' is already registered (origin: " +
                        origin_.at(desc.name) + ")");
    descriptors_[desc.name] = desc;
    origin_[desc.name] = origin;
}

const TypeDescriptor* TypeRegistry::find(const std::string& name) const {
    auto it = descriptors_.find(name);
    return it == descriptors_.end() ? nullptr : &it->second;
}

const std::string* TypeRegistry::origin_of(const std::string& name) const {
    auto it = origin_.find(name);
    return it == origin_.end() ? nullptr : &it->second;
}

std::vector<std::string> TypeRegistry::names() const {
    std::vector<std::string> out;
    out.reserve(descriptors_.size());
    for (const auto& [name, d] : descriptors_)
        out.push_back(name);
    return out;
}

namespace {

[[noreturn]] void manifest_fail(const std::string& path, const std::string& what) {
    throw Error(Errc::manifest_format, path + ": " + what);
}

NodeKind field_kind_from(const std::string& path, const std::string& text) {
    if (text == "scalar") return NodeKind::scalar;
    if (text == "sequence") return NodeKind::sequence;
    if (text == "mapping") return NodeKind::mapping;
    manifest_fail(path, "unknown field kind '" + text + "'");
}

void read_field_map(const std::string& path, const ObjectNode& node,
                    std::map<std::string, NodeKind>* out) {
    if (!node.is_mapping()) manifest_fail(path, "field map must be a mapping");
    for (const auto& [name, kind_node] : node.entries) {
        if (!kind_node->is_scalar())
            manifest_fail(path, "field kind for '" + name + "' must be a scalar");
        (*out)[name] = field_kind_from(path, kind_node->scalar_value);
    }
}

} // namespace

PluginManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::not_found, "manifest not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();

    SpecDocument doc;
    try {
        doc = parse_spec(buf.str(), path);
    } catch (const Error& e) {
        manifest_fail(path, e.what());
    }

    PluginManifest manifest;
    if (const NodePtr* name = doc.find("name"); name && (*name)->is_scalar())
        manifest.name = (*name)->scalar_value;
    if (manifest.name.empty())
        manifest_fail(path, "missing 'name'");

    if (const NodePtr* types = doc.find("types")) {
        if (!(*types)->is_sequence()) manifest_fail(path, "'types' must be a sequence");
        for (const NodePtr& t : (*types)->items) {
            if (!t->is_mapping()) manifest_fail(path, "type entry must be a mapping");
            TypeDescriptor desc;
            if (const NodePtr* n = t->find("name"); n && (*n)->is_scalar())
                desc.name = (*n)->scalar_value;
            if (desc.name.empty()) manifest_fail(path, "type entry missing 'name'");
            const NodePtr* binding = t->find("binding");
            if (!binding || !(*binding)->is_scalar())
                manifest_fail(path, "type '" + desc.name + "' missing 'binding'");
            if (!parse_behavior_kind((*binding)->scalar_value, &desc.behavior_binding))
                throw Error(Errc::unknown_behavior_binding,
                            path + ": type '" + desc.name +
                                "' binds to unknown behavior '" +
                                (*binding)->scalar_value + "'");
            if (const NodePtr* req = t->find("required"))
                read_field_map(path, **req, &desc.required_fields);
            if (const NodePtr* opt = t->find("optional"))
                read_field_map(path, **opt, &desc.optional_fields);
            if (const NodePtr* defs = t->find("defaults")) {
                if (!(*defs)->is_mapping())
                    manifest_fail(path, "'defaults' must be a mapping");
                for (const auto& [k, v] : (*defs)->entries) {
                    if (!v->is_scalar())
                        manifest_fail(path, "default for '" + k + "' must be a scalar");
                    desc.defaults[k] = v->scalar_value;
                }
            }
            manifest.types.push_back(std::move(desc));
        }
    }

    if (const NodePtr* adapters = doc.find("adapters")) {
        if (!(*adapters)->is_sequence())
            manifest_fail(path, "'adapters' must be a sequence");
        for (const NodePtr& a : (*adapters)->items) {
            if (!a->is_mapping()) manifest_fail(path, "adapter entry must be a mapping");
            ToolAdapter adapter;
            if (const NodePtr* n = a->find("name"); n && (*n)->is_scalar())
                adapter.name = (*n)->scalar_value;
            if (adapter.name.empty()) manifest_fail(path, "adapter entry missing 'name'");
            const NodePtr* cmd = a->find("command");
            if (!cmd || !(*cmd)->is_sequence() || (*cmd)->items.empty())
                manifest_fail(path, "adapter '" + adapter.name +
                                        "' needs a non-empty 'command' sequence");
            for (const NodePtr& arg : (*cmd)->items) {
                if (!arg->is_scalar())
                    manifest_fail(path, "adapter command elements must be scalars");
                adapter.command_template.push_back(arg->scalar_value);
            }
            if (const NodePtr* codes = a->find("success_codes")) {
                if (!(*codes)->is_sequence() || (*codes)->items.empty())
                    manifest_fail(path, "'success_codes' must be a non-empty sequence");
                adapter.success_codes.clear();
                for (const NodePtr& c : (*codes)->items) {
                    if (!c->is_scalar() || c->scalar_type != ScalarType::number)
                        manifest_fail(path, "'success_codes' entries must be integers");
                    adapter.success_codes.insert(std::stoi(c->scalar_value));
                }
            }
            if (const NodePtr* wd = a->find("working_dir");
                wd && (*wd)->is_scalar())
                adapter.working_dir = (*wd)->scalar_value;
            manifest.adapters.push_back(std::move(adapter));
        }
    }

    return manifest;
}

AdapterResult invoke_adapter(const ToolAdapter& adapter,
                             const std::map<std::string, std::string>& bindings) {
    std::vector<std::string> argv;
    argv.reserve(adapter.command_template.size());
    for (const auto& templ : adapter.command_template) {
        Expression expr = parse_expression(templ);
        std::string arg;
        for (const auto& seg : expr.segments) {
            if (!seg.is_placeholder) {
                arg += seg.literal;
                continue;
            }
            if (seg.path.size() != 1 || seg.path[0].is_index)
                throw Error(Errc::missing_binding,
                            "adapter '" + adapter.name + "': binding '" +
                                seg.path_text + "' must be a plain name");
            auto it = bindings.find(seg.path[0].ident);
            if (it == bindings.end())
                throw Error(Errc::missing_binding,
                            "adapter '" + adapter.name + "': unbound placeholder '" +
                                seg.path_text + "'");
            arg += it->second;
        }
        argv.push_back(std::move(arg));
    }

    AdapterResult result;
    result.exit_code =
        run_capture(argv, adapter.working_dir, {}, &result.out, &result.err);
    result.success = adapter.success_codes.count(result.exit_code) > 0;
    return result;
}

std::string nearest_name(const std::string& name,
                         const std::vector<std::string>& candidates) {
    auto distance = [](const std::string& a, const std::string& b) {
        std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
        for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
        for (size_t i = 1; i <= a.size(); ++i) {
            cur[0] = i;
            for (size_t j = 1; j <= b.size(); ++j) {
                size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
                cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
            }
            std::swap(prev, cur);
        }
        return prev[b.size()];
    };

    std::string best;
    size_t best_dist = 0;
    for (const auto& cand : candidates) {
        size_t d = distance(name, cand);
        if (best.empty() || d < best_dist || (d == best_dist && cand < best)) {
            best = cand;
            best_dist = d;
        }
    }
    return best;
}

} // namespace expflow
