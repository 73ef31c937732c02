#include "expflow/graph.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

namespace expflow {

std::string normalize_path(const std::string& path) {
    std::string norm = std::filesystem::path(path).lexically_normal().generic_string();
    while (norm.size() > 1 && norm.back() == '/') norm.pop_back();
    return norm;
}

namespace {

std::vector<std::string> scalar_list(const ObjectNode& node, const std::string& where,
                                     const std::string& field) {
    std::vector<std::string> out;
    if (const NodePtr* seq = node.find(field)) {
        for (const auto& item : (*seq)->items) {
            if (!item->is_scalar())
                throw Error(Errc::invalid_stage,
                            where + ": entries of '" + field + "' must be scalars",
                            item->span);
            out.push_back(item->to_string());
        }
    }
    return out;
}

Stage stage_from(const std::string& name, const ObjectNode& node) {
    Stage stage;
    stage.name = name;
    stage.span = node.span;
    stage.script = scalar_list(node, name, "script");
    for (auto& p : scalar_list(node, name, "inputs")) stage.inputs.push_back(normalize_path(p));
    for (auto& p : scalar_list(node, name, "outputs")) stage.outputs.push_back(normalize_path(p));
    if (const NodePtr* params = node.find("params")) {
        for (const auto& [k, v] : (*params)->entries) {
            if (!v->is_scalar())
                throw Error(Errc::invalid_stage,
                            name + ": param '" + k + "' must be a scalar", v->span);
            stage.params.emplace_back(k, v->to_string());
        }
    }
    if (const NodePtr* env = node.find("env")) {
        for (const auto& [k, v] : (*env)->entries) {
            if (!v->is_scalar())
                throw Error(Errc::invalid_stage,
                            name + ": env var '" + k + "' must be a scalar", v->span);
            stage.env[k] = v->to_string();
        }
    }
    if (const NodePtr* ar = node.find("always_run"))
        stage.always_run = (*ar)->is_scalar() && (*ar)->scalar_value == "true";

    std::set<std::string> in(stage.inputs.begin(), stage.inputs.end());
    for (const auto& out : stage.outputs)
        if (in.count(out))
            throw Error(Errc::invalid_stage,
                        "stage '" + name + "': path '" + out +
                            "' appears in both inputs and outputs",
                        node.span);
    return stage;
}

} // namespace

Polyforest build_polyforest(const ResolvedDocument& doc, const TypeRegistry& registry) {
    Polyforest forest;

    for (const auto& [name, node] : doc.objects) {
        if (!node->is_mapping() || node->type_tag.empty()) continue;
        const TypeDescriptor* desc = registry.find(node->type_tag);
        if (!desc) continue; // validate() reports unknown tags
        if (desc->behavior_binding == BehaviorKind::stage_executor) {
            forest.stages[name] = stage_from(name, *node);
            forest.stage_order.push_back(name);
        } else if (desc->behavior_binding == BehaviorKind::pipeline) {
            Pipeline p;
            p.name = name;
            p.span = node->span;
            if (const NodePtr* refs = node->find("stages"))
                for (const auto& item : (*refs)->items)
                    if (item->is_scalar()) p.stage_refs.push_back(item->to_string());
            if (const NodePtr* svcs = node->find("services"))
                for (const auto& item : (*svcs)->items)
                    if (item->is_scalar()) p.services.push_back(item->to_string());
            forest.pipelines[name] = std::move(p);
            forest.pipeline_order.push_back(name);
        }
    }

    for (const auto& pname : forest.pipeline_order) {
        const Pipeline& p = forest.pipelines[pname];
        std::set<std::string> seen;
        for (const auto& ref : p.stage_refs) {
            if (!forest.stages.count(ref))
                throw Error(Errc::unknown_stage_ref,
                            "pipeline '" + pname + "' references unknown stage '" +
                                ref + "'",
                            p.span);
            if (!seen.insert(ref).second)
                throw Error(Errc::unknown_stage_ref,
                            "pipeline '" + pname + "' lists stage '" + ref +
                                "' twice",
                            p.span);
        }
    }

    // Single-writer rule, then output->input matching.
    std::map<std::string, std::string> producer_of;
    for (const auto& sname : forest.stage_order) {
        for (const auto& out : forest.stages[sname].outputs) {
            auto [it, fresh] = producer_of.emplace(out, sname);
            if (!fresh)
                throw Error(Errc::multiple_producers,
                            "path '" + out + "' is produced by both '" + it->second +
                                "' and '" + sname + "'",
                            forest.stages[sname].span);
        }
    }
    for (const auto& sname : forest.stage_order) {
        for (const auto& in : forest.stages[sname].inputs) {
            auto it = producer_of.find(in);
            if (it != producer_of.end() && it->second != sname)
                forest.data_edges.insert(DataEdge{it->second, sname, in});
        }
    }

    // stage_refs order is a hint; flag contradictions with the data edges.
    for (const auto& pname : forest.pipeline_order) {
        const Pipeline& p = forest.pipelines.at(pname);
        std::map<std::string, size_t> pos;
        for (size_t i = 0; i < p.stage_refs.size(); ++i) pos[p.stage_refs[i]] = i;
        for (const auto& e : forest.data_edges) {
            auto u = pos.find(e.producer), v = pos.find(e.consumer);
            if (u != pos.end() && v != pos.end() && u->second > v->second)
                forest.diagnostics.push_back(Diagnostic{
                    Severity::warning, p.span,
                    "pipeline '" + pname + "': declared order puts '" + e.consumer +
                        "' before its producer '" + e.producer +
                        "'; data edges win"});
        }
    }

    // Library stages are legal but worth a note.
    std::set<std::string> referenced;
    for (const auto& [pname, p] : forest.pipelines)
        referenced.insert(p.stage_refs.begin(), p.stage_refs.end());
    for (const auto& sname : forest.stage_order)
        if (!referenced.count(sname))
            forest.diagnostics.push_back(Diagnostic{
                Severity::info, forest.stages[sname].span,
                "stage '" + sname + "' is not referenced by any pipeline"});

    return forest;
}

std::vector<std::vector<std::string>> detect_cycles(const Polyforest& forest) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : forest.data_edges) adj[e.producer].push_back(e.consumer);
    for (auto& [k, v] : adj) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    // Tarjan SCC, iterative enough at our sizes to do recursively.
    std::map<std::string, int> index, low;
    std::map<std::string, bool> on_stack;
    std::vector<std::string> stack;
    int counter = 0;
    std::vector<std::vector<std::string>> sccs;

    std::function<void(const std::string&)> strongconnect = [&](const std::string& v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (const auto& w : adj[v]) {
            if (!index.count(w)) {
                strongconnect(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<std::string> scc;
            while (true) {
                std::string w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                scc.push_back(w);
                if (w == v) break;
            }
            if (scc.size() > 1) sccs.push_back(std::move(scc));
        }
    };
    for (const auto& [sname, s] : forest.stages)
        if (!index.count(sname)) strongconnect(sname);

    // Walk each SCC from its smallest member, smallest neighbor first, to get
    // a deterministic representative cycle.
    std::vector<std::vector<std::string>> cycles;
    for (auto& scc : sccs) {
        std::sort(scc.begin(), scc.end());
        std::set<std::string> members(scc.begin(), scc.end());
        const std::string& start = scc.front();
        std::vector<std::string> path{start};
        std::set<std::string> visited{start};
        std::function<bool(const std::string&)> dfs = [&](const std::string& v) {
            for (const auto& w : adj[v]) {
                if (!members.count(w)) continue;
                if (w == start) return true;
                if (visited.count(w)) continue;
                visited.insert(w);
                path.push_back(w);
                if (dfs(w)) return true;
                path.pop_back();
            }
            return false;
        };
        if (dfs(start)) cycles.push_back(path);
    }
    std::sort(cycles.begin(), cycles.end());
    return cycles;
}

ExecutionPlan plan(const Polyforest& forest, const std::string& pipeline,
                   const std::string& target_stage) {
    auto pit = forest.pipelines.find(pipeline);
    if (pit == forest.pipelines.end())
        throw Error(Errc::unknown_pipeline, "unknown pipeline '" + pipeline + "'");
    const Pipeline& p = pit->second;

    std::map<std::string, size_t> pos;
    for (size_t i = 0; i < p.stage_refs.size(); ++i) pos[p.stage_refs[i]] = i;

    if (!target_stage.empty() && !pos.count(target_stage))
        throw Error(Errc::unknown_stage_ref,
                    "stage '" + target_stage + "' is not part of pipeline '" +
                        pipeline + "'");

    // Edges restricted to the pipeline's stage set.
    std::map<std::string, std::vector<std::string>> preds, succs;
    for (const auto& e : forest.data_edges) {
        if (pos.count(e.producer) && pos.count(e.consumer)) {
            preds[e.consumer].push_back(e.producer);
            succs[e.producer].push_back(e.consumer);
        }
    }

    ExecutionPlan out;
    out.pipeline = pipeline;

    std::set<std::string> included(p.stage_refs.begin(), p.stage_refs.end());
    if (!target_stage.empty()) {
        included.clear();
        std::vector<std::string> frontier{target_stage};
        included.insert(target_stage);
        while (!frontier.empty()) {
            std::string v = frontier.back();
            frontier.pop_back();
            for (const auto& u : preds[v])
                if (included.insert(u).second) frontier.push_back(u);
        }
    }

    // Kahn with the ready set ordered by stage_refs position.
    std::map<std::string, size_t> indegree;
    for (const auto& v : included) indegree[v] = 0;
    for (const auto& [v, ps] : preds)
        if (included.count(v))
            for (const auto& u : ps)
                if (included.count(u)) ++indegree[v];

    auto by_pos = [&](const std::string& a, const std::string& b) {
        return pos.at(a) < pos.at(b);
    };
    std::vector<std::string> ready;
    for (const auto& [v, d] : indegree)
        if (d == 0) ready.push_back(v);
    std::sort(ready.begin(), ready.end(), by_pos);

    while (!ready.empty()) {
        std::string v = ready.front();
        ready.erase(ready.begin());
        out.ordered_stages.push_back(v);
        out.reason[v] = target_stage.empty()
                            ? "scheduled"
                            : (v == target_stage ? "target"
                                                 : "ancestor of " + target_stage);
        for (const auto& w : succs[v]) {
            if (!included.count(w)) continue;
            if (--indegree[w] == 0) {
                ready.insert(std::upper_bound(ready.begin(), ready.end(), w, by_pos), w);
            }
        }
    }

    if (out.ordered_stages.size() != included.size())
        throw Error(Errc::cycle, "pipeline '" + pipeline + "' contains a cycle");
    return out;
}

std::string export_dot(const Polyforest& forest) {
    std::ostringstream os;
    os << "digraph expflow {\n";
    for (const auto& [name, stage] : forest.stages)
        os << "  \"" << name << "\";\n";
    for (const auto& e : forest.data_edges)
        os << "  \"" << e.producer << "\" -> \"" << e.consumer << "\" [label=\""
           << e.path << "\"];\n";
    os << "}\n";
    return os.str();
}

} // namespace expflow
