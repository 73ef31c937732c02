#pragma once

#include "expflow/resolver.hpp"

#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace expflow {

struct Stage {
    std::string name;
    std::vector<std::string> script;  // user-authored shell command lines
    std::vector<std::string> inputs;  // normalized workspace-relative paths
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, std::string>> params; // declaration order
    std::map<std::string, std::string> env;
    bool always_run = false;
    SourceSpan span;
};

struct Pipeline {
    std::string name;
    std::vector<std::string> stage_refs;
    std::vector<std::string> services;
    SourceSpan span;
};

struct DataEdge {
    std::string producer;
    std::string consumer;
    std::string path;

    auto operator<=>(const DataEdge&) const = default;
};

// Pipelines share stage vertices: a stage referenced by several pipelines is
// one vertex, fingerprinted identically no matter which pipeline plans it.
struct Polyforest {
    std::map<std::string, Stage> stages;
    std::map<std::string, Pipeline> pipelines;
    std::vector<std::string> stage_order;    // declaration order
    std::vector<std::string> pipeline_order; // declaration order
    std::set<DataEdge> data_edges;
    std::vector<Diagnostic> diagnostics; // warnings and notes, never errors
};

struct ExecutionPlan {
    std::string pipeline;
    std::vector<std::string> ordered_stages;
    std::map<std::string, std::string> reason;
};

// Forward slashes, `.`/`..` collapsed, trailing slash stripped.
std::string normalize_path(const std::string& path);

// Turns every stage-bound object into a vertex and derives data edges from
// exact normalized output->input path matches. Throws UnknownStageRefError
// and MultipleProducersError.
Polyforest build_polyforest(const ResolvedDocument& doc, const TypeRegistry& registry);

// Empty iff data_edges over the full vertex set are acyclic. Each cycle is a
// stage-name sequence starting at its lexicographically smallest member.
std::vector<std::vector<std::string>> detect_cycles(const Polyforest& forest);

// Topological order of the pipeline's stages, ties broken by stage_refs
// position. With target_stage, restricted to its ancestor closure.
ExecutionPlan plan(const Polyforest& forest, const std::string& pipeline,
                   const std::string& target_stage = "");

// Deterministic GraphViz DOT: nodes sorted by name, edges lexicographically.
std::string export_dot(const Polyforest& forest);

} // namespace expflow
