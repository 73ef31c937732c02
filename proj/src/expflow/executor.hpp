#pragma once

#include "expflow/cache.hpp"
#include "expflow/graph.hpp"
#include "expflow/ledger.hpp"
#include "expflow/services.hpp"

#include <filesystem>
#include <map>
#include <string>

namespace expflow {

struct EnvironmentSpec {
    std::string name = "default";
    std::vector<std::string> prepare; // shell commands, may be empty
    std::map<std::string, std::string> env_vars;

    // Hex digest of the canonicalized spec; a matching marker file makes
    // preparation a no-op.
    std::string declaration_digest() const;
};

// Reads the first environment-bound object of the document (or a default
// empty spec when there is none).
EnvironmentSpec environment_from(const ResolvedDocument& doc,
                                 const TypeRegistry& registry);

struct RunContext {
    std::string run_id;
    std::filesystem::path workspace_root;
    std::filesystem::path log_dir; // .expflow/logs/<run_id>/
    bool dry_run = false;
    bool force = false;
    bool use_cache = true;
    EnvironmentSpec env;
};

RunContext make_run_context(const std::filesystem::path& workspace_root,
                            const Ledger& ledger, const EnvironmentSpec& env);

// Runs the prepare commands inside .expflow/env/<name>/ unless the recorded
// marker digest already matches. Throws EnvPrepareError on a nonzero exit.
// Returns true when preparation actually ran.
bool prepare_environment(const EnvironmentSpec& spec, const RunContext& ctx);

// Runs the stage's script lines through the system shell in workspace_root,
// streaming interleaved output to <log_dir>/<stage>.log with `O|`/`E|` line
// prefixes. Stops at the first failing command.
StageResult execute_stage(const Stage& stage, const RunContext& ctx);

struct RunOutcome {
    RunRecord record;
    std::vector<StopReport> service_stops;
};

// Full pipeline execution: services first, cache-skip checks per stage,
// downstream stages skipped after a failure, outputs snapshotted, services
// stopped last on every path, record appended to the ledger (except on
// dry runs, which leave everything outside log_dir untouched).
RunOutcome run_pipeline(const ExecutionPlan& plan, const Polyforest& forest,
                        RunContext& ctx, Ledger& ledger, ServiceGroup& services,
                        const std::string& spec_digest);

} // namespace expflow
