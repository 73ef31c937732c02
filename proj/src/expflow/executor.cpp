#include "expflow/executor.hpp"

#include "expflow/hash.hpp"
#include "expflow/subprocess.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace expflow {

namespace fs = std::filesystem;

std::string EnvironmentSpec::declaration_digest() const {
    std::ostringstream manifest;
    manifest << "name:" << name << '\n';
    for (const auto& cmd : prepare) manifest << "prepare:" << cmd << '\n';
    for (const auto& [k, v] : env_vars) manifest << "var:" << k << '=' << v << '\n';
    return sha256_hex(manifest.str());
}

EnvironmentSpec environment_from(const ResolvedDocument& doc,
                                 const TypeRegistry& registry) {
    for (const auto& [name, node] : doc.objects) {
        if (!node->is_mapping() || node->type_tag.empty()) continue;
        const TypeDescriptor* desc = registry.find(node->type_tag);
        if (!desc || desc->behavior_binding != BehaviorKind::environment) continue;
        EnvironmentSpec spec;
        spec.name = name;
        if (const NodePtr* prep = node->find("prepare"))
            for (const auto& item : (*prep)->items)
                if (item->is_scalar()) spec.prepare.push_back(item->to_string());
        if (const NodePtr* vars = node->find("vars"))
            for (const auto& [k, v] : (*vars)->entries)
                if (v->is_scalar()) spec.env_vars[k] = v->to_string();
        return spec;
    }
    return EnvironmentSpec{};
}

RunContext make_run_context(const fs::path& workspace_root, const Ledger& ledger,
                            const EnvironmentSpec& env) {
    RunContext ctx;
    ctx.run_id = new_run_id(ledger);
    ctx.workspace_root = workspace_root;
    ctx.log_dir = workspace_root / ".expflow" / "logs" / ctx.run_id;
    ctx.env = env;
    return ctx;
}

bool prepare_environment(const EnvironmentSpec& spec, const RunContext& ctx) {
    fs::path env_dir = ctx.workspace_root / ".expflow" / "env" / spec.name;
    fs::path marker = env_dir / ".prepared";
    std::string digest = spec.declaration_digest();

    if (fs::exists(marker)) {
        std::ifstream in(marker);
        std::string recorded;
        std::getline(in, recorded);
        if (recorded == digest) return false;
    }
    if (ctx.dry_run) return false;

    fs::create_directories(env_dir);
    fs::path log_path = ctx.log_dir / "env-prepare.log";
    fs::create_directories(ctx.log_dir);
    std::ofstream log(log_path, std::ios::app | std::ios::binary);

    for (const auto& cmd : spec.prepare) {
        log << "$ " << cmd << '\n';
        int code = run_shell(cmd, env_dir.string(), spec.env_vars,
                             [&](char tag, const std::string& line) {
                                 log << tag << '|' << line << '\n';
                             });
        log.flush();
        if (code != 0)
            throw Error(Errc::env_prepare_failed,
                        "environment '" + spec.name + "' prepare command failed (exit " +
                            std::to_string(code) + "): " + cmd +
                            " (log: " + log_path.string() + ")");
    }
    std::ofstream out(marker, std::ios::trunc);
    out << digest << '\n';
    return !spec.prepare.empty();
}

StageResult execute_stage(const Stage& stage, const RunContext& ctx) {
    StageResult result;
    result.stage = stage.name;
    result.started_at = utc_rfc3339_now();

    if (ctx.dry_run) {
        result.status = "dry-run";
        result.ended_at = result.started_at;
        return result;
    }

    for (const auto& in : stage.inputs)
        if (!fs::exists(ctx.workspace_root / in))
            throw Error(Errc::missing_input,
                        "stage '" + stage.name + "': input '" + in + "' does not exist");

    fs::create_directories(ctx.log_dir);
    fs::path log_path = ctx.log_dir / (stage.name + ".log");
    result.log_path = log_path.string();
    std::ofstream log(log_path, std::ios::app | std::ios::binary);

    std::map<std::string, std::string> env = ctx.env.env_vars;
    for (const auto& [k, v] : stage.env) env[k] = v; // stage overlays environment
    env["EXPFLOW_RUN_ID"] = ctx.run_id;
    env["EXPFLOW_LOG_DIR"] = ctx.log_dir.string();
    env["EXPFLOW_STAGE"] = stage.name;
    for (const auto& [k, v] : stage.params) env["EXPFLOW_PARAM_" + k] = v;

    auto t0 = std::chrono::steady_clock::now();
    int exit_code = 0;
    for (const auto& cmd : stage.script) {
        log << "$ " << cmd << '\n';
        exit_code = run_shell(cmd, ctx.workspace_root.string(), env,
                              [&](char tag, const std::string& line) {
                                  log << tag << '|' << line << '\n';
                              });
        if (exit_code != 0) break; // later commands never run
    }
    auto t1 = std::chrono::steady_clock::now();
    log.flush();

    result.wall_time = std::chrono::duration<double>(t1 - t0).count();
    result.exit_code = exit_code;
    result.status = exit_code == 0 ? "succeeded" : "failed";
    result.ended_at = utc_rfc3339_now();
    return result;
}

RunOutcome run_pipeline(const ExecutionPlan& plan, const Polyforest& forest,
                        RunContext& ctx, Ledger& ledger, ServiceGroup& services,
                        const std::string& spec_digest) {
    RunOutcome outcome;
    RunRecord& record = outcome.record;
    record.run_id = ctx.run_id;
    record.pipeline = plan.pipeline;
    record.started = utc_rfc3339_now();
    record.spec_digest = spec_digest;

    services.start_all(ctx.log_dir);
    bool failed = false;
    std::string env_digest = ctx.env.declaration_digest();

    services.notify(Notification{NotifyEvent::run_started, ctx.run_id,
                                 {{"pipeline", plan.pipeline}}});
    try {
        for (const auto& stage_name : plan.ordered_stages) {
            const Stage& stage = forest.stages.at(stage_name);
            StageResult result;

            if (failed) {
                result.stage = stage_name;
                result.status = "skipped-upstream-failure";
                result.started_at = result.ended_at = utc_rfc3339_now();
                record.stages.push_back(result);
                continue;
            }

            if (ctx.dry_run) {
                result = execute_stage(stage, ctx);
                record.stages.push_back(result);
                continue;
            }

            Fingerprint fp = fingerprint_stage(stage, env_digest, ctx.workspace_root);
            if (ctx.use_cache && !ctx.force) {
                SkipDecision decision = should_skip(stage, fp, ledger,
                                                    ctx.workspace_root);
                if (decision.skip) {
                    result.stage = stage_name;
                    result.status = "skipped-cache";
                    result.fingerprint = fp.digest;
                    result.outputs = decision.cached_outputs;
                    result.started_at = result.ended_at = utc_rfc3339_now();
                    record.stages.push_back(result);
                    continue;
                }
            }

            result = execute_stage(stage, ctx);
            result.fingerprint = fp.digest;

            if (result.status == "succeeded") {
                for (const auto& out : stage.outputs) {
                    fs::path p = ctx.workspace_root / out;
                    if (!fs::exists(p)) {
                        result.status = "failed";
                        result.exit_code = result.exit_code.value_or(0);
                        std::ofstream log(result.log_path,
                                          std::ios::app | std::ios::binary);
                        log << "E|declared output missing: " << out << '\n';
                        break;
                    }
                    result.outputs[out] = hash_tree(p);
                }
            }
            if (result.status == "succeeded")
                snapshot_outputs(stage, result.outputs, ctx.workspace_root);
            else if (result.status == "failed")
                failed = true;

            record.stages.push_back(result);
            services.notify(Notification{NotifyEvent::stage_finished, ctx.run_id,
                                         {{"stage", stage_name},
                                          {"status", result.status}}});
        }
    } catch (...) {
        // Services are stopped on every path before the error propagates.
        record.status = "failed";
        record.ended = utc_rfc3339_now();
        services.notify(Notification{NotifyEvent::run_failed, ctx.run_id,
                                     {{"pipeline", plan.pipeline}}});
        outcome.service_stops = services.stop_all();
        if (!ctx.dry_run) ledger.append(record);
        throw;
    }

    record.status = failed ? "failed" : "ok";
    record.ended = utc_rfc3339_now();
    services.notify(Notification{
        failed ? NotifyEvent::run_failed : NotifyEvent::run_finished, ctx.run_id,
        {{"pipeline", plan.pipeline}, {"status", record.status}}});
    outcome.service_stops = services.stop_all();
    if (!ctx.dry_run) ledger.append(record);
    return outcome;
}

} // namespace expflow
