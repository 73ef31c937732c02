#include "expflow/engine.hpp"

#include "expflow/cache.hpp"
#include "expflow/executor.hpp"
#include "expflow/graph.hpp"
#include "expflow/hash.hpp"
#include "expflow/ledger.hpp"
#include "expflow/registry.hpp"
#include "expflow/resolver.hpp"
#include "expflow/services.hpp"
#include "expflow/templates.hpp"
#include "expflow/yaml_parser.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

extern char** environ;

namespace expflow {

namespace fs = std::filesystem;

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::usage:
            return 3;
        case Errc::spawn_failed:
        case Errc::env_prepare_failed:
        case Errc::missing_input:
        case Errc::io_error:
        case Errc::service_start_failed:
        case Errc::invalid_metric:
        case Errc::workspace_locked:
            return 1;
        default:
            return 2;
    }
}

namespace {

std::map<std::string, std::string> process_env() {
    std::map<std::string, std::string> out;
    for (char** e = environ; e && *e; ++e) {
        std::string entry = *e;
        size_t eq = entry.find('=');
        if (eq != std::string::npos) out[entry.substr(0, eq)] = entry.substr(eq + 1);
    }
    return out;
}

std::vector<fs::path> split_path_list(const char* value) {
    std::vector<fs::path> out;
    if (!value) return out;
    std::string paths = value;
    size_t start = 0;
    while (start <= paths.size()) {
        size_t colon = paths.find(':', start);
        std::string entry = paths.substr(
            start, colon == std::string::npos ? std::string::npos : colon - start);
        if (!entry.empty()) out.emplace_back(entry);
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    return out;
}

struct Loaded {
    ResolvedDocument doc;
    TypeRegistry registry;
    Polyforest forest;
    std::string spec_digest;
    std::vector<Diagnostic> findings; // validation errors plus graph notes
    bool has_errors = false;
};

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::not_found, "cannot open spec file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

TypeRegistry registry_with_plugins(const std::vector<fs::path>& plugin_paths,
                                   std::string* warnings) {
    TypeRegistry registry = TypeRegistry::with_builtins();
    for (const auto& dir : plugin_paths) {
        std::vector<fs::path> manifests;
        if (fs::exists(dir / "plugin.yml")) manifests.push_back(dir / "plugin.yml");
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(dir, ec))
            if (entry.is_directory() && fs::exists(entry.path() / "plugin.yml"))
                manifests.push_back(entry.path() / "plugin.yml");
        std::sort(manifests.begin(), manifests.end());
        for (const auto& manifest_path : manifests) {
            PluginManifest manifest = load_manifest(manifest_path.string());
            for (const auto& type : manifest.types)
                registry.register_type(type, manifest_path.string());
            (void)warnings;
        }
    }
    return registry;
}

Loaded load(const fs::path& spec_path, const std::vector<fs::path>& plugin_paths) {
    Loaded loaded;
    std::string warnings;
    loaded.registry = registry_with_plugins(plugin_paths, &warnings);

    SpecDocument parsed = parse_spec(read_text_file(spec_path), spec_path.string());
    loaded.doc = resolve(parsed, loaded.registry, process_env());
    loaded.spec_digest = sha256_hex(serialize(loaded.doc));

    loaded.findings = validate(loaded.doc, loaded.registry);
    for (const auto& d : loaded.findings)
        if (d.severity == Severity::error) loaded.has_errors = true;
    if (!loaded.has_errors) {
        loaded.forest = build_polyforest(loaded.doc, loaded.registry);
        for (const auto& d : loaded.forest.diagnostics) loaded.findings.push_back(d);
    }
    return loaded;
}

std::string render_findings(const std::vector<Diagnostic>& findings) {
    std::string out;
    for (const auto& d : findings) out += format_diagnostic(d) + "\n";
    return out;
}

std::string format_seconds(double seconds) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << seconds << "s";
    return out.str();
}

std::string render_run_table(const RunRecord& record) {
    size_t width = 5;
    for (const auto& s : record.stages) width = std::max(width, s.stage.size());
    std::ostringstream out;
    out << "run " << record.run_id << " pipeline " << record.pipeline << ": "
        << record.status << "\n";
    for (const auto& s : record.stages) {
        out << "  " << std::left << std::setw(static_cast<int>(width) + 2) << s.stage
            << std::setw(26) << s.status;
        if (s.status == "succeeded" || s.status == "failed")
            out << format_seconds(s.wall_time);
        out << "\n";
    }
    return out.str();
}

// One complete pipeline execution: lock, environment, plan, services, run.
RunRecord do_run(const fs::path& workspace, Loaded& loaded,
                 const std::string& pipeline, const RunOptions& options,
                 std::string* err) {
    ExecutionPlan the_plan = plan(loaded.forest, pipeline, options.target_stage);

    Ledger ledger(workspace);
    EnvironmentSpec env = environment_from(loaded.doc, loaded.registry);
    RunContext ctx = make_run_context(workspace, ledger, env);
    ctx.dry_run = options.dry_run;
    ctx.force = options.force;
    ctx.use_cache = options.use_cache;

    if (ctx.dry_run) {
        RunRecord record;
        record.run_id = ctx.run_id;
        record.pipeline = pipeline;
        record.spec_digest = loaded.spec_digest;
        record.started = record.ended = utc_rfc3339_now();
        record.status = "ok";
        for (const auto& name : the_plan.ordered_stages) {
            StageResult r;
            r.stage = name;
            r.status = "dry-run";
            record.stages.push_back(r);
        }
        return record;
    }

    WorkspaceLock lock(workspace);
    prepare_environment(env, ctx);

    const Pipeline& p = loaded.forest.pipelines.at(pipeline);
    std::vector<ServiceSpec> specs =
        collect_service_specs(loaded.doc, loaded.registry, p.services);
    ServiceGroup services(make_services(specs));

    RunOutcome outcome = run_pipeline(the_plan, loaded.forest, ctx, ledger,
                                      services, loaded.spec_digest);
    for (const auto& stop : outcome.service_stops) {
        if (stop.timed_out)
            *err += "warning: service '" + stop.service +
                    "' did not drain before the stop deadline\n";
        if (stop.dropped > 0)
            *err += "warning: service '" + stop.service + "' dropped " +
                    std::to_string(stop.dropped) + " event(s) on a full queue\n";
    }
    return outcome.record;
}

} // namespace

Engine::Engine() {
    if (const char* ws = std::getenv("EXPFLOW_WORKSPACE"))
        workspace_ = ws;
    else
        workspace_ = fs::current_path();
    plugin_paths_ = split_path_list(std::getenv("EXPFLOW_PLUGIN_PATH"));
}

void Engine::set_workspace(const fs::path& root) { workspace_ = root; }
void Engine::set_spec_path(const fs::path& path) { spec_path_ = path; }
void Engine::add_plugin_path(const fs::path& dir) { plugin_paths_.push_back(dir); }

fs::path Engine::spec_path() const {
    if (!spec_path_.empty()) return spec_path_;
    return workspace_ / "experiment.yml";
}

CommandResult Engine::init(const std::string& template_name, const fs::path& dest,
                           const std::map<std::string, std::string>& vars) {
    CommandResult result;
    try {
        InitReport report = init_from_template(template_name, dest, vars);
        for (const auto& path : report.created) result.out += "created " + path + "\n";
        if (report.vcs_initialized)
            result.out += "initialized version control in " + dest.string() + "\n";
        for (const auto& note : report.notes) result.err += "note: " + note + "\n";
    } catch (const Error& e) {
        result.err = std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
        if (e.code() == Errc::not_found) {
            result.err += "available templates:\n";
            for (const auto& t : list_templates())
                if (!t.shadowed) result.err += "  " + t.name + "\n";
        }
    }
    return result;
}

CommandResult Engine::check() {
    CommandResult result;
    try {
        Loaded loaded = load(spec_path(), plugin_paths_);
        result.err = render_findings(loaded.findings);
        if (loaded.has_errors) {
            result.exit_code = 2;
            return result;
        }
        auto cycles = detect_cycles(loaded.forest);
        if (!cycles.empty()) {
            for (const auto& cycle : cycles) {
                result.err += "error: dependency cycle:";
                for (const auto& stage : cycle) result.err += " " + stage;
                result.err += " -> " + cycle.front() + "\n";
            }
            result.exit_code = 2;
            return result;
        }
        result.out = "OK: " + std::to_string(loaded.forest.stages.size()) +
                     " stages, " + std::to_string(loaded.forest.pipelines.size()) +
                     " pipelines\n";
    } catch (const Error& e) {
        result.err = std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
    }
    return result;
}

CommandResult Engine::run(const std::string& pipeline, const RunOptions& options) {
    CommandResult result;
    try {
        Loaded loaded = load(spec_path(), plugin_paths_);
        result.err = render_findings(loaded.findings);
        if (loaded.has_errors) {
            result.exit_code = 2;
            return result;
        }
        auto cycles = detect_cycles(loaded.forest);
        if (!cycles.empty())
            throw Error(Errc::cycle, "pipeline graph has a dependency cycle");

        RunRecord record = do_run(workspace_, loaded, pipeline, options, &result.err);
        result.out = render_run_table(record);
        if (record.status != "ok") {
            result.exit_code = 1;
            for (const auto& s : record.stages)
                if (s.status == "failed")
                    result.err += "stage '" + s.stage + "' failed (exit " +
                                  std::to_string(s.exit_code.value_or(-1)) +
                                  "), log: " + s.log_path + "\n";
        }
    } catch (const Error& e) {
        result.err += std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
    }
    return result;
}

CommandResult Engine::repro(const std::string& pipeline, int runs) {
    CommandResult result;
    if (runs < 2) {
        result.err = "error: repro needs at least 2 runs\n";
        result.exit_code = 3;
        return result;
    }
    try {
        Loaded loaded = load(spec_path(), plugin_paths_);
        result.err = render_findings(loaded.findings);
        if (loaded.has_errors) {
            result.exit_code = 2;
            return result;
        }
        auto cycles = detect_cycles(loaded.forest);
        if (!cycles.empty())
            throw Error(Errc::cycle, "pipeline graph has a dependency cycle");

        RunOptions options;
        options.force = true;
        ExecutionPlan the_plan = plan(loaded.forest, pipeline);

        std::vector<RunRecord> records;
        for (int i = 0; i < runs; ++i) {
            // fresh scratch outputs: declared outputs go away before each run
            for (const auto& name : the_plan.ordered_stages) {
                const Stage& stage = loaded.forest.stages.at(name);
                for (const auto& out : stage.outputs) {
                    std::error_code ec;
                    fs::remove_all(workspace_ / out, ec);
                }
            }
            RunRecord record =
                do_run(workspace_, loaded, pipeline, options, &result.err);
            if (record.status != "ok") {
                result.out = render_run_table(record);
                result.err += "repro run " + std::to_string(i + 1) + " failed\n";
                result.exit_code = 1;
                return result;
            }
            records.push_back(std::move(record));
        }

        bool repeatable = true;
        std::set<std::string> differing;
        for (size_t i = 1; i < records.size(); ++i) {
            ReproReport report = compare_runs(records[0], records[i]);
            if (!report.repeatable) repeatable = false;
            for (const auto& entry : report.entries)
                if (entry.verdict != PathVerdict::identical)
                    differing.insert(entry.path);
        }

        result.out = "compared " + std::to_string(records.size()) + " forced runs of '" +
                     pipeline + "'\n";
        if (repeatable) {
            result.out += "REPEATABLE\n";
        } else {
            result.out += "NOT REPEATABLE\n";
            for (const auto& path : differing)
                result.out += "  differs: " + path + "\n";
            result.exit_code = 1;
        }
    } catch (const Error& e) {
        result.err += std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
    }
    return result;
}

CommandResult Engine::status() {
    CommandResult result;
    try {
        Ledger ledger(workspace_);
        std::vector<RunRecord> records = ledger.read_all();
        if (records.empty()) {
            result.out = "no runs recorded\n";
            return result;
        }
        result.out = render_run_table(records.back());
        result.out += "total runs: " + std::to_string(records.size()) + "\n";
    } catch (const Error& e) {
        result.err = std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
    }
    return result;
}

CommandResult Engine::graph(const std::string& format) {
    CommandResult result;
    if (format != "dot") {
        result.err = "error: unsupported graph format '" + format + "' (try dot)\n";
        result.exit_code = 3;
        return result;
    }
    try {
        Loaded loaded = load(spec_path(), plugin_paths_);
        result.err = render_findings(loaded.findings);
        if (loaded.has_errors) {
            result.exit_code = 2;
            return result;
        }
        result.out = export_dot(loaded.forest);
    } catch (const Error& e) {
        result.err = std::string("error: ") + e.what() + "\n";
        result.exit_code = exit_code_for(e.code());
    }
    return result;
}

CommandResult Engine::clean(bool cache, bool logs) {
    CommandResult result;
    if (!cache && !logs) cache = logs = true; // bare `clean` clears both
    std::error_code ec;
    if (cache) {
        fs::remove_all(workspace_ / ".expflow" / "cache", ec);
        result.out += "removed cache\n";
    }
    if (logs) {
        fs::remove_all(workspace_ / ".expflow" / "logs", ec);
        result.out += "removed logs\n";
    }
    return result;
}

} // namespace expflow
