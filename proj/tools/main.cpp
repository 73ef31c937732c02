#include <expflow/expflow.h>

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

bool g_quiet = false;

// stdout carries reports, stderr carries diagnostics; exit code is the
// engine's. --quiet silences the report channel only.
int emit(int code, char* out, char* err) {
    if (out) {
        if (!g_quiet && out[0] != '\0') std::fputs(out, stdout);
        expflow_string_free(out);
    }
    if (err) {
        if (err[0] != '\0') std::fputs(err, stderr);
        expflow_string_free(err);
    }
    return code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"expflow: reproducible experiment pipelines"};
    app.require_subcommand(1);
    app.add_flag("--quiet", g_quiet, "Suppress report output (exit codes unchanged)");

    std::string spec_path;
    app.add_option("-f,--file", spec_path, "Experiment spec file")->type_name("PATH");

    std::string init_template = "template-default";
    std::string init_dest;
    std::vector<std::string> init_vars;
    CLI::App* cmd_init = app.add_subcommand("init", "Scaffold a new experiment");
    cmd_init->add_option("template", init_template, "Template name or directory");
    cmd_init->add_option("dest", init_dest, "Destination directory")->required();
    cmd_init->add_option("--var", init_vars, "Template variable name=value");

    CLI::App* cmd_check = app.add_subcommand("check", "Validate the experiment spec");

    std::string run_pipeline;
    std::string run_stage;
    bool run_force = false, run_dry = false, run_no_cache = false;
    CLI::App* cmd_run = app.add_subcommand("run", "Execute a pipeline");
    cmd_run->add_option("pipeline", run_pipeline, "Pipeline name")->required();
    cmd_run->add_option("--stage", run_stage, "Run only this stage and its ancestors");
    cmd_run->add_flag("--force", run_force, "Re-run stages even when cached");
    cmd_run->add_flag("--dry-run", run_dry, "Plan without executing anything");
    cmd_run->add_flag("--no-cache", run_no_cache, "Disable cache skip checks");

    std::string repro_pipeline;
    int repro_runs = 2;
    CLI::App* cmd_repro = app.add_subcommand("repro", "Verify run repeatability");
    cmd_repro->add_option("pipeline", repro_pipeline, "Pipeline name")->required();
    cmd_repro->add_option("--runs", repro_runs, "Number of forced runs (>= 2)");

    CLI::App* cmd_status = app.add_subcommand("status", "Show the most recent run");

    std::string graph_format = "dot";
    CLI::App* cmd_graph = app.add_subcommand("graph", "Export the pipeline graph");
    cmd_graph->add_option("--format", graph_format, "Output format (dot)");

    bool clean_cache = false, clean_logs = false;
    CLI::App* cmd_clean = app.add_subcommand("clean", "Remove cache and/or logs");
    cmd_clean->add_flag("--cache", clean_cache, "Remove cached artifacts");
    cmd_clean->add_flag("--logs", clean_logs, "Remove run logs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    }

    std::unique_ptr<expflow_engine, decltype(&expflow_engine_free)> engine(
        expflow_engine_new(), expflow_engine_free);
    if (!engine) {
        std::fputs("error: engine initialization failed\n", stderr);
        return 2;
    }
    if (!spec_path.empty()) expflow_set_spec_path(engine.get(), spec_path.c_str());

    char* out = nullptr;
    char* err = nullptr;

    if (*cmd_init) {
        std::vector<std::string> keys, values;
        for (const auto& var : init_vars) {
            size_t eq = var.find('=');
            if (eq == std::string::npos) {
                std::fprintf(stderr, "error: --var expects name=value, got '%s'\n",
                             var.c_str());
                return 3;
            }
            keys.push_back(var.substr(0, eq));
            values.push_back(var.substr(eq + 1));
        }
        std::vector<const char*> key_ptrs, value_ptrs;
        for (const auto& k : keys) key_ptrs.push_back(k.c_str());
        for (const auto& v : values) value_ptrs.push_back(v.c_str());
        int code = expflow_init(engine.get(), init_template.c_str(),
                                init_dest.c_str(), key_ptrs.data(),
                                value_ptrs.data(), key_ptrs.size(), &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_check) {
        int code = expflow_check(engine.get(), &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_run) {
        int code = expflow_run(engine.get(), run_pipeline.c_str(),
                               run_stage.empty() ? nullptr : run_stage.c_str(),
                               run_force, run_dry, run_no_cache, &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_repro) {
        int code = expflow_repro(engine.get(), repro_pipeline.c_str(), repro_runs,
                                 &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_status) {
        int code = expflow_status(engine.get(), &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_graph) {
        int code = expflow_graph(engine.get(), graph_format.c_str(), &out, &err);
        return emit(code, out, err);
    }
    if (*cmd_clean) {
        int code = expflow_clean(engine.get(), clean_cache, clean_logs, &out, &err);
        return emit(code, out, err);
    }

    return 3;
}
