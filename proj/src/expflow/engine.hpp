#pragma once

#include "expflow/error.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace expflow {

struct CommandResult {
    int exit_code = 0;
    std::string out; // human-readable report, stdout
    std::string err; // diagnostics and warnings, stderr
};

struct RunOptions {
    std::string target_stage;
    bool force = false;
    bool dry_run = false;
    bool use_cache = true;
};

// Exit code contract shared by the CLI and the C API:
// 0 success, 1 stage or run failure, 2 spec or validation error, 3 usage.
int exit_code_for(Errc code);

// Facade over the full engine. Workspace and spec discovery honor
// EXPFLOW_WORKSPACE and EXPFLOW_PLUGIN_PATH; explicit setters win.
class Engine {
public:
    Engine();

    void set_workspace(const std::filesystem::path& root);
    void set_spec_path(const std::filesystem::path& path);
    void add_plugin_path(const std::filesystem::path& dir);

    const std::filesystem::path& workspace() const { return workspace_; }
    std::filesystem::path spec_path() const;

    CommandResult init(const std::string& template_name,
                       const std::filesystem::path& dest,
                       const std::map<std::string, std::string>& vars);
    CommandResult check();
    CommandResult run(const std::string& pipeline, const RunOptions& options);
    CommandResult repro(const std::string& pipeline, int runs);
    CommandResult status();
    CommandResult graph(const std::string& format);
    CommandResult clean(bool cache, bool logs);

private:
    std::filesystem::path workspace_;
    std::filesystem::path spec_path_; // empty = <workspace>/experiment.yml
    std::vector<std::filesystem::path> plugin_paths_;
};

} // namespace expflow
