#pragma once

#include "expflow/error.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace expflow {

struct TemplateVariable {
    std::string name;
    std::string prompt;
    std::string default_value;
};

struct TemplateManifest {
    std::string name;
    std::string description;
    std::vector<TemplateVariable> variables;
    std::filesystem::path root; // empty for built-ins
    bool builtin = false;
    bool shadowed = false; // external template hidden by a built-in
};

struct InitReport {
    std::vector<std::string> created; // relative paths, sorted
    bool vcs_initialized = false;
    std::vector<std::string> notes;
};

// Instantiates a template into dest (must not exist or be an empty
// directory). `{{name}}` placeholders in text files are replaced from vars,
// falling back to manifest defaults; binary files (NUL byte in the first
// 8 KiB) are copied verbatim. The tree is staged in a temp directory and
// renamed, so dest is untouched on any error.
InitReport init_from_template(const std::string& template_name_or_path,
                              const std::filesystem::path& dest,
                              const std::map<std::string, std::string>& vars);

// Built-ins plus templates discovered under EXPFLOW_TEMPLATE_PATH, sorted by
// name; a built-in shadows an external template of the same name.
std::vector<TemplateManifest> list_templates();

} // namespace expflow
