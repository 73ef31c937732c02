#include "expflow/templates.hpp"

#include "expflow/node.hpp"
#include "expflow/subprocess.hpp"
#include "expflow/yaml_parser.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

namespace expflow {

namespace fs = std::filesystem;

namespace {

// ---- built-in template-default ---------------------------------------------

struct BuiltinFile {
    const char* path;
    const char* content;
};

const BuiltinFile kTemplateDefault[] = {
    {"experiment.yml",
     R"(name: {{experiment_name}}

env: !Env
  prepare: []

prepare_data: !Stage
  script:
    - sh src/prepare_data.sh
  outputs:
    - data/numbers.txt

report: !Stage
  script:
    - sh src/make_report.sh
  inputs:
    - data/numbers.txt
  outputs:
    - reports/summary.txt

main: !Pipeline
  stages:
    - prepare_data
    - report
)"},
    {"src/prepare_data.sh",
     R"(#!/bin/sh
# Deterministic toy data for the {{experiment_name}} experiment.
set -e
mkdir -p data
seq 1 10 > data/numbers.txt
)"},
    {"src/make_report.sh",
     R"(#!/bin/sh
set -e
mkdir -p reports
total=$(awk '{s+=$1} END {print s}' data/numbers.txt)
printf 'experiment: {{experiment_name}}\ntotal: %s\n' "$total" > reports/summary.txt
)"},
    {"reports/report.md",
     R"(# {{experiment_name}} report

This mockup is filled from the outputs of `expflow run main`; the computed
summary lands in `reports/summary.txt`.
)"},
    {"README.md",
     R"(# {{experiment_name}}

A reproducible experiment scaffolded with expflow.

## Run the experiment

    expflow run main

## Check repeatability

    expflow repro main
)"},
    {".gitignore",
     R"(.expflow/
data/
reports/summary.txt
)"},
};

TemplateManifest builtin_default_manifest() {
    TemplateManifest m;
    m.name = "template-default";
    m.description = "Basic experiment: design, artifact and report mockups";
    m.variables.push_back({"experiment_name", "Experiment name", "my-experiment"});
    m.builtin = true;
    return m;
}

// ---- manifests --------------------------------------------------------------

TemplateManifest read_manifest(const fs::path& root) {
    std::ifstream in(root / "template.yml", std::ios::binary);
    if (!in) throw Error(Errc::not_found, "no template.yml in " + root.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    SpecDocument doc = parse_spec(buf.str(), (root / "template.yml").string());

    TemplateManifest m;
    m.root = root;
    if (const NodePtr* n = doc.find("name"); n && (*n)->is_scalar())
        m.name = (*n)->scalar_value;
    if (m.name.empty())
        throw Error(Errc::manifest_format, root.string() + ": template.yml missing 'name'");
    if (const NodePtr* d = doc.find("description"); d && (*d)->is_scalar())
        m.description = (*d)->scalar_value;
    if (const NodePtr* vars = doc.find("variables")) {
        for (const auto& v : (*vars)->items) {
            if (!v->is_mapping())
                throw Error(Errc::manifest_format,
                            root.string() + ": variable entries must be mappings");
            TemplateVariable var;
            if (const NodePtr* n = v->find("name"); n && (*n)->is_scalar())
                var.name = (*n)->scalar_value;
            if (var.name.empty())
                throw Error(Errc::manifest_format,
                            root.string() + ": variable entry missing 'name'");
            if (const NodePtr* p = v->find("prompt"); p && (*p)->is_scalar())
                var.prompt = (*p)->scalar_value;
            if (const NodePtr* d = v->find("default"); d && (*d)->is_scalar())
                var.default_value = (*d)->to_string();
            for (const auto& existing : m.variables)
                if (existing.name == var.name)
                    throw Error(Errc::manifest_format,
                                root.string() + ": duplicate variable '" + var.name + "'");
            m.variables.push_back(std::move(var));
        }
    }
    return m;
}

std::vector<fs::path> template_search_dirs() {
    std::vector<fs::path> out;
    if (const char* env = std::getenv("EXPFLOW_TEMPLATE_PATH")) {
        std::string paths = env;
        size_t start = 0;
        while (start <= paths.size()) {
            size_t colon = paths.find(':', start);
            std::string entry = paths.substr(
                start, colon == std::string::npos ? std::string::npos : colon - start);
            if (!entry.empty()) out.emplace_back(entry);
            if (colon == std::string::npos) break;
            start = colon + 1;
        }
    }
    return out;
}

// ---- substitution ------------------------------------------------------------

bool is_binary(const std::string& content) {
    size_t limit = std::min<size_t>(content.size(), 8 * 1024);
    return content.find('\0') < limit;
}

std::string substitute(const std::string& content,
                       const std::map<std::string, std::string>& vars,
                       const std::string& rel_path) {
    std::string out;
    out.reserve(content.size());
    size_t i = 0;
    while (i < content.size()) {
        size_t open = content.find("{{", i);
        if (open == std::string::npos) {
            out.append(content, i, std::string::npos);
            break;
        }
        size_t close = content.find("}}", open + 2);
        if (close == std::string::npos) {
            out.append(content, i, std::string::npos);
            break;
        }
        std::string name = content.substr(open + 2, close - open - 2);
        if (!valid_object_name(name)) {
            // not a placeholder; emit as-is and keep scanning
            out.append(content, i, open + 2 - i);
            i = open + 2;
            continue;
        }
        out.append(content, i, open - i);
        auto it = vars.find(name);
        if (it == vars.end())
            throw Error(Errc::unknown_variable,
                        rel_path + ": placeholder '{{" + name +
                            "}}' has no value and no default");
        out += it->second;
        i = close + 2;
    }
    return out;
}

void write_file(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out << content;
}

std::map<std::string, std::string> effective_vars(
    const TemplateManifest& manifest, const std::map<std::string, std::string>& vars) {
    std::map<std::string, std::string> out;
    for (const auto& v : manifest.variables) out[v.name] = v.default_value;
    for (const auto& [k, v] : vars) out[k] = v;
    return out;
}

} // namespace

std::vector<TemplateManifest> list_templates() {
    std::vector<TemplateManifest> out{builtin_default_manifest()};
    for (const auto& dir : template_search_dirs()) {
        std::error_code ec;
        for (const auto& entry : fs::directory_iterator(dir, ec)) {
            if (!entry.is_directory()) continue;
            if (!fs::exists(entry.path() / "template.yml")) continue;
            try {
                TemplateManifest m = read_manifest(entry.path());
                for (auto& existing : out) {
                    if (existing.name == m.name) {
                        m.shadowed = true;
                        std::cerr << "warning: template '" << m.name << "' at "
                                  << entry.path().string()
                                  << " is shadowed by an earlier template\n";
                        break;
                    }
                }
                out.push_back(std::move(m));
            } catch (const Error& e) {
                std::cerr << "warning: skipping template at " << entry.path().string()
                          << ": " << e.what() << '\n';
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const TemplateManifest& a, const TemplateManifest& b) {
                  return a.name < b.name;
              });
    return out;
}

InitReport init_from_template(const std::string& template_name_or_path,
                              const fs::path& dest,
                              const std::map<std::string, std::string>& vars) {
    if (fs::exists(dest)) {
        if (!fs::is_directory(dest) || !fs::is_empty(dest))
            throw Error(Errc::dest_not_empty,
                        "destination exists and is not an empty directory: " +
                            dest.string());
    }

    // Pick the template: a directory path wins, then the named catalog entry.
    TemplateManifest manifest;
    if (fs::is_directory(template_name_or_path) &&
        fs::exists(fs::path(template_name_or_path) / "template.yml")) {
        manifest = read_manifest(template_name_or_path);
    } else {
        bool found = false;
        for (const auto& m : list_templates()) {
            if (m.name == template_name_or_path && !m.shadowed) {
                manifest = m;
                found = true;
                break;
            }
        }
        if (!found)
            throw Error(Errc::not_found,
                        "unknown template '" + template_name_or_path + "'");
    }

    std::map<std::string, std::string> values = effective_vars(manifest, vars);

    // Stage into a sibling temp dir, then rename; dest stays untouched on error.
    fs::path parent = dest.has_parent_path() ? dest.parent_path() : fs::path(".");
    fs::create_directories(parent);
    static std::mt19937 rng(std::random_device{}());
    fs::path staging =
        parent / (".expflow-init-" + std::to_string(rng()) + ".tmp");

    InitReport report;
    try {
        if (manifest.builtin) {
            for (const auto& file : kTemplateDefault) {
                write_file(staging / file.path,
                           substitute(file.content, values, file.path));
                report.created.push_back(file.path);
            }
        } else {
            for (const auto& entry : fs::recursive_directory_iterator(manifest.root)) {
                if (!entry.is_regular_file()) continue;
                fs::path rel = fs::relative(entry.path(), manifest.root);
                if (rel == "template.yml") continue;
                std::ifstream in(entry.path(), std::ios::binary);
                std::ostringstream buf;
                buf << in.rdbuf();
                std::string content = buf.str();
                if (!is_binary(content))
                    content = substitute(content, values, rel.generic_string());
                write_file(staging / rel, content);
                report.created.push_back(rel.generic_string());
            }
        }
        std::sort(report.created.begin(), report.created.end());

        std::error_code ec;
        fs::remove(dest, ec); // an empty pre-existing dir gives way to the rename
        fs::rename(staging, dest);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }

    try {
        std::string out, err;
        int code = run_capture({"git", "init", "-q"}, dest.string(), {}, &out, &err);
        if (code == 0) {
            report.vcs_initialized = true;
        } else {
            report.notes.push_back("git init failed; version control skipped");
        }
    } catch (const Error&) {
        report.notes.push_back("no VCS tool on PATH; version control skipped");
    }
    return report;
}

} // namespace expflow
