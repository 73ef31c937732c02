#include "expflow/expflow.h"

#include "expflow/engine.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>

using expflow::CommandResult;
using expflow::Engine;

struct expflow_engine {
    Engine impl;
};

namespace {

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int finish(const CommandResult& result, char** out, char** err) {
    if (out) *out = dup_string(result.out);
    if (err) *err = dup_string(result.err);
    return result.exit_code;
}

int internal_error(const char* what, char** out, char** err) {
    if (out) *out = dup_string("");
    if (err) *err = dup_string(std::string("error: ") + what + "\n");
    return 2;
}

} // namespace

extern "C" {

expflow_engine* expflow_engine_new(void) {
    try {
        return new expflow_engine{};
    } catch (...) {
        return nullptr;
    }
}

void expflow_engine_free(expflow_engine* engine) { delete engine; }

void expflow_set_workspace(expflow_engine* engine, const char* path) {
    if (engine && path) engine->impl.set_workspace(path);
}

void expflow_set_spec_path(expflow_engine* engine, const char* path) {
    if (engine && path) engine->impl.set_spec_path(path);
}

void expflow_add_plugin_path(expflow_engine* engine, const char* dir) {
    if (engine && dir) engine->impl.add_plugin_path(dir);
}

int expflow_init(expflow_engine* engine, const char* template_name,
                 const char* dest, const char* const* var_keys,
                 const char* const* var_values, size_t var_count, char** out,
                 char** err) {
    if (!engine || !template_name || !dest)
        return internal_error("invalid argument", out, err);
    try {
        std::map<std::string, std::string> vars;
        for (size_t i = 0; i < var_count; ++i) {
            if (!var_keys[i] || !var_values[i])
                return internal_error("invalid variable array", out, err);
            vars[var_keys[i]] = var_values[i];
        }
        return finish(engine->impl.init(template_name, dest, vars), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_check(expflow_engine* engine, char** out, char** err) {
    if (!engine) return internal_error("invalid argument", out, err);
    try {
        return finish(engine->impl.check(), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_run(expflow_engine* engine, const char* pipeline,
                const char* target_stage, int force, int dry_run, int no_cache,
                char** out, char** err) {
    if (!engine || !pipeline) return internal_error("invalid argument", out, err);
    try {
        expflow::RunOptions options;
        if (target_stage) options.target_stage = target_stage;
        options.force = force != 0;
        options.dry_run = dry_run != 0;
        options.use_cache = no_cache == 0;
        return finish(engine->impl.run(pipeline, options), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_repro(expflow_engine* engine, const char* pipeline, int runs,
                  char** out, char** err) {
    if (!engine || !pipeline) return internal_error("invalid argument", out, err);
    try {
        return finish(engine->impl.repro(pipeline, runs), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_status(expflow_engine* engine, char** out, char** err) {
    if (!engine) return internal_error("invalid argument", out, err);
    try {
        return finish(engine->impl.status(), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_graph(expflow_engine* engine, const char* format, char** out,
                  char** err) {
    if (!engine || !format) return internal_error("invalid argument", out, err);
    try {
        return finish(engine->impl.graph(format), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

int expflow_clean(expflow_engine* engine, int cache, int logs, char** out,
                  char** err) {
    if (!engine) return internal_error("invalid argument", out, err);
    try {
        return finish(engine->impl.clean(cache != 0, logs != 0), out, err);
    } catch (const std::exception& e) {
        return internal_error(e.what(), out, err);
    }
}

void expflow_string_free(char* s) { std::free(s); }

const char* expflow_version(void) { return "0.1.0"; }

} // extern "C"
