#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace expflow {

// One code per error class named in the public contracts. The CLI maps
// these onto its exit-code table (spec/validation -> 2, run failure -> 1,
// usage -> 3).
enum class Errc {
    parse_error,
    duplicate_name,
    unknown_reference,
    cycle,
    unknown_env,
    type_error,
    duplicate_type,
    manifest_format,
    unknown_behavior_binding,
    missing_binding,
    spawn_failed,
    env_prepare_failed,
    missing_input,
    not_found,
    io_error,
    multiple_producers,
    invalid_stage,
    unknown_stage_ref,
    unknown_pipeline,
    pipeline_mismatch,
    service_start_failed,
    invalid_metric,
    dest_not_empty,
    unknown_variable,
    workspace_locked,
    usage,
};

struct SourceSpan {
    int line = 0;   // 1-based; 0 means unknown
    int column = 0; // 1-based
    int end_line = 0;
    int end_column = 0;
};

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}
    Error(Errc code, std::string message, SourceSpan span)
        : std::runtime_error(std::move(message)), code_(code), span_(span) {}

    Errc code() const { return code_; }
    const std::optional<SourceSpan>& span() const { return span_; }

private:
    Errc code_;
    std::optional<SourceSpan> span_;
};

const char* errc_name(Errc code);

} // namespace expflow
