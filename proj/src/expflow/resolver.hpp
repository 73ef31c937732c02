#pragma once

#include "expflow/node.hpp"
#include "expflow/registry.hpp"

#include <map>
#include <string>
#include <vector>

namespace expflow {

// A SpecDocument with composition applied and every expression expanded:
// no `${...}` placeholders and no `base:` keys remain.
struct ResolvedDocument : SpecDocument {};

enum class Severity { error, warning, info };

struct Diagnostic {
    Severity severity = Severity::error;
    SourceSpan span;
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

// Applies `base:` composition (local wins; sequences replace wholesale,
// mappings merge recursively) and interpolates all expressions against the
// document, `env` and `self`. Reaches a fixed point in at most one pass per
// top-level object, otherwise throws CycleError.
ResolvedDocument resolve(const SpecDocument& doc, const TypeRegistry& registry,
                         const std::map<std::string, std::string>& env);

// Schema check of a resolved document against the registry. Findings are
// diagnostics, never exceptions; an empty result means valid.
std::vector<Diagnostic> validate(const ResolvedDocument& doc,
                                 const TypeRegistry& registry);

} // namespace expflow
