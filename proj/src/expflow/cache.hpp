#pragma once

#include "expflow/graph.hpp"
#include "expflow/hash.hpp"
#include "expflow/ledger.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace expflow {

struct Fingerprint {
    std::string stage;
    std::string digest; // SHA-256 of the canonical stage manifest
    std::map<std::string, std::string> components; // script/params/env/inputs/environment
};

// Canonical manifest: script lines in order, params and env vars sorted,
// per-input (path, hash_tree digest) sorted by path, then the environment
// declaration digest. Throws MissingInputError when an input is absent.
Fingerprint fingerprint_stage(const Stage& stage, const std::string& env_digest,
                              const std::filesystem::path& workspace_root);

struct SkipDecision {
    bool skip = false;
    std::string reason;
    std::map<std::string, std::string> cached_outputs; // digests from the prior run
};

// Skip iff the stage is not always_run, the most recent succeeded run had an
// equal fingerprint, and all declared outputs still exist with the recorded
// digests.
SkipDecision should_skip(const Stage& stage, const Fingerprint& fp,
                         const Ledger& ledger,
                         const std::filesystem::path& workspace_root);

struct ArtifactSnapshot {
    std::string path;   // workspace-relative
    std::string digest;
    uintmax_t size = 0;
    std::filesystem::path stored_at;
};

// Copies each output into the content-addressed store
// (.expflow/cache/objects/<d[0:2]>/<d[2:]>); identical content is stored once.
std::vector<ArtifactSnapshot> snapshot_outputs(
    const Stage& stage, const std::map<std::string, std::string>& output_digests,
    const std::filesystem::path& workspace_root);

enum class PathVerdict { identical, differs, only_in_a, only_in_b };

struct ReproEntry {
    std::string path;
    PathVerdict verdict;
    std::string digest_a;
    std::string digest_b;
};

struct ReproReport {
    bool repeatable = false;
    bool spec_digests_equal = false;
    std::vector<ReproEntry> entries;
};

// Repeatable iff spec digests are equal and every shared output path has
// identical digests. Throws PipelineMismatchError for different pipelines.
ReproReport compare_runs(const RunRecord& run_a, const RunRecord& run_b);

} // namespace expflow
