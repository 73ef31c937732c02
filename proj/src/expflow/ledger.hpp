#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace expflow {

struct StageResult {
    std::string stage;
    std::string status; // succeeded|failed|skipped-cache|skipped-upstream-failure|dry-run
    std::optional<int> exit_code; // present iff succeeded or failed
    std::string started_at;
    std::string ended_at;
    double wall_time = 0.0; // seconds, subprocess time only
    std::string log_path;
    std::string fingerprint;
    std::map<std::string, std::string> outputs; // path -> digest
};

struct RunRecord {
    std::string run_id;
    std::string pipeline;
    std::string status; // ok|failed
    std::string started;
    std::string ended;
    std::string spec_digest;
    std::vector<StageResult> stages;
};

// Append-only run history at .expflow/ledger.jsonl, one JSON object per line.
class Ledger {
public:
    explicit Ledger(std::filesystem::path workspace_root);

    void append(const RunRecord& record);

    // Oldest first. Throws IoError only on unreadable file content; a missing
    // file reads as empty.
    std::vector<RunRecord> read_all() const;

    // Most recent succeeded result for the stage, across all runs.
    std::optional<StageResult> last_succeeded(const std::string& stage) const;

    bool run_id_taken(const std::string& run_id) const;

    const std::filesystem::path& file() const { return file_; }

private:
    std::filesystem::path file_;
};

// Exclusive workspace lock (.expflow/lock), held for the duration of a run.
// A second concurrent run fails fast with WorkspaceLockedError.
class WorkspaceLock {
public:
    explicit WorkspaceLock(const std::filesystem::path& workspace_root);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    std::filesystem::path path_;
    bool held_ = false;
};

// UTC timestamps: `YYYYMMDDThhmmssZ` (run ids) and RFC3339 for records.
std::string utc_compact_now();
std::string utc_rfc3339_now();
std::string new_run_id(const Ledger& ledger);

} // namespace expflow
