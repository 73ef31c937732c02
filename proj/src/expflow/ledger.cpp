#include "expflow/ledger.hpp"

#include "expflow/error.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

namespace expflow {

using json = nlohmann::json;

Ledger::Ledger(std::filesystem::path workspace_root)
    : file_(std::move(workspace_root) / ".expflow" / "ledger.jsonl") {}

namespace {

json to_json(const RunRecord& r) {
    json stages = json::array();
    for (const auto& s : r.stages) {
        json outputs = json::object();
        for (const auto& [path, digest] : s.outputs) outputs[path] = digest;
        stages.push_back({{"name", s.stage},
                          {"status", s.status},
                          {"exit_code", s.exit_code ? json(*s.exit_code) : json(nullptr)},
                          {"wall_time", s.wall_time},
                          {"fingerprint", s.fingerprint},
                          {"log", s.log_path},
                          {"outputs", outputs}});
    }
    return json{{"run_id", r.run_id},     {"pipeline", r.pipeline},
                {"status", r.status},     {"started", r.started},
                {"ended", r.ended},       {"spec_digest", r.spec_digest},
                {"stages", stages}};
}

RunRecord from_json(const json& j) {
    RunRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.pipeline = j.at("pipeline").get<std::string>();
    r.status = j.at("status").get<std::string>();
    r.started = j.at("started").get<std::string>();
    r.ended = j.at("ended").get<std::string>();
    r.spec_digest = j.at("spec_digest").get<std::string>();
    for (const auto& js : j.at("stages")) {
        StageResult s;
        s.stage = js.at("name").get<std::string>();
        s.status = js.at("status").get<std::string>();
        if (!js.at("exit_code").is_null()) s.exit_code = js.at("exit_code").get<int>();
        s.wall_time = js.at("wall_time").get<double>();
        s.fingerprint = js.at("fingerprint").get<std::string>();
        s.log_path = js.at("log").get<std::string>();
        for (const auto& [path, digest] : js.at("outputs").items())
            s.outputs[path] = digest.get<std::string>();
        r.stages.push_back(std::move(s));
    }
    return r;
}

} // namespace

void Ledger::append(const RunRecord& record) {
    std::filesystem::create_directories(file_.parent_path());
    std::ofstream out(file_, std::ios::app | std::ios::binary);
    if (!out) throw Error(Errc::io_error, "cannot append to " + file_.string());
    out << to_json(record).dump() << '\n';
    if (!out) throw Error(Errc::io_error, "write failed: " + file_.string());
}

std::vector<RunRecord> Ledger::read_all() const {
    std::vector<RunRecord> out;
    std::ifstream in(file_, std::ios::binary);
    if (!in) return out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error(Errc::io_error, "ledger unreadable: bad line in " + file_.string());
        try {
            out.push_back(from_json(j));
        } catch (const json::exception&) {
            throw Error(Errc::io_error, "ledger unreadable: bad record in " + file_.string());
        }
    }
    return out;
}

std::optional<StageResult> Ledger::last_succeeded(const std::string& stage) const {
    std::optional<StageResult> found;
    for (const auto& run : read_all())
        for (const auto& s : run.stages)
            if (s.stage == stage && s.status == "succeeded") found = s;
    return found;
}

bool Ledger::run_id_taken(const std::string& run_id) const {
    try {
        for (const auto& run : read_all())
            if (run.run_id == run_id) return true;
    } catch (const Error&) {
        return false;
    }
    return false;
}

WorkspaceLock::WorkspaceLock(const std::filesystem::path& workspace_root)
    : path_(workspace_root / ".expflow" / "lock") {
    std::filesystem::create_directories(path_.parent_path());
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw Error(Errc::workspace_locked,
                    "workspace is locked by another run (" + path_.string() +
                        " exists); remove the file if that run is gone");
    std::string pid = std::to_string(getpid()) + "\n";
    (void)!write(fd, pid.data(), pid.size());
    ::close(fd);
    held_ = true;
}

WorkspaceLock::~WorkspaceLock() {
    if (held_) {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
}

std::string utc_compact_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

std::string utc_rfc3339_now() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                  now.time_since_epoch()) %
              1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[80];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms.count()));
    return out;
}

std::string new_run_id(const Ledger& ledger) {
    static thread_local std::mt19937 rng(std::random_device{}());
    std::uniform_int_distribution<int> hex(0, 15);
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::string id = utc_compact_now();
        for (int i = 0; i < 4; ++i) id += "0123456789abcdef"[hex(rng)];
        if (!ledger.run_id_taken(id)) return id;
    }
    throw Error(Errc::io_error, "could not allocate a unique run id");
}

} // namespace expflow
