#include "expflow/cache.hpp"

#include <algorithm>
#include <sstream>

namespace expflow {

namespace fs = std::filesystem;

Fingerprint fingerprint_stage(const Stage& stage, const std::string& env_digest,
                              const fs::path& workspace_root) {
    std::ostringstream script, params, env, inputs;
    for (const auto& line : stage.script) script << "script:" << line << '\n';

    auto sorted_params = stage.params;
    std::sort(sorted_params.begin(), sorted_params.end());
    for (const auto& [k, v] : sorted_params) params << "param:" << k << '=' << v << '\n';

    for (const auto& [k, v] : stage.env) env << "env:" << k << '=' << v << '\n';

    auto sorted_inputs = stage.inputs;
    std::sort(sorted_inputs.begin(), sorted_inputs.end());
    for (const auto& in : sorted_inputs) {
        fs::path p = workspace_root / in;
        if (!fs::exists(p))
            throw Error(Errc::missing_input,
                        "stage '" + stage.name + "': input '" + in + "' does not exist");
        inputs << "input:" << in << '\t' << hash_tree(p) << '\n';
    }

    Fingerprint fp;
    fp.stage = stage.name;
    fp.components["script"] = sha256_hex(script.str());
    fp.components["params"] = sha256_hex(params.str());
    fp.components["env"] = sha256_hex(env.str());
    fp.components["inputs"] = sha256_hex(inputs.str());
    fp.components["environment"] = env_digest;

    std::string manifest = script.str() + params.str() + env.str() + inputs.str() +
                           "envdigest:" + env_digest + '\n';
    fp.digest = sha256_hex(manifest);
    return fp;
}

SkipDecision should_skip(const Stage& stage, const Fingerprint& fp,
                         const Ledger& ledger, const fs::path& workspace_root) {
    if (stage.always_run) return {false, "always_run", {}};

    std::optional<StageResult> prior;
    try {
        prior = ledger.last_succeeded(stage.name);
    } catch (const Error&) {
        return {false, "ledger unreadable", {}};
    }
    if (!prior) return {false, "no prior record", {}};
    if (prior->fingerprint != fp.digest) return {false, "fingerprint changed", {}};

    for (const auto& out : stage.outputs) {
        auto it = prior->outputs.find(out);
        if (it == prior->outputs.end()) return {false, "missing output", {}};
        fs::path p = workspace_root / out;
        if (!fs::exists(p)) return {false, "missing output", {}};
        if (hash_tree(p) != it->second) return {false, "output modified", {}};
    }
    return {true, "unchanged since " + prior->ended_at, prior->outputs};
}

std::vector<ArtifactSnapshot> snapshot_outputs(
    const Stage& stage, const std::map<std::string, std::string>& output_digests,
    const fs::path& workspace_root) {
    fs::path objects = workspace_root / ".expflow" / "cache" / "objects";
    std::vector<ArtifactSnapshot> out;
    for (const auto& path : stage.outputs) {
        auto it = output_digests.find(path);
        if (it == output_digests.end()) continue;
        const std::string& digest = it->second;
        fs::path src = workspace_root / path;
        fs::path dst = objects / digest.substr(0, 2) / digest.substr(2);

        ArtifactSnapshot snap;
        snap.path = path;
        snap.digest = digest;
        snap.stored_at = dst;
        std::error_code ec;
        snap.size = fs::is_regular_file(src) ? fs::file_size(src, ec) : 0;

        if (!fs::exists(dst)) {
            fs::create_directories(dst.parent_path());
            // Stage via temp + rename so a crash never leaves a torn object.
            fs::path tmp = dst;
            tmp += ".tmp";
            fs::copy(src, tmp, fs::copy_options::recursive, ec);
            if (ec) throw Error(Errc::io_error, "snapshot failed for " + path);
            fs::rename(tmp, dst, ec);
            if (ec && !fs::exists(dst))
                throw Error(Errc::io_error, "snapshot failed for " + path);
        }
        out.push_back(std::move(snap));
    }
    return out;
}

ReproReport compare_runs(const RunRecord& run_a, const RunRecord& run_b) {
    if (run_a.pipeline != run_b.pipeline)
        throw Error(Errc::pipeline_mismatch,
                    "runs reference different pipelines: '" + run_a.pipeline +
                        "' vs '" + run_b.pipeline + "'");

    auto outputs_of = [](const RunRecord& r) {
        std::map<std::string, std::string> out;
        for (const auto& s : r.stages)
            for (const auto& [path, digest] : s.outputs) out[path] = digest;
        return out;
    };
    auto a = outputs_of(run_a);
    auto b = outputs_of(run_b);

    ReproReport report;
    report.spec_digests_equal = run_a.spec_digest == run_b.spec_digest;

    bool all_shared_identical = true;
    for (const auto& [path, da] : a) {
        auto it = b.find(path);
        if (it == b.end()) {
            report.entries.push_back({path, PathVerdict::only_in_a, da, ""});
        } else if (it->second == da) {
            report.entries.push_back({path, PathVerdict::identical, da, it->second});
        } else {
            report.entries.push_back({path, PathVerdict::differs, da, it->second});
            all_shared_identical = false;
        }
    }
    for (const auto& [path, db] : b)
        if (!a.count(path))
            report.entries.push_back({path, PathVerdict::only_in_b, "", db});

    report.repeatable = report.spec_digests_equal && all_shared_identical;
    return report;
}

} // namespace expflow
