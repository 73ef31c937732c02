#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace expflow {

// Line sink for interleaved capture; tag is 'O' for stdout, 'E' for stderr.
using LineSink = std::function<void(char tag, const std::string& line)>;

// Spawns argv directly (no shell) and captures both streams whole.
// Throws SpawnError when the executable cannot be executed.
int run_capture(const std::vector<std::string>& argv, const std::string& cwd,
                const std::map<std::string, std::string>& extra_env,
                std::string* out, std::string* err);

// Runs one user-authored shell command line via /bin/sh -c, streaming
// complete output lines to the sink as they arrive. Returns the exit code
// (128+signal when killed). Throws SpawnError if the shell cannot start.
int run_shell(const std::string& command, const std::string& cwd,
              const std::map<std::string, std::string>& extra_env,
              const LineSink& sink);

} // namespace expflow
