#pragma once

#include <exception>
#include <set>
#include <string>

#include "lmdp/io.hpp"

namespace lmdp::cli {

using io::json;

/// Keys accepted by each command's config.
const std::set<std::string>& allowed_keys(const std::string& command);

/// Config file values overridden by flag values; unknown keys in either throw.
json merge_config(const std::string& command, const json& file, const json& flags);

/// Each command writes its files and returns a short summary for stdout.
json cmd_gen(const json& cfg);
json cmd_eval(const json& cfg);
json cmd_run(const json& cfg);
json cmd_report(const json& cfg);

json dispatch(const std::string& command, const json& cfg);

/// 0 success, 2 validation, 3 budget cap, 4 unsatisfiable coverage, 1 otherwise.
int exit_code(const std::exception& e);

/// Worker count from LMDP_WORKERS (default 1).
int worker_count();

}  // namespace lmdp::cli
