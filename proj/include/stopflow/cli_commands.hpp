#ifndef STOPFLOW_CLI_COMMANDS_HPP
#define STOPFLOW_CLI_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace stopflow {

// Exit codes: 0 success, 2 validation/config error, 3 solver error. Solver
// errors still produce a report.json carrying the error name.

int cmd_solve(const std::string& config_path, const std::optional<std::string>& out_dir);

int cmd_simulate(const std::string& config_path, const std::optional<std::string>& out_dir,
                 std::optional<std::uint64_t> seed);

int cmd_verify(const std::string& suite, std::uint64_t seed, int trials,
               const std::optional<std::string>& out_dir,
               const std::optional<std::string>& config_path);

int cmd_export(const std::string& in_path, const std::optional<std::string>& out_path,
               bool summary);

} // namespace stopflow

#endif
