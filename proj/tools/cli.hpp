#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

namespace magweyl::cli {

enum ExitCode : int { kOk = 0, kError = 1, kValidationFailed = 2 };

struct RunArgs {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;  // overrides [task] seed
    int threads = 0;                    // 0: hardware concurrency
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Loads the INI config, runs its [task] command and writes summary.json,
// effective.ini and (for spectra) spectrum.csv into args.out. Diagnostics go
// to `err`, a short report to `log`.
int run(const RunArgs& args, std::ostream& log, std::ostream& err);

}  // namespace magweyl::cli
