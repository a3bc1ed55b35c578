#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "kinfer/report.hpp"

namespace kinfer::cli {

/// Bad flags, bad config or failed validation: exit code 2.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Required input absent: exit code 3.
class MissingInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode { kOk = 0, kUsage = 2, kMissingInput = 3, kNumerical = 4 };

/// Every key the config accepts, with its default value. Keys whose default
/// is null are optional.
Json default_config();

/// Overlays `overlay` onto `base`. Unknown keys and mismatched types throw
/// UsageError naming the offending path.
void merge_config(Json& base, const Json& overlay, const std::string& path = "");

/// Reads a JSON file; MissingInput when absent, UsageError when malformed.
Json load_json(const std::filesystem::path& path);

/// Case study by name, or a custom system read from a JSON file.
CaseStudy resolve_system(const Json& config);

void cmd_simulate(const Json& config);
void cmd_discover(const Json& config);
void cmd_study(const std::string& kind, const Json& config);

}  // namespace kinfer::cli
