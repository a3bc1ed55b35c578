#pragma once

#include <filesystem>

#include <json.hpp>

#include "kinfer/system.hpp"

namespace kinfer {

/// Writes experiment_<k>.csv (header `t,<species...>`, 9 significant digits)
/// for every experiment plus manifest.json into `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);

/// Reads a directory written by write_dataset. Throws std::runtime_error on
/// missing or malformed files.
Dataset read_dataset(const std::filesystem::path& dir);

nlohmann::ordered_json dataset_manifest(const Dataset& ds);

/// CSV text of one experiment.
std::string experiment_csv(const Dataset& ds, std::size_t experiment);

}  // namespace kinfer
