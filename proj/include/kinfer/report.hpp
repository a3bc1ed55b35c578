#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "kinfer/mbdoe.hpp"
#include "kinfer/pipeline.hpp"
#include "kinfer/system.hpp"

namespace kinfer {

using Json = nlohmann::ordered_json;

/// Library version embedded in every report.
std::string version();

Json fitted_model_json(const FittedModel& m, std::span<const std::string> names);
Json proposal_to_json(const DesignProposal& p);

/// model, expression, d, nll, aic, aicc, hqc, bic
std::string criteria_table_csv(std::span<const FittedModel> models, std::span<const std::string> names);

/// experiment, species, t, measured, fitted, derivative
std::string profiles_csv(const IterationResult& r, const Dataset& data);
/// experiment, t, estimated, true (empty without a ground truth)
std::string rates_csv(const IterationResult& r, const ReactionSystem* truth);
/// experiment, t, then measured and predicted columns per species
std::string response_csv(const Expr& rate, const Dataset& data, const IntegratorSettings& settings);

Json iteration_json(const IterationResult& r, const Dataset& data, const DesignProposal* proposal, bool accepted);

/// Writes report.json, criteria.csv, hall_of_fame.json, evolution_log.csv,
/// response.csv, proposal.json (when given) and, for the strong method,
/// profiles.csv and rates.csv into `dir`. `data` must be the dataset the
/// iteration ran on.
void write_iteration(const std::filesystem::path& dir, const LoopStep& step, const Dataset& data,
                     const ReactionSystem* truth, const Json& config, const IntegratorSettings& settings);

/// First `count` experiments of `data`.
Dataset dataset_prefix(const Dataset& data, std::size_t count);

}  // namespace kinfer
