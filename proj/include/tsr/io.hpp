#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>

#include "tsr/agents.hpp"
#include "tsr/evaluation.hpp"
#include "tsr/godunov.hpp"
#include "tsr/pinn.hpp"
#include "tsr/sensing.hpp"
#include "tsr/trainer.hpp"

namespace tsr {

using Json = nlohmann::json;

inline constexpr int kMeasurementSchemaVersion = 1;
inline constexpr std::uint32_t kFieldFormatVersion = 1;

// Field: CSV with a header row of times and one row per cell (x, rho...),
// plus a binary grid of little-endian 64-bit floats.
void write_field_csv(const DensityField& field, const std::filesystem::path& path);
void write_field_binary(const DensityField& field, const std::filesystem::path& path);
DensityField read_field_binary(const std::filesystem::path& path);

/// Columns t, y_1, ..., y_N. Values are written with 17 significant digits.
void write_trajectories_csv(const AgentTrajectories& traj, const std::filesystem::path& path);
AgentTrajectories read_trajectories_csv(const std::filesystem::path& path);

Json to_json(const Domain& d);
Domain domain_from_json(const Json& j);
Json to_json(const ScenarioSpec& s);
ScenarioSpec scenario_from_json(const Json& j);
Json to_json(const NoiseConfig& n);
NoiseConfig noise_from_json(const Json& j);
Json to_json(const LossWeights& w);
LossWeights weights_from_json(const Json& j);
Json to_json(const StageSchedule& s);
StageSchedule schedule_from_json(const Json& j);
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const MeasurementSet& ms);
MeasurementSet measurement_set_from_json(const Json& j);

Json to_json(const LossBreakdown& b);
Json to_json(const TrainReport& r);
Json to_json(const EvaluationReport& r);

/// Checkpoint: 8-byte magic, u64 header length, JSON header, u64 parameter
/// count, parameters as little-endian f64.
void write_checkpoint(const PinnModel& model, std::uint64_t seed,
                      const std::filesystem::path& path);
PinnModel read_checkpoint(const std::filesystem::path& path);

/// One row per optimizer iteration: stage, optimizer, iteration, loss.
void write_loss_traces_csv(const TrainReport& report, const std::filesystem::path& path);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace tsr
