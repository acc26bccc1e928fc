#pragma once

#include <filesystem>
#include <string>

#include "ltvrec/estimators.hpp"
#include "ltvrec/factorize.hpp"
#include "ltvrec/ingest.hpp"
#include "ltvrec/policies.hpp"
#include "ltvrec/state_builder.hpp"

namespace ltvrec {

// 17 significant digits, enough for exact double round-trips.
std::string dtos(double x);

// Fixed-point with the given decimal count, for aligned human-readable tables.
std::string fixed(double x, int decimals);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

// Textual matrix container with a small header; exact round-trip.
void save_model(const LatentModel& model, const std::filesystem::path& path);
LatentModel load_model(const std::filesystem::path& path);

// Columnar (user_id, step, state[0..k), item_index, reward, timestamp).
void save_trajectories(const TrajectoryBatch& trajectories,
                       const std::filesystem::path& path);
TrajectoryBatch load_trajectories(const std::filesystem::path& path);

void save_policy(const PolicyParams& policy, const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path);

struct StoredValue {
  ValueWeights weights;
  bool has_rho = false;
  RhoDiagnostics rho;
};

void save_value_weights(const ValueWeights& weights, const std::filesystem::path& path,
                        const RhoDiagnostics* rho = nullptr);
StoredValue load_value_weights(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace ltvrec
