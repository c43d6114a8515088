#pragma once

#include "catapult/models.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>

namespace catapult::models {

// Header x_1..x_d,y then one row per sample.
std::string dataset_csv(const RegressionDataset& data);
// {n, d, sigma2, mu, k, seed}
nlohmann::json dataset_sidecar(const RegressionDataset& data);

// Writes <path> and <path>.json.
void write_dataset(const RegressionDataset& data, const std::filesystem::path& csv_path);
RegressionDataset read_dataset(const std::filesystem::path& csv_path);

}  // namespace catapult::models
