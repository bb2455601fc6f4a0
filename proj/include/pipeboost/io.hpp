#pragma once

// File formats: profile JSON, mapping JSON, throughput report JSON.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "pipeboost/simulator.hpp"
#include "pipeboost/workload.hpp"

namespace pipeboost {

nlohmann::json profile_to_json(const DeviceProfile& profile);
/// Strict: unknown keys, missing keys and wrong types are ProfileCorrupt.
DeviceProfile profile_from_json(const nlohmann::json& j);

void save_profile(const DeviceProfile& profile, const std::filesystem::path& path);
DeviceProfile load_profile(const std::filesystem::path& path);

nlohmann::json mapping_to_json(const DeviceProfile& profile, const Workload& workload,
                               const Mapping& mapping);
/// Returns the workload (resolved by model name) and its mapping.
std::pair<Workload, Mapping> mapping_from_json(const DeviceProfile& profile,
                                               const nlohmann::json& j);

void save_mapping(const DeviceProfile& profile, const Workload& workload,
                  const Mapping& mapping, const std::filesystem::path& path);
std::pair<Workload, Mapping> load_mapping(const DeviceProfile& profile,
                                          const std::filesystem::path& path);

nlohmann::json report_to_json(const ThroughputReport& report);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes `j` pretty-printed with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace pipeboost
