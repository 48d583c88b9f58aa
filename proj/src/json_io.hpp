#pragma once

// File helpers and JSON codecs for the on-disk formats.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "wifidiag/core.hpp"
#include "wifidiag/errors.hpp"
#include "wifidiag/telemetry.hpp"

namespace wifidiag::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Throws MissingInputError if the file is absent, IoError if unreadable.
std::string read_text(const fs::path& path);
/// Writes via a temporary file and rename. Throws IoError.
void write_text(const fs::path& path, const std::string& text);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);
std::vector<json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<json>& rows);

json to_json(const FaultSpec& spec);
FaultSpec fault_spec_from_json(const json& j);
json to_json(const WindowSchedule& s);
WindowSchedule schedule_from_json(const json& j);

json to_json(const telemetry::FlowRecord& r);
json to_json(const telemetry::PacketFlowFeatures& r);
json to_json(const telemetry::WarningEvent& r);
json to_json(const telemetry::MonitorRecord& r);
telemetry::FlowRecord flow_record_from_json(const json& j);
telemetry::PacketFlowFeatures packet_features_from_json(const json& j);
telemetry::WarningEvent warning_event_from_json(const json& j);
telemetry::MonitorRecord monitor_record_from_json(const json& j);

/// Read a required member, naming the file and field on failure.
template <typename T>
T field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw ContractError(where + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ContractError(where + ": field '" + name + "' has the wrong type");
  }
}

}  // namespace wifidiag::io
