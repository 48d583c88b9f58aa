#include "json_io.hpp"

#include <fstream>
#include <sstream>

namespace wifidiag::io {

std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw MissingInputError(path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.good()) throw IoError("short write to " + path.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename into " + path.string() + ": " + ec.message());
}

json read_json(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ContractError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<json> read_jsonl(const fs::path& path) {
  const std::string text = read_text(path);
  std::vector<json> rows;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ContractError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) {
    text += r.dump();
    text += '\n';
  }
  write_text(path, text);
}

json to_json(const FaultSpec& spec) {
  json j;
  j["fault"] = std::string(to_string(spec.fault));
  j["target"] = spec.target ? json(*spec.target) : json(nullptr);
  j["second"] = spec.second ? json(*spec.second) : json(nullptr);
  j["severity"] = spec.severity;
  j["injected_at_s"] = spec.injected_at_s;
  return j;
}

FaultSpec fault_spec_from_json(const json& j) {
  FaultSpec s;
  s.fault = fault_type_from_string(field<std::string>(j, "fault", "fault spec"));
  if (!j.at("target").is_null()) s.target = j.at("target").get<NodeId>();
  if (!j.at("second").is_null()) s.second = j.at("second").get<NodeId>();
  s.severity = field<std::map<std::string, double>>(j, "severity", "fault spec");
  s.injected_at_s = field<int>(j, "injected_at_s", "fault spec");
  return s;
}

json to_json(const WindowSchedule& s) {
  return {{"duration_s", s.duration_s}, {"injection_at_s", s.injection_at_s}, {"tick_s", s.tick_s}};
}

WindowSchedule schedule_from_json(const json& j) {
  WindowSchedule s;
  s.duration_s = field<int>(j, "duration_s", "schedule");
  s.injection_at_s = field<int>(j, "injection_at_s", "schedule");
  s.tick_s = field<double>(j, "tick_s", "schedule");
  return s;
}

json to_json(const telemetry::FlowRecord& r) {
  return {{"t_s", r.t_s},
          {"src", r.src},
          {"dst", r.dst},
          {"side", std::string(telemetry::to_string(r.side))},
          {"throughput_bps", r.throughput_bps},
          {"latency_ms", r.latency_ms},
          {"jitter_ms", r.jitter_ms},
          {"loss", r.loss}};
}

json to_json(const telemetry::PacketFlowFeatures& r) {
  return {{"t_s", r.t_s},
          {"src", r.src},
          {"dst", r.dst},
          {"mean_pkt_size_bytes", r.mean_pkt_size_bytes},
          {"mean_iat_ms", r.mean_iat_ms},
          {"mean_fwd_rate_pps", r.mean_fwd_rate_pps},
          {"mean_bwd_rate_pps", r.mean_bwd_rate_pps},
          {"retx_fraction", r.retx_fraction},
          {"mean_hdr_overhead", r.mean_hdr_overhead}};
}

json to_json(const telemetry::WarningEvent& r) {
  return {{"t_s", r.t_s},
          {"node", r.node},
          {"kind", std::string(telemetry::to_string(r.kind))},
          {"severity", r.severity}};
}

json to_json(const telemetry::MonitorRecord& r) {
  return {{"t_s", r.t_s},
          {"node", r.node},
          {"cpu_pct", r.cpu_pct},
          {"mem_pct", r.mem_pct},
          {"app_process_up", r.app_process_up},
          {"tx_bytes", r.tx_bytes},
          {"rx_bytes", r.rx_bytes},
          {"rssi_dbm", r.rssi_dbm}};
}

telemetry::FlowRecord flow_record_from_json(const json& j) {
  const std::string w = "flow record";
  telemetry::FlowRecord r;
  r.t_s = field<int>(j, "t_s", w);
  r.src = field<NodeId>(j, "src", w);
  r.dst = field<NodeId>(j, "dst", w);
  r.side = telemetry::side_from_string(field<std::string>(j, "side", w));
  r.throughput_bps = field<double>(j, "throughput_bps", w);
  r.latency_ms = field<double>(j, "latency_ms", w);
  r.jitter_ms = field<double>(j, "jitter_ms", w);
  r.loss = field<double>(j, "loss", w);
  return r;
}

telemetry::PacketFlowFeatures packet_features_from_json(const json& j) {
  const std::string w = "packet record";
  telemetry::PacketFlowFeatures r;
  r.t_s = field<int>(j, "t_s", w);
  r.src = field<NodeId>(j, "src", w);
  r.dst = field<NodeId>(j, "dst", w);
  r.mean_pkt_size_bytes = field<double>(j, "mean_pkt_size_bytes", w);
  r.mean_iat_ms = field<double>(j, "mean_iat_ms", w);
  r.mean_fwd_rate_pps = field<double>(j, "mean_fwd_rate_pps", w);
  r.mean_bwd_rate_pps = field<double>(j, "mean_bwd_rate_pps", w);
  r.retx_fraction = field<double>(j, "retx_fraction", w);
  r.mean_hdr_overhead = field<double>(j, "mean_hdr_overhead", w);
  return r;
}

telemetry::WarningEvent warning_event_from_json(const json& j) {
  const std::string w = "warning event";
  telemetry::WarningEvent r;
  r.t_s = field<int>(j, "t_s", w);
  r.node = field<NodeId>(j, "node", w);
  r.kind = telemetry::warning_kind_from_string(field<std::string>(j, "kind", w));
  r.severity = field<double>(j, "severity", w);
  return r;
}

telemetry::MonitorRecord monitor_record_from_json(const json& j) {
  const std::string w = "monitor record";
  telemetry::MonitorRecord r;
  r.t_s = field<int>(j, "t_s", w);
  r.node = field<NodeId>(j, "node", w);
  r.cpu_pct = field<double>(j, "cpu_pct", w);
  r.mem_pct = field<double>(j, "mem_pct", w);
  r.app_process_up = field<bool>(j, "app_process_up", w);
  r.tx_bytes = field<long long>(j, "tx_bytes", w);
  r.rx_bytes = field<long long>(j, "rx_bytes", w);
  r.rssi_dbm = field<double>(j, "rssi_dbm", w);
  return r;
}

}  // namespace wifidiag::io
