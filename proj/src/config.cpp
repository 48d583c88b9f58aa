#include "wifidiag/config.hpp"

#include <set>

#include <fmt/format.h>
#include <openssl/sha.h>

#include "json_io.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::config {

using nlohmann::json;

namespace {

// One field list per struct drives both directions of the mapping.

struct Writer {
  json& j;
  template <typename T>
  void operator()(const char* key, T& v) {
    j[key] = v;
  }
};

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }
  template <typename T>
  void operator()(const char* key, T& v) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      v = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }
  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError("unknown config key '" + where_ + "." + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename V>
void fields(V& v, WindowSchedule& s) {
  v("duration_s", s.duration_s);
  v("injection_at_s", s.injection_at_s);
  v("tick_s", s.tick_s);
}

template <typename V>
void fields(V& v, TopologyConfig& c) {
  v("rssi_min_dbm", c.rssi_min_dbm);
  v("rssi_max_dbm", c.rssi_max_dbm);
  v("adhoc_extra_link_fraction", c.adhoc_extra_link_fraction);
}

template <typename V>
void fields(V& v, TrafficConfig& c) {
  v("h2h_base_bps", c.h2h_base_bps);
  v("h2h_uplink_ratio", c.h2h_uplink_ratio);
  v("iot_base_bps", c.iot_base_bps);
  v("lognormal_sigma", c.lognormal_sigma);
  v("pareto_shape_min", c.pareto_shape_min);
  v("pareto_shape_max", c.pareto_shape_max);
  v("iot_period_min_s", c.iot_period_min_s);
  v("iot_period_max_s", c.iot_period_max_s);
  v("iot_jitter", c.iot_jitter);
  v("h2h_packet_bytes", c.h2h_packet_bytes);
  v("iot_packet_bytes", c.iot_packet_bytes);
}

template <typename V>
void fields(V& v, sim::ChannelConfig& c) {
  v("mac_efficiency", c.mac_efficiency);
  v("residual_retx_loss", c.residual_retx_loss);
  v("frame_overhead_us", c.frame_overhead_us);
  v("base_queue_cap_pkts", c.base_queue_cap_pkts);
  v("fading_db", c.fading_db);
  v("h2h_burst_cap", c.h2h_burst_cap);
  v("spill_min", c.spill_min);
  v("spill_max", c.spill_max);
  v("spill_spread", c.spill_spread);
  v("spill_loss_cap", c.spill_loss_cap);
  v("spill_latency_cap", c.spill_latency_cap);
}

template <typename V>
void fields(V& v, telemetry::WarningRuleConfig& c) {
  v("connectivity_ticks", c.connectivity_ticks);
  v("loss_threshold", c.loss_threshold);
  v("loss_window_ticks", c.loss_window_ticks);
  v("delay_factor", c.delay_factor);
  v("resource_threshold", c.resource_threshold);
}

template <typename V>
void fields(V& v, diagnosis::Hyper& h) {
  v("seed", h.seed);
  v("logreg_epochs", h.logreg_epochs);
  v("logreg_lr", h.logreg_lr);
  v("logreg_l2", h.logreg_l2);
  v("knn_k", h.knn_k);
  v("tree_max_depth", h.tree_max_depth);
  v("tree_min_leaf", h.tree_min_leaf);
  v("mlp_hidden", h.mlp_hidden);
  v("mlp_epochs", h.mlp_epochs);
  v("mlp_lr", h.mlp_lr);
  v("mlp_l2", h.mlp_l2);
}

template <typename T>
json write_fields(T value) {
  json j = json::object();
  Writer w{j};
  fields(w, value);
  return j;
}

template <typename T>
void read_fields(const json& j, const std::string& where, T& value) {
  Reader r(j, where);
  fields(r, value);
  r.finish();
}

template <typename T>
T get(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + " has the wrong type");
  }
}

// Object members read by hand: check names, then hand each present member to
// `fn`.
template <typename Fn>
void members(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed, Fn&& fn) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown config key '" + where + "." + k + "'");
    fn(k, v);
  }
}

json scenario_map(const std::map<Scenario, int>& m) {
  json j = json::object();
  for (const auto& [s, n] : m) j[std::string(to_string(s))] = n;
  return j;
}

std::map<Scenario, int> read_scenario_map(const json& j, const std::string& where, std::map<Scenario, int> out) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    Scenario s;
    try {
      s = scenario_from_string(k);
    } catch (const Error&) {
      throw ConfigError("unknown config key '" + where + "." + k + "'");
    }
    out[s] = get<int>(v, where + "." + k);
  }
  return out;
}

json severities_json(const SeverityConfig& c) {
  json j = json::object();
  for (const auto& [f, schema] : c.ranges) {
    if (schema.empty()) continue;
    json s = json::object();
    for (const auto& [name, r] : schema) s[name] = {r.lo, r.hi};
    j[std::string(to_string(f))] = s;
  }
  return j;
}

SeverityConfig read_severities(const json& j, const std::string& where) {
  SeverityConfig c;
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    FaultType f;
    try {
      f = fault_type_from_string(k);
    } catch (const Error&) {
      throw ConfigError("unknown config key '" + where + "." + k + "'");
    }
    auto& schema = c.ranges.at(f);
    if (!v.is_object()) throw ConfigError(where + "." + k + " must be an object");
    for (const auto& [p, range] : v.items()) {
      if (!schema.contains(p)) throw ConfigError("unknown config key '" + where + "." + k + "." + p + "'");
      const auto lohi = get<std::vector<double>>(range, where + "." + k + "." + p);
      if (lohi.size() != 2 || lohi[0] > lohi[1])
        throw ConfigError(where + "." + k + "." + p + " must be [lo, hi] with lo <= hi");
      schema[p] = {lohi[0], lohi[1]};
    }
  }
  return c;
}

json corpus_json(const dataset::CorpusConfig& c) {
  return {{"counts", scenario_map(c.counts)},
          {"n_nodes", scenario_map(c.n_nodes)},
          {"normal_fraction", c.normal_fraction},
          {"missing_rate", c.missing_rate},
          {"seed", c.base_seed},
          {"anonymize", c.anonymize},
          {"schedule", write_fields(c.schedule)},
          {"topology", write_fields(c.topology)},
          {"traffic", write_fields(c.traffic)},
          {"severities", severities_json(c.severities)},
          {"channel", write_fields(c.channel)},
          {"telemetry",
           {{"packet_segment_ticks", c.telemetry.packet_segment_ticks},
            {"monitor_interval_ticks", c.telemetry.monitor_interval_ticks},
            {"warnings", write_fields(c.telemetry.warnings)}}}};
}

dataset::CorpusConfig read_corpus(const json& j) {
  dataset::CorpusConfig c;
  const std::string w = "corpus";
  members(j, w,
          {"counts", "n_nodes", "normal_fraction", "missing_rate", "seed", "anonymize", "schedule", "topology", "traffic",
           "severities", "channel", "telemetry"},
          [&](const std::string& k, const json& v) {
            const std::string at = w + "." + k;
            if (k == "counts") c.counts = read_scenario_map(v, at, c.counts);
            else if (k == "n_nodes") c.n_nodes = read_scenario_map(v, at, c.n_nodes);
            else if (k == "normal_fraction") c.normal_fraction = get<double>(v, at);
            else if (k == "missing_rate") c.missing_rate = get<double>(v, at);
            else if (k == "seed") c.base_seed = get<std::uint64_t>(v, at);
            else if (k == "anonymize") c.anonymize = get<bool>(v, at);
            else if (k == "schedule") read_fields(v, at, c.schedule);
            else if (k == "topology") read_fields(v, at, c.topology);
            else if (k == "traffic") read_fields(v, at, c.traffic);
            else if (k == "severities") c.severities = read_severities(v, at);
            else if (k == "channel") read_fields(v, at, c.channel);
            else if (k == "telemetry") {
              members(v, at, {"packet_segment_ticks", "monitor_interval_ticks", "warnings"},
                      [&](const std::string& tk, const json& tv) {
                        const std::string tat = at + "." + tk;
                        if (tk == "packet_segment_ticks") c.telemetry.packet_segment_ticks = get<int>(tv, tat);
                        else if (tk == "monitor_interval_ticks") c.telemetry.monitor_interval_ticks = get<int>(tv, tat);
                        else read_fields(tv, tat, c.telemetry.warnings);
                      });
            }
          });
  return c;
}

json sets_json(const std::vector<preprocess::ModalitySet>& sets) {
  json a = json::array();
  for (const auto& s : sets) a.push_back(preprocess::to_string(s));
  return a;
}

std::vector<preprocess::ModalitySet> read_sets(const json& j, const std::string& where) {
  std::vector<preprocess::ModalitySet> out;
  for (const auto& s : get<std::vector<std::string>>(j, where)) out.push_back(preprocess::parse_modality_set(s));
  return out;
}

json bench_json(const BenchConfig& b) {
  json methods = json::array();
  for (auto m : b.methods) methods.push_back(std::string(diagnosis::to_string(m)));
  json tasks = json::array();
  for (auto t : b.tasks) tasks.push_back(std::string(diagnosis::to_string(t)));
  return {{"methods", methods},
          {"modality_sets", sets_json(b.modality_sets)},
          {"tasks", tasks},
          {"hyper", write_fields(b.hyper)},
          {"threads", b.threads}};
}

BenchConfig read_bench(const json& j) {
  BenchConfig b;
  const std::string w = "bench";
  members(j, w, {"methods", "modality_sets", "tasks", "hyper", "threads"}, [&](const std::string& k, const json& v) {
    const std::string at = w + "." + k;
    if (k == "methods") {
      b.methods.clear();
      for (const auto& s : get<std::vector<std::string>>(v, at)) b.methods.push_back(diagnosis::method_from_string(s));
    } else if (k == "modality_sets") {
      b.modality_sets = read_sets(v, at);
    } else if (k == "tasks") {
      b.tasks.clear();
      for (const auto& s : get<std::vector<std::string>>(v, at)) b.tasks.push_back(diagnosis::task_from_string(s));
    } else if (k == "hyper") {
      read_fields(v, at, b.hyper);
    } else {
      b.threads = get<int>(v, at);
    }
  });
  return b;
}

json llm_json(const LlmConfig& c) {
  return {{"endpoint", llm::to_json(c.endpoint)},
          {"modality_sets", sets_json(c.modality_sets)},
          {"subset_fraction", c.subset_fraction},
          {"subset_seed", c.subset_seed},
          {"distill_method", std::string(diagnosis::to_string(c.distill_method))},
          {"prompt_version", std::string(llm::kPromptVersion)}};
}

LlmConfig read_llm(const json& j) {
  LlmConfig c;
  const std::string w = "llm";
  members(j, w, {"endpoint", "modality_sets", "subset_fraction", "subset_seed", "distill_method", "prompt_version"},
          [&](const std::string& k, const json& v) {
            const std::string at = w + "." + k;
            if (k == "endpoint") c.endpoint = llm::endpoint_from_json(v);
            else if (k == "modality_sets") c.modality_sets = read_sets(v, at);
            else if (k == "subset_fraction") c.subset_fraction = get<double>(v, at);
            else if (k == "subset_seed") c.subset_seed = get<std::uint64_t>(v, at);
            else if (k == "distill_method") c.distill_method = diagnosis::method_from_string(get<std::string>(v, at));
            else if (get<std::string>(v, at) != llm::kPromptVersion)
              throw ConfigError(fmt::format("llm.prompt_version '{}' is not supported (this build uses '{}')",
                                            v.get<std::string>(), llm::kPromptVersion));
          });
  return c;
}

std::vector<std::string> split_csv(std::string_view csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : csv) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  if (out.empty()) throw ConfigError("empty list '" + std::string(csv) + "'");
  return out;
}

}  // namespace

std::vector<preprocess::ModalitySet> BenchConfig::default_modality_sets() {
  std::vector<preprocess::ModalitySet> out;
  for (const char* s : {"flow", "packet", "warning", "monitor", "flow+packet", "flow+warning", "packet+warning",
                        "flow+packet+warning", "flow+packet+warning+monitor"}) {
    out.push_back(preprocess::parse_modality_set(s));
  }
  return out;
}

std::vector<preprocess::ModalitySet> LlmConfig::default_modality_sets() {
  std::vector<preprocess::ModalitySet> out;
  for (auto m : telemetry::kAllModalities) out.push_back({m});
  return out;
}

void RunConfig::validate() const {
  corpus.validate();
  if (!(split.ratio > 0.0 && split.ratio < 1.0)) throw ConfigError("split.ratio must lie in (0, 1)");
  if (preprocess.sequence_length < 0) throw ConfigError("preprocess.sequence_length must be >= 0");
  if (bench.methods.empty()) throw ConfigError("bench.methods is empty");
  if (bench.tasks.empty()) throw ConfigError("bench.tasks is empty");
  if (bench.modality_sets.empty()) throw ConfigError("bench.modality_sets is empty");
  if (bench.threads < 1) throw ConfigError("bench.threads must be >= 1");
  if (bench.hyper.knn_k < 1) throw ConfigError("bench.hyper.knn_k must be >= 1");
  if (bench.hyper.logreg_epochs < 1 || bench.hyper.mlp_epochs < 1) throw ConfigError("bench.hyper epochs must be >= 1");
  if (bench.hyper.mlp_hidden < 1) throw ConfigError("bench.hyper.mlp_hidden must be >= 1");
  if (bench.hyper.tree_max_depth < 1 || bench.hyper.tree_min_leaf < 1)
    throw ConfigError("bench.hyper tree limits must be >= 1");
  features.validate();
  llm.endpoint.validate();
  if (llm.modality_sets.empty()) throw ConfigError("llm.modality_sets is empty");
  if (!(llm.subset_fraction > 0.0 && llm.subset_fraction <= 1.0))
    throw ConfigError("llm.subset_fraction must lie in (0, 1]");
}

json to_json(const RunConfig& c) {
  return {{"corpus", corpus_json(c.corpus)},
          {"split", {{"ratio", c.split.ratio}, {"seed", c.split.seed}}},
          {"preprocess", {{"sequence_length", c.preprocess.sequence_length}}},
          {"bench", bench_json(c.bench)},
          {"features", reasoning::to_json(c.features)},
          {"llm", llm_json(c.llm)}};
}

RunConfig from_json(const json& j) {
  RunConfig c;
  members(j, "config", {"corpus", "split", "preprocess", "bench", "features", "llm"},
          [&](const std::string& k, const json& v) {
            if (k == "corpus") {
              c.corpus = read_corpus(v);
            } else if (k == "split") {
              members(v, "split", {"ratio", "seed"}, [&](const std::string& sk, const json& sv) {
                if (sk == "ratio") c.split.ratio = get<double>(sv, "split.ratio");
                else c.split.seed = get<std::uint64_t>(sv, "split.seed");
              });
            } else if (k == "preprocess") {
              members(v, "preprocess", {"sequence_length"}, [&](const std::string&, const json& pv) {
                c.preprocess.sequence_length = get<int>(pv, "preprocess.sequence_length");
              });
            } else if (k == "bench") {
              c.bench = read_bench(v);
            } else if (k == "features") {
              c.features = reasoning::feature_space_from_json(v);
            } else {
              c.llm = read_llm(v);
            }
          });
  c.validate();
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  const auto text = io::read_text(path);
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  try {
    return from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save(const RunConfig& c, const std::filesystem::path& path) { io::write_text(path, to_json(c).dump(2) + "\n"); }

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Generate: return "generate";
    case Stage::Split: return "split";
    case Stage::Preprocess: return "preprocess";
    case Stage::Bench: return "bench";
    case Stage::LlmExtract: return "llm-extract";
    case Stage::ReasonEval: return "reason-eval";
  }
  return "unknown";
}

std::string sha256_hex(std::string_view text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string hex;
  for (unsigned char ch : digest) hex += fmt::format("{:02x}", ch);
  return hex;
}

std::string stage_hash(const RunConfig& c, Stage s) {
  const json full = to_json(c);
  std::vector<const char*> sections = {"corpus"};
  switch (s) {
    case Stage::Generate: break;
    case Stage::Split: sections = {"corpus", "split"}; break;
    case Stage::Preprocess: sections = {"corpus", "split", "preprocess"}; break;
    case Stage::Bench: sections = {"corpus", "split", "preprocess", "bench"}; break;
    case Stage::LlmExtract: sections = {"corpus", "split", "preprocess", "features", "llm"}; break;
    case Stage::ReasonEval: sections = {"corpus", "split", "preprocess", "features", "llm"}; break;
  }
  json part = json::object();
  for (const char* k : sections) part[k] = full.at(k);
  // Outputs are identical for any thread count, so it does not gate reuse.
  if (part.contains("bench")) part["bench"].erase("threads");
  return sha256_hex(part.dump());
}

std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

std::vector<diagnosis::Method> parse_methods(std::string_view csv) {
  std::vector<diagnosis::Method> out;
  for (const auto& s : split_csv(csv)) out.push_back(diagnosis::method_from_string(s));
  return out;
}

std::vector<diagnosis::Task> parse_tasks(std::string_view csv) {
  std::vector<diagnosis::Task> out;
  for (const auto& s : split_csv(csv)) out.push_back(diagnosis::task_from_string(s));
  return out;
}

std::vector<preprocess::ModalitySet> parse_modality_sets(std::string_view csv) {
  std::vector<preprocess::ModalitySet> out;
  for (const auto& s : split_csv(csv)) out.push_back(preprocess::parse_modality_set(s));
  return out;
}

}  // namespace wifidiag::config
