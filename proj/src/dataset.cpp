#include "wifidiag/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "json_io.hpp"
#include "parallel.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::dataset {

namespace {

using io::json;
using telemetry::Modality;

constexpr std::uint64_t kFaultStream = 0x6661756c74737065ULL;
constexpr std::uint64_t kDropStream = 0x64726f706d6f6461ULL;
constexpr std::uint64_t kAnonStream = 0x616e6f6e796d697aULL;

const char* stream_file(Modality m) {
  switch (m) {
    case Modality::Flow: return "flow.jsonl";
    case Modality::Packet: return "packet.jsonl";
    case Modality::Warning: return "warning.jsonl";
    case Modality::Monitor: return "monitor.jsonl";
  }
  return "";
}

void check_permutation(const std::vector<NodeId>& pi, int n) {
  if (static_cast<int>(pi.size()) != n) throw ContractError("permutation size does not match node count");
  std::vector<bool> seen(pi.size(), false);
  for (NodeId v : pi) {
    if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) throw ContractError("not a permutation");
    seen[static_cast<std::size_t>(v)] = true;
  }
}

// Canonical stream orders; emission already follows them.
void sort_streams(telemetry::TelemetryBundle& b) {
  if (b.flow) {
    std::stable_sort(b.flow->begin(), b.flow->end(), [](const auto& x, const auto& y) {
      return std::tie(x.t_s, x.src, x.dst, x.side) < std::tie(y.t_s, y.src, y.dst, y.side);
    });
  }
  if (b.packet) {
    std::stable_sort(b.packet->begin(), b.packet->end(), [](const auto& x, const auto& y) {
      return std::tie(x.t_s, x.src, x.dst) < std::tie(y.t_s, y.src, y.dst);
    });
  }
  if (b.warning) {
    std::stable_sort(b.warning->begin(), b.warning->end(), [](const auto& x, const auto& y) {
      return std::tie(x.t_s, x.node, x.kind) < std::tie(y.t_s, y.node, y.kind);
    });
  }
  if (b.monitor) {
    std::stable_sort(b.monitor->begin(), b.monitor->end(),
                     [](const auto& x, const auto& y) { return std::tie(x.t_s, x.node) < std::tie(y.t_s, y.node); });
  }
}

json entry_json(const ManifestEntry& e) {
  json mods = json::array();
  for (auto m : e.modalities) mods.push_back(std::string(telemetry::to_string(m)));
  return {{"id", e.id},
          {"scenario", std::string(to_string(e.scenario))},
          {"fault_type", std::string(to_string(e.fault_type))},
          {"fault_node", e.fault_node ? json(*e.fault_node) : json(nullptr)},
          {"n_nodes", e.n_nodes},
          {"modalities", mods}};
}

ManifestEntry entry_from_json(const json& j) {
  const std::string w = "manifest entry";
  ManifestEntry e;
  e.id = io::field<std::string>(j, "id", w);
  e.scenario = scenario_from_string(io::field<std::string>(j, "scenario", w));
  e.fault_type = fault_type_from_string(io::field<std::string>(j, "fault_type", w));
  if (!j.at("fault_node").is_null()) e.fault_node = j.at("fault_node").get<NodeId>();
  e.n_nodes = io::field<int>(j, "n_nodes", w);
  for (const auto& m : j.at("modalities")) e.modalities.push_back(telemetry::modality_from_string(m.get<std::string>()));
  return e;
}

std::vector<Modality> modalities_of(const telemetry::TelemetryBundle& b) { return b.present(); }

}  // namespace

void Labels::validate(int n_nodes) const {
  const bool typed = fault_type != FaultType::Normal;
  if (fault_present != typed || fault_present != fault_node.has_value())
    throw ContractError("labels violate fault_present <=> fault_type != Normal <=> fault_node present");
  if (fault_node && (*fault_node < 0 || *fault_node >= n_nodes)) throw ContractError("fault_node out of range");
}

Labels labels_for(const FaultSpec& spec) {
  Labels l;
  l.fault_type = spec.fault;
  l.fault_present = spec.fault != FaultType::Normal;
  l.fault_node = spec.target;
  return l;
}

void Sample::validate() const {
  labels.validate(n_nodes);
  check_permutation(permutation, n_nodes);
  bundle.validate(schedule.duration_s);
  if (labels.fault_node != fault.target) throw ContractError("label node disagrees with fault target");
}

std::vector<NodeId> invert(const std::vector<NodeId>& pi) {
  std::vector<NodeId> inv(pi.size());
  for (std::size_t i = 0; i < pi.size(); ++i) inv[static_cast<std::size_t>(pi[i])] = static_cast<NodeId>(i);
  return inv;
}

Sample permute(Sample s, const std::vector<NodeId>& pi) {
  check_permutation(pi, s.n_nodes);
  auto map = [&](NodeId v) { return pi.at(static_cast<std::size_t>(v)); };
  auto& b = s.bundle;
  if (b.flow) {
    for (auto& r : *b.flow) {
      r.src = map(r.src);
      r.dst = map(r.dst);
    }
  }
  if (b.packet) {
    for (auto& r : *b.packet) {
      r.src = map(r.src);
      r.dst = map(r.dst);
    }
  }
  if (b.warning) {
    for (auto& r : *b.warning) r.node = map(r.node);
  }
  if (b.monitor) {
    for (auto& r : *b.monitor) r.node = map(r.node);
  }
  sort_streams(b);
  if (s.labels.fault_node) s.labels.fault_node = map(*s.labels.fault_node);
  if (s.fault.target) s.fault.target = map(*s.fault.target);
  if (s.fault.second) s.fault.second = map(*s.fault.second);
  for (auto& p : s.permutation) p = map(p);
  return s;
}

Sample anonymize(Sample sample, Rng& rng) {
  std::vector<NodeId> pi(static_cast<std::size_t>(sample.n_nodes));
  std::iota(pi.begin(), pi.end(), 0);
  std::shuffle(pi.begin(), pi.end(), rng);
  return permute(std::move(sample), pi);
}

int CorpusConfig::total() const {
  int n = 0;
  for (const auto& [s, c] : counts) n += c;
  return n;
}

void CorpusConfig::validate() const {
  for (Scenario s : kAllScenarios) {
    auto it = counts.find(s);
    if (it == counts.end() || it->second <= 0)
      throw ConfigError("per-scenario count for " + std::string(to_string(s)) + " must be > 0");
    auto nn = n_nodes.find(s);
    if (nn == n_nodes.end() || nn->second < 3)
      throw ConfigError("n_nodes for " + std::string(to_string(s)) + " must be >= 3");
  }
  if (!(normal_fraction >= 0.0 && normal_fraction <= 1.0)) throw ConfigError("normal_fraction must lie in [0, 1]");
  if (!(missing_rate >= 0.0 && missing_rate <= 0.5)) throw ConfigError("missing_rate must lie in [0, 0.5]");
  schedule.validate();
  telemetry.warnings.validate();
  if (telemetry.packet_segment_ticks <= 0 || telemetry.monitor_interval_ticks <= 0)
    throw ConfigError("telemetry intervals must be positive");
}

std::vector<PlannedSample> plan_corpus(const CorpusConfig& config) {
  config.validate();
  const int n = config.total();
  const int n_normal = static_cast<int>(std::lround(n * config.normal_fraction));
  std::vector<FaultType> labels;
  labels.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n_normal; ++i) labels.push_back(FaultType::Normal);
  const auto faults = injectable_faults();
  for (int i = 0; i < n - n_normal; ++i) labels.push_back(faults[static_cast<std::size_t>(i) % faults.size()]);
  Rng rng(config.base_seed);
  std::shuffle(labels.begin(), labels.end(), rng);

  std::vector<PlannedSample> plan;
  int index = 0;
  for (const auto& [scenario, count] : config.counts) {
    for (int k = 0; k < count; ++k, ++index) plan.push_back({index, scenario, labels[static_cast<std::size_t>(index)]});
  }
  return plan;
}

std::string sample_id(int index) { return fmt::format("s{:05d}", index); }

Sample build_sample(const PlannedSample& plan, const CorpusConfig& config) {
  const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(plan.index);
  const int n = config.n_nodes.at(plan.scenario);
  const auto topo = build_topology(plan.scenario, n, seed, config.topology);
  const auto traffic = build_traffic_profile(plan.scenario, topo, seed, config.traffic);
  Rng fault_rng(seed ^ kFaultStream);
  const auto spec = draw_fault_spec(plan.fault, topo, config.schedule, config.severities, fault_rng);
  const auto trace = sim::run_window(plan.scenario, topo, traffic, spec, config.schedule, seed, config.channel);

  Sample s;
  s.id = sample_id(plan.index);
  s.scenario = plan.scenario;
  s.seed = seed;
  s.n_nodes = n;
  s.schedule = config.schedule;
  s.fault = spec;
  s.labels = labels_for(spec);
  s.permutation.resize(static_cast<std::size_t>(n));
  std::iota(s.permutation.begin(), s.permutation.end(), 0);
  Rng drop_rng(seed ^ kDropStream);
  s.bundle = telemetry::drop_modalities(telemetry::emit_all(trace, config.telemetry), config.missing_rate, drop_rng);
  if (config.anonymize) {
    Rng anon_rng(seed ^ kAnonStream);
    s = anonymize(std::move(s), anon_rng);
  }
  s.validate();
  return s;
}

fs::path sample_dir(const fs::path& corpus_dir, const std::string& id) { return corpus_dir / "samples" / id; }

void save_sample(const Sample& s, const fs::path& dir) {
  try {
    json mods = json::array();
    for (auto m : s.bundle.present()) mods.push_back(std::string(telemetry::to_string(m)));
    json meta = {{"id", s.id},
                 {"scenario", std::string(to_string(s.scenario))},
                 {"seed", s.seed},
                 {"n_nodes", s.n_nodes},
                 {"schedule", io::to_json(s.schedule)},
                 {"fault", io::to_json(s.fault)},
                 {"permutation", s.permutation},
                 {"modalities", mods}};
    io::write_json(dir / "meta.json", meta);
    json labels = {{"fault_present", s.labels.fault_present},
                   {"fault_type", std::string(to_string(s.labels.fault_type))},
                   {"fault_node", s.labels.fault_node ? json(*s.labels.fault_node) : json(nullptr)}};
    io::write_json(dir / "labels.json", labels);
    auto dump = [&](const auto& stream, Modality m) {
      std::error_code ec;
      fs::remove(dir / stream_file(m), ec);
      if (!stream) return;
      std::vector<json> rows;
      rows.reserve(stream->size());
      for (const auto& r : *stream) rows.push_back(io::to_json(r));
      io::write_jsonl(dir / stream_file(m), rows);
    };
    dump(s.bundle.flow, Modality::Flow);
    dump(s.bundle.packet, Modality::Packet);
    dump(s.bundle.warning, Modality::Warning);
    dump(s.bundle.monitor, Modality::Monitor);
  } catch (const IoError& e) {
    throw IoError("sample " + s.id + ": " + e.what());
  }
}

Sample load_sample(const fs::path& dir) {
  const json meta = io::read_json(dir / "meta.json");
  const std::string w = (dir / "meta.json").string();
  Sample s;
  s.id = io::field<std::string>(meta, "id", w);
  s.scenario = scenario_from_string(io::field<std::string>(meta, "scenario", w));
  s.seed = io::field<std::uint64_t>(meta, "seed", w);
  s.n_nodes = io::field<int>(meta, "n_nodes", w);
  s.schedule = io::schedule_from_json(meta.at("schedule"));
  s.fault = io::fault_spec_from_json(meta.at("fault"));
  s.permutation = io::field<std::vector<NodeId>>(meta, "permutation", w);

  const json labels = io::read_json(dir / "labels.json");
  const std::string lw = (dir / "labels.json").string();
  s.labels.fault_present = io::field<bool>(labels, "fault_present", lw);
  s.labels.fault_type = fault_type_from_string(io::field<std::string>(labels, "fault_type", lw));
  if (!labels.at("fault_node").is_null()) s.labels.fault_node = labels.at("fault_node").get<NodeId>();

  for (const auto& name : meta.at("modalities")) {
    const Modality m = telemetry::modality_from_string(name.get<std::string>());
    const auto rows = io::read_jsonl(dir / stream_file(m));
    switch (m) {
      case Modality::Flow:
        s.bundle.flow.emplace();
        for (const auto& r : rows) s.bundle.flow->push_back(io::flow_record_from_json(r));
        break;
      case Modality::Packet:
        s.bundle.packet.emplace();
        for (const auto& r : rows) s.bundle.packet->push_back(io::packet_features_from_json(r));
        break;
      case Modality::Warning:
        s.bundle.warning.emplace();
        for (const auto& r : rows) s.bundle.warning->push_back(io::warning_event_from_json(r));
        break;
      case Modality::Monitor:
        s.bundle.monitor.emplace();
        for (const auto& r : rows) s.bundle.monitor->push_back(io::monitor_record_from_json(r));
        break;
    }
  }
  s.validate();
  return s;
}

ManifestEntry entry_for(const Sample& s) {
  return {s.id, s.scenario, s.labels.fault_type, s.labels.fault_node, s.n_nodes, modalities_of(s.bundle)};
}

CorpusManifest summarize(const std::vector<ManifestEntry>& entries, const std::string& config_hash) {
  CorpusManifest m;
  m.config_hash = config_hash;
  for (Scenario s : kAllScenarios) m.counts_per_scenario[std::string(to_string(s))] = 0;
  for (const auto& info : kFaultTable) m.counts_per_fault[std::string(info.name)] = 0;
  for (const auto& e : entries) {
    ++m.counts_per_scenario[std::string(to_string(e.scenario))];
    ++m.counts_per_fault[std::string(to_string(e.fault_type))];
    if (e.modalities.size() < telemetry::kAllModalities.size()) ++m.incomplete_count;
  }
  m.samples = entries;
  return m;
}

CorpusManifest generate_corpus(const CorpusConfig& config, const fs::path& out_dir, const std::string& config_hash,
                               int threads) {
  const auto plan = plan_corpus(config);
  std::error_code ec;
  fs::remove_all(out_dir / "samples", ec);
  fs::create_directories(out_dir / "samples", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "samples").string() + ": " + ec.message());
  std::vector<ManifestEntry> entries(plan.size());
  parallel_for(plan.size(), threads, [&](std::size_t i) {
    const Sample s = build_sample(plan[i], config);
    save_sample(s, sample_dir(out_dir, s.id));
    entries[i] = entry_for(s);
  });
  auto manifest = summarize(entries, config_hash);
  save_manifest(manifest, out_dir);
  return manifest;
}

void save_manifest(const CorpusManifest& m, const fs::path& corpus_dir) {
  json samples = json::array();
  for (const auto& e : m.samples) samples.push_back(entry_json(e));
  json j = {{"config_hash", m.config_hash},
            {"n_samples", m.samples.size()},
            {"counts_per_scenario", m.counts_per_scenario},
            {"counts_per_fault", m.counts_per_fault},
            {"incomplete_modality_count", m.incomplete_count},
            {"split_strategy", "stratified by fault_type"},
            {"samples", samples}};
  io::write_json(corpus_dir / "manifest.json", j);
}

CorpusManifest load_manifest(const fs::path& corpus_dir) {
  const json j = io::read_json(corpus_dir / "manifest.json");
  const std::string w = (corpus_dir / "manifest.json").string();
  CorpusManifest m;
  m.config_hash = io::field<std::string>(j, "config_hash", w);
  m.counts_per_scenario = io::field<std::map<std::string, int>>(j, "counts_per_scenario", w);
  m.counts_per_fault = io::field<std::map<std::string, int>>(j, "counts_per_fault", w);
  m.incomplete_count = io::field<int>(j, "incomplete_modality_count", w);
  for (const auto& e : j.at("samples")) m.samples.push_back(entry_from_json(e));
  return m;
}

Split split(const CorpusManifest& manifest, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  if (manifest.samples.empty()) throw ConfigError("cannot split an empty corpus");
  std::map<int, std::vector<std::string>> strata;
  for (const auto& e : manifest.samples) strata[fault_index(e.fault_type)].push_back(e.id);

  // Largest-remainder quotas keep each stratum within one sample of ratio * n
  // while the total matches round(ratio * N).
  const auto total = static_cast<long>(std::lround(ratio * static_cast<double>(manifest.samples.size())));
  std::vector<std::pair<int, double>> remainders;
  std::map<int, long> quota;
  long assigned = 0;
  for (const auto& [k, ids] : strata) {
    const double exact = ratio * static_cast<double>(ids.size());
    quota[k] = static_cast<long>(std::floor(exact));
    assigned += quota[k];
    remainders.push_back({k, exact - std::floor(exact)});
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) ++quota[remainders[i].first];

  Split out;
  out.config_hash = manifest.config_hash;
  out.seed = seed;
  out.ratio = ratio;
  Rng rng(seed);
  for (auto& [k, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto q = static_cast<std::size_t>(quota[k]);
    out.train.insert(out.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(q));
    out.test.insert(out.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(q), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void save_split(const Split& s, const fs::path& corpus_dir) {
  json j = {{"config_hash", s.config_hash},
            {"seed", s.seed},
            {"ratio", s.ratio},
            {"strategy", "stratified by fault_type"},
            {"train", s.train},
            {"test", s.test}};
  io::write_json(corpus_dir / "split.json", j);
}

Split load_split(const fs::path& corpus_dir) {
  const json j = io::read_json(corpus_dir / "split.json");
  const std::string w = (corpus_dir / "split.json").string();
  Split s;
  s.config_hash = io::field<std::string>(j, "config_hash", w);
  s.seed = io::field<std::uint64_t>(j, "seed", w);
  s.ratio = io::field<double>(j, "ratio", w);
  s.train = io::field<std::vector<std::string>>(j, "train", w);
  s.test = io::field<std::vector<std::string>>(j, "test", w);
  return s;
}

}  // namespace wifidiag::dataset
