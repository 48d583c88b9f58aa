#include "wifidiag/llmclient.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/sha.h>

#include <fmt/format.h>

#include "parallel.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::llm {

using nlohmann::json;
using telemetry::Modality;
using telemetry::WarningKind;

namespace {

// Level rules of the mock: a deviation of at least `min_level` in the given
// direction on `key` raises `feature`.
struct LevelRule {
  std::string_view key;
  int direction;
  int min_level;
  std::string_view feature;
};

constexpr LevelRule kLevelRules[] = {
    {"flow.tx_latency", +1, 1, "elevated_latency"},
    {"flow.rx_latency", +1, 1, "elevated_latency"},
    {"flow.tx_jitter", +1, 1, "elevated_jitter"},
    {"flow.rx_jitter", +1, 1, "elevated_jitter"},
    {"flow.tx_loss", +1, 1, "elevated_packet_loss"},
    {"flow.rx_loss", +1, 1, "elevated_packet_loss"},
    {"flow.tx_throughput", -1, 1, "throughput_degradation"},
    {"flow.rx_throughput", -1, 1, "throughput_degradation"},
    {"flow.rx_throughput", -1, 3, "connectivity_loss"},
    {"packet.retx_fraction", +1, 1, "excessive_retransmissions"},
    {"packet.retx_fraction", +1, 2, "elevated_packet_loss"},
    {"packet.iat", +1, 1, "elevated_latency"},
    {"packet.fwd_rate", -1, 1, "throughput_degradation"},
    {"packet.bwd_rate", -1, 1, "throughput_degradation"},
    {"packet.bwd_rate", +1, 2, "application_failure"},
    {"packet.pkt_size", -1, 2, "connectivity_loss"},
    {"monitor.cpu", +1, 2, "resource_exhaustion"},
    {"monitor.mem", +1, 2, "queue_saturation"},
    {"monitor.mem", +1, 3, "resource_exhaustion"},
    {"monitor.app_up", -1, 1, "application_failure"},
    {"monitor.rssi", -1, 1, "signal_degradation"},
    {"monitor.report_ratio", -1, 1, "connectivity_loss"},
    {"monitor.tx_bytes", -1, 2, "throughput_degradation"},
};

// The mock's reading of warning events: the ground-truth table plus the
// neighbouring conditions a model tends to infer, at half weight.
struct WarningRule {
  WarningKind kind;
  std::string_view feature;
  double weight;
};

constexpr WarningRule kWarningRules[] = {
    {WarningKind::ConnectivityDegradation, "connectivity_loss", 1.0},
    {WarningKind::ConnectivityDegradation, "throughput_degradation", 0.5},
    {WarningKind::PacketLoss, "elevated_packet_loss", 1.0},
    {WarningKind::ExcessiveDelay, "elevated_latency", 1.0},
    {WarningKind::ExcessiveDelay, "queue_saturation", 0.5},
    {WarningKind::ProcessDown, "application_failure", 1.0},
    {WarningKind::ProcessDown, "throughput_degradation", 0.5},
    {WarningKind::ResourceAnomaly, "resource_exhaustion", 1.0},
    {WarningKind::Reassociation, "connectivity_loss", 1.0},
};

constexpr double kMockBase = 0.05;
constexpr double kMockNoise = 0.1;

std::string normalize_name(std::string s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '-') c = '_';
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n`*\"'");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n`*\"',");
  return std::string(s.substr(b, e - b + 1));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, ms % 1000);
}

double monotonic_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

Client::Transport http_transport(const EndpointConfig& c) {
  return [c](const std::string& body) -> std::string {
    httplib::Client cli(c.base_url);
    const auto secs = static_cast<time_t>(c.timeout_s);
    const auto usecs = static_cast<time_t>((c.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* token = std::getenv(c.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto res = cli.Post(c.path, headers, body, "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError(fmt::format("HTTP {}", res->status));
    return res->body;
  };
}

}  // namespace

std::string_view to_string(ParseStatus s) {
  switch (s) {
    case ParseStatus::Ok: return "Ok";
    case ParseStatus::Repaired: return "Repaired";
    case ParseStatus::Failed: return "Failed";
  }
  return "Failed";
}

ParseStatus parse_status_from_string(std::string_view s) {
  for (auto st : {ParseStatus::Ok, ParseStatus::Repaired, ParseStatus::Failed}) {
    if (to_string(st) == s) return st;
  }
  throw ContractError("unknown parse status '" + std::string(s) + "'");
}

std::string_view level_descriptor(int level) {
  switch (std::clamp(level, -3, 3)) {
    case -3: return "severely reduced";
    case -2: return "reduced";
    case -1: return "slightly reduced";
    case 1: return "slightly raised";
    case 2: return "raised";
    case 3: return "severely raised";
    default: return "normal";
  }
}

PromptBundle build_prompts(const dataset::Sample& sample, const preprocess::DeviationView& levels,
                           const preprocess::ModalitySet& set, const FeatureSpace& space) {
  PromptBundle b;
  b.sample_id = sample.id;
  b.modalities = preprocess::to_string(set);
  b.schema = space.names;
  const bool with_warnings = std::find(set.begin(), set.end(), Modality::Warning) != set.end();

  for (NodeId v = 0; v < sample.n_nodes; ++v) {
    std::string text = fmt::format(
        "You are diagnosing a Wi-Fi network. Observations of node {} over a {} s window, modalities: {}.\n", v,
        sample.schedule.duration_s, b.modalities);
    const auto& node_levels = levels.levels.at(static_cast<std::size_t>(v));
    for (Modality m : set) {
      if (m == Modality::Warning) continue;
      if (!sample.bundle.has(m)) {
        text += fmt::format("{} telemetry: unavailable\n", telemetry::to_string(m));
        continue;
      }
      text += fmt::format("{} deviation levels against normal operation:\n", telemetry::to_string(m));
      for (const auto& f : preprocess::feature_names(m)) {
        const int level = node_levels.at(fmt::format("{}.{}", telemetry::to_string(m), f));
        text += fmt::format("- {}.{}: {} ({:+d})\n", telemetry::to_string(m), f, level_descriptor(level), level);
      }
    }
    if (with_warnings) {
      if (!sample.bundle.warning) {
        text += "warning telemetry: unavailable\n";
      } else {
        std::map<WarningKind, int> counts;
        for (const auto& w : *sample.bundle.warning) {
          if (w.node == v) ++counts[w.kind];
        }
        text += "warning events at this node:\n";
        if (counts.empty()) text += "- none\n";
        for (const auto& [k, n] : counts) text += fmt::format("- {} x{}\n", telemetry::to_string(k), n);
      }
    }
    text += "Score each operational feature from 0 (absent) to 1 (certain). Answer with exactly one line per "
            "feature in the form `name: score`:\n";
    for (const auto& n : space.names) text += n + ": <score>\n";
    b.prompts.push_back({v, std::move(text)});
  }
  return b;
}

std::string render_answer(const Scores& scores, const FeatureSpace& space) {
  if (static_cast<int>(scores.size()) != space.dim()) throw ContractError("render_answer: dimension mismatch");
  std::string out;
  for (std::size_t i = 0; i < scores.size(); ++i) out += fmt::format("{}: {}\n", space.names[i], scores[i]);
  return out;
}

ParsedFeatures parse_features(std::string_view raw, const FeatureSpace& space) {
  const auto d = static_cast<std::size_t>(space.dim());
  std::vector<std::optional<double>> found(d);
  bool repaired = false;

  auto take = [&](const std::string& name, double value) {
    std::string key = name;
    auto idx = std::find(space.names.begin(), space.names.end(), key);
    if (idx == space.names.end()) {
      key = normalize_name(name);
      idx = std::find(space.names.begin(), space.names.end(), key);
      if (idx == space.names.end()) return;
      repaired = true;
    }
    auto& slot = found[static_cast<std::size_t>(idx - space.names.begin())];
    if (slot || !std::isfinite(value)) return;
    if (value < 0.0 || value > 1.0) repaired = true;
    slot = std::clamp(value, 0.0, 1.0);
  };

  // A flat JSON object anywhere in the text.
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    const auto j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_object()) {
      for (const auto& [k, v] : j.items()) {
        if (v.is_number()) take(k, v.get<double>());
      }
    }
  }
  static const std::regex line_re(R"(^\s*[-*]?\s*`?([A-Za-z][A-Za-z _-]*?)`?\s*[:=]\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?))");
  std::istringstream in{std::string(raw)};
  for (std::string line; std::getline(in, line);) {
    std::smatch m;
    if (std::regex_search(line, m, line_re)) take(trim(m[1].str()), std::stod(m[2].str()));
  }

  ParsedFeatures out;
  if (std::none_of(found.begin(), found.end(), [](const auto& v) { return v.has_value(); })) return out;
  Scores s(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    if (found[i]) {
      s[i] = *found[i];
    } else {
      repaired = true;
    }
  }
  out.status = repaired ? ParseStatus::Repaired : ParseStatus::Ok;
  out.scores = std::move(s);
  return out;
}

std::string prompt_hash(std::string_view prompt) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(prompt.data()), prompt.size(), digest);
  std::string hex;
  for (unsigned char c : digest) hex += fmt::format("{:02x}", c);
  return hex;
}

std::string mock_llm(std::string_view prompt, std::uint64_t seed, const FeatureSpace& space) {
  const auto d = static_cast<std::size_t>(space.dim());
  Scores s(d, kMockBase);
  auto raise = [&](std::string_view feature, double value) {
    const auto it = std::find(space.names.begin(), space.names.end(), feature);
    if (it == space.names.end()) return;
    auto& slot = s[static_cast<std::size_t>(it - space.names.begin())];
    slot = std::max(slot, value);
  };

  static const std::regex level_re(R"(^- ([a-z]+\.[A-Za-z_]+): [a-z ]+ \(([-+]?\d+)\)$)");
  static const std::regex event_re(R"(^- ([A-Za-z]+) x(\d+)$)");
  std::istringstream in{std::string(prompt)};
  for (std::string line; std::getline(in, line);) {
    std::smatch m;
    if (std::regex_match(line, m, level_re)) {
      const std::string key = m[1].str();
      const int level = std::stoi(m[2].str());
      for (const auto& r : kLevelRules) {
        if (r.key == key && level * r.direction >= r.min_level) raise(r.feature, 0.15 + 0.2 * std::abs(level));
      }
    } else if (std::regex_match(line, m, event_re)) {
      const auto kind = telemetry::warning_kind_from_string(m[1].str());
      const double count = std::stod(m[2].str());
      const double strength = 0.7 + 0.25 * std::min(1.0, count / 5.0);
      for (const auto& r : kWarningRules) {
        if (r.kind == kind) raise(r.feature, strength * r.weight);
      }
    }
  }

  const auto hash = prompt_hash(prompt);
  Rng rng(seed ^ std::stoull(hash.substr(0, 16), nullptr, 16));
  for (auto& v : s) v = std::clamp(v + uniform(rng, -kMockNoise, kMockNoise), 0.0, 1.0);
  return render_answer(s, space);
}

NodeAggregate aggregate_nodes(const std::vector<Scores>& per_node) {
  if (per_node.empty()) throw ContractError("aggregate_nodes: no nodes");
  NodeAggregate out;
  out.features.assign(per_node.front().size(), 0.0);
  double best = -1.0;
  for (std::size_t v = 0; v < per_node.size(); ++v) {
    if (per_node[v].size() != out.features.size()) throw ContractError("aggregate_nodes: dimension mismatch");
    double peak = 0.0;
    for (std::size_t i = 0; i < per_node[v].size(); ++i) {
      out.features[i] = v == 0 ? per_node[v][i] : std::max(out.features[i], per_node[v][i]);
      peak = std::max(peak, per_node[v][i]);
    }
    if (peak > best) {
      best = peak;
      out.node = static_cast<NodeId>(v);
    }
  }
  return out;
}

void EndpointConfig::validate() const {
  if (kind != "mock" && kind != "http") throw ConfigError("llm endpoint kind must be 'mock' or 'http', got '" + kind + "'");
  if (kind == "http" && base_url.empty()) throw ConfigError("llm endpoint: base_url is required for kind 'http'");
  if (timeout_s <= 0.0) throw ConfigError("llm endpoint: timeout_s must be positive");
  if (max_in_flight < 1) throw ConfigError("llm endpoint: max_in_flight must be at least 1");
  if (max_retries < 0) throw ConfigError("llm endpoint: max_retries must be non-negative");
  if (requests_per_second < 0.0) throw ConfigError("llm endpoint: requests_per_second must be non-negative");
  if (retry_backoff_s < 0.0) throw ConfigError("llm endpoint: retry_backoff_s must be non-negative");
}

json to_json(const EndpointConfig& c) {
  return {{"kind", c.kind},
          {"base_url", c.base_url},
          {"path", c.path},
          {"model", c.model},
          {"token_env", c.token_env},
          {"timeout_s", c.timeout_s},
          {"max_in_flight", c.max_in_flight},
          {"max_retries", c.max_retries},
          {"requests_per_second", c.requests_per_second},
          {"retry_backoff_s", c.retry_backoff_s},
          {"seed", c.seed}};
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig c;
  const json defaults = to_json(c);
  if (!j.is_object()) throw ConfigError("llm.endpoint must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!defaults.contains(k)) throw ConfigError("llm.endpoint: unknown key '" + k + "'");
  }
  try {
    c.kind = j.value("kind", c.kind);
    c.base_url = j.value("base_url", c.base_url);
    c.path = j.value("path", c.path);
    c.model = j.value("model", c.model);
    c.token_env = j.value("token_env", c.token_env);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.requests_per_second = j.value("requests_per_second", c.requests_per_second);
    c.retry_backoff_s = j.value("retry_backoff_s", c.retry_backoff_s);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("llm.endpoint: ") + e.what());
  }
  c.validate();
  return c;
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void AuditLog::append(const json& entry) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to " + path_.string());
  out << entry.dump() << '\n';
}

Client::Client(EndpointConfig config, FeatureSpace space, AuditLog* audit)
    : config_(std::move(config)), space_(std::move(space)), audit_(audit) {
  config_.validate();
  if (config_.kind == "http") transport_ = http_transport(config_);
}

std::string Client::request_body(const std::string& prompt) const {
  json body = {{"model", config_.model},
               {"temperature", 0},
               {"messages", json::array({{{"role", "user"}, {"content", prompt}}})}};
  return body.dump();
}

std::string Client::response_text(const std::string& body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("response is not JSON");
  try {
    const auto& first = j.at("choices").at(0);
    if (first.contains("message")) return first.at("message").at("content").get<std::string>();
    return first.at("text").get<std::string>();
  } catch (const json::exception&) {
    throw TransportError("response has no candidate text");
  }
}

void Client::throttle() {
  if (config_.requests_per_second <= 0.0) return;
  double wait = 0.0;
  {
    std::lock_guard lock(rate_mu_);
    const double now = monotonic_s();
    const double slot = std::max(now, next_slot_s_);
    next_slot_s_ = slot + 1.0 / config_.requests_per_second;
    wait = slot - now;
  }
  if (wait > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(wait));
}

LlmResponse Client::ask(const std::string& sample_id, const NodePrompt& prompt) {
  LlmResponse r;
  r.sample_id = sample_id;
  r.node = prompt.node;
  const auto hash = prompt_hash(prompt.text);
  auto log = [&](json entry) {
    if (!audit_) return;
    entry["timestamp"] = utc_now();
    entry["sample"] = sample_id;
    entry["node"] = prompt.node;
    entry["prompt_hash"] = hash;
    entry["endpoint"] = config_.kind;
    audit_->append(entry);
  };

  const bool mock = config_.kind == "mock";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    r.attempts = attempt + 1;
    if (mock) {
      // The mock is deterministic, so a retry would repeat the same answer.
      r.raw = mock_llm(prompt.text, config_.seed, space_);
    } else {
      throttle();
      log({{"event", "request"}, {"attempt", r.attempts}, {"status", "sent"}, {"body", request_body(prompt.text)}});
      try {
        const auto body = transport_(request_body(prompt.text));
        log({{"event", "reply"}, {"attempt", r.attempts}, {"status", "received"}, {"body", body}});
        r.raw = response_text(body);
      } catch (const TransportError& e) {
        log({{"event", "transport_error"}, {"attempt", r.attempts}, {"status", "error"}, {"error", e.what()}});
        r.raw.clear();
        r.status = ParseStatus::Failed;
        r.parsed.reset();
        if (attempt < config_.max_retries && config_.retry_backoff_s > 0.0) {
          std::this_thread::sleep_for(std::chrono::duration<double>(config_.retry_backoff_s * std::pow(2.0, attempt)));
        }
        continue;
      }
    }
    auto parsed = parse_features(r.raw, space_);
    r.status = parsed.status;
    r.parsed = std::move(parsed.scores);
    if (r.status != ParseStatus::Failed || mock) break;
  }
  log({{"event", "response"}, {"attempt", r.attempts}, {"status", to_string(r.status)}, {"text", r.raw}});
  return r;
}

std::vector<LlmResponse> Client::query(const PromptBundle& bundle) {
  std::vector<LlmResponse> out(bundle.prompts.size());
  const int workers = config_.kind == "mock" ? 1 : config_.max_in_flight;
  parallel_for(bundle.prompts.size(), workers, [&](std::size_t i) { out[i] = ask(bundle.sample_id, bundle.prompts[i]); });
  return out;
}

std::vector<std::string> distill_subset(const dataset::CorpusManifest& manifest, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("distillation fraction must lie in (0, 1]");
  return dataset::split(manifest, fraction, seed).train;
}

DistillResult distill(const std::vector<std::string>& subset, const std::map<std::string, Scores>& features,
                      const std::map<std::string, dataset::Labels>& labels, const dataset::Split& split,
                      diagnosis::Method method, const diagnosis::Hyper& hyper, const std::string& modalities) {
  if (subset.empty()) throw ConfigError("distillation subset is empty");
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  const std::set<std::string> test_ids(split.test.begin(), split.test.end());
  std::vector<std::string> train, test;
  for (const auto& id : subset) {
    if (train_ids.contains(id)) train.push_back(id);
    else if (test_ids.contains(id)) test.push_back(id);
    else throw ConfigError("distillation sample '" + id + "' is in neither split");
  }
  if (train.empty() || test.empty()) throw ConfigError("distillation subset lacks a training or test portion");

  auto row = [&](const std::string& id) -> const Scores& {
    auto it = features.find(id);
    if (it == features.end()) throw ContractError("no operational features for sample '" + id + "'");
    return it->second;
  };
  auto label = [&](const std::string& id) { return fault_index(labels.at(id).fault_type); };
  const auto d = static_cast<Eigen::Index>(row(subset.front()).size());

  // Compact the label space to the classes seen in training.
  std::map<int, int> to_local;
  for (const auto& id : train) to_local.emplace(label(id), 0);
  std::vector<int> to_global;
  for (auto& [g, l] : to_local) {
    l = static_cast<int>(to_global.size());
    to_global.push_back(g);
  }

  diagnosis::Matrix xtr(static_cast<Eigen::Index>(train.size()), d);
  std::vector<int> ytr;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& r = row(train[i]);
    for (Eigen::Index f = 0; f < d; ++f) xtr(static_cast<Eigen::Index>(i), f) = r[static_cast<std::size_t>(f)];
    ytr.push_back(to_local.at(label(train[i])));
  }
  diagnosis::Matrix xte(static_cast<Eigen::Index>(test.size()), d);
  std::vector<int> yte;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& r = row(test[i]);
    for (Eigen::Index f = 0; f < d; ++f) xte(static_cast<Eigen::Index>(i), f) = r[static_cast<std::size_t>(f)];
    yte.push_back(label(test[i]));
  }

  auto model = diagnosis::make_classifier(method, hyper);
  model->fit(xtr, ytr, static_cast<int>(to_global.size()));
  DistillResult out;
  out.test_ids = test;
  for (int p : model->predict(xte)) out.predicted.push_back(to_global[static_cast<std::size_t>(p)]);
  const auto m = diagnosis::evaluate(out.predicted, yte, diagnosis::Task::Classification);
  out.record = {"LLM-" + std::string(diagnosis::to_string(method)),
                modalities,
                std::string(diagnosis::to_string(diagnosis::Task::Classification)),
                m.accuracy,
                m.precision,
                m.recall,
                m.f1,
                static_cast<int>(train.size()),
                static_cast<int>(test.size())};
  return out;
}

}  // namespace wifidiag::llm
