#include "wifidiag/pipeline.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

#include "json_io.hpp"
#include "parallel.hpp"
#include "wifidiag/errors.hpp"

namespace wifidiag::pipeline {

using nlohmann::json;
using config::Stage;
using telemetry::Modality;

namespace {

constexpr std::string_view kDistillNote =
    "Operational features come from a stratified subset of the corpus that spans both splits; distilled "
    "classifiers train on the subset's training portion and are scored on its test portion.";

fs::path require(const fs::path& p) {
  if (!fs::exists(p)) throw MissingInputError(p.string());
  return p;
}

std::vector<dataset::Sample> load_samples(const fs::path& corpus, const std::vector<std::string>& ids, int threads) {
  std::vector<dataset::Sample> out(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    out[i] = dataset::load_sample(require(dataset::sample_dir(corpus, ids[i])));
  });
  return out;
}

std::map<std::string, dataset::Labels> manifest_labels(const dataset::CorpusManifest& m) {
  std::map<std::string, dataset::Labels> out;
  for (const auto& e : m.samples) {
    out[e.id] = {e.fault_type != FaultType::Normal, e.fault_type, e.fault_node};
  }
  return out;
}

std::vector<std::string> all_ids(const dataset::CorpusManifest& m) {
  std::vector<std::string> ids;
  for (const auto& e : m.samples) ids.push_back(e.id);
  return ids;
}

std::string feature_file(Modality m) { return fmt::format("features_{}.csv", telemetry::to_string(m)); }

std::vector<telemetry::WarningEvent> warnings_of(const dataset::Sample& s) {
  return s.bundle.warning ? *s.bundle.warning : std::vector<telemetry::WarningEvent>{};
}

json sequence_schema(const std::vector<std::string>& feature_order, int length, int n_nodes) {
  json classes = json::array();
  for (const auto& info : kFaultTable) classes.push_back(std::string(info.name));
  return {
      {"$schema", "https://json-schema.org/draft/2020-12/schema"},
      {"title", "wifidiag sequence export"},
      {"description",
       "One JSON object per line. data is row-major [tick][node][feature] with shape [length, n_nodes, "
       "n_features], min-max scaled to [0, 1]; a modality absent from the sample is all zeros. mask is 1 for "
       "observed ticks and 0 for padding."},
      {"type", "object"},
      {"required", {"id", "split", "length", "n_nodes", "n_features", "present", "labels", "mask", "data"}},
      {"properties",
       {{"id", {{"type", "string"}}},
        {"split", {{"enum", {"train", "test"}}}},
        {"length", {{"const", length}}},
        {"n_nodes", {{"const", n_nodes}}},
        {"n_features", {{"const", static_cast<int>(feature_order.size())}}},
        {"present", {{"type", "array"}, {"items", {{"enum", {"flow", "packet", "warning", "monitor"}}}}}},
        {"labels",
         {{"type", "object"},
          {"required", {"fault_present", "fault_type", "fault_class", "fault_node"}},
          {"properties",
           {{"fault_present", {{"type", "boolean"}}},
            {"fault_type", {{"enum", classes}}},
            {"fault_class", {{"type", "integer"}, {"minimum", 0}, {"maximum", kFaultTypeCount - 1}}},
            {"fault_node", {{"type", {"integer", "null"}}, {"minimum", 0}}}}}}},
        {"mask", {{"type", "array"}, {"items", {{"enum", {0, 1}}}}, {"minItems", length}, {"maxItems", length}}},
        {"data", {{"type", "array"}, {"items", {{"type", "number"}}}}}}},
      {"feature_order", feature_order},
      {"class_names", classes},
  };
}

std::string sequence_line(const preprocess::SequenceView& v, const dataset::Sample& s, const std::string& split) {
  json present = json::array();
  for (auto m : v.present) present.push_back(std::string(telemetry::to_string(m)));
  json labels = {{"fault_present", s.labels.fault_present},
                 {"fault_type", std::string(to_string(s.labels.fault_type))},
                 {"fault_class", fault_index(s.labels.fault_type)},
                 {"fault_node", s.labels.fault_node ? json(*s.labels.fault_node) : json(nullptr)}};
  json head = {{"id", v.id}, {"split", split},     {"length", v.length}, {"n_nodes", v.n_nodes},
               {"n_features", v.n_features}, {"present", present}, {"labels", labels}, {"mask", v.mask}};
  std::string line = head.dump();
  line.pop_back();
  line += ",\"data\":[";
  for (std::size_t i = 0; i < v.data.size(); ++i) {
    if (i) line += ',';
    line += fmt::format("{:.5g}", v.data[i]);
  }
  line += "]}\n";
  return line;
}

std::string render_reasoning(const std::vector<json>& summaries) {
  std::string md;
  for (const char* calibrated : {"train", "test"}) {
    std::vector<const json*> rows;
    for (const auto& s : summaries) {
      if (s.at("calibrated_on") == calibrated) rows.push_back(&s);
    }
    if (rows.empty()) continue;
    md += fmt::format("\n### Thresholds calibrated on the subset's {} portion, scored on its test portion\n\n",
                      calibrated == std::string("train") ? "training" : "test");
    md += "| Metric |";
    for (const auto* r : rows) md += " " + r->at("modalities").get<std::string>() + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < rows.size(); ++i) md += "---|";
    md += "\n";
    for (const char* metric : {"ep", "er", "ef1"}) {
      std::string name = metric;
      std::transform(name.begin(), name.end(), name.begin(), ::toupper);
      md += "| " + name + " |";
      for (const auto* r : rows) md += fmt::format(" {:.3f} |", r->at(std::string("mean_") + metric).get<double>());
      md += "\n";
    }
  }
  return md;
}

}  // namespace

Pipeline::Pipeline(config::RunConfig config, Options options) : config_(std::move(config)), options_(std::move(options)) {
  config_.validate();
  if (options_.out.empty()) throw ConfigError("an output directory is required");
  if (options_.threads < 1) throw ConfigError("threads must be >= 1");
}

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {"generate", "split", "preprocess", "bench",
                                                 "llm-extract", "reason-eval", "report"};
  return names;
}

void Pipeline::run(std::string_view stage) {
  if (stage == "generate") generate();
  else if (stage == "split") split();
  else if (stage == "preprocess") preprocess();
  else if (stage == "bench") bench();
  else if (stage == "llm-extract") llm_extract();
  else if (stage == "reason-eval") reason_eval();
  else if (stage == "report") report();
  else throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

void Pipeline::check_hash(const std::string& found, Stage producer, const fs::path& source) const {
  const auto expected = config::stage_hash(config_, producer);
  if (found == expected || options_.force) return;
  throw HashMismatchError(fmt::format(
      "{} was written by '{}' under config hash {}, but the current config hashes to {}; rerun '{}' or pass --force",
      source.string(), config::to_string(producer), found.substr(0, 12), expected.substr(0, 12),
      config::to_string(producer)));
}

void Pipeline::write_stage(const fs::path& dir, Stage stage, json extra) const {
  extra["stage"] = std::string(config::to_string(stage));
  extra["config_hash"] = config::stage_hash(config_, stage);
  io::write_json(dir / "stage.json", extra);
}

void Pipeline::require_stage(const fs::path& dir, Stage producer) const {
  const auto path = require(dir / "stage.json");
  const auto j = io::read_json(path);
  check_hash(io::field<std::string>(j, "config_hash", path.string()), producer, path);
}

void Pipeline::generate() {
  const auto dir = corpus_dir();
  // Start clean so a smaller rerun leaves no stale samples behind.
  fs::remove_all(dir / "samples");
  fs::remove(dir / "split.json");
  fs::create_directories(dir);
  dataset::generate_corpus(config_.corpus, dir, config::stage_hash(config_, Stage::Generate), options_.threads);
}

void Pipeline::split() {
  require(corpus_dir() / "manifest.json");
  const auto manifest = dataset::load_manifest(corpus_dir());
  check_hash(manifest.config_hash, Stage::Generate, corpus_dir() / "manifest.json");
  auto s = dataset::split(manifest, config_.split.ratio, config_.split.seed);
  s.config_hash = config::stage_hash(config_, Stage::Split);
  dataset::save_split(s, corpus_dir());
}

void Pipeline::preprocess() {
  require(corpus_dir() / "manifest.json");
  const auto manifest = dataset::load_manifest(corpus_dir());
  check_hash(manifest.config_hash, Stage::Generate, corpus_dir() / "manifest.json");
  require(corpus_dir() / "split.json");
  const auto sp = dataset::load_split(corpus_dir());
  check_hash(sp.config_hash, Stage::Split, corpus_dir() / "split.json");

  const auto ids = all_ids(manifest);
  const auto samples = load_samples(corpus_dir(), ids, options_.threads);
  std::map<std::string, const dataset::Sample*> by_id;
  for (const auto& s : samples) by_id[s.id] = &s;

  std::vector<preprocess::RawNodeFeatures> train_raw;
  std::vector<bool> is_normal;
  std::vector<dataset::Sample> train_samples;
  for (const auto& id : sp.train) {
    const auto& s = *by_id.at(id);
    train_raw.push_back(preprocess::extract_raw(s));
    is_normal.push_back(!s.labels.fault_present);
    train_samples.push_back(s);
  }
  auto norm = preprocess::fit_normalizer(train_raw, is_normal, &train_samples);
  if (config_.preprocess.sequence_length > 0) norm.sequence_length = config_.preprocess.sequence_length;

  const auto dir = preprocess_dir();
  fs::create_directories(dir);
  preprocess::save_norm(norm, dir / "norm.json");

  std::vector<preprocess::RawNodeFeatures> raw(samples.size());
  parallel_for(samples.size(), options_.threads, [&](std::size_t i) { raw[i] = preprocess::extract_raw(samples[i]); });
  for (Modality m : telemetry::kAllModalities) {
    std::vector<preprocess::FeatureMatrixView> rows;
    for (const auto& r : raw) rows.push_back(preprocess::aggregate_features(r, norm, {m}));
    preprocess::write_feature_csv(dir / feature_file(m), {m}, norm.n_nodes, rows);
  }

  const preprocess::ModalitySet all(telemetry::kAllModalities.begin(), telemetry::kAllModalities.end());
  std::vector<std::string> feature_order;
  for (Modality m : all) {
    for (const auto& f : preprocess::feature_names(m)) feature_order.push_back(fmt::format("{}.{}", telemetry::to_string(m), f));
  }
  const std::set<std::string> train_set(sp.train.begin(), sp.train.end());
  std::vector<std::string> lines(samples.size());
  parallel_for(samples.size(), options_.threads, [&](std::size_t i) {
    const auto view = preprocess::to_sequence(samples[i], norm.sequence_length, norm, all);
    lines[i] = sequence_line(view, samples[i], train_set.contains(samples[i].id) ? "train" : "test");
  });
  std::string text;
  for (const auto& l : lines) text += l;
  io::write_text(dir / "sequences.jsonl", text);
  io::write_json(dir / "sequences.schema.json", sequence_schema(feature_order, norm.sequence_length, norm.n_nodes));

  write_stage(dir, Stage::Preprocess, {{"samples", samples.size()}, {"sequence_length", norm.sequence_length}});
}

void Pipeline::bench() {
  require_stage(preprocess_dir(), Stage::Preprocess);
  const auto manifest = dataset::load_manifest(corpus_dir());
  require(corpus_dir() / "split.json");

  diagnosis::BenchInputs in;
  in.split = dataset::load_split(corpus_dir());
  check_hash(in.split.config_hash, Stage::Split, corpus_dir() / "split.json");
  in.labels = manifest_labels(manifest);
  in.n_nodes = preprocess::load_norm(require(preprocess_dir() / "norm.json")).n_nodes;
  std::set<Modality> needed;
  for (const auto& set : config_.bench.modality_sets) needed.insert(set.begin(), set.end());
  for (Modality m : needed) in.tables[m] = preprocess::read_feature_csv(require(preprocess_dir() / feature_file(m)));

  const int threads = std::max(options_.threads, config_.bench.threads);
  const auto records = diagnosis::run_benchmark(in, config_.bench.methods, config_.bench.modality_sets,
                                                config_.bench.tasks, config_.bench.hyper, threads);
  const auto dir = bench_dir();
  fs::create_directories(dir);
  io::write_text(dir / "results.jsonl", diagnosis::to_jsonl(records));
  const auto hash = config::stage_hash(config_, Stage::Bench);
  io::write_text(dir / "report.md",
                 diagnosis::render_report(records, fmt::format("Config hash `{}`. Train {} / test {} samples.", hash,
                                                               in.split.train.size(), in.split.test.size())));
  write_stage(dir, Stage::Bench, {{"records", records.size()}});
}

void Pipeline::llm_extract() {
  require_stage(preprocess_dir(), Stage::Preprocess);
  const auto manifest = dataset::load_manifest(corpus_dir());
  const auto sp = dataset::load_split(corpus_dir());
  check_hash(sp.config_hash, Stage::Split, corpus_dir() / "split.json");
  const auto norm = preprocess::load_norm(require(preprocess_dir() / "norm.json"));
  const auto& lc = config_.llm;

  const auto subset = llm::distill_subset(manifest, lc.subset_fraction, lc.subset_seed);
  const auto samples = load_samples(corpus_dir(), subset, options_.threads);
  const std::set<std::string> train_set(sp.train.begin(), sp.train.end());
  std::vector<preprocess::DeviationView> levels(samples.size());
  parallel_for(samples.size(), options_.threads, [&](std::size_t i) { levels[i] = preprocess::discretize(samples[i], norm); });

  const auto dir = llm_dir();
  fs::create_directories(dir);
  fs::remove(dir / "audit.jsonl");
  llm::AuditLog audit(dir / "audit.jsonl");
  llm::Client client(lc.endpoint, config_.features, &audit);
  const auto labels = manifest_labels(manifest);

  std::string responses_text, features_text;
  std::vector<diagnosis::ResultsRecord> records;
  std::map<std::string, int> status_counts;
  for (const auto& set : lc.modality_sets) {
    const auto mods = preprocess::to_string(set);
    std::map<std::string, reasoning::Scores> features;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto bundle = llm::build_prompts(samples[i], levels[i], set, config_.features);
      const auto responses = client.query(bundle);
      std::vector<reasoning::Scores> parsed;
      int failed = 0;
      for (const auto& r : responses) {
        ++status_counts[std::string(llm::to_string(r.status))];
        responses_text += json{{"sample", r.sample_id},
                               {"modalities", mods},
                               {"node", r.node},
                               {"status", llm::to_string(r.status)},
                               {"attempts", r.attempts},
                               {"raw", r.raw}}
                              .dump() +
                          "\n";
        if (r.parsed) parsed.push_back(*r.parsed);
        else ++failed;
      }
      // Failed nodes contribute nothing; an all-failed sample scores zero.
      llm::NodeAggregate agg{reasoning::Scores(static_cast<std::size_t>(config_.features.dim()), 0.0), 0};
      if (!parsed.empty()) agg = llm::aggregate_nodes(parsed);
      features[samples[i].id] = agg.features;
      features_text += json{{"sample", samples[i].id},
                            {"modalities", mods},
                            {"split", train_set.contains(samples[i].id) ? "train" : "test"},
                            {"features", agg.features},
                            {"node", agg.node},
                            {"failed_nodes", failed}}
                           .dump() +
                       "\n";
    }
    records.push_back(
        llm::distill(subset, features, labels, sp, lc.distill_method, config_.bench.hyper, mods).record);
  }
  io::write_text(dir / "responses.jsonl", responses_text);
  io::write_text(dir / "features.jsonl", features_text);
  io::write_text(dir / "results.jsonl", diagnosis::to_jsonl(records));
  write_stage(dir, Stage::LlmExtract,
              {{"subset", subset.size()},
               {"subset_fraction", lc.subset_fraction},
               {"endpoint", lc.endpoint.kind},
               {"prompt_version", std::string(llm::kPromptVersion)},
               {"parse_status", status_counts},
               {"note", std::string(kDistillNote)}});
}

void Pipeline::reason_eval() {
  require_stage(llm_dir(), Stage::LlmExtract);
  const auto manifest = dataset::load_manifest(corpus_dir());
  const auto sp = dataset::load_split(corpus_dir());
  check_hash(sp.config_hash, Stage::Split, corpus_dir() / "split.json");
  const auto& space = config_.features;

  // Ground truth for every sample: the subset's explanations are scored
  // against it, and the whole corpus measures its own diagnostic value.
  const auto ids = all_ids(manifest);
  const auto samples = load_samples(corpus_dir(), ids, options_.threads);
  std::map<std::string, reasoning::Binary> truth;
  for (const auto& s : samples) truth[s.id] = reasoning::build_ground_truth(warnings_of(s), s.labels.fault_type, space);

  struct Row {
    std::string id;
    bool train;
    reasoning::Scores e;
  };
  std::map<std::string, std::vector<Row>> by_set;
  for (const auto& j : io::read_jsonl(require(llm_dir() / "features.jsonl"))) {
    const std::string w = (llm_dir() / "features.jsonl").string();
    Row r{io::field<std::string>(j, "sample", w), io::field<std::string>(j, "split", w) == "train",
          io::field<reasoning::Scores>(j, "features", w)};
    if (!truth.contains(r.id)) throw ContractError(w + ": unknown sample '" + r.id + "'");
    if (static_cast<int>(r.e.size()) != space.dim()) throw ContractError(w + ": feature vector has the wrong size");
    by_set[io::field<std::string>(j, "modalities", w)].push_back(std::move(r));
  }

  std::vector<json> rows, summaries;
  for (const auto& set : config_.llm.modality_sets) {
    const auto mods = preprocess::to_string(set);
    auto it = by_set.find(mods);
    if (it == by_set.end()) throw MissingInputError((llm_dir() / "features.jsonl").string() + " (modalities " + mods + ")");
    std::vector<reasoning::CalibrationPair> train_pairs, test_pairs;
    for (const auto& r : it->second) (r.train ? train_pairs : test_pairs).push_back({r.e, truth.at(r.id)});
    if (train_pairs.empty() || test_pairs.empty())
      throw ConfigError("reasoning evaluation of " + mods + " needs subset samples in both splits");

    for (const char* on : {"train", "test"}) {
      const bool on_train = std::string(on) == "train";
      const auto cal = reasoning::calibrate_thresholds(on_train ? train_pairs : test_pairs, options_.threads);
      std::vector<reasoning::ExplanationScores> scores;
      for (const auto& r : it->second) {
        const auto s = reasoning::explanation_scores(reasoning::binarize(r.e, cal.tau), truth.at(r.id));
        if (on_train) {
          rows.push_back({{"kind", "sample"},
                          {"sample", r.id},
                          {"modalities", mods},
                          {"split", r.train ? "train" : "test"},
                          {"ep", s.ep},
                          {"er", s.er},
                          {"ef1", s.ef1}});
        }
        if (!r.train) scores.push_back(s);
      }
      const auto mean = reasoning::mean_scores(scores);
      summaries.push_back({{"kind", "summary"},
                           {"modalities", mods},
                           {"calibrated_on", on},
                           {"evaluated_on", "test"},
                           {"n", scores.size()},
                           {"mean_ep", mean.ep},
                           {"mean_er", mean.er},
                           {"mean_ef1", mean.ef1},
                           {"tau", cal.tau},
                           {"calibration_micro_ef1", cal.micro_ef1},
                           {"sweep_best_micro_ef1", cal.sweep_best_micro_ef1},
                           {"sweep_improvable_dims", cal.sweep_improvable_dims}});
    }
  }

  // Ground-truth features as classifier inputs on the full split.
  const auto labels = manifest_labels(manifest);
  auto matrix = [&](const std::vector<std::string>& split_ids, std::vector<int>& y) {
    diagnosis::Matrix x(static_cast<Eigen::Index>(split_ids.size()), space.dim());
    for (std::size_t i = 0; i < split_ids.size(); ++i) {
      const auto& e = truth.at(split_ids[i]);
      for (int d = 0; d < space.dim(); ++d) x(static_cast<Eigen::Index>(i), d) = e[static_cast<std::size_t>(d)];
      y.push_back(fault_index(labels.at(split_ids[i]).fault_type));
    }
    return x;
  };
  std::vector<int> ytr, yte;
  const auto xtr = matrix(sp.train, ytr);
  const auto xte = matrix(sp.test, yte);
  diagnosis::DecisionTree tree(config_.bench.hyper.tree_max_depth, config_.bench.hyper.tree_min_leaf);
  tree.fit(xtr, ytr, kFaultTypeCount);
  const auto m = diagnosis::evaluate(tree.predict(xte), yte, diagnosis::Task::Classification);
  const diagnosis::ResultsRecord gt{"DecisionTree", "operational", "Classification", m.accuracy, m.precision,
                                    m.recall,       m.f1,          static_cast<int>(sp.train.size()),
                                    static_cast<int>(sp.test.size())};

  const auto dir = reasoning_dir();
  fs::create_directories(dir);
  std::vector<json> all = summaries;
  all.insert(all.end(), rows.begin(), rows.end());
  io::write_jsonl(dir / "reasoning_eval.jsonl", all);
  io::write_json(dir / "features.json", reasoning::to_json(space));
  io::write_text(dir / "results.jsonl", diagnosis::to_jsonl({gt}));
  write_stage(dir, Stage::ReasonEval, {{"ground_truth_classification_f1", m.f1}});
}

void Pipeline::report() {
  const auto files = find_results_files(options_.out);
  if (files.empty()) throw MissingInputError((options_.out / "bench" / "results.jsonl").string());
  std::vector<diagnosis::ResultsRecord> records;
  std::string sources;
  for (const auto& f : files) {
    const auto part = diagnosis::parse_results(io::read_text(f), f.string());
    records.insert(records.end(), part.begin(), part.end());
    sources += fmt::format("`{}` ({} records), ", fs::relative(f, options_.out).string(), part.size());
  }
  sources.resize(sources.size() - 2);
  std::string note = "Merged from " + sources + ".";
  if (fs::exists(bench_dir() / "stage.json")) {
    note += fmt::format(" Benchmark config hash `{}`.",
                        io::read_json(bench_dir() / "stage.json").value("config_hash", std::string("?")));
  }
  if (fs::exists(llm_dir() / "stage.json")) note += " " + std::string(kDistillNote);
  std::string md = diagnosis::render_report(records, note);

  const auto eval = reasoning_dir() / "reasoning_eval.jsonl";
  if (fs::exists(eval)) {
    std::vector<json> summaries;
    for (const auto& j : io::read_jsonl(eval)) {
      if (j.value("kind", "") == "summary") summaries.push_back(j);
    }
    md += "\n## Reasoning consistency\n" + render_reasoning(summaries);
  }
  io::write_text(options_.out / "report.md", md);
}

std::vector<fs::path> find_results_files(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.size() >= 13 && name.ends_with("results.jsonl")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace wifidiag::pipeline
