// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// fails. Runs the full pipeline on the default 1,200-sample corpus.

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "json_io.hpp"
#include "support/calibration_oracle.hpp"
#include "support/phenomenology.hpp"
#include "wifidiag/errors.hpp"
#include "wifidiag/pipeline.hpp"

using namespace wifidiag;
using telemetry::Modality;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Collects failures inside one criterion; the first few are reported.
struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol, fmt::format("{}: got {:.12g}, want {:.12g}", what, got, want));
  }
};

int failed_criteria = 0;

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  std::string detail;
  try {
    detail = body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = c.failures.empty();
  if (!pass) {
    ++failed_criteria;
    detail.clear();
    for (std::size_t i = 0; i < std::min<std::size_t>(3, c.failures.size()); ++i)
      detail += (i ? "; " : "") + c.failures[i];
    if (c.failures.size() > 3) detail += fmt::format("; and {} more", c.failures.size() - 3);
  }
  fmt::print("{} | {} | {} ({:.1f} s)\n", pass ? "PASS" : "FAIL", name, detail, secs);
  std::fflush(stdout);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingInputError(p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

config::RunConfig acceptance_config() {
  config::RunConfig c;
  c.bench.methods = {diagnosis::Method::LogReg};
  c.bench.modality_sets = config::parse_modality_sets("flow,packet,warning,monitor");
  return c;
}

std::vector<diagnosis::ResultsRecord> results(const fs::path& p) {
  return diagnosis::parse_results(slurp(p), p.string());
}

const diagnosis::ResultsRecord& find(const std::vector<diagnosis::ResultsRecord>& rs, const std::string& mods,
                                     const std::string& task) {
  for (const auto& r : rs) {
    if (r.modalities == mods && r.task == task) return r;
  }
  throw MissingInputError("results record " + mods + "/" + task);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wifidiag acceptance suite"};
  fs::path work = fs::temp_directory_path() / "wifidiag_acceptance";
  bool keep = false;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--work", work, "Scratch directory for the two workspaces");
  app.add_flag("--keep", keep, "Keep the workspaces afterwards");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  const auto ws_a = work / "a", ws_b = work / "b";
  const auto cfg = acceptance_config();
  fmt::print("wifidiag acceptance: {} samples, config hash {}\n", cfg.corpus.total(),
             config::config_hash(cfg).substr(0, 12));
  std::fflush(stdout);

  criterion("Metric correctness", [](Check& c) {
    using reasoning::explanation_scores;
    const auto s = [](std::vector<int> a, std::vector<int> b) { return explanation_scores(a, b); };
    auto same = s({1, 1, 0, 0}, {1, 1, 0, 0});
    c.expect(same.ep == 1 && same.er == 1 && same.ef1 == 1, "identical sets");
    auto dis = s({1, 0, 0, 0}, {0, 1, 0, 0});
    c.expect(dis.ep == 0 && dis.er == 0 && dis.ef1 == 0, "disjoint sets");
    // {a,b,c} vs {b,c,d}: two shared of three each side.
    auto abc = s({1, 1, 1, 0}, {0, 1, 1, 1});
    c.near(abc.ep, 2.0 / 3.0, 1e-12, "abc/bcd EP");
    c.near(abc.er, 2.0 / 3.0, 1e-12, "abc/bcd ER");
    c.near(abc.ef1, 2.0 / 3.0, 1e-12, "abc/bcd EF1");
    auto both = s({0, 0}, {0, 0});
    c.expect(both.ep == 1 && both.er == 1 && both.ef1 == 1, "both empty gives (1,1,1)");
    auto no_pred = s({0, 0}, {1, 0});
    c.expect(no_pred.ep == 0 && no_pred.er == 0 && no_pred.ef1 == 0, "empty prediction gives zeros");
    auto no_truth = s({1, 0}, {0, 0});
    c.expect(no_truth.ep == 0 && no_truth.er == 0 && no_truth.ef1 == 0, "empty truth gives zeros");
    bool threw = false;
    try {
      s({1, 0}, {1});
    } catch (const ContractError&) {
      threw = true;
    }
    c.expect(threw, "dimension mismatch is a contract error");
    c.expect(reasoning::binarize({0.3, 0.8}, {0.5, 0.5}) == reasoning::Binary{0, 1}, "binarize example");
    c.expect(reasoning::binarize({0.5}, {0.5}) == reasoning::Binary{1}, "binarize is inclusive");
    c.expect(reasoning::binarize({0.0, 0.7}, {0, 0}) == reasoning::Binary{1, 1}, "zero thresholds give all ones");

    // TP=8, FP=2, FN=4, TN=6.
    std::vector<int> pred, truth;
    const auto add = [&](int p, int t, int n) {
      pred.insert(pred.end(), static_cast<std::size_t>(n), p);
      truth.insert(truth.end(), static_cast<std::size_t>(n), t);
    };
    add(1, 1, 8);
    add(1, 0, 2);
    add(0, 1, 4);
    add(0, 0, 6);
    const auto m = diagnosis::evaluate(pred, truth, diagnosis::Task::Detection);
    c.near(m.precision, 8.0 / 10.0, 1e-9, "confusion precision");
    c.near(m.recall, 8.0 / 12.0, 1e-9, "confusion recall");
    c.near(m.f1, 2.0 * 0.8 * (2.0 / 3.0) / (0.8 + 2.0 / 3.0), 1e-9, "confusion F1");
    const auto perfect = diagnosis::evaluate(truth, truth, diagnosis::Task::Detection);
    c.expect(perfect.f1 == 1 && perfect.accuracy == 1, "perfect predictions score 1");
    const std::vector<int> half = {1, 0, 1, 0};
    const auto silent = diagnosis::evaluate({0, 0, 0, 0}, half, diagnosis::Task::Detection);
    c.expect(silent.recall == 0 && silent.accuracy == 0.5, "all-negative detector on 50/50 labels");
    return std::string("explanation, binarization and confusion-matrix examples exact");
  });

  criterion("Calibration optimality", [](Check& c) {
    Rng rng(20240601);
    int instances = 0;
    for (int n = 1; n <= 6; ++n) {
      for (int d = 1; d <= 2; ++d) {
        for (int trial = 0; trial < 500; ++trial) {
          const auto pairs = oracle::random_pairs(rng, n, d, trial % 2 == 0);
          const auto got = reasoning::calibrate_thresholds(pairs);
          c.expect(oracle::predictions(pairs, got.tau) == oracle::predictions(pairs, oracle::brute_force(pairs)),
                   fmt::format("n={} d={} trial {}", n, d, trial));
          ++instances;
        }
      }
    }
    return fmt::format("{} instances (n <= 6, d <= 2) match joint brute force", instances);
  });

  criterion("Fault phenomenology", [](Check& c) {
    int windows = 0;
    for (auto f : injectable_faults()) {
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (auto s : kAllScenarios) {
          const auto w = oracle::run_fault(f, s, 7000 + seed);
          const auto why = oracle::check_signature(w, 7000 + seed);
          c.expect(!why, fmt::format("{} {} seed {}: {}", to_string(f), to_string(s), seed, why.value_or("")));
          ++windows;
        }
      }
    }
    return fmt::format("{} windows (11 faults x 20 seeds x 3 scenarios) satisfy their signatures", windows);
  });

  criterion("Preprocessing invariants", [](Check& c) {
    using namespace preprocess;
    const FeatureStats s{10, 20, 0, 0};
    c.expect(min_max(15, s) == 0.5 && min_max(10, s) == 0.0 && min_max(20, s) == 1.0, "min-max examples");
    c.expect(min_max(25, s) == 1.0 && min_max(-3, s) == 0.0, "out-of-range values clamp");
    const std::vector<std::pair<double, int>> table = {{0.0, 0},  {0.999, 0}, {1.0, 1},   {1.999, 1}, {2.0, 2},
                                                       {2.999, 2}, {3.0, 3},  {50.0, 3},  {-0.99, 0}, {-1.0, -1},
                                                       {-2.0, -2}, {-3.0, -3}, {-1e9, -3}};
    for (const auto& [z, level] : table) c.expect(level_for(z) == level, fmt::format("level of z={}", z));

    // Permutation equivariance on simulated samples.
    dataset::CorpusConfig cc;
    for (auto sc : kAllScenarios) cc.counts[sc] = 4;
    cc.missing_rate = 0.0;
    std::vector<dataset::Sample> samples;
    std::vector<RawNodeFeatures> raw;
    std::vector<bool> normal;
    for (const auto& p : dataset::plan_corpus(cc)) {
      samples.push_back(dataset::build_sample(p, cc));
      raw.push_back(extract_raw(samples.back()));
      normal.push_back(!samples.back().labels.fault_present);
    }
    const auto norm = fit_normalizer(raw, normal, &samples);
    Rng rng(4);
    int checked = 0;
    for (const auto& smp : samples) {
      std::vector<NodeId> pi(static_cast<std::size_t>(smp.n_nodes));
      std::iota(pi.begin(), pi.end(), 0);
      std::shuffle(pi.begin(), pi.end(), rng);
      const auto moved = dataset::permute(smp, pi);
      for (auto m : telemetry::kAllModalities) {
        const auto base = aggregate_features(smp, norm, {m}).values;
        const auto perm = aggregate_features(moved, norm, {m}).values;
        const auto width = static_cast<std::size_t>(feature_count(m));
        for (std::size_t node = 0; node < pi.size(); ++node) {
          for (std::size_t f = 0; f < width; ++f) {
            const double a = perm[static_cast<std::size_t>(pi[node]) * width + f], b = base[node * width + f];
            c.expect(std::abs(a - b) <= 1e-12, fmt::format("{} node {} feature {}", smp.id, node, f));
          }
        }
        for (double v : base) c.expect(v >= 0.0 && v <= 1.0, smp.id + " value outside [0, 1]");
        ++checked;
      }
    }

    // MLP gradient against central differences.
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
      Rng r(300 + trial);
      diagnosis::Hyper h;
      h.mlp_hidden = 6;
      h.seed = trial;
      const int n = 10, d = 4, k = 3;
      diagnosis::Matrix x(n, d);
      std::vector<int> y;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) x(i, j) = uniform(r, -1, 1);
        y.push_back(i % k);
      }
      diagnosis::Mlp mlp(h);
      mlp.init(d, k);
      diagnosis::Vector p = mlp.params();
      for (Eigen::Index i = 0; i < p.size(); ++i) p(i) += uniform(r, -0.3, 0.3);
      diagnosis::Vector grad;
      mlp.loss_and_gradient(p, x, y, &grad);
      diagnosis::Vector numeric(p.size());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        diagnosis::Vector hi = p, lo = p;
        hi(i) += 1e-6;
        lo(i) -= 1e-6;
        numeric(i) = (mlp.loss_and_gradient(hi, x, y, nullptr) - mlp.loss_and_gradient(lo, x, y, nullptr)) / 2e-6;
      }
      worst = std::max(worst, (grad - numeric).norm() / std::max(1e-12, grad.norm() + numeric.norm()));
    }
    c.expect(worst < 1e-4, fmt::format("MLP gradient relative error {:.2e}", worst));
    return fmt::format("range, clamping, level table, {} permuted blocks, MLP gradient rel. error {:.1e}", checked,
                       worst);
  });

  // The main workspace runs every stage; the second regenerates and reruns
  // the benchmark with a different thread count.
  bool main_ok = false;
  criterion("Determinism", [&](Check& c) {
    pipeline::Pipeline a(cfg, {ws_a, false, threads});
    for (const auto& s : pipeline::Pipeline::stage_names()) a.run(s);
    main_ok = true;
    pipeline::Pipeline b(cfg, {ws_b, false, threads == 1 ? 2 : 1});
    for (const char* s : {"generate", "split", "preprocess", "bench"}) b.run(s);
    for (const char* f : {"corpus/manifest.json", "corpus/split.json", "preprocess/norm.json",
                          "preprocess/sequences.jsonl", "bench/results.jsonl"}) {
      c.expect(slurp(ws_a / f) == slurp(ws_b / f), std::string(f) + " differs");
    }
    const auto m = dataset::load_manifest(ws_a / "corpus");
    for (std::size_t i = 0; i < m.samples.size(); i += 97) {
      const auto& id = m.samples[i].id;
      for (const auto& e : fs::directory_iterator(dataset::sample_dir(ws_a / "corpus", id))) {
        c.expect(slurp(e.path()) == slurp(dataset::sample_dir(ws_b / "corpus", id) / e.path().filename()),
                 id + "/" + e.path().filename().string() + " differs");
      }
    }
    return std::string("manifest, split, preprocessing and benchmark results byte-identical across reruns");
  });
  if (!main_ok) {
    fmt::print("main workspace failed; skipping the corpus-level criteria\n");
    return 1;
  }

  criterion("Corpus shape", [&](Check& c) {
    const auto m = dataset::load_manifest(ws_a / "corpus");
    const double n = static_cast<double>(m.samples.size());
    std::map<FaultType, int> per_fault;
    int incomplete = 0;
    for (const auto& e : m.samples) {
      ++per_fault[e.fault_type];
      incomplete += e.modalities.size() < telemetry::kAllModalities.size();
    }
    const double normal = per_fault[FaultType::Normal] / n, missing = incomplete / n;
    c.expect(std::abs(normal - 0.5) <= 0.02, fmt::format("normal fraction {:.3f}", normal));
    c.expect(std::abs(missing - 0.1) <= 0.02, fmt::format("missing-modality fraction {:.3f}", missing));
    const double even = (n - per_fault[FaultType::Normal]) / static_cast<double>(injectable_faults().size());
    int lo = 1 << 30, hi = 0;
    for (auto f : injectable_faults()) {
      lo = std::min(lo, per_fault[f]);
      hi = std::max(hi, per_fault[f]);
      c.expect(std::abs(per_fault[f] - even) <= 1.0, fmt::format("{} count {}", to_string(f), per_fault[f]));
    }
    return fmt::format("{} samples, normal {:.3f}, missing modality {:.3f}, faults {}..{} (even {:.1f})", n, normal,
                       missing, lo, hi, even);
  });

  const auto bench = results(ws_a / "bench/results.jsonl");
  criterion("Task ordering (LogReg, flow/packet/warning)", [&](Check& c) {
    std::string detail;
    for (const char* mods : {"flow", "packet", "warning"}) {
      const double d = find(bench, mods, "Detection").f1, cl = find(bench, mods, "Classification").f1,
                   l = find(bench, mods, "Localization").f1;
      c.expect(d - cl >= 0.03, fmt::format("{}: D {:.3f} - C {:.3f} < 0.03", mods, d, cl));
      c.expect(cl - l >= 0.03, fmt::format("{}: C {:.3f} - L {:.3f} < 0.03", mods, cl, l));
      detail += fmt::format("{}{} {:.3f}/{:.3f}/{:.3f}", detail.empty() ? "" : ", ", mods, d, cl, l);
    }
    return "D/C/L " + detail;
  });
  {
    const double d = find(bench, "monitor", "Detection").f1, cl = find(bench, "monitor", "Classification").f1,
                 l = find(bench, "monitor", "Localization").f1;
    fmt::print("INFO | Task ordering (LogReg, monitor) | D/C/L {:.3f}/{:.3f}/{:.3f}; host-local faults make localization easier than typing here\n",
               d, cl, l);
  }

  criterion("Modality ordering (LogReg classification)", [&](Check& c) {
    const double w = find(bench, "warning", "Classification").f1, f = find(bench, "flow", "Classification").f1;
    c.expect(w - f >= 0.10, fmt::format("warning {:.3f} - flow {:.3f} < 0.10", w, f));
    return fmt::format("warning {:.3f} vs flow {:.3f} (gap {:.3f})", w, f, w - f);
  });

  criterion("Operational-feature strength", [&](Check& c) {
    const auto records = results(ws_a / "reasoning/results.jsonl");
    const auto& r = find(records, "operational", "Classification");
    c.expect(r.method == "DecisionTree", "record method " + r.method);
    c.expect(r.f1 >= 0.78, fmt::format("F1 {:.3f} < 0.78", r.f1));
    return fmt::format("DecisionTree on ground-truth features: classification F1 {:.3f}", r.f1);
  });

  criterion("Mock-LLM reasoning consistency", [&](Check& c) {
    std::map<std::pair<std::string, std::string>, double> ef1;
    for (const auto& j : io::read_jsonl(ws_a / "reasoning/reasoning_eval.jsonl")) {
      if (j.value("kind", "") == "summary") ef1[{j.at("modalities"), j.at("calibrated_on")}] = j.at("mean_ef1");
    }
    std::string detail;
    for (const char* on : {"train", "test"}) {
      const double w = ef1.at({"warning", on}), f = ef1.at({"flow", on});
      c.expect(w >= f, fmt::format("thresholds from {}: warning EF1 {:.3f} < flow {:.3f}", on, w, f));
      detail += fmt::format("EF1 warning {:.3f} vs flow {:.3f} (thresholds from {}); ", w, f, on);
    }
    for (const auto& r : results(ws_a / "llm/results.jsonl")) {
      c.expect(r.f1 > 1.0 / 12.0, fmt::format("distilled F1 on {} {:.3f} <= 1/12", r.modalities, r.f1));
      detail += fmt::format("distilled F1 {} {:.3f}, ", r.modalities, r.f1);
    }
    detail.resize(detail.size() - 2);
    return detail;
  });

  if (!keep) fs::remove_all(work);
  fmt::print("{}\n", failed_criteria == 0 ? "ALL CRITERIA PASS" : fmt::format("{} CRITERIA FAILED", failed_criteria));
  return failed_criteria == 0 ? 0 : 1;
}
