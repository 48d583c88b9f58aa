// Command-line front end over the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wifidiag/wifidiag.h"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string patch;
  std::string modalities;
  std::string methods;
  std::string tasks;
  uint64_t seed = 0;
  bool has_seed = false;
  bool force = false;
  int threads = 1;
};

int report(wd_status s, const char* what) {
  const std::string name = wd_status_name(s), message = wd_last_error();
  // Some messages already lead with the status name.
  if (message.rfind(name, 0) == 0) std::fprintf(stderr, "wifidiag: %s: %s\n", what, message.c_str());
  else std::fprintf(stderr, "wifidiag: %s: %s: %s\n", what, name.c_str(), message.c_str());
  return static_cast<int>(s);
}

// Owns one C handle.
template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() {
    if (p) Free(p);
  }
};

int build_config(const Flags& f, wd_config** out) {
  wd_status s = f.config.empty() ? wd_config_default(out) : wd_config_load(f.config.c_str(), out);
  if (s != WD_OK) return report(s, "config");
  if (!f.patch.empty() && (s = wd_config_patch(*out, f.patch.c_str())) != WD_OK) return report(s, "--set");
  if (f.has_seed && (s = wd_config_set_seed(*out, f.seed)) != WD_OK) return report(s, "--seed");
  if (!f.methods.empty() && (s = wd_config_set_methods(*out, f.methods.c_str())) != WD_OK) return report(s, "--methods");
  if (!f.tasks.empty() && (s = wd_config_set_tasks(*out, f.tasks.c_str())) != WD_OK) return report(s, "--tasks");
  if (!f.modalities.empty() && (s = wd_config_set_modalities(*out, f.modalities.c_str())) != WD_OK)
    return report(s, "--modalities");
  return 0;
}

int run_stages(const Flags& f, const std::vector<std::string>& stages) {
  Handle<wd_config, wd_config_free> cfg;
  if (int rc = build_config(f, &cfg.p)) return rc;
  Handle<wd_pipeline, wd_pipeline_free> pipe;
  if (auto s = wd_pipeline_create(cfg.p, f.out.c_str(), f.force ? 1 : 0, f.threads, &pipe.p); s != WD_OK)
    return report(s, "pipeline");
  for (const auto& stage : stages) {
    std::fprintf(stderr, "wifidiag: %s\n", stage.c_str());
    if (auto s = wd_pipeline_run(pipe.p, stage.c_str()); s != WD_OK) return report(s, stage.c_str());
  }
  return 0;
}

int dump_config(const Flags& f) {
  Handle<wd_config, wd_config_free> cfg;
  if (int rc = build_config(f, &cfg.p)) return rc;
  if (auto s = wd_config_save(cfg.p, f.out.c_str()); s != WD_OK) return report(s, "config");
  char hash[65];
  wd_config_hash(cfg.p, hash, sizeof hash);
  std::printf("%s\n", hash);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wi-Fi fault simulation and diagnosis benchmark"};
  app.set_version_flag("--version", wd_version());
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  app.add_option("--config", f.config, "Run config (JSON); defaults apply when omitted")->check(CLI::ExistingFile);
  app.add_option("--out", f.out, "Workspace directory (config: output file)")->required();
  app.add_option("--set", f.patch, "JSON merge patch applied to the config, e.g. '{\"corpus\":{\"seed\":3}}'");
  app.add_option("--seed", f.seed, "Corpus base seed")->each([&](const std::string&) { f.has_seed = true; });
  app.add_flag("--force", f.force, "Accept inputs written under a different config hash");
  app.add_option("--modalities", f.modalities, "Modality sets, e.g. flow,warning,flow+packet");
  app.add_option("--methods", f.methods, "Methods: LogReg,KNN,DecisionTree,MLP");
  app.add_option("--tasks", f.tasks, "Tasks: Detection,Classification,Localization");
  app.add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);

  const std::vector<std::pair<std::string, std::string>> stages = {
      {"generate", "Simulate the corpus"},
      {"split", "Stratified train/test split"},
      {"preprocess", "Normalize, aggregate and export sequences"},
      {"bench", "Train and score the classical baselines"},
      {"llm-extract", "Operational features from the text-generation endpoint, then distillation"},
      {"reason-eval", "Explanation precision, recall and F1 against ground truth"},
      {"report", "Merge every results file into report.md"},
  };
  std::string chosen;
  for (const auto& [name, help] : stages) {
    app.add_subcommand(name, help)->callback([&chosen, n = name] { chosen = n; });
  }
  app.add_subcommand("all", "Run every stage in order")->callback([&] { chosen = "all"; });
  app.add_subcommand("config", "Write the resolved config to --out and print its hash")->callback([&] {
    chosen = "config";
  });

  CLI11_PARSE(app, argc, argv);

  if (chosen == "config") return dump_config(f);
  std::vector<std::string> run;
  if (chosen == "all") {
    for (const auto& s : stages) run.push_back(s.first);
  } else {
    run.push_back(chosen);
  }
  return run_stages(f, run);
}
