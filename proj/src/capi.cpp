#include "wifidiag/wifidiag.h"

#include <cstring>
#include <string>

#include "wifidiag/config.hpp"
#include "wifidiag/errors.hpp"
#include "wifidiag/llmclient.hpp"
#include "wifidiag/pipeline.hpp"
#include "wifidiag/reasoning.hpp"

struct wd_config {
  wifidiag::config::RunConfig value;
};

struct wd_pipeline {
  wifidiag::pipeline::Pipeline value;
};

namespace {

thread_local std::string g_last_error;

wd_status fail(wd_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs fn, mapping each library error class onto its status code.
template <typename Fn>
wd_status guard(Fn&& fn) {
  using namespace wifidiag;
  try {
    fn();
    g_last_error.clear();
    return WD_OK;
  } catch (const MissingInputError& e) {
    return fail(WD_ERR_MISSING_INPUT, e.what());
  } catch (const HashMismatchError& e) {
    return fail(WD_ERR_HASH_MISMATCH, e.what());
  } catch (const ConfigError& e) {
    return fail(WD_ERR_CONFIG, e.what());
  } catch (const InvalidFaultError& e) {
    return fail(WD_ERR_INVALID_FAULT, e.what());
  } catch (const ContractError& e) {
    return fail(WD_ERR_CONTRACT, e.what());
  } catch (const TrainingError& e) {
    return fail(WD_ERR_TRAINING, e.what());
  } catch (const IoError& e) {
    return fail(WD_ERR_IO, e.what());
  } catch (const TransportError& e) {
    return fail(WD_ERR_TRANSPORT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(WD_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(WD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(WD_ERR_INTERNAL, "unknown error");
  }
}

#define WD_REQUIRE(cond, what) \
  if (!(cond)) return fail(WD_ERR_ARGUMENT, what)

}  // namespace

extern "C" {

const char* wd_version(void) { return "1.0.0"; }

const char* wd_status_name(wd_status status) {
  switch (status) {
    case WD_OK: return "ok";
    case WD_ERR_ARGUMENT: return "invalid argument";
    case WD_ERR_CONFIG: return "configuration error";
    case WD_ERR_INVALID_FAULT: return "invalid fault";
    case WD_ERR_CONTRACT: return "contract violation";
    case WD_ERR_TRAINING: return "training error";
    case WD_ERR_IO: return "i/o error";
    case WD_ERR_MISSING_INPUT: return "missing input";
    case WD_ERR_HASH_MISMATCH: return "config hash mismatch";
    case WD_ERR_TRANSPORT: return "transport error";
    case WD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* wd_last_error(void) { return g_last_error.c_str(); }

wd_status wd_config_default(wd_config** out) {
  WD_REQUIRE(out, "out is null");
  return guard([&] { *out = new wd_config{}; });
}

wd_status wd_config_load(const char* path, wd_config** out) {
  WD_REQUIRE(path && out, "path or out is null");
  return guard([&] { *out = new wd_config{wifidiag::config::load(path)}; });
}

wd_status wd_config_save(const wd_config* config, const char* path) {
  WD_REQUIRE(config && path, "config or path is null");
  return guard([&] { wifidiag::config::save(config->value, path); });
}

wd_status wd_config_patch(wd_config* config, const char* json_patch) {
  WD_REQUIRE(config && json_patch, "config or patch is null");
  return guard([&] {
    const auto patch = nlohmann::json::parse(json_patch, nullptr, false);
    if (patch.is_discarded()) throw wifidiag::ConfigError("patch is not valid JSON");
    auto j = wifidiag::config::to_json(config->value);
    j.merge_patch(patch);
    config->value = wifidiag::config::from_json(j);
  });
}

wd_status wd_config_set_seed(wd_config* config, uint64_t seed) {
  WD_REQUIRE(config, "config is null");
  return guard([&] { config->value.corpus.base_seed = seed; });
}

wd_status wd_config_set_methods(wd_config* config, const char* csv) {
  WD_REQUIRE(config && csv, "config or list is null");
  return guard([&] { config->value.bench.methods = wifidiag::config::parse_methods(csv); });
}

wd_status wd_config_set_tasks(wd_config* config, const char* csv) {
  WD_REQUIRE(config && csv, "config or list is null");
  return guard([&] { config->value.bench.tasks = wifidiag::config::parse_tasks(csv); });
}

wd_status wd_config_set_modalities(wd_config* config, const char* csv) {
  WD_REQUIRE(config && csv, "config or list is null");
  return guard([&] {
    const auto sets = wifidiag::config::parse_modality_sets(csv);
    config->value.bench.modality_sets = sets;
    config->value.llm.modality_sets = sets;
  });
}

wd_status wd_config_hash(const wd_config* config, char* buf, size_t len) {
  WD_REQUIRE(config && buf, "config or buffer is null");
  WD_REQUIRE(len >= 65, "hash buffer needs 65 bytes");
  return guard([&] {
    const auto h = wifidiag::config::config_hash(config->value);
    std::memcpy(buf, h.c_str(), h.size() + 1);
  });
}

void wd_config_free(wd_config* config) { delete config; }

wd_status wd_pipeline_create(const wd_config* config, const char* out_dir, int force, int threads,
                             wd_pipeline** out) {
  WD_REQUIRE(config && out_dir && out, "config, out_dir or out is null");
  WD_REQUIRE(threads >= 1, "threads must be >= 1");
  return guard([&] {
    *out = new wd_pipeline{wifidiag::pipeline::Pipeline(config->value, {out_dir, force != 0, threads})};
  });
}

wd_status wd_pipeline_run(wd_pipeline* pipeline, const char* stage) {
  WD_REQUIRE(pipeline && stage, "pipeline or stage is null");
  return guard([&] { pipeline->value.run(stage); });
}

void wd_pipeline_free(wd_pipeline* pipeline) { delete pipeline; }

wd_status wd_explanation_scores(const int* predicted, const int* truth, size_t d, double out[3]) {
  WD_REQUIRE(predicted && truth && out, "null pointer");
  return guard([&] {
    const auto s = wifidiag::reasoning::explanation_scores({predicted, predicted + d}, {truth, truth + d});
    out[0] = s.ep;
    out[1] = s.er;
    out[2] = s.ef1;
  });
}

wd_status wd_binarize(const double* scores, const double* tau, size_t d, int* out) {
  WD_REQUIRE(scores && tau && out, "null pointer");
  return guard([&] {
    const auto b = wifidiag::reasoning::binarize({scores, scores + d}, {tau, tau + d});
    std::copy(b.begin(), b.end(), out);
  });
}

wd_status wd_calibrate_thresholds(const double* scores, const int* truth, size_t n_pairs, size_t d, double* tau) {
  WD_REQUIRE(scores && truth && tau, "null pointer");
  return guard([&] {
    std::vector<wifidiag::reasoning::CalibrationPair> pairs;
    for (size_t i = 0; i < n_pairs; ++i) {
      pairs.push_back({{scores + i * d, scores + (i + 1) * d}, {truth + i * d, truth + (i + 1) * d}});
    }
    const auto cal = wifidiag::reasoning::calibrate_thresholds(pairs);
    std::copy(cal.tau.begin(), cal.tau.end(), tau);
  });
}

wd_status wd_mock_llm(const char* prompt, uint64_t seed, char* buf, size_t len, size_t* needed) {
  WD_REQUIRE(prompt, "prompt is null");
  std::string text;
  const auto s = guard([&] { text = wifidiag::llm::mock_llm(prompt, seed); });
  if (s != WD_OK) return s;
  if (needed) *needed = text.size() + 1;
  WD_REQUIRE(buf && len >= text.size() + 1, "buffer too small");
  std::memcpy(buf, text.c_str(), text.size() + 1);
  return WD_OK;
}

}  // extern "C"
