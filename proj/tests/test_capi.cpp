#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "wifidiag/wifidiag.h"

extern "C" int wd_c_check(void);

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("wifidiag_test_capi_" + name);
  fs::remove_all(p);
  return p;
}

std::string hash_of(const wd_config* c) {
  char buf[65];
  EXPECT_EQ(wd_config_hash(c, buf, sizeof buf), WD_OK);
  return buf;
}

}  // namespace

TEST(CApi, HeaderIsValidC) { EXPECT_EQ(wd_c_check(), 1); }

TEST(CApi, StatusNamesAndVersion) {
  EXPECT_STRNE(wd_version(), "");
  EXPECT_STREQ(wd_status_name(WD_OK), "ok");
  EXPECT_STREQ(wd_status_name(WD_ERR_HASH_MISMATCH), "config hash mismatch");
  EXPECT_STRNE(wd_status_name(static_cast<wd_status>(99)), "");
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(wd_config_default(nullptr), WD_ERR_ARGUMENT);
  EXPECT_STRNE(wd_last_error(), "");
  EXPECT_EQ(wd_config_patch(nullptr, "{}"), WD_ERR_ARGUMENT);
  EXPECT_EQ(wd_pipeline_run(nullptr, "generate"), WD_ERR_ARGUMENT);
  double out[3];
  EXPECT_EQ(wd_explanation_scores(nullptr, nullptr, 3, out), WD_ERR_ARGUMENT);
  wd_config_free(nullptr);
  wd_pipeline_free(nullptr);
}

TEST(CApi, LastErrorIsPerThreadAndClearsOnSuccess) {
  EXPECT_EQ(wd_config_load("/nonexistent/cfg.json", nullptr), WD_ERR_ARGUMENT);
  wd_config* c = nullptr;
  EXPECT_EQ(wd_config_load("/nonexistent/cfg.json", &c), WD_ERR_MISSING_INPUT);
  EXPECT_NE(std::string(wd_last_error()).find("/nonexistent/cfg.json"), std::string::npos);
  std::string other;
  std::thread([&] { other = wd_last_error(); }).join();
  EXPECT_EQ(other, "");
  ASSERT_EQ(wd_config_default(&c), WD_OK);
  EXPECT_STREQ(wd_last_error(), "");
  wd_config_free(c);
}

TEST(CApi, ConfigEditsChangeTheHash) {
  wd_config* c = nullptr;
  ASSERT_EQ(wd_config_default(&c), WD_OK);
  const auto base = hash_of(c);
  EXPECT_EQ(base.size(), 64u);
  char small[10];
  EXPECT_EQ(wd_config_hash(c, small, sizeof small), WD_ERR_ARGUMENT);

  EXPECT_EQ(wd_config_patch(c, R"({"split":{"shuffle":true}})"), WD_ERR_CONFIG);
  EXPECT_NE(std::string(wd_last_error()).find("shuffle"), std::string::npos);
  EXPECT_EQ(wd_config_patch(c, "not json"), WD_ERR_CONFIG);
  EXPECT_EQ(wd_config_patch(c, R"({"split":{"ratio":2.0}})"), WD_ERR_CONFIG);
  EXPECT_EQ(hash_of(c), base);

  EXPECT_EQ(wd_config_set_methods(c, "SVM"), WD_ERR_CONFIG);
  EXPECT_EQ(wd_config_set_methods(c, "LogReg"), WD_OK);
  EXPECT_EQ(wd_config_set_tasks(c, "Detection"), WD_OK);
  EXPECT_EQ(wd_config_set_modalities(c, "flow,warning"), WD_OK);
  EXPECT_EQ(wd_config_set_seed(c, 5), WD_OK);
  const auto edited = hash_of(c);
  EXPECT_NE(edited, base);

  const auto p = scratch("cfg.json");
  EXPECT_EQ(wd_config_save(c, p.c_str()), WD_OK);
  wd_config* back = nullptr;
  ASSERT_EQ(wd_config_load(p.c_str(), &back), WD_OK);
  EXPECT_EQ(hash_of(back), edited);
  std::ofstream(p) << R"({"bogus": 1})";
  wd_config* bad = nullptr;
  EXPECT_EQ(wd_config_load(p.c_str(), &bad), WD_ERR_CONFIG);
  EXPECT_EQ(bad, nullptr);
  fs::remove(p);
  wd_config_free(back);
  wd_config_free(c);
}

TEST(CApi, PipelineStatusCodes) {
  wd_config* c = nullptr;
  ASSERT_EQ(wd_config_default(&c), WD_OK);
  ASSERT_EQ(wd_config_patch(c, R"({"corpus":{"counts":{"H2H_APSTA":4,"IOT_APSTA":4,"IOT_ADHOC":4}}})"), WD_OK)
      << wd_last_error();
  const auto root = scratch("ws");
  wd_pipeline* p = nullptr;
  ASSERT_EQ(wd_pipeline_create(c, root.c_str(), 0, 1, &p), WD_OK);
  EXPECT_EQ(wd_pipeline_run(p, "bench"), WD_ERR_MISSING_INPUT);
  EXPECT_EQ(wd_pipeline_run(p, "fly"), WD_ERR_CONFIG);
  EXPECT_EQ(wd_pipeline_run(p, "generate"), WD_OK) << wd_last_error();
  EXPECT_TRUE(fs::exists(root / "corpus/manifest.json"));

  // The pipeline holds its own copy: editing the config afterwards has no effect.
  ASSERT_EQ(wd_config_set_seed(c, 99), WD_OK);
  EXPECT_EQ(wd_pipeline_run(p, "split"), WD_OK) << wd_last_error();

  wd_pipeline* stale = nullptr;
  ASSERT_EQ(wd_pipeline_create(c, root.c_str(), 0, 1, &stale), WD_OK);
  EXPECT_EQ(wd_pipeline_run(stale, "split"), WD_ERR_HASH_MISMATCH);
  wd_pipeline* forced = nullptr;
  ASSERT_EQ(wd_pipeline_create(c, root.c_str(), 1, 1, &forced), WD_OK);
  EXPECT_EQ(wd_pipeline_run(forced, "split"), WD_OK);
  wd_pipeline* bad = nullptr;
  EXPECT_EQ(wd_pipeline_create(c, root.c_str(), 0, 0, &bad), WD_ERR_ARGUMENT);
  wd_pipeline_free(forced);
  wd_pipeline_free(stale);
  wd_pipeline_free(p);
  wd_config_free(c);
  fs::remove_all(root);
}

TEST(CApi, ScoringMatchesHandComputation) {
  const int predicted[4] = {1, 1, 0, 0}, truth[4] = {1, 0, 1, 0};
  double out[3];
  ASSERT_EQ(wd_explanation_scores(predicted, truth, 4, out), WD_OK);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], 0.5);
  EXPECT_DOUBLE_EQ(out[2], 0.5);
  const int bad[2] = {1, 2};
  EXPECT_EQ(wd_explanation_scores(bad, truth, 2, out), WD_ERR_CONTRACT);

  const double scores[3] = {0.2, 0.5, 0.9}, tau[3] = {0.5, 0.5, 0.5};
  int bin[3];
  ASSERT_EQ(wd_binarize(scores, tau, 3, bin), WD_OK);
  EXPECT_EQ(std::vector<int>(bin, bin + 3), (std::vector<int>{0, 1, 1}));

  // One dimension, truth exactly where the score is at least 0.6.
  const double e[4] = {0.1, 0.6, 0.3, 0.8};
  const int t[4] = {0, 1, 0, 1};
  double cal[1];
  ASSERT_EQ(wd_calibrate_thresholds(e, t, 4, 1, cal), WD_OK);
  EXPECT_GT(cal[0], 0.3);
  EXPECT_LE(cal[0], 0.6);
  EXPECT_EQ(wd_calibrate_thresholds(e, t, 0, 1, cal), WD_ERR_CONTRACT);
}

TEST(CApi, MockLlmBufferProtocol) {
  const char* prompt = "warning events at this node:\n- PacketLoss x2\n";
  size_t needed = 0;
  EXPECT_EQ(wd_mock_llm(prompt, 3, nullptr, 0, &needed), WD_ERR_ARGUMENT);
  ASSERT_GT(needed, 1u);
  std::vector<char> buf(needed);
  ASSERT_EQ(wd_mock_llm(prompt, 3, buf.data(), buf.size(), &needed), WD_OK);
  EXPECT_EQ(std::strlen(buf.data()) + 1, needed);
  EXPECT_NE(std::string(buf.data()).find("elevated_packet_loss: "), std::string::npos);
  std::vector<char> again(needed);
  ASSERT_EQ(wd_mock_llm(prompt, 3, again.data(), again.size(), nullptr), WD_OK);
  EXPECT_STREQ(buf.data(), again.data());
  std::vector<char> short_buf(needed - 1, 'x');
  EXPECT_EQ(wd_mock_llm(prompt, 3, short_buf.data(), short_buf.size(), &needed), WD_ERR_ARGUMENT);
}
