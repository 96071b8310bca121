#include "beamopt/env_bridge.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <unistd.h>

using namespace beamopt;
namespace fs = std::filesystem;

namespace {

const SolutionSpace kSpace{8, 3, 2};

class BridgeTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("beamopt_bridge_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  BridgeSpec spec(const std::string& mode, bool cache = true) const {
    BridgeSpec s;
    s.command = {"python3", std::string(BEAMOPT_STUB_DIR) + "/stub_bridge.py", mode,
                 log().string()};
    s.timeout_seconds = 20;
    if (cache) s.cache_path = dir_ / "cache.jsonl";
    return s;
  }

  fs::path log() const { return dir_ / "requests.log"; }

  int logged_requests() const {
    std::ifstream is(log());
    int n = 0;
    for (std::string line; std::getline(is, line);) n += !line.empty();
    return n;
  }

  fs::path dir_;
};

template <typename F>
BridgeErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const BridgeError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no BridgeError thrown";
  return BridgeErrorKind::kSpawnFailed;
}

}  // namespace

TEST(BridgeProtocol, RequestLine) {
  EXPECT_EQ(bridge_request(make_config({3, 1, 7}, kSpace)), R"({"beam_ids":[1,3,7]})");
}

TEST(BridgeProtocol, ParseResponse) {
  EXPECT_EQ(parse_bridge_response(R"({"value":0.5})", "k"), 0.5);
  EXPECT_EQ(parse_bridge_response(R"({"value":0})", "k"), 0.0);
  EXPECT_EQ(parse_bridge_response(R"({"value":1, "extra":"x"})", "k"), 1.0);
  EXPECT_EQ(error_kind([] { parse_bridge_response("nope", "k"); }), BridgeErrorKind::kMalformed);
  EXPECT_EQ(error_kind([] { parse_bridge_response(R"({"value":"0.5"})", "k"); }),
            BridgeErrorKind::kMalformed);
  EXPECT_EQ(error_kind([] { parse_bridge_response(R"([0.5])", "k"); }),
            BridgeErrorKind::kMalformed);
  EXPECT_EQ(error_kind([] { parse_bridge_response(R"({"value":-0.01})", "k"); }),
            BridgeErrorKind::kOutOfRange);
  EXPECT_EQ(error_kind([] { parse_bridge_response(R"({"value":1.7})", "k"); }),
            BridgeErrorKind::kOutOfRange);
}

TEST(BridgeProtocol, CommandHashSeparatesArguments) {
  EXPECT_NE(command_hash({"ab", "c"}), command_hash({"a", "bc"}));
  EXPECT_EQ(command_hash({"x", "y"}), command_hash({"x", "y"}));
}

TEST(BridgeProtocol, SpecValidation) {
  BridgeSpec s;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.command = {"true"};
  s.timeout_seconds = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST_F(BridgeTest, ReturnsValueAndCachesWithoutRespawn) {
  ExternalEnvironment env(spec("half"));
  const BeamConfig s = make_config({1, 4, 8}, kSpace);
  EXPECT_EQ(env.value(s), 0.5);
  EXPECT_EQ(env.spawns(), 1);
  EXPECT_EQ(logged_requests(), 1);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(env.value(s), 0.5);
  EXPECT_EQ(env.spawns(), 1);
  EXPECT_EQ(env.cache_hits(), 5);
  EXPECT_EQ(logged_requests(), 1);
  std::ifstream is(log());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, R"({"beam_ids":[1,4,8]})");
}

TEST_F(BridgeTest, DistinctConfigsSpawnSeparately) {
  ExternalEnvironment env(spec("sum"));
  EXPECT_DOUBLE_EQ(env.value(make_config({1, 2, 3}, kSpace)), 0.006);
  EXPECT_DOUBLE_EQ(env.value(make_config({6, 7, 8}, kSpace)), 0.021);
  EXPECT_EQ(env.spawns(), 2);
  EXPECT_EQ(env.cache_size(), 2u);
}

TEST_F(BridgeTest, CachePersistsAcrossInstances) {
  const BeamConfig s = make_config({2, 5, 7}, kSpace);
  {
    ExternalEnvironment env(spec("sum"));
    EXPECT_DOUBLE_EQ(env.value(s), 0.014);
  }
  ExternalEnvironment again(spec("sum"));
  EXPECT_EQ(again.cache_size(), 1u);
  EXPECT_DOUBLE_EQ(again.value(s), 0.014);
  EXPECT_EQ(again.spawns(), 0);
  EXPECT_EQ(logged_requests(), 1);

  // A different command must not reuse those entries.
  ExternalEnvironment other(spec("half"));
  EXPECT_EQ(other.cache_size(), 0u);
  EXPECT_EQ(other.value(s), 0.5);
  EXPECT_EQ(logged_requests(), 2);
}

TEST_F(BridgeTest, CacheIgnoresTornLines) {
  const BeamConfig s = make_config({2, 5, 7}, kSpace);
  {
    ExternalEnvironment env(spec("sum"));
    env.value(s);
  }
  {
    std::ofstream os(dir_ / "cache.jsonl", std::ios::app);
    os << "{\"command_hash\":\"dead";
  }
  ExternalEnvironment again(spec("sum"));
  EXPECT_EQ(again.cache_size(), 1u);
}

TEST_F(BridgeTest, FirstNonBlankLineIsTheResponse) {
  ExternalEnvironment env(spec("chatty", false));
  EXPECT_EQ(env.value(make_config({1, 2, 3}, kSpace)), 0.25);
}

TEST_F(BridgeTest, OutOfRangeValue) {
  ExternalEnvironment env(spec("out_of_range"));
  const BeamConfig s = make_config({1, 2, 3}, kSpace);
  try {
    env.value(s);
    FAIL() << "expected BridgeError";
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.kind(), BridgeErrorKind::kOutOfRange);
    EXPECT_EQ(e.config_key(), canonical_key(s));
    EXPECT_NE(e.raw_output().find("1.7"), std::string::npos);
  }
  EXPECT_EQ(env.cache_size(), 0u);
  EXPECT_FALSE(fs::exists(dir_ / "cache.jsonl"));
}

TEST_F(BridgeTest, MalformedOutput) {
  ExternalEnvironment env(spec("malformed"));
  EXPECT_EQ(error_kind([&] { env.value(make_config({1, 2, 3}, kSpace)); }),
            BridgeErrorKind::kMalformed);
  ExternalEnvironment missing(spec("missing"));
  EXPECT_EQ(error_kind([&] { missing.value(make_config({1, 2, 3}, kSpace)); }),
            BridgeErrorKind::kMalformed);
}

TEST_F(BridgeTest, NonZeroExit) {
  ExternalEnvironment env(spec("fail"));
  try {
    env.value(make_config({1, 2, 3}, kSpace));
    FAIL() << "expected BridgeError";
  } catch (const BridgeError& e) {
    EXPECT_EQ(e.kind(), BridgeErrorKind::kNonZeroExit);
    EXPECT_NE(std::string(e.what()).find("exit status 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("detector crashed"), std::string::npos);
  }
}

TEST_F(BridgeTest, RetriesRespawn) {
  BridgeSpec s = spec("fail");
  s.retries = 2;
  ExternalEnvironment env(s);
  EXPECT_THROW(env.value(make_config({1, 2, 3}, kSpace)), BridgeError);
  EXPECT_EQ(env.spawns(), 3);
  EXPECT_EQ(logged_requests(), 3);
}

TEST_F(BridgeTest, Timeout) {
  BridgeSpec s = spec("sleep");
  s.timeout_seconds = 0.5;
  ExternalEnvironment env(s);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(error_kind([&] { env.value(make_config({1, 2, 3}, kSpace)); }),
            BridgeErrorKind::kTimeout);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST_F(BridgeTest, SpawnFailure) {
  BridgeSpec s;
  s.command = {"/nonexistent/beamopt-evaluator"};
  ExternalEnvironment env(s);
  EXPECT_EQ(error_kind([&] { env.value(make_config({1, 2, 3}, kSpace)); }),
            BridgeErrorKind::kSpawnFailed);
}

TEST_F(BridgeTest, CacheDirFromEnvironment) {
  ::setenv("BEAMOPT_CACHE_DIR", dir_.c_str(), 1);
  EXPECT_EQ(default_cache_path("/elsewhere"), dir_ / "bridge_cache.jsonl");
  ::unsetenv("BEAMOPT_CACHE_DIR");
  EXPECT_EQ(default_cache_path("/elsewhere"), fs::path("/elsewhere/bridge_cache.jsonl"));
}

TEST_F(BridgeTest, DescriptorNamesCommand) {
  ExternalEnvironment a(spec("half")), b(spec("sum"));
  EXPECT_EQ(a.descriptor().rfind("bridge:", 0), 0u);
  EXPECT_NE(a.descriptor(), b.descriptor());
}
