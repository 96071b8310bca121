#include "beamopt/results.hpp"

#include "beamopt/features.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace beamopt;
namespace fs = std::filesystem;

namespace {

class RippleEnv : public Environment {
 public:
  double value(const BeamConfig& s) override {
    double v = 0;
    for (int i = 0; i < s.size(); ++i) v += std::sin(0.9 * s[i] + i);
    return 0.5 + v / (2.0 * s.size());
  }
  std::string descriptor() const override { return "ripple"; }
};

const SolutionSpace kSpace{10, 3, 2};
const Provenance kProv{"00c0ffee00c0ffee", "ripple"};

SearchParams params(std::uint64_t seed) {
  SearchParams p;
  p.budget = 25;
  p.seed = seed;
  p.predictor.hidden = {16, 8};
  p.predictor.epochs = 20;
  return p;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

fs::path write_json(const std::string& name, const nlohmann::json& j) {
  const fs::path p = fs::temp_directory_path() / ("beamopt_res_" + std::to_string(::getpid()) + name);
  std::ofstream(p) << j.dump(1);
  return p;
}

}  // namespace

TEST(Results, HistoryCsvLayout) {
  RippleEnv env;
  const SearchResult r = epsilon_greedy_search(env, kSpace, params(1), BeamIdFeatureProvider(3));
  std::ostringstream os;
  write_history_csv(os, r, kProv);
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), r.history.size() + 2);
  EXPECT_EQ(ls[0], "# beamopt 0.1.0 config_hash=00c0ffee00c0ffee env=ripple");
  EXPECT_EQ(ls[1], "step,beam_ids,value,epsilon_draw,action,kind,evaluated");
  int evaluated = 0;
  for (size_t i = 0; i < r.history.size(); ++i) {
    const auto c = cells(ls[i + 2]);
    ASSERT_EQ(c.size(), 7u) << ls[i + 2];
    const HistoryRecord& h = r.history[i];
    EXPECT_EQ(std::stoi(c[0]), h.step);
    EXPECT_EQ(std::stod(c[2]), h.value);  // %.17g round-trips exactly
    EXPECT_EQ(c[5], step_kind_name(h.kind));
    EXPECT_EQ(c[3].empty(), std::isnan(h.epsilon_draw));
    evaluated += c[6] == "1";
    std::istringstream ids(c[1]);
    std::vector<int> parsed;
    for (int b; ids >> b;) parsed.push_back(b);
    EXPECT_EQ(parsed, h.config.ids());
  }
  EXPECT_EQ(evaluated, r.env_calls);
  EXPECT_EQ(evaluated, 25);
}

TEST(Results, ExhaustiveCsvIsLexicographic) {
  RippleEnv env;
  const SolutionSpace sp{6, 2, 2};
  const ExhaustiveTable t = exhaustive_search(env, sp);
  std::ostringstream os;
  write_exhaustive_csv(os, t, kProv);
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), 15u + 2);
  EXPECT_EQ(ls[1], "index,beam_ids,value");
  EXPECT_EQ(ls[2].substr(0, 6), "0,1 2,");
  EXPECT_EQ(ls.back().substr(0, 7), "14,5 6,");
}

TEST(Results, JsonRoundTripThroughSummary) {
  RippleEnv env;
  const SearchResult r = epsilon_greedy_search(env, kSpace, params(4), BeamIdFeatureProvider(3));
  const nlohmann::json j = result_to_json(r, kProv);
  EXPECT_EQ(j["method"], "egs");
  EXPECT_EQ(j["history"].size(), r.history.size());
  EXPECT_EQ(j["rewards"].size(), r.history.size() - 1);
  const fs::path p = write_json("egs.json", j);
  const ResultSummary s = read_result(p);
  fs::remove(p);
  EXPECT_EQ(s.config_hash, kProv.config_hash);
  EXPECT_EQ(s.env_descriptor, "ripple");
  EXPECT_EQ(s.seed, 4u);
  EXPECT_EQ(s.budget, 25);
  EXPECT_EQ(s.best_key, canonical_key(r.best));
  EXPECT_EQ(s.best_value, r.best_value);
  ASSERT_EQ(s.evaluated_values.size(), 25u);
  EXPECT_EQ(*std::max_element(s.evaluated_values.begin(), s.evaluated_values.end()), r.best_value);
}

TEST(Results, RejectsNonResultFiles) {
  const fs::path p = write_json("bogus.json", {{"hello", 1}});
  EXPECT_THROW(read_result(p), std::invalid_argument);
  fs::remove(p);
  EXPECT_THROW(read_result(p), std::invalid_argument);
}

TEST(Results, BestSoFarOracle) {
  const std::vector<double> v{0.2, 0.1, 0.5, 0.4, 0.5, 0.9, 0.0};
  EXPECT_EQ(best_so_far(v), (std::vector<double>{0.2, 0.2, 0.5, 0.5, 0.5, 0.9, 0.9}));
  EXPECT_TRUE(best_so_far({}).empty());
}

TEST(Results, MixedEnvironmentsRejected) {
  ResultSummary a, b;
  a.env_descriptor = "builtin-loc:aaaa";
  a.source = "a.json";
  b.env_descriptor = "builtin-loc:bbbb";
  b.source = "b.json";
  EXPECT_NO_THROW(check_same_environment({a, a}));
  try {
    check_same_environment({a, b});
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("b.json"), std::string::npos);
  }
}

TEST(Results, BestSoFarCsvSharesEnvCallAxis) {
  ResultSummary a, b;
  a.method = "egs";
  a.seed = 0;
  a.evaluated_values = {0.3, 0.1, 0.6};
  b.method = "random";
  b.seed = 2;
  b.evaluated_values = {0.5, 0.2};
  std::ostringstream os;
  write_best_so_far_csv(os, {a, b});
  EXPECT_EQ(os.str(), "env_call,egs_seed0,random_seed2\n1,0.29999999999999999,0.5\n"
                      "2,0.29999999999999999,0.5\n3,0.59999999999999998,\n");
}

TEST(Results, SummaryHasOneRowPerResult) {
  std::vector<ResultSummary> rs(3);
  for (int i = 0; i < 3; ++i) {
    rs[i].method = i ? "random" : "egs";
    rs[i].seed = i;
    rs[i].best_key = "1-2-3";
    rs[i].best_value = 0.25 * i;
  }
  std::ostringstream os;
  write_summary_table(os, rs);
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_NE(ls[3].find("0.500000"), std::string::npos);
}
