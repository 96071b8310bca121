#include "beamopt/results.hpp"

#include "beamopt/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace beamopt {

namespace {

using nlohmann::json;

std::string join_ids(const std::vector<int>& v, char sep) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

// Shortest round-trip representation.
std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void header_comment(std::ostream& os, const Provenance& prov) {
  os << "# " << kToolName << ' ' << kToolVersion << " config_hash=" << prov.config_hash
     << " env=" << prov.env_descriptor << '\n';
}

}  // namespace

json result_to_json(const SearchResult& r, const Provenance& prov) {
  json history = json::array();
  for (const auto& h : r.history) {
    json rec = {{"step", h.step},
                {"beam_ids", h.config.ids()},
                {"value", h.value},
                {"kind", step_kind_name(h.kind)},
                {"evaluated", h.evaluated}};
    if (!h.action.empty()) rec["action"] = h.action;
    if (!std::isnan(h.epsilon_draw)) rec["epsilon_draw"] = h.epsilon_draw;
    history.push_back(std::move(rec));
  }
  const PredictorSpec& p = r.params.predictor;
  return {
      {"tool", kToolName},
      {"version", kToolVersion},
      {"config_hash", prov.config_hash},
      {"env", prov.env_descriptor},
      {"method", r.method},
      {"space", {{"K", r.space.K}, {"k", r.space.k}, {"m", r.space.m}}},
      {"params",
       {{"epsilon", r.params.epsilon},
        {"T", r.params.budget},
        {"initial_size", r.params.initial_size},
        {"seed", r.params.seed},
        {"exploration", exploration_name(r.params.exploration)},
        {"predictor",
         {{"hidden", p.hidden},
          {"epochs", p.epochs},
          {"learning_rate", p.learning_rate},
          {"batch_size", p.batch_size},
          {"seed", p.seed}}}}},
      {"best", {{"beam_ids", r.best.ids()}, {"key", canonical_key(r.best)}, {"value", r.best_value}}},
      {"env_calls", r.env_calls},
      {"trainings", r.trainings},
      {"predictions", r.predictions},
      {"stalled", r.stalled},
      {"rewards", r.rewards},
      {"history", history},
  };
}

void write_history_csv(std::ostream& os, const SearchResult& r, const Provenance& prov) {
  header_comment(os, prov);
  os << "step,beam_ids,value,epsilon_draw,action,kind,evaluated\n";
  for (const auto& h : r.history) {
    os << h.step << ',' << join_ids(h.config.ids(), ' ') << ',' << num(h.value) << ','
       << (std::isnan(h.epsilon_draw) ? std::string() : num(h.epsilon_draw)) << ','
       << join_ids(h.action, ' ') << ',' << step_kind_name(h.kind) << ','
       << (h.evaluated ? 1 : 0) << '\n';
  }
}

void write_exhaustive_csv(std::ostream& os, const ExhaustiveTable& t, const Provenance& prov) {
  header_comment(os, prov);
  os << "index,beam_ids,value\n";
  for (size_t i = 0; i < t.configs.size(); ++i) {
    os << i << ',' << join_ids(t.configs[i].ids(), ' ') << ',' << num(t.values[i]) << '\n';
  }
}

ResultSummary read_result(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("report: cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
    ResultSummary s;
    s.source = path.string();
    s.method = j.at("method").get<std::string>();
    s.config_hash = j.at("config_hash").get<std::string>();
    s.env_descriptor = j.at("env").get<std::string>();
    s.seed = j.at("params").at("seed").get<std::uint64_t>();
    s.budget = j.at("params").at("T").get<int>();
    s.env_calls = j.at("env_calls").get<int>();
    s.best_key = j.at("best").at("key").get<std::string>();
    s.best_value = j.at("best").at("value").get<double>();
    for (const auto& h : j.at("history")) {
      if (h.at("evaluated").get<bool>()) s.evaluated_values.push_back(h.at("value").get<double>());
    }
    return s;
  } catch (const json::exception& e) {
    throw std::invalid_argument("report: " + path.string() + " is not a result file: " + e.what());
  }
}

std::vector<double> best_so_far(const std::vector<double>& values) {
  std::vector<double> out;
  out.reserve(values.size());
  double best = -INFINITY;
  for (double v : values) {
    best = std::max(best, v);
    out.push_back(best);
  }
  return out;
}

void check_same_environment(const std::vector<ResultSummary>& results) {
  for (const auto& r : results) {
    if (r.env_descriptor != results.front().env_descriptor) {
      throw std::invalid_argument("report: results come from different environments (" +
                                  results.front().env_descriptor + " in " +
                                  results.front().source + ", " + r.env_descriptor + " in " +
                                  r.source + ")");
    }
  }
}

void write_best_so_far_csv(std::ostream& os, const std::vector<ResultSummary>& results) {
  std::vector<std::vector<double>> curves;
  size_t rows = 0;
  os << "env_call";
  for (const auto& r : results) {
    os << ',' << r.method << "_seed" << r.seed;
    curves.push_back(best_so_far(r.evaluated_values));
    rows = std::max(rows, curves.back().size());
  }
  os << '\n';
  for (size_t i = 0; i < rows; ++i) {
    os << i + 1;
    for (const auto& c : curves) {
      os << ',';
      if (i < c.size()) os << num(c[i]);
    }
    os << '\n';
  }
}

void write_summary_table(std::ostream& os, const std::vector<ResultSummary>& results) {
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %8s %6s %10s %-20s %10s\n", "method", "seed", "T",
                "env_calls", "best", "value");
  os << line;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-12s %8llu %6d %10d %-20s %10.6f\n", r.method.c_str(),
                  static_cast<unsigned long long>(r.seed), r.budget, r.env_calls,
                  r.best_key.c_str(), r.best_value);
    os << line;
  }
}

}  // namespace beamopt
