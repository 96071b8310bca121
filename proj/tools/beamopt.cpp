#include "beamopt/beam_space.hpp"
#include "beamopt/env_bridge.hpp"
#include "beamopt/features.hpp"
#include "beamopt/hash.hpp"
#include "beamopt/loc_env.hpp"
#include "beamopt/results.hpp"
#include "beamopt/run_config.hpp"
#include "beamopt/search.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace beamopt;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kEnvError = 3, kBudgetError = 4 };

struct Options {
  std::string config;
  std::string out;
  std::string method = "egs";
  std::optional<std::uint64_t> seed;
  std::string beams;
  std::string poses = "route";
  bool export_clouds = false;
  std::vector<std::string> results;
};

// gen-env writes the snapshot under --out; the other commands keep reading
// it from the configured location and only redirect their own outputs.
RunConfig load(const Options& o, bool snapshot_follows_out) {
  RunConfig c = load_run_config(o.config);
  if (!snapshot_follows_out) c.snapshot_path = snapshot_path(c);
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.seed) c.search.seed = *o.seed;
  return c;
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

std::string comment_header(const std::string& hash, const std::string& env) {
  return std::string("# ") + kToolName + ' ' + kToolVersion + " config_hash=" + hash +
         " env=" + env + '\n';
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Timestamps live here so the data files stay byte-reproducible.
void write_sidecar(const fs::path& dir, const std::string& name, const std::string& command,
                   const std::string& hash, const std::vector<std::string>& outputs) {
  json j = {{"tool", kToolName}, {"version", kToolVersion},  {"command", command},
            {"config_hash", hash}, {"finished_utc", utc_now()}, {"outputs", outputs}};
  write_file(dir / name, j.dump(2) + '\n');
}

std::shared_ptr<const Snapshot> open_snapshot(const RunConfig& c) {
  const fs::path path = snapshot_path(c);
  if (!fs::exists(path)) {
    throw EnvironmentError("snapshot " + path.string() + " not found; run gen-env first", "");
  }
  auto snap = std::make_shared<Snapshot>(load_snapshot(path));
  if (loc_config_hash(snap->config) != loc_config_hash(c.loc)) {
    throw ConfigError("snapshot " + path.string() +
                          " was built from different scene/scanner/localization settings",
                      {"env.snapshot"});
  }
  return snap;
}

struct Setup {
  std::shared_ptr<const Snapshot> snap;
  std::unique_ptr<Environment> env;
  std::unique_ptr<FeatureProvider> features;
};

Setup make_setup(const RunConfig& c) {
  Setup s;
  if (c.env == EnvType::kBuiltinLoc) {
    s.snap = open_snapshot(c);
    s.env = std::make_unique<LocalizationEnvironment>(s.snap, c.threads);
  } else {
    BridgeSpec spec = c.bridge;
    if (spec.cache_path.empty()) spec.cache_path = default_cache_path(c.output_dir);
    s.env = std::make_unique<ExternalEnvironment>(std::move(spec));
  }
  if (c.features == FeatureKind::kBeamId) {
    s.features = std::make_unique<BeamIdFeatureProvider>(c.space.k);
  } else if (s.snap) {
    s.features = std::make_unique<StatsFeatureProvider>(s.snap->stats, c.space.k);
  } else {
    std::ifstream is(c.stats_path);
    if (!is) throw ConfigError("cannot open stats file " + c.stats_path.string(), {"env.stats"});
    s.features = std::make_unique<StatsFeatureProvider>(read_stats_csv(is), c.space.k);
  }
  return s;
}

int cmd_gen_env(const Options& o) {
  const RunConfig c = load(o, true);
  if (c.env != EnvType::kBuiltinLoc) {
    throw ConfigError("gen-env needs env.type = builtin-loc", {"env.type"});
  }
  const std::string hash = config_hash(c);
  std::cerr << "building snapshot (K=" << c.space.K << ", "
            << c.loc.eval_poses << " evaluation poses)\n";
  const Snapshot snap = build_snapshot(c.loc);
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);
  const fs::path snap_path = snapshot_path(c);
  if (snap_path.has_parent_path()) fs::create_directories(snap_path.parent_path());
  save_snapshot(snap, snap_path);

  const std::string env = "builtin-loc:" + hex64(snap.hash);
  std::ostringstream stats;
  stats << comment_header(hash, env);
  snap.stats.write_csv(stats);
  write_file(dir / "beam_stats.csv", stats.str());

  json info = {{"tool", kToolName},
               {"version", kToolVersion},
               {"config_hash", hash},
               {"env", env},
               {"snapshot_hash", hex64(snap.hash)},
               {"map_points", snap.map.points.size()},
               {"valid_normals", std::count(snap.normals.valid.begin(), snap.normals.valid.end(), true)},
               {"route_poses", snap.scene.route.size()},
               {"eval_indices", snap.eval_indices},
               {"beams", snap.stats.size()},
               {"config", to_json(c)}};
  write_file(dir / "snapshot_info.json", info.dump(2) + '\n');

  std::vector<std::string> outputs = {snap_path.string(), (dir / "beam_stats.csv").string(),
                                      (dir / "snapshot_info.json").string()};
  if (o.export_clouds) {
    std::ostringstream map;
    write_cloud_csv(map, snap.map);
    write_file(dir / "map.csv", map.str());
    outputs.push_back((dir / "map.csv").string());
    for (int idx : snap.eval_indices) {
      std::ostringstream scan;
      write_cloud_csv(scan, route_scan(snap, idx), true);
      char name[32];
      std::snprintf(name, sizeof name, "scan_%04d.csv", idx);
      write_file(dir / "clouds" / name, scan.str());
    }
    outputs.push_back((dir / "clouds").string());
  }
  write_sidecar(dir, "run_info_gen-env.json", "gen-env", hash, outputs);
  std::cout << "snapshot " << hex64(snap.hash) << " -> " << snap_path.string() << '\n';
  return kOk;
}

int cmd_search(const Options& o) {
  RunConfig c = load(o, false);
  const std::string hash = config_hash(c);
  // Budget and cap problems surface before the environment is touched.
  if (o.method == "exhaustive") {
    if (binomial(c.space.K, c.space.k) > kDefaultEnumerationCap) {
      throw CapExceeded("exhaustive search over C(" + std::to_string(c.space.K) + "," +
                        std::to_string(c.space.k) + ") configurations exceeds the cap of " +
                        std::to_string(kDefaultEnumerationCap));
    }
  } else if (o.method == "egs" || o.method == "random") {
    if (o.method == "egs") c.search.validate();
    if (c.search.budget < 1 ||
        static_cast<std::uint64_t>(c.search.budget) > binomial(c.space.K, c.space.k)) {
      throw BudgetError("search.T = " + std::to_string(c.search.budget) +
                        " must lie in [1, C(K,k)]");
    }
  } else {
    throw ConfigError("unknown method '" + o.method + "' (egs, random, exhaustive)", {"--method"});
  }

  Setup s = make_setup(c);
  const Provenance prov{hash, s.env->descriptor()};
  const fs::path dir = c.output_dir;
  fs::create_directories(dir);

  if (o.method == "exhaustive") {
    const ExhaustiveTable t = exhaustive_search(*s.env, c.space);
    std::ostringstream csv;
    write_exhaustive_csv(csv, t, prov);
    write_file(dir / "exhaustive.csv", csv.str());
    write_sidecar(dir, "run_info_exhaustive.json", "search --method exhaustive", hash,
                  {(dir / "exhaustive.csv").string()});
    std::cout << "configs " << t.configs.size() << " best " << canonical_key(t.configs[t.argmax])
              << " value " << t.max_value() << '\n';
    return kOk;
  }

  const SearchResult r = o.method == "egs"
                             ? epsilon_greedy_search(*s.env, c.space, c.search, *s.features)
                             : random_search(*s.env, c.space, c.search.budget, c.search.seed);
  const std::string stem = o.method + "_seed" + std::to_string(c.search.seed);
  std::ostringstream hist;
  write_history_csv(hist, r, prov);
  write_file(dir / ("result_" + stem + ".json"), result_to_json(r, prov).dump(2) + '\n');
  write_file(dir / ("history_" + stem + ".csv"), hist.str());
  write_sidecar(dir, "run_info_" + stem + ".json", "search --method " + o.method, hash,
                {(dir / ("result_" + stem + ".json")).string(),
                 (dir / ("history_" + stem + ".csv")).string()});
  std::cout << "best " << canonical_key(r.best) << " value " << r.best_value << " env_calls "
            << r.env_calls << (r.stalled ? " (stalled)" : "") << '\n';
  return kOk;
}

std::vector<int> parse_beam_list(const std::string& text) {
  std::vector<int> ids;
  std::string tok;
  for (char ch : text + ",") {
    if (ch == ',' || ch == '-' || ch == ' ') {
      if (!tok.empty()) {
        try {
          size_t used = 0;
          ids.push_back(std::stoi(tok, &used));
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw ConfigError("bad beam id '" + tok + "'", {"--beams"});
        }
        tok.clear();
      }
    } else {
      tok += ch;
    }
  }
  if (ids.empty()) throw ConfigError("--beams is empty", {"--beams"});
  return ids;
}

std::string report_row(const std::string& label, const std::string& beams, const RouteReport& r) {
  char line[256];
  std::snprintf(line, sizeof line, "%-12s %-24s %8.4f %8.4f %8.4f %8.4f\n", label.c_str(),
                beams.c_str(), r.accuracy[0], r.accuracy[1], r.accuracy[2], r.value);
  return line;
}

int cmd_eval(const Options& o) {
  const RunConfig c = load(o, false);
  if (c.env != EnvType::kBuiltinLoc) {
    throw ConfigError("eval needs env.type = builtin-loc", {"env.type"});
  }
  if (o.poses != "route" && o.poses != "eval") {
    throw ConfigError("--poses must be route or eval", {"--poses"});
  }
  const BeamConfig selected = make_config(parse_beam_list(o.beams), c.space);
  const std::string hash = config_hash(c);
  auto snap = open_snapshot(c);
  LocalizationEnvironment env(snap, c.threads);
  const PoseSet set = o.poses == "route" ? PoseSet::kRoute : PoseSet::kEvaluation;

  const BeamConfig equi = equidistant_config(c.space, 1, c.space.K);
  std::vector<int> all(c.space.K);
  for (int i = 0; i < c.space.K; ++i) all[i] = i + 1;

  const RouteReport sel = env.evaluate(selected, set);
  const RouteReport eq = env.evaluate(equi, set);
  const RouteReport full = env.evaluate(all, set);

  const fs::path dir = c.output_dir;
  const std::string head = comment_header(hash, env.descriptor());
  std::ostringstream per_pose;
  per_pose << head;
  sel.write_csv(per_pose);
  const std::string stem = "eval_" + canonical_key(selected) + "_" + o.poses;
  write_file(dir / (stem + ".csv"), per_pose.str());

  std::ostringstream summary;
  summary << head << "row,beam_ids,acc1,acc2,acc3,value\n";
  auto csv_row = [&](const char* label, const std::string& key, const RouteReport& r) {
    char line[256];
    std::snprintf(line, sizeof line, "%s,%s,%.17g,%.17g,%.17g,%.17g\n", label, key.c_str(),
                  r.accuracy[0], r.accuracy[1], r.accuracy[2], r.value);
    summary << line;
  };
  csv_row("selected", canonical_key(selected), sel);
  csv_row("equidistant", canonical_key(equi), eq);
  csv_row("full", "all", full);
  write_file(dir / (stem + "_summary.csv"), summary.str());
  write_sidecar(dir, "run_info_" + stem + ".json", "eval", hash,
                {(dir / (stem + ".csv")).string(), (dir / (stem + "_summary.csv")).string()});

  std::printf("%-12s %-24s %8s %8s %8s %8s\n", "row", "beams", "acc1", "acc2", "acc3", "value");
  std::cout << report_row("Selected", canonical_key(selected), sel)
            << report_row("Equidistant", canonical_key(equi), eq)
            << report_row("Full LiDAR", "1.." + std::to_string(c.space.K), full);
  return kOk;
}

int cmd_report(const Options& o) {
  if (o.results.empty()) throw ConfigError("report needs at least one result file", {"results"});
  std::vector<ResultSummary> rs;
  for (const auto& p : o.results) rs.push_back(read_result(p));
  try {
    check_same_environment(rs);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), {"results"});
  }
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  std::ostringstream curve, table;
  const std::string head = comment_header(rs.front().config_hash, rs.front().env_descriptor);
  curve << head;
  write_best_so_far_csv(curve, rs);
  write_summary_table(table, rs);
  write_file(dir / "best_so_far.csv", curve.str());
  write_file(dir / "summary.txt", head + table.str());
  std::cout << table.str();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR beam configuration search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolName) + ' ' + kToolVersion);
  Options o;

  auto* gen = app.add_subcommand("gen-env", "build and persist the environment snapshot");
  gen->add_option("--config", o.config, "run configuration (JSON)")->required();
  gen->add_option("--out", o.out, "output directory (overrides output.dir)");
  gen->add_flag("--export-clouds", o.export_clouds, "also write map and scan CSVs");

  auto* search = app.add_subcommand("search", "run a search method");
  search->add_option("--config", o.config, "run configuration (JSON)")->required();
  search->add_option("--method", o.method, "egs | random | exhaustive");
  search->add_option("--seed", o.seed, "overrides search.seed");
  search->add_option("--out", o.out, "output directory (overrides output.dir)");

  auto* eval = app.add_subcommand("eval", "localization report for one configuration");
  eval->add_option("--config", o.config, "run configuration (JSON)")->required();
  eval->add_option("--beams", o.beams, "beam ids, e.g. 3,9,14,20")->required();
  eval->add_option("--poses", o.poses, "route | eval");
  eval->add_option("--out", o.out, "output directory (overrides output.dir)");

  auto* report = app.add_subcommand("report", "best-so-far curves and summary table");
  report->add_option("--out", o.out, "output directory");
  report->add_option("results", o.results, "result JSON files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (gen->parsed()) return cmd_gen_env(o);
    if (search->parsed()) return cmd_search(o);
    if (eval->parsed()) return cmd_eval(o);
    return cmd_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what();
    if (!e.keys().empty()) {
      std::cerr << " [";
      for (size_t i = 0; i < e.keys().size(); ++i) std::cerr << (i ? ", " : "") << e.keys()[i];
      std::cerr << ']';
    }
    std::cerr << '\n';
    return kConfigError;
  } catch (const BudgetError& e) {
    std::cerr << "budget error: " << e.what() << '\n';
    return kBudgetError;
  } catch (const CapExceeded& e) {
    std::cerr << "cap exceeded: " << e.what() << '\n';
    return kBudgetError;
  } catch (const InvalidConfig& e) {
    std::cerr << "invalid beam configuration: " << e.what() << '\n';
    return kConfigError;
  } catch (const EnvironmentError& e) {
    std::cerr << "environment failure: " << e.what() << '\n';
    return kEnvError;
  } catch (const SnapshotError& e) {
    std::cerr << "snapshot error: " << e.what() << '\n';
    return kEnvError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kEnvError;
  }
}
