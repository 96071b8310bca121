#include "beamopt/run_config.hpp"

#include "beamopt/hash.hpp"

#include <fstream>
#include <set>

namespace beamopt {

namespace {

using nlohmann::json;

// Typed reader over one JSON object that remembers which keys were read.
class Section {
 public:
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  Section(const json* obj, std::string path, std::vector<std::string>& unknown,
          std::vector<std::string>& type_errors)
      : obj_(obj), path_(std::move(path)), unknown_(unknown), type_errors_(type_errors) {}

  ~Section() {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items()) {
      if (!seen_.count(k)) unknown_.push_back(key(k));
    }
  }

  bool has(const std::string& k) const { return obj_ && obj_->contains(k); }

  template <class T>
  void get(const std::string& k, T& out) {
    seen_.insert(k);
    if (!has(k)) return;
    try {
      out = obj_->at(k).get<T>();
    } catch (const json::exception&) {
      type_errors_.push_back(key(k));
    }
  }

  /// Nested object; a non-object value is a type error.
  Section child(const std::string& k) {
    seen_.insert(k);
    if (!has(k)) return Section(nullptr, key(k), unknown_, type_errors_);
    const json& v = obj_->at(k);
    if (!v.is_object()) {
      type_errors_.push_back(key(k));
      return Section(nullptr, key(k), unknown_, type_errors_);
    }
    return Section(&v, key(k), unknown_, type_errors_);
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  const json* obj_;
  std::string path_;
  std::vector<std::string>& unknown_;
  std::vector<std::string>& type_errors_;
  std::set<std::string> seen_;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

void read_scene(Section s, SceneParams& p) {
  s.get("seed", p.seed);
  s.get("loop_length", p.loop_length);
  s.get("loop_width", p.loop_width);
  s.get("building_setback", p.building_setback);
  s.get("building_height_min", p.building_height_min);
  s.get("building_height_max", p.building_height_max);
  s.get("trees_per_100m", p.trees_per_100m);
  s.get("poles_per_100m", p.poles_per_100m);
  s.get("cars_per_100m", p.cars_per_100m);
  s.get("car_jitter", p.car_jitter);
  s.get("route_poses", p.route_poses);
  s.get("map_pose_spacing", p.map_pose_spacing);
}

void read_scanner(Section s, ScannerSpec& p) {
  s.get("elevation_min_deg", p.elevation_min_deg);
  s.get("elevation_max_deg", p.elevation_max_deg);
  s.get("azimuth_steps", p.azimuth_steps);
  s.get("max_range", p.max_range);
  s.get("sensor_height", p.sensor_height);
}

void read_icp(Section s, IcpParams& p) {
  s.get("max_iterations", p.max_iterations);
  s.get("translation_tolerance", p.translation_tolerance);
  s.get("rotation_tolerance", p.rotation_tolerance);
  s.get("max_correspondence_distance", p.max_correspondence_distance);
  s.get("initial_correspondence_distance", p.initial_correspondence_distance);
  s.get("gate_decay", p.gate_decay);
  s.get("robust_scale", p.robust_scale);
  s.get("initial_robust_scale", p.initial_robust_scale);
  s.get("normal_neighbors", p.normal_neighbors);
}

void read_localization(Section s, LocEnvConfig& c) {
  s.get("eval_poses", c.eval_poses);
  s.get("eval_seed", c.eval_seed);
  s.get("map_voxel", c.map_voxel);
  read_icp(s.child("icp"), c.icp);
  {
    Section n = s.child("noise");
    n.get("translation_stddev", c.noise.translation_stddev);
    n.get("yaw_stddev_deg", c.noise.yaw_stddev_deg);
    n.get("seed", c.noise.seed);
  }
  {
    Section r = s.child("reward");
    std::vector<std::array<double, 2>> th;
    r.get("thresholds", th);
    if (th.size() == 3) {
      for (size_t i = 0; i < 3; ++i) c.reward.thresholds[i] = {th[i][0], th[i][1]};
    }
    std::vector<double> w;
    r.get("weights", w);
    if (w.size() == 3) std::copy(w.begin(), w.end(), c.reward.weights.begin());
  }
}

json scene_json(const SceneParams& p) {
  return {{"seed", p.seed},
          {"loop_length", p.loop_length},
          {"loop_width", p.loop_width},
          {"building_setback", p.building_setback},
          {"building_height_min", p.building_height_min},
          {"building_height_max", p.building_height_max},
          {"trees_per_100m", p.trees_per_100m},
          {"poles_per_100m", p.poles_per_100m},
          {"cars_per_100m", p.cars_per_100m},
          {"car_jitter", p.car_jitter},
          {"route_poses", p.route_poses},
          {"map_pose_spacing", p.map_pose_spacing}};
}

}  // namespace

std::string_view exploration_name(Exploration e) {
  return e == Exploration::kRandomState ? "random_state" : "random_action";
}

std::string_view feature_kind_name(FeatureKind f) {
  return f == FeatureKind::kBeamStats ? "beam-stats" : "beam-id";
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object", {});
  std::vector<std::string> missing;
  for (const char* k : {"space", "env"}) {
    if (!j.contains(k)) missing.push_back(k);
  }
  if (j.contains("space") && j["space"].is_object()) {
    for (const char* k : {"K", "k"}) {
      if (!j["space"].contains(k)) missing.push_back(std::string("space.") + k);
    }
  }
  if (j.contains("env") && j["env"].is_object() && !j["env"].contains("type")) {
    missing.push_back("env.type");
  }
  if (!missing.empty()) {
    throw ConfigError("config: missing required key(s): " + join(missing), missing);
  }

  RunConfig c;
  std::vector<std::string> unknown, type_errors;
  std::string exploration = "random_state", features = "beam-stats", env_type;
  {
    Section root(&j, "", unknown, type_errors);
    {
      Section s = root.child("space");
      s.get("K", c.space.K);
      s.get("k", c.space.k);
      s.get("m", c.space.m);
    }
    {
      Section s = root.child("search");
      s.get("epsilon", c.search.epsilon);
      s.get("T", c.search.budget);
      s.get("initial_size", c.search.initial_size);
      s.get("seed", c.search.seed);
      s.get("exploration", exploration);
      s.get("max_steps", c.search.max_steps);
      s.get("features", features);
    }
    {
      Section s = root.child("predictor");
      PredictorSpec& p = c.search.predictor;
      s.get("hidden", p.hidden);
      s.get("epochs", p.epochs);
      s.get("learning_rate", p.learning_rate);
      s.get("batch_size", p.batch_size);
      s.get("beta1", p.beta1);
      s.get("beta2", p.beta2);
      s.get("adam_epsilon", p.adam_epsilon);
      s.get("seed", p.seed);
    }
    {
      Section s = root.child("env");
      s.get("type", env_type);
      std::string snap;
      s.get("snapshot", snap);
      c.snapshot_path = snap;
      s.get("threads", c.threads);
      s.get("command", c.bridge.command);
      s.get("timeout_seconds", c.bridge.timeout_seconds);
      std::string cache;
      s.get("cache_path", cache);
      c.bridge.cache_path = cache;
      s.get("retries", c.bridge.retries);
      std::string stats;
      s.get("stats", stats);
      c.stats_path = stats;
    }
    read_scene(root.child("scene"), c.loc.scene);
    read_scanner(root.child("scanner"), c.loc.scanner);
    read_localization(root.child("localization"), c.loc);
    {
      Section s = root.child("output");
      std::string dir = c.output_dir.string();
      s.get("dir", dir);
      c.output_dir = dir;
    }
  }
  if (!unknown.empty()) {
    throw ConfigError("config: unknown key(s): " + join(unknown), unknown);
  }
  if (!type_errors.empty()) {
    throw ConfigError("config: wrong type for key(s): " + join(type_errors), type_errors);
  }

  std::vector<std::string> bad;
  if (exploration == "random_state") {
    c.search.exploration = Exploration::kRandomState;
  } else if (exploration == "random_action") {
    c.search.exploration = Exploration::kRandomAction;
  } else {
    bad.push_back("search.exploration");
  }
  if (features == "beam-stats") {
    c.features = FeatureKind::kBeamStats;
  } else if (features == "beam-id") {
    c.features = FeatureKind::kBeamId;
  } else {
    bad.push_back("search.features");
  }
  if (env_type == "builtin-loc") {
    c.env = EnvType::kBuiltinLoc;
  } else if (env_type == "bridge") {
    c.env = EnvType::kBridge;
    if (c.bridge.command.empty()) bad.push_back("env.command");
    if (c.features == FeatureKind::kBeamStats && c.stats_path.empty()) bad.push_back("env.stats");
  } else {
    bad.push_back("env.type");
  }
  if (j.contains("localization") && j["localization"].contains("reward")) {
    const json& r = j["localization"]["reward"];
    if (r.contains("thresholds") && (!r["thresholds"].is_array() || r["thresholds"].size() != 3)) {
      bad.push_back("localization.reward.thresholds");
    }
    if (r.contains("weights") && (!r["weights"].is_array() || r["weights"].size() != 3)) {
      bad.push_back("localization.reward.weights");
    }
  }
  if (!bad.empty()) throw ConfigError("config: invalid value for key(s): " + join(bad), bad);

  c.loc.scanner.num_beams = c.space.K;
  auto check = [&](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: ") + section + ": " + e.what(), {section});
    }
  };
  check("space", [&] { c.space.validate(); });
  check("search", [&] { c.search.validate(); });
  check("predictor", [&] {
    PredictorSpec p = c.search.predictor;
    p.input_dim = 1;
    p.validate();
  });
  if (c.env == EnvType::kBuiltinLoc) {
    check("scene", [&] { c.loc.scene.validate(); });
    check("scanner", [&] { c.loc.scanner.validate(); });
    check("localization", [&] { c.loc.validate(); });
  } else {
    check("env", [&] { c.bridge.validate(); });
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string(), {});
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what(), {});
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const PredictorSpec& p = c.search.predictor;
  json env;
  if (c.env == EnvType::kBuiltinLoc) {
    env = {{"type", "builtin-loc"}, {"snapshot", c.snapshot_path.string()}, {"threads", c.threads}};
  } else {
    env = {{"type", "bridge"},
           {"command", c.bridge.command},
           {"timeout_seconds", c.bridge.timeout_seconds},
           {"cache_path", c.bridge.cache_path.string()},
           {"retries", c.bridge.retries},
           {"stats", c.stats_path.string()}};
  }
  const LocEnvConfig& l = c.loc;
  json thresholds = json::array();
  for (const auto& t : l.reward.thresholds) thresholds.push_back({t.translation_m, t.rotation_deg});
  return {
      {"space", {{"K", c.space.K}, {"k", c.space.k}, {"m", c.space.m}}},
      {"search",
       {{"epsilon", c.search.epsilon},
        {"T", c.search.budget},
        {"initial_size", c.search.initial_size},
        {"seed", c.search.seed},
        {"exploration", exploration_name(c.search.exploration)},
        {"max_steps", c.search.max_steps},
        {"features", feature_kind_name(c.features)}}},
      {"predictor",
       {{"hidden", p.hidden},
        {"epochs", p.epochs},
        {"learning_rate", p.learning_rate},
        {"batch_size", p.batch_size},
        {"beta1", p.beta1},
        {"beta2", p.beta2},
        {"adam_epsilon", p.adam_epsilon},
        {"seed", p.seed}}},
      {"env", env},
      {"scene", scene_json(l.scene)},
      {"scanner",
       {{"elevation_min_deg", l.scanner.elevation_min_deg},
        {"elevation_max_deg", l.scanner.elevation_max_deg},
        {"azimuth_steps", l.scanner.azimuth_steps},
        {"max_range", l.scanner.max_range},
        {"sensor_height", l.scanner.sensor_height}}},
      {"localization",
       {{"eval_poses", l.eval_poses},
        {"eval_seed", l.eval_seed},
        {"map_voxel", l.map_voxel},
        {"icp",
         {{"max_iterations", l.icp.max_iterations},
          {"translation_tolerance", l.icp.translation_tolerance},
          {"rotation_tolerance", l.icp.rotation_tolerance},
          {"max_correspondence_distance", l.icp.max_correspondence_distance},
          {"initial_correspondence_distance", l.icp.initial_correspondence_distance},
          {"gate_decay", l.icp.gate_decay},
          {"robust_scale", l.icp.robust_scale},
          {"initial_robust_scale", l.icp.initial_robust_scale},
          {"normal_neighbors", l.icp.normal_neighbors}}},
        {"noise",
         {{"translation_stddev", l.noise.translation_stddev},
          {"yaw_stddev_deg", l.noise.yaw_stddev_deg},
          {"seed", l.noise.seed}}},
        {"reward", {{"thresholds", thresholds}, {"weights", l.reward.weights}}}}},
      {"output", {{"dir", c.output_dir.string()}}},
  };
}

std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("output");
  // Locations and thread counts do not change results.
  for (const char* k : {"snapshot", "cache_path", "threads"}) j["env"].erase(k);
  return hex64(fnv1a64(j.dump()));
}

std::filesystem::path snapshot_path(const RunConfig& c) {
  return c.snapshot_path.empty() ? c.output_dir / "snapshot.bin" : c.snapshot_path;
}

}  // namespace beamopt
