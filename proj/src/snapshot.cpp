#include "beamopt/hash.hpp"
#include "beamopt/loc_env.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

namespace beamopt {

namespace {

constexpr char kMagic[8] = {'B', 'O', 'S', 'N', 'A', 'P', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_vec3(const Eigen::Vector3d& v) {
    put(v.x());
    put(v.y());
    put(v.z());
  }
  void put_size(size_t n) { put(static_cast<std::uint64_t>(n)); }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    static_assert(std::is_trivially_copyable_v<T>);
    if (pos_ + sizeof(T) > bytes_.size()) throw SnapshotError("snapshot: truncated payload");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Eigen::Vector3d get_vec3() {
    const double x = get<double>(), y = get<double>(), z = get<double>();
    return {x, y, z};
  }
  size_t get_size() {
    const auto n = get<std::uint64_t>();
    if (n > bytes_.size()) throw SnapshotError("snapshot: corrupt length field");
    return static_cast<size_t>(n);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

SemanticClass to_class(std::uint8_t v) {
  if (v >= kNumClasses) throw SnapshotError("snapshot: invalid class label");
  return static_cast<SemanticClass>(v);
}

void put_pose2(Writer& w, const Pose2& p) {
  w.put(p.x);
  w.put(p.y);
  w.put(p.yaw);
}

Pose2 get_pose2(Reader& r) {
  Pose2 p;
  p.x = r.get<double>();
  p.y = r.get<double>();
  p.yaw = r.get<double>();
  return p;
}

void put_config(Writer& w, const LocEnvConfig& c) {
  const SceneParams& s = c.scene;
  w.put(s.seed);
  for (double v : {s.loop_length, s.loop_width, s.building_setback, s.building_height_min,
                   s.building_height_max, s.trees_per_100m, s.poles_per_100m, s.cars_per_100m,
                   s.car_jitter}) {
    w.put(v);
  }
  w.put(static_cast<std::int32_t>(s.route_poses));
  w.put(s.map_pose_spacing);

  const ScannerSpec& sc = c.scanner;
  w.put(static_cast<std::int32_t>(sc.num_beams));
  w.put(sc.elevation_min_deg);
  w.put(sc.elevation_max_deg);
  w.put(static_cast<std::int32_t>(sc.azimuth_steps));
  w.put(sc.max_range);
  w.put(sc.sensor_height);

  const IcpParams& ip = c.icp;
  w.put(static_cast<std::int32_t>(ip.max_iterations));
  w.put(ip.translation_tolerance);
  w.put(ip.rotation_tolerance);
  w.put(ip.max_correspondence_distance);
  w.put(ip.initial_correspondence_distance);
  w.put(ip.gate_decay);
  w.put(ip.robust_scale);
  w.put(ip.initial_robust_scale);
  w.put(static_cast<std::int32_t>(ip.normal_neighbors));

  for (const auto& t : c.reward.thresholds) {
    w.put(t.translation_m);
    w.put(t.rotation_deg);
  }
  for (double v : c.reward.weights) w.put(v);

  w.put(c.noise.translation_stddev);
  w.put(c.noise.yaw_stddev_deg);
  w.put(c.noise.seed);
  w.put(static_cast<std::int32_t>(c.eval_poses));
  w.put(c.eval_seed);
  w.put(c.map_voxel);
}

LocEnvConfig get_config(Reader& r) {
  LocEnvConfig c;
  SceneParams& s = c.scene;
  s.seed = r.get<std::uint64_t>();
  for (double* v : {&s.loop_length, &s.loop_width, &s.building_setback, &s.building_height_min,
                    &s.building_height_max, &s.trees_per_100m, &s.poles_per_100m,
                    &s.cars_per_100m, &s.car_jitter}) {
    *v = r.get<double>();
  }
  s.route_poses = r.get<std::int32_t>();
  s.map_pose_spacing = r.get<double>();

  ScannerSpec& sc = c.scanner;
  sc.num_beams = r.get<std::int32_t>();
  sc.elevation_min_deg = r.get<double>();
  sc.elevation_max_deg = r.get<double>();
  sc.azimuth_steps = r.get<std::int32_t>();
  sc.max_range = r.get<double>();
  sc.sensor_height = r.get<double>();

  IcpParams& ip = c.icp;
  ip.max_iterations = r.get<std::int32_t>();
  ip.translation_tolerance = r.get<double>();
  ip.rotation_tolerance = r.get<double>();
  ip.max_correspondence_distance = r.get<double>();
  ip.initial_correspondence_distance = r.get<double>();
  ip.gate_decay = r.get<double>();
  ip.robust_scale = r.get<double>();
  ip.initial_robust_scale = r.get<double>();
  ip.normal_neighbors = r.get<std::int32_t>();

  for (auto& t : c.reward.thresholds) {
    t.translation_m = r.get<double>();
    t.rotation_deg = r.get<double>();
  }
  for (double& v : c.reward.weights) v = r.get<double>();

  c.noise.translation_stddev = r.get<double>();
  c.noise.yaw_stddev_deg = r.get<double>();
  c.noise.seed = r.get<std::uint64_t>();
  c.eval_poses = r.get<std::int32_t>();
  c.eval_seed = r.get<std::uint64_t>();
  c.map_voxel = r.get<double>();
  return c;
}

std::string payload(const Snapshot& snap) {
  Writer w;
  put_config(w, snap.config);

  w.put_size(snap.scene.boxes.size());
  for (const auto& b : snap.scene.boxes) {
    w.put_vec3(b.min);
    w.put_vec3(b.max);
    w.put(static_cast<std::uint8_t>(b.label));
  }
  w.put_size(snap.scene.spheres.size());
  for (const auto& s : snap.scene.spheres) {
    w.put_vec3(s.center);
    w.put(s.radius);
    w.put(static_cast<std::uint8_t>(s.label));
  }
  w.put_size(snap.scene.route.size());
  for (const auto& p : snap.scene.route) put_pose2(w, p);
  w.put_size(snap.scene.map_route.size());
  for (const auto& p : snap.scene.map_route) put_pose2(w, p);

  w.put_size(snap.map.size());
  for (size_t i = 0; i < snap.map.size(); ++i) {
    w.put_vec3(snap.map.points[i]);
    w.put(static_cast<std::uint8_t>(snap.map.labels[i]));
  }
  w.put_size(snap.normals.normals.size());
  for (size_t i = 0; i < snap.normals.normals.size(); ++i) {
    w.put_vec3(snap.normals.normals[i]);
    w.put(snap.normals.valid[i]);
  }

  w.put_size(snap.eval_indices.size());
  for (int i : snap.eval_indices) w.put(static_cast<std::int32_t>(i));
  w.put_size(snap.noise.size());
  for (const auto& p : snap.noise) put_pose2(w, p);

  w.put_size(snap.stats.size());
  for (const auto& [id, st] : snap.stats.rows()) {
    w.put(static_cast<std::int32_t>(id));
    w.put(st.pts);
    for (double v : st.sem_pts) w.put(v);
    w.put(st.dist);
    w.put(st.std_dist);
    w.put(st.phi);
    w.put(static_cast<std::int32_t>(st.scans));
  }
  return w.bytes();
}

Snapshot parse_payload(std::string_view bytes) {
  Reader r(bytes);
  Snapshot snap;
  snap.config = get_config(r);
  snap.scene.params = snap.config.scene;

  const size_t n_boxes = r.get_size();
  for (size_t i = 0; i < n_boxes; ++i) {
    Box b;
    b.min = r.get_vec3();
    b.max = r.get_vec3();
    b.label = to_class(r.get<std::uint8_t>());
    snap.scene.boxes.push_back(b);
  }
  const size_t n_spheres = r.get_size();
  for (size_t i = 0; i < n_spheres; ++i) {
    Sphere s;
    s.center = r.get_vec3();
    s.radius = r.get<double>();
    s.label = to_class(r.get<std::uint8_t>());
    snap.scene.spheres.push_back(s);
  }
  const size_t n_route = r.get_size();
  for (size_t i = 0; i < n_route; ++i) snap.scene.route.push_back(get_pose2(r));
  const size_t n_map_route = r.get_size();
  for (size_t i = 0; i < n_map_route; ++i) snap.scene.map_route.push_back(get_pose2(r));

  const size_t n_map = r.get_size();
  snap.map.points.reserve(n_map);
  snap.map.labels.reserve(n_map);
  for (size_t i = 0; i < n_map; ++i) {
    snap.map.points.push_back(r.get_vec3());
    snap.map.labels.push_back(to_class(r.get<std::uint8_t>()));
  }
  const size_t n_normals = r.get_size();
  snap.normals.normals.reserve(n_normals);
  snap.normals.valid.reserve(n_normals);
  for (size_t i = 0; i < n_normals; ++i) {
    snap.normals.normals.push_back(r.get_vec3());
    snap.normals.valid.push_back(r.get<std::uint8_t>());
  }

  const size_t n_eval = r.get_size();
  for (size_t i = 0; i < n_eval; ++i) snap.eval_indices.push_back(r.get<std::int32_t>());
  const size_t n_noise = r.get_size();
  for (size_t i = 0; i < n_noise; ++i) snap.noise.push_back(get_pose2(r));

  const size_t n_stats = r.get_size();
  std::map<int, BeamStats> rows;
  for (size_t i = 0; i < n_stats; ++i) {
    const int id = r.get<std::int32_t>();
    BeamStats st;
    st.pts = r.get<double>();
    for (double& v : st.sem_pts) v = r.get<double>();
    st.dist = r.get<double>();
    st.std_dist = r.get<double>();
    st.phi = r.get<double>();
    st.scans = r.get<std::int32_t>();
    rows.emplace(id, st);
  }
  snap.stats = BeamStatsTable(std::move(rows));
  if (!r.done()) throw SnapshotError("snapshot: trailing bytes after payload");
  return snap;
}

}  // namespace

std::uint64_t snapshot_content_hash(const Snapshot& snap) { return fnv1a64(payload(snap)); }

std::uint64_t loc_config_hash(const LocEnvConfig& config) {
  Writer w;
  put_config(w, config);
  return fnv1a64(w.bytes());
}

void save_snapshot(const Snapshot& snap, const std::filesystem::path& path) {
  const std::string body = payload(snap);
  const std::uint64_t h = fnv1a64(body);
  if (snap.hash != 0 && snap.hash != h) {
    throw SnapshotError("snapshot: content changed after the hash was computed");
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw SnapshotError("snapshot: cannot write " + tmp.string());
    os.write(kMagic, sizeof kMagic);
    os.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
    os.write(reinterpret_cast<const char*>(&h), sizeof h);
    os.write(body.data(), static_cast<std::streamsize>(body.size()));
    if (!os) throw SnapshotError("snapshot: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Snapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw SnapshotError("snapshot: cannot open " + path.string());
  const std::string data((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  constexpr size_t header = sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (data.size() < header || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
    throw SnapshotError("snapshot: " + path.string() + " is not a snapshot file");
  }
  std::uint32_t version;
  std::memcpy(&version, data.data() + sizeof kMagic, sizeof version);
  if (version != kFormatVersion) {
    throw SnapshotError("snapshot: unsupported format version " + std::to_string(version));
  }
  std::uint64_t stored;
  std::memcpy(&stored, data.data() + sizeof kMagic + sizeof version, sizeof stored);
  const std::string_view body(data.data() + header, data.size() - header);
  const std::uint64_t h = fnv1a64(body);
  if (h != stored) {
    throw SnapshotError("snapshot: content hash mismatch (stored " + hex64(stored) +
                        ", computed " + hex64(h) + ")");
  }
  Snapshot snap = parse_payload(body);
  snap.hash = h;
  return snap;
}

}  // namespace beamopt
