#include "beamopt/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace beamopt {

BeamStats beam_stats(std::span<const LabeledPointCloud> scans, int beam_id) {
  if (scans.empty()) throw std::invalid_argument("beam_stats: no scans");
  BeamStats out;
  out.scans = static_cast<int>(scans.size());
  int populated = 0;
  std::vector<double> horiz;
  for (const auto& scan : scans) {
    horiz.clear();
    double phi_sum = 0;
    for (const auto& p : scan.points) {
      if (p.beam_id != beam_id) continue;
      out.sem_pts[static_cast<int>(p.label)] += 1.0;
      const double h = std::hypot(p.xyz.x(), p.xyz.y());
      horiz.push_back(h);
      // arcsin(z / |(x, y)|); steep points would leave the domain.
      const double ratio =
          h > 0 ? p.xyz.z() / h : (p.xyz.z() > 0 ? 1.0 : (p.xyz.z() < 0 ? -1.0 : 0.0));
      phi_sum += std::asin(std::clamp(ratio, -1.0, 1.0));
    }
    const double n = static_cast<double>(horiz.size());
    out.pts += n;
    if (horiz.empty()) continue;
    ++populated;
    double mean = 0;
    for (double h : horiz) mean += h;
    mean /= n;
    double var = 0;
    for (double h : horiz) var += (h - mean) * (h - mean);
    out.dist += mean;
    out.std_dist += std::sqrt(var / n);
    out.phi += phi_sum / n;
  }
  if (populated == 0) {
    throw std::invalid_argument("beam_stats: beam " + std::to_string(beam_id) +
                                " has no points in any scan");
  }
  const double m = static_cast<double>(scans.size());
  out.pts /= m;
  for (double& c : out.sem_pts) c /= m;
  out.dist /= populated;
  out.std_dist /= populated;
  out.phi /= populated;
  return out;
}

double pairwise_phi_diff(const BeamStats& lower, const BeamStats& upper) {
  return upper.phi - lower.phi;
}

const BeamStats& BeamStatsTable::at(int beam_id) const {
  auto it = rows_.find(beam_id);
  if (it == rows_.end()) {
    throw std::out_of_range("no beam stats for beam " + std::to_string(beam_id));
  }
  return it->second;
}

void BeamStatsTable::write_csv(std::ostream& os) const {
  os << "beam_id,pts";
  for (auto name : kClassNames) os << ",pts_" << name;
  os << ",dist,std_dist,phi,scans\n";
  const auto old_precision = os.precision(17);
  for (const auto& [id, s] : rows_) {
    os << id << ',' << s.pts;
    for (double c : s.sem_pts) os << ',' << c;
    os << ',' << s.dist << ',' << s.std_dist << ',' << s.phi << ',' << s.scans << '\n';
  }
  os.precision(old_precision);
}

BeamStatsTable read_stats_csv(std::istream& is) {
  std::string line;
  bool header = false;
  std::map<int, BeamStats> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("beam_id,", 0) != 0) throw std::invalid_argument("stats csv: missing header");
      header = true;
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 2 + kNumClasses + 4) {
      throw std::invalid_argument("stats csv: expected " + std::to_string(6 + kNumClasses) +
                                  " columns in '" + line + "'");
    }
    try {
      BeamStats s;
      size_t c = 1;
      s.pts = std::stod(cells[c++]);
      for (double& v : s.sem_pts) v = std::stod(cells[c++]);
      s.dist = std::stod(cells[c++]);
      s.std_dist = std::stod(cells[c++]);
      s.phi = std::stod(cells[c++]);
      s.scans = std::stoi(cells[c++]);
      rows.emplace(std::stoi(cells[0]), s);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("stats csv: bad number in '" + line + "'");
    }
  }
  if (rows.empty()) throw std::invalid_argument("stats csv: no rows");
  return BeamStatsTable(std::move(rows));
}

BeamStatsTable compute_stats_table(std::span<const LabeledPointCloud> scans,
                                   int num_beams) {
  std::map<int, BeamStats> rows;
  for (int id = 1; id <= num_beams; ++id) rows.emplace(id, beam_stats(scans, id));
  return BeamStatsTable(std::move(rows));
}

std::vector<FeatureSlot> feature_layout(int k) {
  std::vector<FeatureSlot> layout;
  for (int i = 0; i < k; ++i) {
    layout.push_back({i, "pts"});
    for (auto name : kClassNames) layout.push_back({i, "pts_" + std::string(name)});
    layout.push_back({i, "dist"});
    layout.push_back({i, "std_dist"});
    layout.push_back({i, "phi"});
  }
  for (int i = 0; i + 1 < k; ++i) layout.push_back({i, "phi_diff"});
  return layout;
}

FeatureVector feature_vector(const BeamConfig& s, const BeamStatsTable& table) {
  const int k = s.size();
  FeatureVector f;
  f.reserve(static_cast<size_t>(feature_dim(k)));
  for (int i = 0; i < k; ++i) {
    const BeamStats& b = table.at(s[i]);
    f.push_back(b.pts);
    f.insert(f.end(), b.sem_pts.begin(), b.sem_pts.end());
    f.push_back(b.dist);
    f.push_back(b.std_dist);
    f.push_back(b.phi);
  }
  for (int i = 0; i + 1 < k; ++i) {
    f.push_back(pairwise_phi_diff(table.at(s[i]), table.at(s[i + 1])));
  }
  return f;
}

FeatureVector beam_id_encoding(const BeamConfig& s) {
  return FeatureVector(s.ids().begin(), s.ids().end());
}

FeatureVector NormStats::apply(const FeatureVector& x) const {
  if (x.size() != mean.size()) {
    throw std::invalid_argument("NormStats::apply: dimension mismatch");
  }
  FeatureVector out(x.size());
  for (size_t d = 0; d < x.size(); ++d) {
    out[d] = stddev[d] < kDegenerateStddev ? 0.0 : (x[d] - mean[d]) / stddev[d];
  }
  return out;
}

std::pair<std::vector<FeatureVector>, NormStats> normalize(
    const std::vector<FeatureVector>& batch) {
  if (batch.empty()) throw std::invalid_argument("normalize: empty batch");
  const size_t dim = batch.front().size();
  NormStats stats;
  stats.mean.assign(dim, 0.0);
  stats.stddev.assign(dim, 0.0);
  for (const auto& x : batch) {
    if (x.size() != dim) throw std::invalid_argument("normalize: ragged batch");
    for (size_t d = 0; d < dim; ++d) stats.mean[d] += x[d];
  }
  const double n = static_cast<double>(batch.size());
  for (double& m : stats.mean) m /= n;
  for (const auto& x : batch) {
    for (size_t d = 0; d < dim; ++d) {
      stats.stddev[d] += (x[d] - stats.mean[d]) * (x[d] - stats.mean[d]);
    }
  }
  for (double& s : stats.stddev) s = std::sqrt(s / n);
  std::vector<FeatureVector> out;
  out.reserve(batch.size());
  for (const auto& x : batch) out.push_back(stats.apply(x));
  return {std::move(out), std::move(stats)};
}

}  // namespace beamopt
