#pragma once

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace beamopt {

enum class SemanticClass : std::uint8_t {
  kRoad = 0,
  kBuilding = 1,
  kVegetation = 2,
  kDynamic = 3,
  kOther = 4,
};

inline constexpr int kNumClasses = 5;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "road", "building", "vegetation", "dynamic", "other"};

inline std::string_view class_name(SemanticClass c) {
  return kClassNames[static_cast<int>(c)];
}

struct LabeledPoint {
  Eigen::Vector3d xyz;
  SemanticClass label = SemanticClass::kOther;
  int beam_id = 0;
};

/// Points are expressed in the sensor frame; `pose` maps sensor to world.
struct LabeledPointCloud {
  std::vector<LabeledPoint> points;
  Eigen::Isometry3d pose = Eigen::Isometry3d::Identity();

  size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

}  // namespace beamopt
