#include "synthvqa/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace synthvqa {

namespace {
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kRadPerDeg = std::numbers::pi / 180.0;
}  // namespace

GeometryTriple pairwise_geometry(const Position& p1, const Position& p2) {
  const Eigen::Vector3d delta = p2 - p1;
  const double d = delta.norm();
  if (d == 0.0)
    throw DegeneratePairError("pairwise_geometry: identical points, plunge/azimuth undefined");

  GeometryTriple g;
  g.d = d;
  g.p = kDegPerRad * std::asin(std::clamp(delta.z() / d, -1.0, 1.0));
  double a = kDegPerRad * std::atan2(delta.y(), delta.x());
  if (a < 0.0) a += 360.0;
  if (a >= 360.0) a -= 360.0;
  g.a = a;
  return g;
}

Position place_object(const CameraConfig& camera, const PlacementRequest& req) {
  if (!(req.r > 0.0)) throw std::domain_error("place_object: r must be positive");
  const double t = req.theta * kRadPerDeg;
  return {camera.x_c + req.r * std::cos(t), camera.y_0 + req.h,
          camera.z_c + req.r * std::sin(t)};
}

SupportSurface SupportSurface::floor(double y_0) {
  const double inf = std::numeric_limits<double>::infinity();
  return {y_0, -inf, inf, -inf, inf};
}

Position settle(const Position& center, const Eigen::Vector3d& extents,
                const std::vector<SupportSurface>& supports) {
  const double x = center.x(), z = center.z();
  double best = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (const auto& s : supports) {
    if (!s.contains(x, z)) continue;
    if (s.top > best) {
      best = s.top;
      found = true;
    }
  }
  if (!found) throw FallsOutsideError("settle: no support under object center");
  return {x, best + extents.y() / 2.0, z};
}

std::vector<std::vector<int>> single_linkage_clusters(
    const std::vector<IdentifiedPosition>& objects, double threshold) {
  const int n = static_cast<int>(objects.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((objects[i].position - objects[j].position).norm() <= threshold) {
        const int a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<std::vector<int>> clusters(n);
  for (int i = 0; i < n; ++i) clusters[find(i)].push_back(i);
  std::erase_if(clusters, [](const auto& c) { return c.empty(); });
  return clusters;
}

std::vector<IdRelation> cluster_and_relate(const std::vector<IdentifiedPosition>& objects,
                                           const CameraConfig& camera, const ClusterConfig& cfg) {
  const double t = camera.theta_c * kRadPerDeg;
  const Eigen::Vector3d forward(std::cos(t), 0.0, std::sin(t));
  const Eigen::Vector3d right(-std::sin(t), 0.0, std::cos(t));

  std::vector<IdRelation> out;
  for (const auto& cluster : single_linkage_clusters(objects, cfg.distance_threshold)) {
    for (int i : cluster) {
      for (int j : cluster) {
        if (i == j) continue;
        const auto& a = objects[i];
        const auto& b = objects[j];
        const auto geo = pairwise_geometry(to_geo_frame(a.position), to_geo_frame(b.position));
        Relation rel;
        if (geo.p >= cfg.plunge_cutoff) {
          rel = Relation::Under;  // b sits above a
        } else if (geo.p <= -cfg.plunge_cutoff) {
          rel = Relation::OnTopOf;
        } else {
          const double dr = (a.position - b.position).dot(right);
          if (dr < 0.0) {
            rel = Relation::Left;
          } else if (dr > 0.0) {
            rel = Relation::Right;
          } else {
            const double df = (a.position - b.position).dot(forward);
            if (df == 0.0) continue;  // coincident in camera frame
            rel = df > 0.0 ? Relation::Behind : Relation::InFrontOf;
          }
        }
        out.push_back({a.id, rel, b.id});
      }
    }
  }
  return out;
}

}  // namespace synthvqa
