#ifndef SYNTHVQA_GEOMETRY_HPP
#define SYNTHVQA_GEOMETRY_HPP

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

#include "synthvqa/scene.hpp"

namespace synthvqa {

// World positions are y-up (height on y). pairwise_geometry keeps the
// original axis labels of the distance/plunge/azimuth equations, where z is
// vertical; callers working in y-up coordinates swap axes via to_geo_frame.

using Position = Eigen::Vector3d;

struct DegeneratePairError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FallsOutsideError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryTriple {
  double d = 0.0;  // meters, >= 0
  double p = 0.0;  // plunge, degrees in [-90, 90]
  double a = 0.0;  // azimuth, degrees in [0, 360), clockwise from North
};

// Point with the geometry equations' axis labels: z vertical, x/y horizontal.
inline Position to_geo_frame(const Position& y_up) { return {y_up.x(), y_up.z(), y_up.y()}; }

// d = |p2 - p1|; p = deg(asin(dz/d)); a = full-quadrant deg(atan(dy/dx)),
// normalized to [0, 360). Throws DegeneratePairError when p1 == p2.
GeometryTriple pairwise_geometry(const Position& p1, const Position& p2);

struct CameraConfig {
  double x_c = 0.0, y_c = 0.0, z_c = 0.0;  // meters
  double theta_c = 0.0;                    // degrees, look direction in the ground plane
  double y_0 = 0.0;                        // floor height

  Position position() const { return {x_c, y_c, z_c}; }
};

struct PlacementRequest {
  double r = 1.0;     // camera distance, > 0
  double theta = 0.0; // object direction, degrees; typically within 30 of theta_c
  double h = 0.0;     // drop height estimate, >= 0
};

// x = x_c + r cos(theta); y = y_0 + h; z = z_c + r sin(theta).
Position place_object(const CameraConfig& camera, const PlacementRequest& req);

// Horizontal support surface (table top, floor) with a rectangular footprint.
struct SupportSurface {
  double top;                         // y of the supporting plane
  double min_x, max_x, min_z, max_z;  // footprint; floor uses +/- infinity

  static SupportSurface floor(double y_0);
  bool contains(double x, double z) const {
    return x >= min_x && x <= max_x && z >= min_z && z <= max_z;
  }
};

// Returns the settled center position: y adjusted so the bottom face rests on
// the highest support under the object's (x, z) center; x, z unchanged.
// Throws FallsOutsideError when no support contains the center.
Position settle(const Position& center, const Eigen::Vector3d& extents,
                const std::vector<SupportSurface>& supports);

struct ClusterConfig {
  double distance_threshold = 1.5;  // meters, single linkage
  double plunge_cutoff = 45.0;      // degrees; |p| >= cutoff -> on-top-of/under
};

struct IdentifiedPosition {
  std::string id;
  Position position;  // y-up world frame
};

struct IdRelation {
  std::string subject;
  Relation position;
  std::string object;
  bool operator==(const IdRelation&) const = default;
};

// Single-linkage clusters under the threshold; every ordered pair inside a
// cluster gets a relation from plunge (vertical) or the camera-frame
// horizontal offset (left/right as seen from the camera).
std::vector<IdRelation> cluster_and_relate(const std::vector<IdentifiedPosition>& objects,
                                           const CameraConfig& camera,
                                           const ClusterConfig& cfg = {});

// Connected components of the pairwise distance graph. Exposed for tests.
std::vector<std::vector<int>> single_linkage_clusters(
    const std::vector<IdentifiedPosition>& objects, double threshold);

}  // namespace synthvqa

#endif
