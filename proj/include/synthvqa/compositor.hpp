#ifndef SYNTHVQA_COMPOSITOR_HPP
#define SYNTHVQA_COMPOSITOR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "synthvqa/geometry.hpp"
#include "synthvqa/scene.hpp"

namespace synthvqa {

struct PlacedObject {
  int instance_id = 0;  // unique, dense from 1
  std::string asset_id;
  std::string category;
  std::string color;
  std::string material;
  std::string node_id;      // scene-graph node this instance came from
  Position position;        // settled center, y-up
  Eigen::Vector3d extents;  // box side lengths
};

struct PlacedScene {
  std::string scene_id;
  std::string backdrop_id;
  CameraConfig camera;
  std::vector<PlacedObject> objects;

  void validate() const;
};

std::string serialize(const PlacedScene& s);
PlacedScene parse_placed_scene(const std::string& text);

struct RenderConfig {
  int width = 256;
  int height = 256;
  double vfov_deg = 60.0;
};

using MaskGrid = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FrameMasks {
  int width = 0, height = 0;
  MaskGrid id_mask;        // instance_id or 0
  MaskGrid category_mask;  // 1-based index into category_names, or 0
  std::vector<std::string> category_names;
  std::map<int, double> visible_fraction;     // instance_id -> visible / unoccluded pixels
  std::map<int, int> unoccluded_pixels;       // solo-render coverage per instance
  std::vector<int> excluded_instances;        // entirely behind the camera

  // Per-instance unoccluded footprint as a packed bit grid (row-major),
  // filled by render_masks and reused by verify_scene for pairwise IoU.
  std::map<int, std::vector<std::uint64_t>> solo_coverage;

  int visible_pixels(int instance_id) const;
};

// Pinhole projection of every object's box; nearest hit wins per pixel.
FrameMasks render_masks(const PlacedScene& scene, const RenderConfig& cfg = {});

struct VerificationConfig {
  double min_visible = 0.4;
  double max_overlap = 0.3;
};

struct VerificationReport {
  std::map<std::string, int> visible_counts;            // category -> count
  std::map<int, double> visible_fraction;               // instance_id -> fraction
  std::map<std::pair<int, int>, double> pairwise_iou;   // (lo, hi) instance ids
  bool pass = false;
};

VerificationReport verify_scene(const FrameMasks& masks, const PlacedScene& scene,
                                const VerificationConfig& cfg = {});

// PGM-style text grid: magic, width height, max value, row-major values.
std::string serialize_mask(const MaskGrid& mask);
MaskGrid parse_mask(const std::string& text);

std::string serialize_mask_sidecar(const FrameMasks& masks);

}  // namespace synthvqa

#endif
