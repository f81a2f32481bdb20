#ifndef SYNTHVQA_SCENE_HPP
#define SYNTHVQA_SCENE_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace synthvqa {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Size classes

enum class SizeClass : int { Tiny = 0, Small = 1, MidRange = 2, Large = 3 };

// Volume thresholds in cubic meters; class boundaries are upper-exclusive.
struct SizeThresholds {
  double tiny = 0.001;
  double small = 0.03;
  double mid_range = 0.5;
};

SizeClass assign_size_class(double volume, const SizeThresholds& t = {});
const char* to_string(SizeClass c);
std::optional<SizeClass> size_class_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Asset library

struct ObjectAsset {
  std::string asset_id;
  std::string category;  // noun used in questions
  std::string default_color;
  std::string default_material;
  Eigen::Vector3d extents;  // x, y, z lengths in meters, y up
  double volume = 0.0;      // product of extents
  SizeClass size_class = SizeClass::Tiny;
};

struct MaterialDef {
  std::string name;
  std::string color;
};

struct Backdrop {
  std::string id;
  Eigen::Vector3d size;  // room extents in meters; floor at y = 0
};

struct AssetLibrary {
  std::vector<ObjectAsset> assets;
  std::vector<MaterialDef> materials;
  std::vector<Backdrop> backdrops;
  SizeThresholds thresholds;

  const ObjectAsset* find_asset(const std::string& asset_id) const;
  const ObjectAsset* find_category(const std::string& category) const;
  // Distinct color names in order of first appearance in the materials list.
  std::vector<std::string> colors() const;
  std::vector<std::string> material_names() const;
  std::vector<std::string> categories() const;
  std::vector<const ObjectAsset*> assets_in(const std::vector<SizeClass>& classes) const;

  void validate() const;
};

AssetLibrary load_asset_library(const std::string& path);

// ---------------------------------------------------------------------------
// Relations

enum class Relation : int { Left = 0, Right, OnTopOf, Under, InFrontOf, Behind };

Relation inverse(Relation r);
const char* to_string(Relation r);
std::optional<Relation> relation_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Scene graphs

struct GraphNode {
  std::string node_id;
  std::vector<SizeClass> size_classes;  // admissible classes for the asset
  int count = 1;                        // in [1, 20]
  std::string color;     // empty: keep the chosen asset's default
  std::string material;  // empty: keep the chosen asset's default
};

struct RelationTriplet {
  std::string subject;
  Relation position;
  std::string object;
  bool operator==(const RelationTriplet&) const = default;
};

struct SceneGraph {
  std::string template_id;
  std::uint64_t seed = 0;
  std::vector<GraphNode> nodes;
  std::vector<RelationTriplet> relations;

  const GraphNode* find_node(const std::string& node_id) const;
  void validate() const;
};

std::string serialize(const SceneGraph& g);
SceneGraph parse_scene_graph(const std::string& text);

// ---------------------------------------------------------------------------
// Templates

struct TemplateNode {
  std::string node_id;
  std::vector<SizeClass> size_classes;
  int count = -1;  // -1: sample uniformly from [1, 20]
};

struct SceneTemplate {
  std::string id;
  bool keep_defaults = false;
  std::vector<TemplateNode> nodes;
  std::vector<RelationTriplet> relations;
};

std::vector<SceneTemplate> load_templates(const std::string& path);
std::vector<SceneTemplate> parse_templates(const std::string& text);

SceneGraph sample_scene_graph(const AssetLibrary& lib,
                              const std::vector<SceneTemplate>& templates,
                              const std::string& template_id, std::uint64_t seed);

}  // namespace synthvqa

#endif
