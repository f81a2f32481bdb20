#ifndef SYNTHVQA_PIPELINE_HPP
#define SYNTHVQA_PIPELINE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "synthvqa/compositor.hpp"
#include "synthvqa/geometry.hpp"
#include "synthvqa/scene.hpp"

namespace synthvqa {

struct GenerationExhaustedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PlacementConfig {
  double r_min = 2.5;
  double r_max = 4.5;
  double theta_spread = 30.0;  // degrees around theta_c
  double min_separation = 0.05;  // extra gap between footprints, meters
  int placement_tries = 80;      // rejection attempts per instance
  int max_retries = 30;          // whole-scene regenerations on verify failure
  RenderConfig render;
  VerificationConfig verify;
};

struct GeneratedScene {
  SceneGraph graph;
  PlacedScene scene;
  FrameMasks masks;
  VerificationReport report;
  int attempts = 1;
};

// Instantiates a sampled scene graph into settled placements: one asset per
// node, stacked nodes dropped onto their supports, the rest spread in front
// of the camera. Throws FallsOutsideError when a placement cannot be found.
PlacedScene place_scene(const AssetLibrary& lib, const SceneGraph& graph,
                        const std::string& scene_id, std::uint64_t seed,
                        const PlacementConfig& cfg = {});

// Full loop: sample graph, place, render, verify; regenerates with a derived
// seed on verification failure, up to cfg.max_retries. Throws
// GenerationExhaustedError when no attempt passes.
GeneratedScene generate_scene(const AssetLibrary& lib,
                              const std::vector<SceneTemplate>& templates,
                              const std::string& template_id, const std::string& scene_id,
                              std::uint64_t seed, const PlacementConfig& cfg = {});

}  // namespace synthvqa

#endif
