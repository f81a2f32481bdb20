#include "synthvqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "synthvqa/rng.hpp"

namespace synthvqa {

namespace {

// Place nodes so that positional references exist before their subjects:
// OnTopOf/relative subjects come after the node they attach to.
std::vector<int> placement_order(const SceneGraph& g) {
  const int n = static_cast<int>(g.nodes.size());
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[g.nodes[i].node_id] = i;

  std::vector<std::vector<int>> deps(n);  // deps[i] must precede i
  for (const auto& r : g.relations) {
    const int s = index.at(r.subject), o = index.at(r.object);
    if (r.position == Relation::Under)
      deps[o].push_back(s);  // (A under B): A first, B stacks on A
    else
      deps[s].push_back(o);
  }

  std::vector<int> order;
  std::vector<bool> done(n, false);
  // Stable topological sweep; cyclic leftovers keep template order.
  for (int pass = 0; pass < n; ++pass) {
    for (int i = 0; i < n; ++i) {
      if (done[i]) continue;
      bool ready = true;
      for (int d : deps[i]) ready = ready && done[d];
      if (ready) {
        order.push_back(i);
        done[i] = true;
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!done[i]) order.push_back(i);
  return order;
}

double footprint_radius(const Eigen::Vector3d& extents) {
  return std::max(extents.x(), extents.z()) / 2.0;
}

}  // namespace

PlacedScene place_scene(const AssetLibrary& lib, const SceneGraph& graph,
                        const std::string& scene_id, std::uint64_t seed,
                        const PlacementConfig& cfg) {
  Rng rng = Rng(seed).split("place").split(scene_id);
  PlacedScene out;
  out.scene_id = scene_id;

  if (lib.backdrops.empty()) throw ValidationError("library has no backdrops");
  const Backdrop& bd = lib.backdrops[rng.uniform_u64(lib.backdrops.size())];
  out.backdrop_id = bd.id;
  out.camera.x_c = rng.uniform_double(-1.0, 1.0);
  out.camera.z_c = rng.uniform_double(-1.0, 1.0);
  out.camera.y_c = rng.uniform_double(1.2, 2.0);
  out.camera.theta_c = rng.uniform_double(0.0, 360.0);
  out.camera.y_0 = 0.0;

  std::vector<SupportSurface> supports = {SupportSurface::floor(out.camera.y_0)};
  std::map<int, int> support_of;  // instance index -> index of its support instance (-1 floor)

  // Chosen asset per node.
  std::map<std::string, const ObjectAsset*> asset_of;
  for (const auto& node : graph.nodes) {
    const auto pool = lib.assets_in(node.size_classes);
    if (pool.empty())
      throw ValidationError("no library asset matches size classes of node '" + node.node_id +
                            "'");
    asset_of[node.node_id] = pool[rng.uniform_u64(pool.size())];
  }

  // First relation that pins a node to a reference, if any.
  auto anchor_of = [&](const std::string& node_id) -> const RelationTriplet* {
    for (const auto& r : graph.relations) {
      if (r.subject == node_id && r.position != Relation::Under) return &r;
      if (r.object == node_id && r.position == Relation::Under) return &r;
    }
    return nullptr;
  };

  std::map<std::string, std::vector<int>> instances_of;  // node -> object indices

  auto separated = [&](const Position& pos, const Eigen::Vector3d& ext, int support_idx) {
    for (int i = 0; i < static_cast<int>(out.objects.size()); ++i) {
      if (i == support_idx) continue;
      const auto& other = out.objects[i];
      const double dx = pos.x() - other.position.x();
      const double dz = pos.z() - other.position.z();
      const double need =
          footprint_radius(ext) + footprint_radius(other.extents) + cfg.min_separation;
      if (dx * dx + dz * dz < need * need) return false;
    }
    return true;
  };

  const double trad = out.camera.theta_c * std::numbers::pi / 180.0;
  const Eigen::Vector3d right(-std::sin(trad), 0.0, std::cos(trad));
  const Eigen::Vector3d forward(std::cos(trad), 0.0, std::sin(trad));

  const auto order = placement_order(graph);
  for (int ni : order) {
    const GraphNode& node = graph.nodes[ni];
    const ObjectAsset& asset = *asset_of.at(node.node_id);
    const RelationTriplet* anchor = anchor_of(node.node_id);

    for (int k = 0; k < node.count; ++k) {
      PlacedObject obj;
      obj.asset_id = asset.asset_id;
      obj.category = asset.category;
      obj.color = node.color.empty() ? asset.default_color : node.color;
      obj.material = node.material.empty() ? asset.default_material : node.material;
      obj.node_id = node.node_id;
      obj.extents = asset.extents;

      bool placed = false;
      for (int attempt = 0; attempt < cfg.placement_tries && !placed; ++attempt) {
        Position candidate;
        int support_idx = -1;
        if (anchor && (anchor->position == Relation::OnTopOf ||
                       anchor->position == Relation::Under)) {
          // Stack onto a random instance of the reference node.
          const std::string& ref = anchor->position == Relation::OnTopOf
                                       ? anchor->object
                                       : anchor->subject;
          const auto& refs = instances_of[ref];
          if (refs.empty()) break;  // reference failed to place
          support_idx = refs[rng.uniform_u64(refs.size())];
          const auto& sup = out.objects[support_idx];
          const double mx = sup.extents.x() / 2.0 - obj.extents.x() / 2.0;
          const double mz = sup.extents.z() / 2.0 - obj.extents.z() / 2.0;
          if (mx < 0.0 || mz < 0.0) break;  // does not fit on the support
          candidate = {sup.position.x() + rng.uniform_double(-mx, mx), 0.0,
                       sup.position.z() + rng.uniform_double(-mz, mz)};
        } else if (anchor) {
          const auto& refs = instances_of[anchor->object];
          if (refs.empty()) break;
          const auto& ref = out.objects[refs[rng.uniform_u64(refs.size())]];
          const double gap = footprint_radius(obj.extents) + footprint_radius(ref.extents) +
                             rng.uniform_double(0.1, 0.6);
          Eigen::Vector3d dir;
          switch (anchor->position) {
            case Relation::Left: dir = -right; break;
            case Relation::Right: dir = right; break;
            case Relation::InFrontOf: dir = -forward; break;
            default: dir = forward; break;
          }
          candidate = ref.position + dir * gap;
          candidate.y() = 0.0;
        } else {
          PlacementRequest req;
          req.r = rng.uniform_double(cfg.r_min, cfg.r_max);
          req.theta = out.camera.theta_c + rng.uniform_double(-cfg.theta_spread, cfg.theta_spread);
          req.h = obj.extents.y();
          candidate = place_object(out.camera, req);
        }
        try {
          candidate = settle(candidate, obj.extents, supports);
        } catch (const FallsOutsideError&) {
          continue;
        }
        if (!separated(candidate, obj.extents, support_idx)) continue;
        obj.position = candidate;
        placed = true;
        if (support_idx >= 0) support_of[static_cast<int>(out.objects.size())] = support_idx;
      }
      if (!placed)
        throw FallsOutsideError("could not place instance of node '" + node.node_id + "'");

      obj.instance_id = static_cast<int>(out.objects.size()) + 1;
      instances_of[node.node_id].push_back(static_cast<int>(out.objects.size()));
      supports.push_back({obj.position.y() + obj.extents.y() / 2.0,
                          obj.position.x() - obj.extents.x() / 2.0,
                          obj.position.x() + obj.extents.x() / 2.0,
                          obj.position.z() - obj.extents.z() / 2.0,
                          obj.position.z() + obj.extents.z() / 2.0});
      out.objects.push_back(std::move(obj));
    }
  }

  out.validate();
  return out;
}

GeneratedScene generate_scene(const AssetLibrary& lib,
                              const std::vector<SceneTemplate>& templates,
                              const std::string& template_id, const std::string& scene_id,
                              std::uint64_t seed, const PlacementConfig& cfg) {
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    const std::uint64_t attempt_seed = hash_combine(seed, static_cast<std::uint64_t>(attempt));
    GeneratedScene g;
    g.graph = sample_scene_graph(lib, templates, template_id, attempt_seed);
    try {
      g.scene = place_scene(lib, g.graph, scene_id, attempt_seed, cfg);
    } catch (const FallsOutsideError&) {
      continue;
    }
    g.masks = render_masks(g.scene, cfg.render);
    g.report = verify_scene(g.masks, g.scene, cfg.verify);
    g.attempts = attempt + 1;
    if (g.report.pass) return g;
  }
  throw GenerationExhaustedError("scene '" + scene_id + "': no passing scene in " +
                                 std::to_string(cfg.max_retries) + " attempts");
}

}  // namespace synthvqa
