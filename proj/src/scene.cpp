#include "synthvqa/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "synthvqa/rng.hpp"
#include "synthvqa/text_format.hpp"

namespace synthvqa {

SizeClass assign_size_class(double volume, const SizeThresholds& t) {
  if (!(volume > 0.0)) throw std::domain_error("assign_size_class: volume must be positive");
  if (volume < t.tiny) return SizeClass::Tiny;
  if (volume < t.small) return SizeClass::Small;
  if (volume < t.mid_range) return SizeClass::MidRange;
  return SizeClass::Large;
}

const char* to_string(SizeClass c) {
  switch (c) {
    case SizeClass::Tiny: return "tiny";
    case SizeClass::Small: return "small";
    case SizeClass::MidRange: return "mid-range";
    case SizeClass::Large: return "large";
  }
  return "?";
}

std::optional<SizeClass> size_class_from_string(const std::string& s) {
  if (s == "tiny") return SizeClass::Tiny;
  if (s == "small") return SizeClass::Small;
  if (s == "mid-range") return SizeClass::MidRange;
  if (s == "large") return SizeClass::Large;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

const ObjectAsset* AssetLibrary::find_asset(const std::string& asset_id) const {
  for (const auto& a : assets)
    if (a.asset_id == asset_id) return &a;
  return nullptr;
}

const ObjectAsset* AssetLibrary::find_category(const std::string& category) const {
  for (const auto& a : assets)
    if (a.category == category) return &a;
  return nullptr;
}

std::vector<std::string> AssetLibrary::colors() const {
  std::vector<std::string> out;
  for (const auto& m : materials)
    if (std::find(out.begin(), out.end(), m.color) == out.end()) out.push_back(m.color);
  return out;
}

std::vector<std::string> AssetLibrary::material_names() const {
  std::vector<std::string> out;
  out.reserve(materials.size());
  for (const auto& m : materials) out.push_back(m.name);
  return out;
}

std::vector<std::string> AssetLibrary::categories() const {
  std::vector<std::string> out;
  out.reserve(assets.size());
  for (const auto& a : assets) out.push_back(a.category);
  return out;
}

std::vector<const ObjectAsset*> AssetLibrary::assets_in(
    const std::vector<SizeClass>& classes) const {
  std::vector<const ObjectAsset*> out;
  for (const auto& a : assets)
    if (std::find(classes.begin(), classes.end(), a.size_class) != classes.end())
      out.push_back(&a);
  return out;
}

void AssetLibrary::validate() const {
  std::set<std::string> ids, cats, mats;
  for (const auto& a : assets) {
    if (a.asset_id.empty()) throw ValidationError("asset with empty asset_id");
    if (a.category.empty()) throw ValidationError("asset '" + a.asset_id + "' has empty category");
    if (!ids.insert(a.asset_id).second)
      throw ValidationError("duplicate asset_id '" + a.asset_id + "'");
    if (!cats.insert(a.category).second)
      throw ValidationError("duplicate category '" + a.category + "'");
    if (!(a.extents.array() > 0).all())
      throw ValidationError("asset '" + a.asset_id + "' has non-positive extents");
    const double v = a.extents.prod();
    if (std::abs(a.volume - v) > 1e-9 * std::max(1.0, std::abs(v)))
      throw ValidationError("asset '" + a.asset_id + "' volume does not equal extents product");
  }
  for (const auto& m : materials) {
    if (m.name.empty() || m.color.empty())
      throw ValidationError("material with empty name or color");
    if (!mats.insert(m.name).second)
      throw ValidationError("duplicate material '" + m.name + "'");
  }
  std::set<std::string> bids;
  for (const auto& b : backdrops)
    if (!bids.insert(b.id).second) throw ValidationError("duplicate backdrop '" + b.id + "'");
}

namespace {

Eigen::Vector3d parse_vec3(const Section& s, const std::string& key) {
  const auto parts = s.get_list(key);
  if (parts.size() != 3)
    throw FormatError("key '" + key + "' needs 3 values", s.line);
  return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
}

}  // namespace

AssetLibrary load_asset_library(const std::string& path) {
  AssetLibrary lib;
  for (const auto& sec : load_sections(path)) {
    if (sec.name == "library") {
      if (sec.has("tiny_below")) lib.thresholds.tiny = sec.get_double("tiny_below");
      if (sec.has("small_below")) lib.thresholds.small = sec.get_double("small_below");
      if (sec.has("mid_range_below")) lib.thresholds.mid_range = sec.get_double("mid_range_below");
    } else if (sec.name == "asset") {
      ObjectAsset a;
      a.asset_id = sec.get("id");
      a.category = sec.get("category");
      a.default_color = sec.get("color");
      a.default_material = sec.get("material");
      a.extents = parse_vec3(sec, "extents");
      a.volume = a.extents.prod();
      a.size_class = assign_size_class(a.volume, lib.thresholds);
      lib.assets.push_back(std::move(a));
    } else if (sec.name == "material") {
      lib.materials.push_back({sec.get("name"), sec.get("color")});
    } else if (sec.name == "backdrop") {
      lib.backdrops.push_back({sec.get("id"), parse_vec3(sec, "size")});
    } else {
      throw FormatError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  lib.validate();
  return lib;
}

// ---------------------------------------------------------------------------

Relation inverse(Relation r) {
  switch (r) {
    case Relation::Left: return Relation::Right;
    case Relation::Right: return Relation::Left;
    case Relation::OnTopOf: return Relation::Under;
    case Relation::Under: return Relation::OnTopOf;
    case Relation::InFrontOf: return Relation::Behind;
    case Relation::Behind: return Relation::InFrontOf;
  }
  return r;
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Left: return "left";
    case Relation::Right: return "right";
    case Relation::OnTopOf: return "on-top-of";
    case Relation::Under: return "under";
    case Relation::InFrontOf: return "in-front-of";
    case Relation::Behind: return "behind";
  }
  return "?";
}

std::optional<Relation> relation_from_string(const std::string& s) {
  for (Relation r : {Relation::Left, Relation::Right, Relation::OnTopOf, Relation::Under,
                     Relation::InFrontOf, Relation::Behind})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

// ---------------------------------------------------------------------------

const GraphNode* SceneGraph::find_node(const std::string& node_id) const {
  for (const auto& n : nodes)
    if (n.node_id == node_id) return &n;
  return nullptr;
}

void SceneGraph::validate() const {
  std::set<std::string> ids;
  for (const auto& n : nodes) {
    if (!ids.insert(n.node_id).second)
      throw ValidationError("duplicate node_id '" + n.node_id + "'");
    if (n.count < 1 || n.count > 20)
      throw ValidationError("node '" + n.node_id + "' count out of [1, 20]");
    if (n.size_classes.empty())
      throw ValidationError("node '" + n.node_id + "' has no size classes");
  }
  for (const auto& r : relations) {
    if (!ids.count(r.subject))
      throw ValidationError("relation references unknown node '" + r.subject + "'");
    if (!ids.count(r.object))
      throw ValidationError("relation references unknown node '" + r.object + "'");
  }
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += v[i];
  }
  return out;
}

std::vector<SizeClass> parse_size_classes(const Section& sec, const std::string& key) {
  std::vector<SizeClass> out;
  for (const auto& tok : sec.get_list(key)) {
    const auto c = size_class_from_string(tok);
    if (!c) throw FormatError("unknown size class '" + tok + "'", sec.line);
    out.push_back(*c);
  }
  return out;
}

RelationTriplet parse_relation(const Section& sec) {
  const auto rel = relation_from_string(sec.get("position"));
  if (!rel) throw FormatError("unknown relation '" + sec.get("position") + "'", sec.line);
  return {sec.get("subject"), *rel, sec.get("object")};
}

std::string size_classes_to_string(const std::vector<SizeClass>& cs) {
  std::vector<std::string> toks;
  for (auto c : cs) toks.emplace_back(to_string(c));
  return join(toks);
}

}  // namespace

std::string serialize(const SceneGraph& g) {
  std::ostringstream os;
  os << "[scenegraph]\n";
  os << "template = " << g.template_id << "\n";
  os << "seed = " << g.seed << "\n";
  for (const auto& n : g.nodes) {
    os << "[node]\n";
    os << "id = " << n.node_id << "\n";
    os << "size_classes = " << size_classes_to_string(n.size_classes) << "\n";
    os << "count = " << n.count << "\n";
    if (!n.color.empty()) os << "color = " << n.color << "\n";
    if (!n.material.empty()) os << "material = " << n.material << "\n";
  }
  for (const auto& r : g.relations) {
    os << "[relation]\n";
    os << "subject = " << r.subject << "\n";
    os << "position = " << to_string(r.position) << "\n";
    os << "object = " << r.object << "\n";
  }
  return os.str();
}

SceneGraph parse_scene_graph(const std::string& text) {
  SceneGraph g;
  for (const auto& sec : parse_sections(text)) {
    if (sec.name == "scenegraph") {
      g.template_id = sec.get("template");
      g.seed = static_cast<std::uint64_t>(std::stoull(sec.get("seed")));
    } else if (sec.name == "node") {
      GraphNode n;
      n.node_id = sec.get("id");
      n.size_classes = parse_size_classes(sec, "size_classes");
      n.count = static_cast<int>(sec.get_long("count"));
      n.color = sec.get_or("color", "");
      n.material = sec.get_or("material", "");
      g.nodes.push_back(std::move(n));
    } else if (sec.name == "relation") {
      g.relations.push_back(parse_relation(sec));
    } else {
      throw FormatError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  g.validate();
  return g;
}

// ---------------------------------------------------------------------------

std::vector<SceneTemplate> parse_templates(const std::string& text) {
  std::vector<SceneTemplate> out;
  for (const auto& sec : parse_sections(text)) {
    if (sec.name == "template") {
      SceneTemplate t;
      t.id = sec.get("id");
      t.keep_defaults = sec.get_or("keep_defaults", "false") == "true";
      out.push_back(std::move(t));
    } else if (sec.name == "node") {
      if (out.empty()) throw FormatError("[node] before any [template]", sec.line);
      TemplateNode n;
      n.node_id = sec.get("id");
      n.size_classes = parse_size_classes(sec, "size_classes");
      const std::string count = sec.get_or("count", "random");
      n.count = count == "random" ? -1 : static_cast<int>(sec.get_long("count"));
      out.back().nodes.push_back(std::move(n));
    } else if (sec.name == "relation") {
      if (out.empty()) throw FormatError("[relation] before any [template]", sec.line);
      out.back().relations.push_back(parse_relation(sec));
    } else {
      throw FormatError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  // Subjects stacked on another node must stay in the liftable classes.
  for (const auto& t : out) {
    for (const auto& r : t.relations) {
      if (r.position != Relation::OnTopOf) continue;
      for (const auto& n : t.nodes) {
        if (n.node_id != r.subject) continue;
        for (SizeClass c : n.size_classes)
          if (c != SizeClass::Tiny && c != SizeClass::Small)
            throw ValidationError("template '" + t.id + "': node '" + n.node_id +
                                  "' is on-top-of another but allows class " + to_string(c));
      }
    }
  }
  return out;
}

std::vector<SceneTemplate> load_templates(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_templates(buf.str());
}

SceneGraph sample_scene_graph(const AssetLibrary& lib,
                              const std::vector<SceneTemplate>& templates,
                              const std::string& template_id, std::uint64_t seed) {
  const SceneTemplate* tpl = nullptr;
  for (const auto& t : templates)
    if (t.id == template_id) tpl = &t;
  if (!tpl) throw LookupError("unknown template '" + template_id + "'");

  Rng rng = Rng(seed).split("scenegraph").split(template_id);
  SceneGraph g;
  g.template_id = template_id;
  g.seed = seed;

  const auto colors = lib.colors();
  const auto mats = lib.material_names();
  for (const auto& tn : tpl->nodes) {
    GraphNode n;
    n.node_id = tn.node_id;
    n.size_classes = tn.size_classes;
    n.count = tn.count >= 1 ? tn.count : static_cast<int>(rng.uniform_int(1, 20));
    if (!tpl->keep_defaults) {
      n.color = colors[rng.uniform_u64(colors.size())];
      n.material = mats[rng.uniform_u64(mats.size())];
    }
    g.nodes.push_back(std::move(n));
  }
  g.relations = tpl->relations;
  g.validate();
  return g;
}

}  // namespace synthvqa
