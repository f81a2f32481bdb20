#include "synthvqa/compositor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "synthvqa/text_format.hpp"

namespace synthvqa {

void PlacedScene::validate() const {
  std::set<int> ids;
  for (const auto& o : objects) ids.insert(o.instance_id);
  if (ids.size() != objects.size())
    throw ValidationError("scene '" + scene_id + "': duplicate instance ids");
  for (size_t i = 1; i <= objects.size(); ++i)
    if (!ids.count(static_cast<int>(i)))
      throw ValidationError("scene '" + scene_id + "': instance ids not dense from 1");
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt_vec3(const Eigen::Vector3d& v) {
  return fmt_double(v.x()) + " " + fmt_double(v.y()) + " " + fmt_double(v.z());
}

Eigen::Vector3d vec3_of(const Section& sec, const std::string& key) {
  const auto p = sec.get_list(key);
  if (p.size() != 3) throw FormatError("key '" + key + "' needs 3 values", sec.line);
  return {std::stod(p[0]), std::stod(p[1]), std::stod(p[2])};
}

}  // namespace

std::string serialize(const PlacedScene& s) {
  std::ostringstream os;
  os << "[scene]\n";
  os << "id = " << s.scene_id << "\n";
  os << "backdrop = " << s.backdrop_id << "\n";
  os << "[camera]\n";
  os << "position = " << fmt_double(s.camera.x_c) << " " << fmt_double(s.camera.y_c) << " "
     << fmt_double(s.camera.z_c) << "\n";
  os << "theta = " << fmt_double(s.camera.theta_c) << "\n";
  os << "floor = " << fmt_double(s.camera.y_0) << "\n";
  for (const auto& o : s.objects) {
    os << "[object]\n";
    os << "instance = " << o.instance_id << "\n";
    os << "asset = " << o.asset_id << "\n";
    os << "category = " << o.category << "\n";
    os << "color = " << o.color << "\n";
    os << "material = " << o.material << "\n";
    os << "node = " << o.node_id << "\n";
    os << "position = " << fmt_vec3(o.position) << "\n";
    os << "extents = " << fmt_vec3(o.extents) << "\n";
  }
  return os.str();
}

PlacedScene parse_placed_scene(const std::string& text) {
  PlacedScene s;
  for (const auto& sec : parse_sections(text)) {
    if (sec.name == "scene") {
      s.scene_id = sec.get("id");
      s.backdrop_id = sec.get("backdrop");
    } else if (sec.name == "camera") {
      const auto p = vec3_of(sec, "position");
      s.camera.x_c = p.x();
      s.camera.y_c = p.y();
      s.camera.z_c = p.z();
      s.camera.theta_c = sec.get_double("theta");
      s.camera.y_0 = sec.get_double("floor");
    } else if (sec.name == "object") {
      PlacedObject o;
      o.instance_id = static_cast<int>(sec.get_long("instance"));
      o.asset_id = sec.get("asset");
      o.category = sec.get("category");
      o.color = sec.get("color");
      o.material = sec.get("material");
      o.node_id = sec.get_or("node", "");
      o.position = vec3_of(sec, "position");
      o.extents = vec3_of(sec, "extents");
      s.objects.push_back(std::move(o));
    } else {
      throw FormatError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Rasterizer

namespace {

struct CameraBasis {
  Eigen::Vector3d eye, forward, right, up;
  double tan_half;
};

CameraBasis make_basis(const CameraConfig& cam, const RenderConfig& cfg) {
  const double t = cam.theta_c * std::numbers::pi / 180.0;
  CameraBasis b;
  b.eye = cam.position();
  b.forward = {std::cos(t), 0.0, std::sin(t)};
  b.right = {-std::sin(t), 0.0, std::cos(t)};
  b.up = {0.0, 1.0, 0.0};
  b.tan_half = std::tan(cfg.vfov_deg * std::numbers::pi / 360.0);
  return b;
}

// Slab test; returns entry distance or +inf on miss.
double ray_box(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
               const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (dir[k] == 0.0) {
      if (origin[k] < lo[k] || origin[k] > hi[k]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (lo[k] - origin[k]) / dir[k];
    double t1 = (hi[k] - origin[k]) / dir[k];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::numeric_limits<double>::infinity();
  }
  return tmin > 1e-12 ? tmin : std::numeric_limits<double>::infinity();
}

bool entirely_behind(const CameraBasis& b, const Eigen::Vector3d& lo,
                     const Eigen::Vector3d& hi) {
  for (int c = 0; c < 8; ++c) {
    const Eigen::Vector3d corner(c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(),
                                 c & 4 ? hi.z() : lo.z());
    if ((corner - b.eye).dot(b.forward) > 0.0) return false;
  }
  return true;
}

}  // namespace

int FrameMasks::visible_pixels(int instance_id) const {
  int n = 0;
  for (int r = 0; r < id_mask.rows(); ++r)
    for (int c = 0; c < id_mask.cols(); ++c)
      if (id_mask(r, c) == instance_id) ++n;
  return n;
}

FrameMasks render_masks(const PlacedScene& scene, const RenderConfig& cfg) {
  scene.validate();
  const CameraBasis basis = make_basis(scene.camera, cfg);
  const double aspect = static_cast<double>(cfg.width) / cfg.height;

  FrameMasks out;
  out.width = cfg.width;
  out.height = cfg.height;
  out.id_mask = MaskGrid::Zero(cfg.height, cfg.width);
  out.category_mask = MaskGrid::Zero(cfg.height, cfg.width);

  std::map<std::string, int> cat_index;
  for (const auto& o : scene.objects) {
    if (!cat_index.count(o.category)) {
      out.category_names.push_back(o.category);
      cat_index[o.category] = static_cast<int>(out.category_names.size());
    }
  }

  struct Box {
    Eigen::Vector3d lo, hi;
    int instance, cat;
    bool behind;
  };
  std::vector<Box> boxes;
  boxes.reserve(scene.objects.size());
  for (const auto& o : scene.objects) {
    Box b;
    b.lo = o.position - o.extents / 2.0;
    b.hi = o.position + o.extents / 2.0;
    b.instance = o.instance_id;
    b.cat = cat_index.at(o.category);
    b.behind = entirely_behind(basis, b.lo, b.hi);
    if (b.behind) out.excluded_instances.push_back(o.instance_id);
    boxes.push_back(b);
  }

  const std::size_t words = (static_cast<std::size_t>(cfg.width) * cfg.height + 63) / 64;
  for (const auto& b : boxes) out.solo_coverage[b.instance].assign(words, 0);

  for (int py = 0; py < cfg.height; ++py) {
    const double ndc_y = 1.0 - 2.0 * (py + 0.5) / cfg.height;
    for (int px = 0; px < cfg.width; ++px) {
      const double ndc_x = 2.0 * (px + 0.5) / cfg.width - 1.0;
      const Eigen::Vector3d dir = basis.forward + basis.right * (ndc_x * basis.tan_half * aspect) +
                                  basis.up * (ndc_y * basis.tan_half);
      const std::size_t pix = static_cast<std::size_t>(py) * cfg.width + px;
      double best = std::numeric_limits<double>::infinity();
      const Box* winner = nullptr;
      for (const auto& b : boxes) {
        if (b.behind) continue;
        const double t = ray_box(basis.eye, dir, b.lo, b.hi);
        if (t < best) {
          best = t;
          winner = &b;
        }
        if (t < std::numeric_limits<double>::infinity())
          out.solo_coverage[b.instance][pix >> 6] |= 1ULL << (pix & 63);
      }
      if (winner) {
        out.id_mask(py, px) = winner->instance;
        out.category_mask(py, px) = winner->cat;
      }
    }
  }

  for (const auto& b : boxes) {
    int unocc = 0;
    for (const std::uint64_t w : out.solo_coverage.at(b.instance))
      unocc += std::popcount(w);
    out.unoccluded_pixels[b.instance] = unocc;
    const int vis = out.visible_pixels(b.instance);
    out.visible_fraction[b.instance] = unocc > 0 ? static_cast<double>(vis) / unocc : 0.0;
  }
  return out;
}

VerificationReport verify_scene(const FrameMasks& masks, const PlacedScene& scene,
                                const VerificationConfig& cfg) {
  std::set<int> scene_ids;
  for (const auto& o : scene.objects) scene_ids.insert(o.instance_id);
  for (const auto& [id, f] : masks.visible_fraction)
    if (!scene_ids.count(id))
      throw ValidationError("verify_scene: masks reference unknown instance " +
                            std::to_string(id));
  for (int r = 0; r < masks.id_mask.rows(); ++r)
    for (int c = 0; c < masks.id_mask.cols(); ++c)
      if (const int id = masks.id_mask(r, c); id != 0 && !scene_ids.count(id))
        throw ValidationError("verify_scene: id_mask references unknown instance " +
                              std::to_string(id));

  VerificationReport rep;
  rep.visible_fraction = masks.visible_fraction;
  for (const auto& o : scene.objects) {
    const double vf = masks.visible_fraction.count(o.instance_id)
                          ? masks.visible_fraction.at(o.instance_id)
                          : 0.0;
    if (vf >= cfg.min_visible) rep.visible_counts[o.category] += 1;
  }

  // IoU on unoccluded 2D footprints. Coverage bit grids come from the render
  // pass; masks loaded from disk without them get a solo re-render.
  const int n = static_cast<int>(scene.objects.size());
  std::vector<std::vector<std::uint64_t>> solos;
  solos.reserve(n);
  for (const auto& o : scene.objects) {
    if (auto it = masks.solo_coverage.find(o.instance_id); it != masks.solo_coverage.end()) {
      solos.push_back(it->second);
      continue;
    }
    RenderConfig rc;
    rc.width = masks.width;
    rc.height = masks.height;
    PlacedScene single = scene;
    single.objects = {o};
    single.objects[0].instance_id = 1;
    solos.push_back(render_masks(single, rc).solo_coverage.at(1));
  }
  bool pass = true;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      int inter = 0, uni = 0;
      for (std::size_t w = 0; w < solos[i].size(); ++w) {
        inter += std::popcount(solos[i][w] & solos[j][w]);
        uni += std::popcount(solos[i][w] | solos[j][w]);
      }
      const double iou = uni > 0 ? static_cast<double>(inter) / uni : 0.0;
      rep.pairwise_iou[{scene.objects[i].instance_id, scene.objects[j].instance_id}] = iou;
      if (iou > cfg.max_overlap) pass = false;
    }
  }
  for (const auto& o : scene.objects) {
    const double vf = masks.visible_fraction.count(o.instance_id)
                          ? masks.visible_fraction.at(o.instance_id)
                          : 0.0;
    if (vf < cfg.min_visible) pass = false;
  }
  rep.pass = pass;
  return rep;
}

// ---------------------------------------------------------------------------

std::string serialize_mask(const MaskGrid& mask) {
  std::ostringstream os;
  os << "SVQM\n" << mask.cols() << " " << mask.rows() << "\n" << mask.maxCoeff() << "\n";
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (c) os << ' ';
      os << mask(r, c);
    }
    os << '\n';
  }
  return os.str();
}

MaskGrid parse_mask(const std::string& text) {
  std::istringstream is(text);
  std::string magic;
  is >> magic;
  if (magic != "SVQM") throw FormatError("bad mask magic '" + magic + "'", 1);
  int w = 0, h = 0, maxv = 0;
  is >> w >> h >> maxv;
  if (w <= 0 || h <= 0) throw FormatError("bad mask dimensions", 2);
  MaskGrid m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (!(is >> m(r, c))) throw FormatError("truncated mask data", 4 + r);
  return m;
}

std::string serialize_mask_sidecar(const FrameMasks& masks) {
  std::ostringstream os;
  os << "[masks]\n";
  os << "width = " << masks.width << "\n";
  os << "height = " << masks.height << "\n";
  os << "categories = ";
  for (size_t i = 0; i < masks.category_names.size(); ++i)
    os << (i ? " " : "") << masks.category_names[i];
  os << "\n";
  for (const auto& [id, f] : masks.visible_fraction) {
    os << "[instance]\n";
    os << "id = " << id << "\n";
    os << "visible_fraction = " << fmt_double(f) << "\n";
    os << "unoccluded_pixels = " << masks.unoccluded_pixels.at(id) << "\n";
  }
  for (int id : masks.excluded_instances) {
    os << "[excluded]\n";
    os << "id = " << id << "\n";
  }
  return os.str();
}

}  // namespace synthvqa
