#include "synthvqa/features.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "synthvqa/rng.hpp"
#include "synthvqa/text_format.hpp"

namespace synthvqa {

namespace fs = std::filesystem;

void FeatureRecord::validate(int n_max) const {
  if (regions.empty()) throw ValidationError("record '" + image_id + "' has no regions");
  if (static_cast<int>(regions.size()) > n_max)
    throw ValidationError("record '" + image_id + "' exceeds n_max regions");
  const int d = dim();
  for (const auto& r : regions) {
    if (r.feature.size() != d)
      throw ValidationError("record '" + image_id + "' has mixed feature dims");
    if (r.score < 0.0 || r.score > 1.0)
      throw ValidationError("record '" + image_id + "' has score outside [0, 1]");
  }
}

// ---------------------------------------------------------------------------
// Binary format (see docs/feature_format.md)

namespace {

constexpr char kMagic[4] = {'S', 'V', 'Q', 'F'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_record(const FeatureRecord& r) {
  r.validate();
  std::string out(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(r.dim()));
  put_u32(out, static_cast<std::uint32_t>(r.regions.size()));
  static_assert(sizeof(float) == 4);
  for (const auto& reg : r.regions) {
    for (int i = 0; i < reg.feature.size(); ++i) {
      std::uint32_t bits;
      const float f = reg.feature[i];
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);  // little-endian
    }
  }
  std::ostringstream trailer;
  trailer << "[record]\n";
  trailer << "image_id = " << r.image_id << "\n";
  trailer << "domain = " << to_string(r.domain) << "\n";
  for (const auto& reg : r.regions) {
    trailer << "[region]\n";
    trailer << "label = " << reg.pseudo_label << "\n";
    trailer << "score = " << std::setprecision(17) << reg.score << "\n";
  }
  out += trailer.str();
  return out;
}

FeatureRecord parse_record(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("bad feature-record magic", 0);
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kVersion)
    throw FormatError("unsupported feature-record version " + std::to_string(version), 0);
  const std::uint32_t dim = get_u32(bytes, 8);
  const std::uint32_t count = get_u32(bytes, 12);
  const std::size_t data_bytes = static_cast<std::size_t>(dim) * count * 4;
  if (bytes.size() < 16 + data_bytes) throw FormatError("truncated feature data", 0);

  FeatureRecord rec;
  rec.regions.resize(count);
  std::size_t off = 16;
  for (auto& reg : rec.regions) {
    reg.feature.resize(dim);
    for (std::uint32_t i = 0; i < dim; ++i, off += 4) {
      const std::uint32_t bits = get_u32(bytes, off);
      float f;
      std::memcpy(&f, &bits, 4);
      reg.feature[i] = f;
    }
  }
  std::size_t region_idx = 0;
  for (const auto& sec : parse_sections(bytes.substr(off))) {
    if (sec.name == "record") {
      rec.image_id = sec.get("image_id");
      const auto d = domain_from_string(sec.get("domain"));
      if (!d) throw FormatError("unknown domain in trailer", sec.line);
      rec.domain = *d;
    } else if (sec.name == "region") {
      if (region_idx >= rec.regions.size()) throw FormatError("extra [region] in trailer", sec.line);
      rec.regions[region_idx].pseudo_label = sec.get("label");
      rec.regions[region_idx].score = sec.get_double("score");
      ++region_idx;
    } else {
      throw FormatError("unknown trailer section [" + sec.name + "]", sec.line);
    }
  }
  if (region_idx != rec.regions.size()) throw FormatError("trailer label count mismatch", 0);
  rec.validate();
  return rec;
}

void save_record(const std::string& path, const FeatureRecord& r) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  const std::string bytes = serialize_record(r);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

FeatureRecord load_record(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_record(buf.str());
}

const FeatureRecord* RecordStore::find(const std::string& image_id) const {
  for (const auto& r : records)
    if (r.image_id == image_id) return &r;
  return nullptr;
}

RecordStore load_store(const std::string& dir) {
  const fs::path index = fs::path(dir) / "index.txt";
  std::ifstream f(index);
  if (!f) throw std::runtime_error("cannot open store index: " + index.string());
  RecordStore store;
  std::string name;
  while (std::getline(f, name)) {
    if (name.empty()) continue;
    store.records.push_back(load_record((fs::path(dir) / name).string()));
  }
  return store;
}

void save_store(const std::string& dir, const RecordStore& store) {
  fs::create_directories(dir);
  std::ofstream index(fs::path(dir) / "index.txt");
  for (const auto& r : store.records) {
    const std::string name = r.image_id + ".feat";
    save_record((fs::path(dir) / name).string(), r);
    index << name << "\n";
  }
}

// ---------------------------------------------------------------------------
// Dictionary and F-SWAP

std::size_t FeatureDict::reference_count() const {
  std::size_t n = 0;
  for (const auto& [label, refs] : by_label) n += refs.size();
  return n;
}

FeatureDict build_dictionary(const RecordStore& store, Domain domain) {
  FeatureDict dict;
  dict.domain = domain;
  for (const auto& rec : store.records) {
    if (rec.domain != domain) continue;
    for (std::size_t i = 0; i < rec.regions.size(); ++i)
      dict.by_label[rec.regions[i].pseudo_label].push_back(
          {rec.image_id, static_cast<int>(i)});
  }
  return dict;
}

bool SwapSource::has_label(const std::string& label) const {
  for (const auto& [dict, store] : parts)
    if (dict->by_label.count(label)) return true;
  return false;
}

std::size_t SwapSource::count_label(const std::string& label) const {
  std::size_t n = 0;
  for (const auto& [dict, store] : parts)
    if (auto it = dict->by_label.find(label); it != dict->by_label.end()) n += it->second.size();
  return n;
}

const Eigen::VectorXf& SwapSource::at(const std::string& label, std::size_t flat_index) const {
  for (const auto& [dict, store] : parts) {
    auto it = dict->by_label.find(label);
    if (it == dict->by_label.end()) continue;
    if (flat_index < it->second.size()) {
      const RegionRef& ref = it->second[flat_index];
      const FeatureRecord* rec = store->find(ref.image_id);
      if (!rec) throw LookupError("dictionary reference to missing record '" + ref.image_id + "'");
      return rec->regions.at(static_cast<std::size_t>(ref.region_index)).feature;
    }
    flat_index -= it->second.size();
  }
  throw LookupError("dictionary index out of range for label '" + label + "'");
}

FeatureRecord fswap(const FeatureRecord& record, const SwapSource& source,
                    const SwapConfig& cfg) {
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0)
    throw std::domain_error("fswap: lambda outside [0, 1]");

  FeatureRecord out = record;
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < record.regions.size(); ++i)
    if (source.has_label(record.regions[i].pseudo_label)) matched.push_back(i);

  // floor(lambda * m); the epsilon guards against 3.0 landing at 2.999...96.
  const std::size_t k = std::min<std::size_t>(
      static_cast<std::size_t>(
          std::floor(cfg.lambda * static_cast<double>(record.regions.size()) + 1e-9)),
      matched.size());
  if (k == 0) return out;

  Rng rng = Rng(cfg.seed).split("fswap").split(record.image_id);
  // Partial Fisher-Yates: first k entries are a uniform sample w/o replacement.
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.uniform_u64(matched.size() - i);
    std::swap(matched[i], matched[j]);
  }
  for (std::size_t i = 0; i < k; ++i) {
    Region& reg = out.regions[matched[i]];
    const std::size_t n = source.count_label(reg.pseudo_label);
    reg.feature = source.at(reg.pseudo_label, rng.uniform_u64(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Padding

PaddedFeatures pad_features(const FeatureRecord& record, int n_max) {
  const int m = static_cast<int>(record.regions.size());
  if (m > n_max)
    throw TruncationError("record '" + record.image_id + "' has " + std::to_string(m) +
                          " regions, n_max = " + std::to_string(n_max));
  PaddedFeatures out;
  out.valid_rows = m;
  out.matrix = Eigen::MatrixXf::Zero(n_max, record.dim());
  for (int i = 0; i < m; ++i) out.matrix.row(i) = record.regions[i].feature.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Simulator

DomainProfile DomainProfile::identity(Domain d, int dim) {
  DomainProfile p;
  p.domain = d;
  p.dim = dim;
  p.transform = Eigen::MatrixXf::Identity(dim, dim);
  p.offset = Eigen::VectorXf::Zero(dim);
  return p;
}

DomainProfile DomainProfile::random_affine(Domain d, int dim, std::uint64_t seed,
                                           double offset_scale, double noise_sigma,
                                           double label_noise) {
  Rng rng = Rng(seed).split("profile");
  Eigen::MatrixXd g(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) g(r, c) = rng.normal();
  // Orthogonal map keeps feature norms, so domains differ by rotation + shift.
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();

  DomainProfile p;
  p.domain = d;
  p.dim = dim;
  p.transform = q.cast<float>();
  p.offset.resize(dim);
  for (int i = 0; i < dim; ++i) p.offset[i] = static_cast<float>(offset_scale * rng.normal());
  p.noise_sigma = noise_sigma;
  p.label_noise = label_noise;
  return p;
}

DomainProfile DomainProfile::partial_rotation(Domain d, int dim, std::uint64_t seed, double gap,
                                              double offset_scale, double noise_sigma,
                                              double label_noise) {
  DomainProfile p = random_affine(d, dim, seed, 0.0, noise_sigma, label_noise);
  const Eigen::MatrixXd q = p.transform.cast<double>();
  const Eigen::MatrixXd blend =
      (1.0 - gap) * Eigen::MatrixXd::Identity(dim, dim) + gap * q;
  // Re-orthonormalize the blend so the map stays a rotation-like isometry.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(blend);
  Eigen::MatrixXd ortho = qr.householderQ();
  // Fix signs so gap = 0 lands exactly on the identity.
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < dim; ++i)
    if (r(i, i) < 0.0) ortho.col(i) = -ortho.col(i);
  p.transform = ortho.cast<float>();
  Rng rng = Rng(seed).split("profile-offset");
  p.offset.resize(dim);
  for (int i = 0; i < dim; ++i)
    p.offset[i] = static_cast<float>(gap * offset_scale * rng.normal());
  p.per_image_offset = true;
  return p;
}

void DomainProfile::validate() const {
  if (transform.rows() != dim || transform.cols() != dim || offset.size() != dim)
    throw ValidationError("domain profile dimensions inconsistent");
}

Eigen::VectorXf base_embedding(const std::string& category, const std::string& color,
                               const std::string& material, const std::string& size_class,
                               int dim) {
  auto vec_for = [dim](const std::string& tag, const std::string& value, double weight) {
    Rng rng(hash_combine(hash64(tag), hash64(value)));
    Eigen::VectorXf v(dim);
    for (int i = 0; i < dim; ++i)
      v[i] = static_cast<float>(weight * rng.uniform_double(-1.0, 1.0));
    return v;
  };
  // Category dominates so region sums stay linearly decodable into counts.
  Eigen::VectorXf v = vec_for("category", category, 1.0);
  v += vec_for("color", color, 0.25);
  v += vec_for("material", material, 0.25);
  v += vec_for("size", size_class, 0.25);
  return v;
}

FeatureRecord simulate_features(const PlacedScene& scene, const DomainProfile& profile,
                                std::uint64_t seed,
                                const std::vector<std::string>& label_vocabulary) {
  profile.validate();
  Rng rng = Rng(seed).split("simfeat").split(scene.scene_id);

  FeatureRecord rec;
  rec.image_id = scene.scene_id;
  rec.domain = profile.domain;
  const float offset_share =
      profile.per_image_offset && !scene.objects.empty()
          ? 1.0f / static_cast<float>(scene.objects.size())
          : 1.0f;
  for (const auto& o : scene.objects) {
    Region reg;
    const std::string size_class = to_string(assign_size_class(o.extents.prod()));
    Eigen::VectorXf base = base_embedding(o.category, o.color, o.material, size_class, profile.dim);
    reg.feature = profile.transform * base + offset_share * profile.offset;
    if (profile.noise_sigma > 0.0)
      for (int i = 0; i < reg.feature.size(); ++i)
        reg.feature[i] += static_cast<float>(rng.normal(0.0, profile.noise_sigma));
    reg.pseudo_label = o.category;
    if (profile.label_noise > 0.0 && rng.bernoulli(profile.label_noise)) {
      const auto& vocab = label_vocabulary;
      if (!vocab.empty()) {
        std::string other = vocab[rng.uniform_u64(vocab.size())];
        for (int tries = 0; tries < 8 && other == o.category; ++tries)
          other = vocab[rng.uniform_u64(vocab.size())];
        reg.pseudo_label = other;
      }
    }
    reg.score = rng.uniform_double(0.5, 1.0);
    rec.regions.push_back(std::move(reg));
  }
  rec.validate();
  return rec;
}

}  // namespace synthvqa
