#ifndef SYNTHVQA_FEATURES_HPP
#define SYNTHVQA_FEATURES_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "synthvqa/compositor.hpp"
#include "synthvqa/domain.hpp"

namespace synthvqa {

struct Region {
  Eigen::VectorXf feature;
  std::string pseudo_label;
  double score = 1.0;  // in [0, 1]
};

struct FeatureRecord {
  std::string image_id;
  Domain domain = Domain::R;
  std::vector<Region> regions;

  int dim() const { return regions.empty() ? 0 : static_cast<int>(regions[0].feature.size()); }
  void validate(int n_max = 100) const;
};

// Binary layout (docs/feature_format.md): magic, version, dim, region count,
// row-major little-endian float32, then a text trailer of labels and scores.
std::string serialize_record(const FeatureRecord& r);
FeatureRecord parse_record(const std::string& bytes);
void save_record(const std::string& path, const FeatureRecord& r);
FeatureRecord load_record(const std::string& path);

// A record store is a directory of .feat files plus an index file.
struct RecordStore {
  std::vector<FeatureRecord> records;

  const FeatureRecord* find(const std::string& image_id) const;
};

RecordStore load_store(const std::string& dir);
void save_store(const std::string& dir, const RecordStore& store);

// ---------------------------------------------------------------------------
// Pseudo-label dictionary

struct RegionRef {
  std::string image_id;
  int region_index = 0;
  bool operator==(const RegionRef&) const = default;
};

struct FeatureDict {
  Domain domain = Domain::W;
  std::map<std::string, std::vector<RegionRef>> by_label;

  bool empty() const { return by_label.empty(); }
  std::size_t reference_count() const;
};

FeatureDict build_dictionary(const RecordStore& store, Domain domain);

// Union of dictionaries over the configured source domains, with the store
// each reference resolves in.
struct SwapSource {
  std::vector<std::pair<const FeatureDict*, const RecordStore*>> parts;

  bool has_label(const std::string& label) const;
  std::size_t count_label(const std::string& label) const;
  const Eigen::VectorXf& at(const std::string& label, std::size_t flat_index) const;
};

struct SwapConfig {
  double lambda = 0.2;  // in [0, 1]
  std::uint64_t seed = 0;
};

// Replaces floor(lambda * |regions|) uniformly chosen regions (clipped to the
// label-matched subset) with same-label source features. Labels, ordering and
// region count are untouched.
FeatureRecord fswap(const FeatureRecord& record, const SwapSource& source,
                    const SwapConfig& cfg);

// ---------------------------------------------------------------------------
// Padding

struct TruncationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PaddedFeatures {
  Eigen::MatrixXf matrix;  // n_max x dim, zero rows past valid_rows
  int valid_rows = 0;
};

PaddedFeatures pad_features(const FeatureRecord& record, int n_max = 100);

// ---------------------------------------------------------------------------
// Two-domain feature simulator

struct DomainProfile {
  Domain domain = Domain::W;
  int dim = 64;
  Eigen::MatrixXf transform;  // dim x dim affine map A
  Eigen::VectorXf offset;     // dim offset b
  double noise_sigma = 0.0;
  double label_noise = 0.0;  // probability a pseudo-label flips
  // When set, the offset models a global image-style component: each region
  // receives offset / region_count, so the record carries one offset in sum.
  bool per_image_offset = false;

  static DomainProfile identity(Domain d, int dim);
  // A deterministic random rotation-like map with the given seed.
  static DomainProfile random_affine(Domain d, int dim, std::uint64_t seed, double offset_scale,
                                     double noise_sigma, double label_noise);
  // Blend between the identity and a random rotation; gap in [0, 1] controls
  // how far the domain drifts from the base embedding space.
  static DomainProfile partial_rotation(Domain d, int dim, std::uint64_t seed, double gap,
                                        double offset_scale, double noise_sigma,
                                        double label_noise);
  void validate() const;
};

// Deterministic embedding of (category, color, material, size class) used as
// the pre-transform base vector.
Eigen::VectorXf base_embedding(const std::string& category, const std::string& color,
                               const std::string& material, const std::string& size_class,
                               int dim);

// One region per visible object; feature = A * base + b + gaussian noise.
FeatureRecord simulate_features(const PlacedScene& scene, const DomainProfile& profile,
                                std::uint64_t seed,
                                const std::vector<std::string>& label_vocabulary = {});

}  // namespace synthvqa

#endif
