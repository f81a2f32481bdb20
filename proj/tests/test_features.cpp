#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "synthvqa/align.hpp"
#include "synthvqa/text_format.hpp"
#include "synthvqa/features.hpp"
#include "synthvqa/pipeline.hpp"
#include "synthvqa/rng.hpp"

using namespace synthvqa;

namespace {
const std::string kDataDir = SYNTHVQA_DATA_DIR;

FeatureRecord make_record(const std::string& id, Domain d, int regions, int dim,
                          std::uint64_t seed) {
  Rng rng(seed);
  FeatureRecord r;
  r.image_id = id;
  r.domain = d;
  const char* labels[] = {"mug", "table", "lamp"};
  for (int i = 0; i < regions; ++i) {
    Region reg;
    reg.feature.resize(dim);
    for (int j = 0; j < dim; ++j) reg.feature[j] = static_cast<float>(rng.normal());
    reg.pseudo_label = labels[i % 3];
    reg.score = rng.uniform_double(0.5, 1.0);
    r.regions.push_back(std::move(reg));
  }
  return r;
}

struct SwapFixture {
  RecordStore source_store;
  FeatureDict dict;
  SwapSource source;

  explicit SwapFixture(int records = 6) {
    for (int i = 0; i < records; ++i)
      source_store.records.push_back(
          make_record("src-" + std::to_string(i), Domain::W, 9, 16, 100 + i));
    dict = build_dictionary(source_store, Domain::W);
    source.parts.push_back({&dict, &source_store});
  }
};
}  // namespace

TEST_CASE("feature records round-trip through the binary format") {
  const FeatureRecord r = make_record("img-1", Domain::R, 5, 16, 7);
  const std::string bytes = serialize_record(r);
  const FeatureRecord back = parse_record(bytes);
  CHECK(back.image_id == "img-1");
  CHECK(back.domain == Domain::R);
  REQUIRE(back.regions.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back.regions[i].feature == r.regions[i].feature);  // bit-exact floats
    CHECK(back.regions[i].pseudo_label == r.regions[i].pseudo_label);
    CHECK(back.regions[i].score == r.regions[i].score);
  }
  CHECK_THROWS_AS((void)parse_record("garbage"), FormatError);
}

TEST_CASE("record stores save and load through the index") {
  const std::string dir = "/tmp/synthvqa_test_store";
  std::filesystem::remove_all(dir);
  RecordStore store;
  store.records.push_back(make_record("a", Domain::W, 3, 8, 1));
  store.records.push_back(make_record("b", Domain::W, 4, 8, 2));
  save_store(dir, store);
  const RecordStore back = load_store(dir);
  REQUIRE(back.records.size() == 2);
  CHECK(back.find("a") != nullptr);
  CHECK(back.find("b")->regions.size() == 4);
  CHECK(back.find("zzz") == nullptr);
}

TEST_CASE("dictionary indexes every region exactly once") {
  SwapFixture f;
  CHECK(f.dict.domain == Domain::W);
  CHECK(f.dict.reference_count() == 6 * 9);
  for (const auto& [label, refs] : f.dict.by_label)
    for (const auto& ref : refs) {
      const FeatureRecord* rec = f.source_store.find(ref.image_id);
      REQUIRE(rec);
      CHECK(rec->regions.at(ref.region_index).pseudo_label == label);
    }
}

TEST_CASE("fswap honors the floor(lambda*m) contract") {
  SwapFixture f;
  const FeatureRecord input = make_record("real-1", Domain::R, 10, 16, 55);
  const FeatureRecord swapped = fswap(input, f.source, {.lambda = 0.2, .seed = 3});
  REQUIRE(swapped.regions.size() == 10);

  int changed = 0;
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(swapped.regions[i].pseudo_label == input.regions[i].pseudo_label);
    if (swapped.regions[i].feature != input.regions[i].feature) ++changed;
  }
  CHECK(changed == 2);  // floor(0.2 * 10)

  // Every replaced feature bit-matches a same-label source feature.
  for (std::size_t i = 0; i < 10; ++i) {
    if (swapped.regions[i].feature == input.regions[i].feature) continue;
    bool found = false;
    for (const auto& rec : f.source_store.records)
      for (const auto& reg : rec.regions)
        if (reg.pseudo_label == swapped.regions[i].pseudo_label &&
            reg.feature == swapped.regions[i].feature)
          found = true;
    CHECK(found);
  }
}

TEST_CASE("fswap with lambda 0 is the identity") {
  SwapFixture f;
  const FeatureRecord input = make_record("real-2", Domain::R, 8, 16, 9);
  const FeatureRecord out = fswap(input, f.source, {.lambda = 0.0, .seed = 1});
  CHECK(serialize_record(out) == serialize_record(input));
}

TEST_CASE("fswap clips the swap count to matched labels") {
  SwapFixture f;
  FeatureRecord input = make_record("real-3", Domain::R, 10, 16, 9);
  for (std::size_t i = 0; i < input.regions.size(); ++i)
    if (i != 0) input.regions[i].pseudo_label = "unicorn";  // absent from source
  const FeatureRecord out = fswap(input, f.source, {.lambda = 1.0, .seed = 2});
  int changed = 0;
  for (std::size_t i = 0; i < 10; ++i)
    if (out.regions[i].feature != input.regions[i].feature) ++changed;
  CHECK(changed <= 1);  // only the one matchable region can swap
}

TEST_CASE("fswap is deterministic per seed") {
  SwapFixture f;
  const FeatureRecord input = make_record("real-4", Domain::R, 12, 16, 31);
  const FeatureRecord a = fswap(input, f.source, {.lambda = 0.5, .seed = 9});
  const FeatureRecord b = fswap(input, f.source, {.lambda = 0.5, .seed = 9});
  const FeatureRecord c = fswap(input, f.source, {.lambda = 0.5, .seed = 10});
  CHECK(serialize_record(a) == serialize_record(b));
  CHECK(serialize_record(a) != serialize_record(c));
}

TEST_CASE("swapped fraction approaches lambda over many records") {
  SwapFixture f(20);
  int swapped = 0, total = 0;
  for (int i = 0; i < 500; ++i) {
    const FeatureRecord input = make_record("r" + std::to_string(i), Domain::R, 10, 16, 900 + i);
    const FeatureRecord out = fswap(input, f.source, {.lambda = 0.2, .seed = 40 + i});
    for (std::size_t j = 0; j < input.regions.size(); ++j) {
      ++total;
      if (out.regions[j].feature != input.regions[j].feature) ++swapped;
    }
  }
  // m = 10, floor(0.2 * 10) = 2 exactly, so the fraction is deterministic.
  CHECK(std::abs(static_cast<double>(swapped) / total - 0.2) <= 0.01);
}

TEST_CASE("pad_features zero-fills past the valid rows") {
  const FeatureRecord r = make_record("img", Domain::R, 3, 8, 5);
  const PaddedFeatures padded = pad_features(r, 5);
  CHECK(padded.valid_rows == 3);
  CHECK(padded.matrix.rows() == 5);
  CHECK(padded.matrix.cols() == 8);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(padded.matrix(i, j) == r.regions[i].feature[j]);
  CHECK(padded.matrix.row(3).isZero());
  CHECK(padded.matrix.row(4).isZero());

  const PaddedFeatures exact = pad_features(r, 3);
  CHECK(exact.valid_rows == 3);
  CHECK_THROWS_AS((void)pad_features(r, 2), TruncationError);
}

TEST_CASE("identity profile reproduces the base embedding exactly") {
  const AssetLibrary lib = load_asset_library(kDataDir + "/library.txt");
  const auto templates = load_templates(kDataDir + "/templates.txt");
  const GeneratedScene g = generate_scene(lib, templates, "two-large-neighbors", "sim-1", 3);

  DomainProfile p = DomainProfile::identity(Domain::R, 32);
  const FeatureRecord rec = simulate_features(g.scene, p, 1, lib.categories());
  REQUIRE(rec.regions.size() == g.scene.objects.size());
  for (std::size_t i = 0; i < rec.regions.size(); ++i) {
    const auto& o = g.scene.objects[i];
    const Eigen::VectorXf base = base_embedding(
        o.category, o.color, o.material,
        to_string(assign_size_class(o.extents.prod())), 32);
    CHECK(rec.regions[i].feature == base);
    CHECK(rec.regions[i].pseudo_label == o.category);
  }
}

TEST_CASE("simulate_features is deterministic and domain profiles separate") {
  const AssetLibrary lib = load_asset_library(kDataDir + "/library.txt");
  const auto templates = load_templates(kDataDir + "/templates.txt");

  DomainProfile a = DomainProfile::random_affine(Domain::W, 16, 5, 2.0, 0.05, 0.0);
  a.validate();
  std::vector<Eigen::VectorXf> xs, ys;
  Eigen::MatrixXd mx(0, 16), my(0, 16);
  for (std::uint64_t s = 0; s < 12; ++s) {
    const GeneratedScene g =
        generate_scene(lib, templates, "outdoor-cluster", "sim-" + std::to_string(s), s);
    const FeatureRecord ra = simulate_features(g.scene, a, s, lib.categories());
    const FeatureRecord rb = simulate_features(
        g.scene, DomainProfile::identity(Domain::R, 16), s, lib.categories());
    const FeatureRecord ra2 = simulate_features(g.scene, a, s, lib.categories());
    CHECK(serialize_record(ra) == serialize_record(ra2));
    for (const auto& reg : ra.regions) {
      mx.conservativeResize(mx.rows() + 1, 16);
      mx.row(mx.rows() - 1) = reg.feature.cast<double>().transpose();
    }
    for (const auto& reg : rb.regions) {
      my.conservativeResize(my.rows() + 1, 16);
      my.row(my.rows() - 1) = reg.feature.cast<double>().transpose();
    }
  }

  // The two profiles are far apart under MMD relative to a permutation null.
  const double observed = mmd(mx, my);
  Rng rng(17);
  Eigen::MatrixXd pooled(mx.rows() + my.rows(), 16);
  pooled << mx, my;
  int exceed = 0;
  for (int p = 0; p < 50; ++p) {
    std::vector<int> idx(static_cast<std::size_t>(pooled.rows()));
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    for (std::size_t i = idx.size(); i > 1; --i)
      std::swap(idx[i - 1], idx[rng.uniform_u64(i)]);
    Eigen::MatrixXd px(mx.rows(), 16), py(my.rows(), 16);
    for (int i = 0; i < px.rows(); ++i) px.row(i) = pooled.row(idx[static_cast<std::size_t>(i)]);
    for (int i = 0; i < py.rows(); ++i)
      py.row(i) = pooled.row(idx[static_cast<std::size_t>(px.rows() + i)]);
    if (mmd(px, py) >= observed) ++exceed;
  }
  CHECK(exceed == 0);
}

TEST_CASE("label noise flips pseudo-labels at roughly the configured rate") {
  const AssetLibrary lib = load_asset_library(kDataDir + "/library.txt");
  const auto templates = load_templates(kDataDir + "/templates.txt");
  DomainProfile p = DomainProfile::identity(Domain::W, 8);
  p.label_noise = 0.3;
  int flips = 0, total = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const GeneratedScene g =
        generate_scene(lib, templates, "table-with-small-objects", "ln-" + std::to_string(s), s);
    const FeatureRecord rec = simulate_features(g.scene, p, s, lib.categories());
    for (std::size_t i = 0; i < rec.regions.size(); ++i) {
      ++total;
      if (rec.regions[i].pseudo_label != g.scene.objects[i].category) ++flips;
    }
  }
  const double rate = static_cast<double>(flips) / total;
  CHECK(rate > 0.15);
  CHECK(rate < 0.45);
}
