// Command-line front end: batch scene generation, QA emission, feature
// simulation, swaps, alignment reports, training and evaluation.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <iomanip>
#include <map>
#include <mutex>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "synthvqa/align.hpp"
#include "synthvqa/text_format.hpp"
#include "synthvqa/features.hpp"
#include "synthvqa/pipeline.hpp"
#include "synthvqa/qa.hpp"
#include "synthvqa/rng.hpp"
#include "synthvqa/toyvqa.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace synthvqa;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitExhausted = 3;
constexpr int kExitDiverged = 4;

// All artifacts are staged under <out>/quarantine and renamed into place only
// after the whole command succeeds, so a crash never leaves a partial tree at
// the final paths.
struct Stage {
  fs::path out;
  fs::path staging;
  std::vector<fs::path> staged;  // paths relative to the staging root

  explicit Stage(const fs::path& out_dir) : out(out_dir), staging(out_dir / "quarantine") {
    fs::create_directories(staging);
  }

  void write(const fs::path& rel, const std::string& bytes) {
    const fs::path p = staging / rel;
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.close();
    staged.push_back(rel);
  }

  void commit() {
    for (const fs::path& rel : staged) {
      const fs::path from = staging / rel;
      const fs::path to = out / rel;
      fs::create_directories(to.parent_path());
      fs::rename(from, to);
    }
    std::error_code ec;
    fs::remove_all(staging, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

struct LoadedConfig {
  json doc;
  std::uint64_t hash = 0;
};

LoadedConfig load_config(const std::string& path) {
  const std::string bytes = read_file(path);
  LoadedConfig c;
  c.doc = json::parse(bytes);
  c.hash = hash64(bytes);
  return c;
}

std::string manifest_text(const std::string& command, const LoadedConfig& cfg,
                          std::uint64_t seed, const std::vector<std::string>& extra = {}) {
  std::ostringstream out;
  out << "[manifest]\n";
  out << "command = " << command << "\n";
  out << "config_hash = " << cfg.hash << "\n";
  out << "seed = " << seed << "\n";
  for (const std::string& line : extra) out << line << "\n";
  return out.str();
}

std::uint64_t scene_seed(std::uint64_t master, int index) {
  return Rng(master).split("scene").split(static_cast<std::uint64_t>(index)).state();
}

PlacementConfig placement_from(const json& doc) {
  PlacementConfig cfg;
  if (doc.contains("render")) {
    const json& r = doc["render"];
    cfg.render.width = r.value("width", cfg.render.width);
    cfg.render.height = r.value("height", cfg.render.height);
    cfg.render.vfov_deg = r.value("vfov_deg", cfg.render.vfov_deg);
  }
  if (doc.contains("verify")) {
    const json& v = doc["verify"];
    cfg.verify.min_visible = v.value("min_visible", cfg.verify.min_visible);
    cfg.verify.max_overlap = v.value("max_overlap", cfg.verify.max_overlap);
  }
  cfg.max_retries = doc.value("max_retries", cfg.max_retries);
  return cfg;
}

std::string scene_name(int index) {
  std::ostringstream s;
  s << "scene-" << std::setw(5) << std::setfill('0') << index;
  return s.str();
}

// Fans scene generation out over a worker pool; slot i of the results vector
// belongs to scene i, so output order is independent of scheduling.
std::vector<GeneratedScene> generate_batch(const AssetLibrary& lib,
                                           const std::vector<SceneTemplate>& templates,
                                           const std::string& template_id, int count,
                                           std::uint64_t seed, const PlacementConfig& cfg,
                                           int jobs) {
  std::vector<GeneratedScene> scenes(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      const std::string tid =
          template_id.empty() ? templates[static_cast<std::size_t>(i) % templates.size()].id
                              : template_id;
      try {
        scenes[static_cast<std::size_t>(i)] =
            generate_scene(lib, templates, tid, scene_name(i), scene_seed(seed, i), cfg);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        error = e.what();
        failed.store(true);
        return;
      }
    }
  };

  const int n = std::max(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw GenerationExhaustedError(error);
  return scenes;
}

std::vector<PlacedScene> load_scene_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir / "scenes"))
    if (entry.path().extension() == ".txt") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<PlacedScene> scenes;
  for (const fs::path& p : files) scenes.push_back(parse_placed_scene(read_file(p)));
  return scenes;
}

DomainProfile profile_from(const json& doc, int dim) {
  const std::string domain = doc.value("domain", std::string("W"));
  const auto d = domain_from_string(domain);
  if (!d) throw std::runtime_error("bad domain: " + domain);
  const std::string kind = doc.value("kind", std::string("identity"));
  const std::uint64_t seed = doc.value("seed", 0ULL);
  if (kind == "identity") return DomainProfile::identity(*d, dim);
  if (kind == "affine")
    return DomainProfile::random_affine(*d, dim, seed, doc.value("offset_scale", 0.5),
                                        doc.value("noise_sigma", 0.0),
                                        doc.value("label_noise", 0.0));
  if (kind == "partial_rotation")
    return DomainProfile::partial_rotation(*d, dim, seed, doc.value("gap", 0.5),
                                           doc.value("offset_scale", 0.5),
                                           doc.value("noise_sigma", 0.0),
                                           doc.value("label_noise", 0.0));
  throw std::runtime_error("bad profile kind: " + kind);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out, int jobs) {
  const AssetLibrary lib = load_asset_library(cfg.doc.at("library"));
  const auto templates = load_templates(cfg.doc.at("templates"));
  const int count = cfg.doc.at("scene_count");
  const std::string template_id = cfg.doc.value("template", std::string());
  const PlacementConfig pcfg = placement_from(cfg.doc);

  const auto scenes = generate_batch(lib, templates, template_id, count, seed, pcfg, jobs);

  Stage stage(out);
  std::vector<std::string> manifest_lines;
  for (int i = 0; i < count; ++i) {
    const GeneratedScene& g = scenes[static_cast<std::size_t>(i)];
    const std::string name = scene_name(i);
    stage.write(fs::path("scenes") / (name + ".txt"), serialize(g.scene));
    stage.write(fs::path("graphs") / (name + ".txt"), serialize(g.graph));
    stage.write(fs::path("masks") / (name + ".idmask"), serialize_mask(g.masks.id_mask));
    stage.write(fs::path("masks") / (name + ".catmask"), serialize_mask(g.masks.category_mask));
    stage.write(fs::path("masks") / (name + ".sidecar"), serialize_mask_sidecar(g.masks));
    manifest_lines.push_back(name + ".seed = " + std::to_string(scene_seed(seed, i)));
  }
  stage.write("manifest.txt", manifest_text("generate", cfg, seed, manifest_lines));
  stage.commit();
  return kExitOk;
}

int cmd_qa(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const AssetLibrary lib = load_asset_library(cfg.doc.at("library"));
  const fs::path scenes_dir = std::string(cfg.doc.at("scenes"));
  const auto scenes = load_scene_dir(scenes_dir);
  const auto domain = domain_from_string(cfg.doc.value("domain", std::string("W")));
  if (!domain) throw std::runtime_error("bad domain");

  RenderConfig rcfg;
  VerificationConfig vcfg;
  std::vector<QATriplet> pool;
  const Rng root(seed);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const FrameMasks masks = render_masks(scenes[i], rcfg);
    const VerificationReport report = verify_scene(masks, scenes[i], vcfg);
    QaContext ctx{&scenes[i], &report, &lib, *domain};
    const std::set<QType> all{QType::Counting, QType::YesNo, QType::Color, QType::Material,
                              QType::Position};
    auto qa = generate_qa(ctx, all, root.split("qa").split(static_cast<std::uint64_t>(i)).state());
    pool.insert(pool.end(), qa.begin(), qa.end());
  }

  // The desk preset mirrors the full-set composition at 1/100 scale:
  // counting 332, yes/no 300, color+material 240.
  std::map<QType, double> mix{{QType::Counting, 332}, {QType::YesNo, 300},
                              {QType::Color, 120},    {QType::Material, 120}};
  std::size_t total = cfg.doc.value("total", 872);
  if (cfg.doc.contains("mix")) {
    mix.clear();
    for (const auto& [key, weight] : cfg.doc["mix"].items()) {
      const auto qt = qtype_from_string(key);
      if (!qt) throw std::runtime_error("bad qtype in mix: " + key);
      mix[*qt] = weight;
    }
  }
  double weight_sum = 0.0;
  for (const auto& [qt, w] : mix) weight_sum += w;
  for (auto& [qt, w] : mix) w /= weight_sum;
  const auto picked = select_balanced(pool, mix, total, root.split("balance").state());

  std::ostringstream body;
  for (const QATriplet& t : picked) body << to_line(t) << "\n";
  Stage stage(out);
  stage.write("qa.tsv", body.str());
  stage.write("manifest.txt",
              manifest_text("qa", cfg, seed, {"triplets = " + std::to_string(picked.size())}));
  stage.commit();
  return kExitOk;
}

int cmd_features(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const std::string mode = cfg.doc.value("mode", std::string("simulate"));
  const int dim = cfg.doc.value("dim", 64);
  Stage stage(out);
  const Rng root(seed);

  if (mode == "simulate") {
    const AssetLibrary lib = load_asset_library(cfg.doc.at("library"));
    const auto scenes = load_scene_dir(fs::path(std::string(cfg.doc.at("scenes"))));
    const DomainProfile profile = profile_from(cfg.doc.at("profile"), dim);
    std::ostringstream index;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      const FeatureRecord rec = simulate_features(
          scenes[i], profile, root.split("feat").split(static_cast<std::uint64_t>(i)).state(),
          lib.categories());
      stage.write(fs::path("store") / (rec.image_id + ".feat"), serialize_record(rec));
      index << rec.image_id << ".feat\n";
    }
    stage.write(fs::path("store") / "index.txt", index.str());
  } else if (mode == "ingest") {
    const AnnotatedScene meta = parse_annotated_scene(read_file(std::string(cfg.doc.at("annotated"))));
    std::vector<std::string> distractors;
    if (cfg.doc.contains("distractors"))
      distractors = cfg.doc["distractors"].get<std::vector<std::string>>();
    const IngestResult got = ingest_annotated_scene(meta, distractors, root.split("ingest").state());
    std::ostringstream body;
    for (const QATriplet& t : got.triplets) body << to_line(t) << "\n";
    stage.write("qa.tsv", body.str());
    stage.write("graph.txt", serialize(got.graph));
  } else {
    throw std::runtime_error("bad features mode: " + mode);
  }
  stage.write("manifest.txt", manifest_text("features", cfg, seed, {"mode = " + mode}));
  stage.commit();
  return kExitOk;
}

int cmd_dict(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const RecordStore store = load_store(cfg.doc.at("store"));
  const auto domain = domain_from_string(cfg.doc.value("domain", std::string("W")));
  if (!domain) throw std::runtime_error("bad domain");
  const FeatureDict dict = build_dictionary(store, *domain);

  std::ostringstream body;
  for (const auto& [label, refs] : dict.by_label) {
    body << label;
    for (const RegionRef& r : refs) body << " " << r.image_id << "#" << r.region_index;
    body << "\n";
  }
  Stage stage(out);
  stage.write("dict.txt", body.str());
  stage.write("manifest.txt",
              manifest_text("dict", cfg, seed,
                            {"labels = " + std::to_string(dict.by_label.size()),
                             "references = " + std::to_string(dict.reference_count())}));
  stage.commit();
  return kExitOk;
}

int cmd_swap(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const RecordStore store = load_store(cfg.doc.at("store"));
  const RecordStore source_store = load_store(cfg.doc.at("source"));
  const auto domain = domain_from_string(cfg.doc.value("source_domain", std::string("W")));
  if (!domain) throw std::runtime_error("bad domain");
  const FeatureDict dict = build_dictionary(source_store, *domain);
  SwapSource source;
  source.parts.push_back({&dict, &source_store});

  SwapConfig scfg;
  scfg.lambda = cfg.doc.value("lambda", 0.2);

  Stage stage(out);
  std::ostringstream index;
  const Rng root(seed);
  for (const FeatureRecord& rec : store.records) {
    scfg.seed = root.split("swap").split(rec.image_id).state();
    const FeatureRecord swapped = fswap(rec, source, scfg);
    stage.write(fs::path("store") / (swapped.image_id + ".feat"), serialize_record(swapped));
    index << swapped.image_id << ".feat\n";
  }
  stage.write(fs::path("store") / "index.txt", index.str());
  stage.write("manifest.txt", manifest_text("swap", cfg, seed,
                                            {"lambda = " + std::to_string(scfg.lambda)}));
  stage.commit();
  return kExitOk;
}

Eigen::MatrixXd stack_regions(const RecordStore& store) {
  std::vector<const Region*> regions;
  for (const FeatureRecord& r : store.records)
    for (const Region& g : r.regions) regions.push_back(&g);
  if (regions.empty()) throw std::runtime_error("empty store");
  Eigen::MatrixXd m(static_cast<int>(regions.size()), regions[0]->feature.size());
  for (int i = 0; i < m.rows(); ++i)
    m.row(i) = regions[static_cast<std::size_t>(i)]->feature.cast<double>().transpose();
  return m;
}

int cmd_mmd(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const Eigen::MatrixXd x = stack_regions(load_store(cfg.doc.at("store_a")));
  const Eigen::MatrixXd y = stack_regions(load_store(cfg.doc.at("store_b")));
  KernelConfig k;
  k.bandwidth = cfg.doc.value("bandwidth", 0.0);
  const double value = mmd(x, y, k);
  const double bw = k.bandwidth > 0.0 ? k.bandwidth : median_heuristic_bandwidth(x, y);

  std::ostringstream body;
  body << std::setprecision(17) << "[mmd]\nvalue = " << value << "\nbandwidth = " << bw
       << "\nrows_a = " << x.rows() << "\nrows_b = " << y.rows() << "\n";
  std::cout << body.str();
  Stage stage(out);
  stage.write("mmd.txt", body.str());
  stage.write("manifest.txt", manifest_text("mmd", cfg, seed));
  stage.commit();
  return kExitOk;
}

ToyDataset load_dataset(const json& doc) {
  ToyDataset ds;
  ds.name = doc.value("name", std::string("dataset"));
  const auto domain = domain_from_string(doc.value("domain", std::string("W")));
  if (!domain) throw std::runtime_error("bad domain");
  ds.domain = *domain;
  ds.triplets = load_qa_file(doc.at("qa"));
  ds.store = load_store(doc.at("store"));
  for (FeatureRecord& r : ds.store.records) r.domain = ds.domain;
  return ds;
}

TrainSettings settings_from(const json& doc, std::uint64_t seed,
                            const TrainSettings& base = TrainSettings{}) {
  TrainSettings s = base;
  s.seed = seed;
  if (doc.contains("method")) {
    const auto m = method_from_string(doc["method"]);
    if (!m) throw std::runtime_error("bad method: " + std::string(doc["method"]));
    s.method = *m;
  }
  s.model.embed = doc.value("embed", s.model.embed);
  s.model.hidden = doc.value("hidden", s.model.hidden);
  s.model.n_max = doc.value("n_max", s.model.n_max);
  s.model.epochs = doc.value("epochs", s.model.epochs);
  s.model.batch_size = doc.value("batch_size", s.model.batch_size);
  s.model.adam.lr = doc.value("lr", s.model.adam.lr);
  s.model.adam.weight_decay = doc.value("weight_decay", s.model.adam.weight_decay);
  s.swap.lambda = doc.value("lambda", s.swap.lambda);
  s.align.alpha = doc.value("alpha", s.align.alpha);
  s.align.beta = doc.value("beta", s.align.beta);
  s.align.hidden = doc.value("align_hidden", s.align.hidden);
  s.align.ae_epochs = doc.value("align_epochs", s.align.ae_epochs);
  s.di_token_budget = doc.value("di_tokens", s.di_token_budget);
  return s;
}

std::string serialize_model_meta(const ToyModel& model) {
  std::ostringstream out;
  out << "[model]\n";
  out << "method = " << to_string(model.method) << "\n";
  out << "feature_dim = " << model.feature_dim << "\n";
  out << "embed = " << model.cfg.embed << "\n";
  out << "hidden = " << model.cfg.hidden << "\n";
  out << "n_max = " << model.cfg.n_max << "\n";
  out << "domain_independent = " << (model.space.domain_independent ? 1 : 0) << "\n";
  if (model.mmd_aligner) {
    out << "aligner_in = " << model.mmd_aligner->real.encoder.first.w.value.cols() << "\n";
    out << "aligner_hidden = " << model.mmd_aligner->real.encoder.first.w.value.rows() << "\n";
  } else if (model.adv_aligner) {
    out << "aligner_in = " << model.adv_aligner->primary.encoder.first.w.value.cols() << "\n";
    out << "aligner_hidden = " << model.adv_aligner->primary.encoder.first.w.value.rows() << "\n";
  }
  std::vector<std::string> words(static_cast<std::size_t>(model.vocab.size()));
  for (const auto& [w, i] : model.vocab.index) words[static_cast<std::size_t>(i)] = w;
  for (const std::string& w : words) out << "word = " << w << "\n";
  for (const std::string& t : model.space.real_tokens) out << "real_token = " << t << "\n";
  for (const std::string& t : model.space.extension_tokens)
    out << "extension_token = " << t << "\n";
  return out.str();
}

ToyModel parse_model_meta(const std::string& text) {
  const auto sections = parse_sections(text);
  if (sections.size() != 1 || sections[0].name != "model")
    throw std::runtime_error("bad model file");
  const Section& s = sections[0];
  ToyModel model;
  const auto m = method_from_string(s.get("method"));
  if (!m) throw std::runtime_error("bad method in model file");
  model.method = *m;
  model.feature_dim = static_cast<int>(s.get_long("feature_dim"));
  model.cfg.embed = static_cast<int>(s.get_long("embed"));
  model.cfg.hidden = static_cast<int>(s.get_long("hidden"));
  model.cfg.n_max = static_cast<int>(s.get_long("n_max"));
  model.space.domain_independent = s.get_long("domain_independent") != 0;
  for (const auto& [key, value] : s.entries) {
    if (key == "word") model.vocab.index.emplace(value, model.vocab.size());
    if (key == "real_token") model.space.real_tokens.push_back(value);
    if (key == "extension_token") model.space.extension_tokens.push_back(value);
  }
  return model;
}

std::vector<Tensor*> model_checkpoint_params(ToyModel& model) {
  std::vector<Tensor*> params = model.params();
  if (model.mmd_aligner)
    for (Tensor* t : model.mmd_aligner->params()) params.push_back(t);
  if (model.adv_aligner)
    for (Tensor* t : model.adv_aligner->params()) params.push_back(t);
  return params;
}

int cmd_train(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  std::vector<ToyDataset> datasets;
  for (const json& d : cfg.doc.at("datasets")) datasets.push_back(load_dataset(d));
  std::vector<const ToyDataset*> refs;
  for (const ToyDataset& d : datasets) refs.push_back(&d);

  const TrainSettings settings = settings_from(cfg.doc, seed);
  TrainResult result = train(refs, settings);

  Stage stage(out);
  stage.write("model.txt", serialize_model_meta(result.model));
  {
    std::ostringstream curve;
    curve << std::setprecision(17) << "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
      curve << i << "," << result.loss_curve[i] << "\n";
    stage.write("loss_curve.csv", curve.str());
  }
  const fs::path ckpt = stage.staging / "model.ckpt";
  save_checkpoint(ckpt.string(), model_checkpoint_params(result.model));
  stage.staged.push_back("model.ckpt");
  stage.write("manifest.txt",
              manifest_text("train", cfg, seed,
                            {"steps = " + std::to_string(result.loss_curve.size()),
                             "method = " + std::string(to_string(settings.method))}));
  stage.commit();
  return kExitOk;
}

ToyModel load_model(const fs::path& dir) {
  const std::string meta = read_file(dir / "model.txt");
  ToyModel model = parse_model_meta(meta);
  model.init(0);
  const Section& s = parse_sections(meta)[0];
  if (s.has("aligner_in")) {
    const int in = static_cast<int>(s.get_long("aligner_in"));
    const int hidden = static_cast<int>(s.get_long("aligner_hidden"));
    Rng rng(0);
    if (model.method == TrainMethod::Mmd) {
      model.mmd_aligner = std::make_shared<MmdAlignModel>();
      model.mmd_aligner->has_w = true;
      model.mmd_aligner->has_h = false;
      model.mmd_aligner->init(in, hidden, rng);
    } else {
      model.adv_aligner = std::make_shared<AutoencoderPair>();
      model.adv_aligner->init(in, hidden, rng);
    }
  }
  load_checkpoint((dir / "model.ckpt").string(), model_checkpoint_params(model));
  return model;
}

int cmd_eval(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const fs::path model_dir = std::string(cfg.doc.at("model"));
  const ToyModel model = load_model(model_dir);
  const ToyDataset dataset = load_dataset(cfg.doc.at("dataset"));
  const EvalReport report = evaluate(model, dataset);

  const std::string body = serialize(report);
  std::cout << body;
  Stage stage(out);
  stage.write("report.txt", body);
  stage.write("manifest.txt", manifest_text("eval", cfg, seed));
  stage.commit();
  return kExitOk;
}

int cmd_experiment(const LoadedConfig& cfg, std::uint64_t seed, const fs::path& out) {
  const AssetLibrary lib = load_asset_library(cfg.doc.at("library"));
  const auto templates = load_templates(cfg.doc.at("templates"));

  ExperimentOptions opt;
  opt.train_real_scenes = cfg.doc.value("train_real_scenes", opt.train_real_scenes);
  opt.train_synth_scenes = cfg.doc.value("train_synth_scenes", opt.train_synth_scenes);
  opt.test_scenes = cfg.doc.value("test_scenes", opt.test_scenes);
  opt.feature_dim = cfg.doc.value("feature_dim", opt.feature_dim);
  opt.domain_gap = cfg.doc.value("domain_gap", opt.domain_gap);
  opt.offset_scale = cfg.doc.value("offset_scale", opt.offset_scale);
  opt.noise_sigma = cfg.doc.value("noise_sigma", opt.noise_sigma);
  opt.seeds = cfg.doc.value("seeds", opt.seeds);
  if (cfg.doc.contains("experiment_templates"))
    opt.template_ids = cfg.doc["experiment_templates"].get<std::vector<std::string>>();
  if (cfg.doc.contains("real_qtypes")) {
    opt.real_qtypes.clear();
    for (const json& q : cfg.doc["real_qtypes"]) {
      const auto qt = qtype_from_string(q);
      if (!qt) throw std::runtime_error("bad qtype: " + std::string(q));
      opt.real_qtypes.insert(*qt);
    }
  }
  opt.settings = settings_from(cfg.doc, seed, opt.settings);

  std::vector<TrainMethod> methods{TrainMethod::Simple, TrainMethod::FSwap};
  if (cfg.doc.contains("methods")) {
    methods.clear();
    for (const json& m : cfg.doc["methods"]) {
      const auto parsed = method_from_string(m);
      if (!parsed) throw std::runtime_error("bad method: " + std::string(m));
      methods.push_back(*parsed);
    }
  }

  const ExperimentData data =
      build_experiment_data(lib, templates, opt, Rng(seed).split("data").state());
  const auto results = run_experiment(data, methods, opt, Rng(seed).split("runs").state());

  const std::string table = results_table(results);
  std::cout << table;
  Stage stage(out);
  stage.write("results.txt", table);
  std::ostringstream reports;
  for (const MethodResult& r : results)
    for (std::size_t i = 0; i < r.per_seed.size(); ++i)
      reports << "# " << r.label << " seed " << i << "\n" << serialize(r.per_seed[i]);
  stage.write("per_seed.txt", reports.str());
  stage.write("manifest.txt", manifest_text("experiment", cfg, seed));
  stage.commit();
  return kExitOk;
}

void write_error_record(const fs::path& out, int code, const std::string& what) {
  std::error_code ec;
  fs::create_directories(out / "quarantine", ec);
  std::ofstream f(out / "quarantine" / "error.txt");
  if (f) f << "[error]\ncode = " << code << "\nmessage = " << what << "\n";
  std::cerr << "error\tcode=" << code << "\t" << what << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic VQA toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  app.add_option("--config", config_path, "config file (JSON)");
  app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
    seed_given = true;
  });
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--jobs", jobs, "worker count")->check(CLI::PositiveNumber);

  const std::vector<std::string> names{"generate", "qa", "features", "dict", "swap",
                                       "mmd",      "train", "eval", "experiment"};
  for (const std::string& n : names) app.add_subcommand(n);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  const fs::path out(out_dir);

  LoadedConfig cfg;
  try {
    if (config_path.empty()) throw std::runtime_error("--config is required");
    cfg = load_config(config_path);
    if (!seed_given) seed = cfg.doc.value("seed", 0ULL);
  } catch (const std::exception& e) {
    write_error_record(out, kExitConfig, e.what());
    return kExitConfig;
  }

  try {
    if (command == "generate") return cmd_generate(cfg, seed, out, jobs);
    if (command == "qa") return cmd_qa(cfg, seed, out);
    if (command == "features") return cmd_features(cfg, seed, out);
    if (command == "dict") return cmd_dict(cfg, seed, out);
    if (command == "swap") return cmd_swap(cfg, seed, out);
    if (command == "mmd") return cmd_mmd(cfg, seed, out);
    if (command == "train") return cmd_train(cfg, seed, out);
    if (command == "eval") return cmd_eval(cfg, seed, out);
    if (command == "experiment") return cmd_experiment(cfg, seed, out);
    write_error_record(out, kExitConfig, "unknown command");
    return kExitConfig;
  } catch (const GenerationExhaustedError& e) {
    write_error_record(out, kExitExhausted, e.what());
    return kExitExhausted;
  } catch (const RejectedSceneError& e) {
    write_error_record(out, kExitExhausted, e.what());
    return kExitExhausted;
  } catch (const DivergenceError& e) {
    write_error_record(out, kExitDiverged, e.what());
    return kExitDiverged;
  } catch (const std::exception& e) {
    write_error_record(out, kExitConfig, e.what());
    return kExitConfig;
  }
}
