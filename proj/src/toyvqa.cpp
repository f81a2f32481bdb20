#include "synthvqa/toyvqa.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "synthvqa/pipeline.hpp"
#include "synthvqa/rng.hpp"

namespace synthvqa {

// ---------------------------------------------------------------------------
// Answer space

std::optional<int> AnswerSpace::real_index(const std::string& token) const {
  const auto it = std::find(real_tokens.begin(), real_tokens.end(), token);
  if (it == real_tokens.end()) return std::nullopt;
  return static_cast<int>(it - real_tokens.begin());
}

std::optional<int> AnswerSpace::extension_index(const std::string& token) const {
  const auto it = std::find(extension_tokens.begin(), extension_tokens.end(), token);
  if (it == extension_tokens.end()) return std::nullopt;
  return static_cast<int>(real_tokens.size() + (it - extension_tokens.begin()));
}

std::optional<int> AnswerSpace::target_index(const std::string& answer, Domain d) const {
  if (domain_independent && d != Domain::R) {
    if (auto i = extension_index(answer)) return i;
  }
  return real_index(answer);
}

int AnswerSpace::eval_argmax(const Eigen::VectorXd& logits, Domain d) const {
  int limit = static_cast<int>(logits.size());
  if (domain_independent && d == Domain::R) limit = static_cast<int>(real_tokens.size());
  int best = 0;
  for (int i = 1; i < limit; ++i)
    if (logits[i] > logits[best]) best = i;
  return best;
}

const std::string& AnswerSpace::token(int index) const {
  const int n = static_cast<int>(real_tokens.size());
  if (index < n) return real_tokens[static_cast<std::size_t>(index)];
  return extension_tokens[static_cast<std::size_t>(index - n)];
}

AnswerSpace build_answer_space(const std::vector<std::string>& real_answers,
                               const std::vector<std::string>& synthetic_answers,
                               bool domain_independent, int di_token_budget) {
  if (real_answers.empty() && synthetic_answers.empty())
    throw ValidationError("answer space: no answers supplied");

  AnswerSpace space;
  space.domain_independent = domain_independent;

  std::set<std::string> real(real_answers.begin(), real_answers.end());
  std::set<std::string> synth(synthetic_answers.begin(), synthetic_answers.end());

  if (domain_independent) {
    if (static_cast<int>(synth.size()) > di_token_budget) {
      std::ostringstream msg;
      msg << "answer space: " << synth.size() << " distinct synthetic answers exceed the "
          << di_token_budget << "-token extension budget";
      throw CapacityError(msg.str());
    }
    space.real_tokens.assign(real.begin(), real.end());
    space.extension_tokens.assign(synth.begin(), synth.end());
  } else {
    real.insert(synth.begin(), synth.end());
    space.real_tokens.assign(real.begin(), real.end());
  }
  return space;
}

// ---------------------------------------------------------------------------
// Methods

const char* to_string(TrainMethod m) {
  switch (m) {
    case TrainMethod::Simple: return "simple";
    case TrainMethod::FSwap: return "fswap";
    case TrainMethod::Mmd: return "mmd";
    case TrainMethod::Adversarial: return "adversarial";
    case TrainMethod::DomainIndependent: return "domain_independent";
  }
  return "?";
}

std::optional<TrainMethod> method_from_string(const std::string& s) {
  if (s == "simple") return TrainMethod::Simple;
  if (s == "fswap") return TrainMethod::FSwap;
  if (s == "mmd") return TrainMethod::Mmd;
  if (s == "adversarial") return TrainMethod::Adversarial;
  if (s == "domain_independent") return TrainMethod::DomainIndependent;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Vocabulary

static std::vector<std::string> question_words(const std::string& question) {
  std::vector<std::string> words;
  std::string word;
  for (char c : question) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-') {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!word.empty()) {
      words.push_back(word);
      word.clear();
    }
  }
  if (!word.empty()) words.push_back(word);
  return words;
}

void Vocabulary::add_question(const std::string& question) {
  for (const std::string& w : question_words(question))
    index.emplace(w, static_cast<int>(index.size()));
}

std::vector<int> Vocabulary::encode(const std::string& question) const {
  std::vector<int> ids;
  for (const std::string& w : question_words(question)) {
    const auto it = index.find(w);
    if (it != index.end()) ids.push_back(it->second);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Model

void ToyModel::init(std::uint64_t seed) {
  Rng rng = Rng(seed).split("toy-model");
  word_emb.init("word_emb", vocab.size(), cfg.embed, rng, 0.1);
  feat_proj.init("feat_proj", feature_dim, cfg.embed, rng);
  fusion.init("fusion", 2 * cfg.embed, cfg.hidden, rng);
  head.init("head", cfg.hidden, space.size(), rng);
}

std::vector<Tensor*> ToyModel::params() {
  std::vector<Tensor*> p{&word_emb};
  for (Tensor* t : feat_proj.params()) p.push_back(t);
  for (Tensor* t : fusion.params()) p.push_back(t);
  for (Tensor* t : head.params()) p.push_back(t);
  return p;
}

Eigen::VectorXd ToyModel::pooled_feature(const FeatureRecord& record) const {
  const PaddedFeatures padded = pad_features(record, cfg.n_max);
  return padded.matrix.cast<double>().colwise().sum() / static_cast<double>(cfg.n_max);
}

Eigen::VectorXd ToyModel::encode_domain(const Eigen::VectorXd& pooled, Domain d) const {
  const Eigen::MatrixXd row = pooled.transpose();
  if (mmd_aligner) {
    const Autoencoder& ae = d == Domain::R  ? mmd_aligner->real
                            : d == Domain::W ? mmd_aligner->synth_w
                                             : mmd_aligner->synth_h;
    return ae.encoder.forward(row).row(0);
  }
  if (adv_aligner) {
    const Autoencoder& ae = d == Domain::R ? adv_aligner->primary : adv_aligner->twin;
    return ae.encoder.forward(row).row(0);
  }
  return pooled;
}

Eigen::VectorXd ToyModel::logits(const std::vector<int>& words,
                                 const Eigen::VectorXd& feature) const {
  Eigen::RowVectorXd q = Eigen::RowVectorXd::Zero(cfg.embed);
  for (int w : words) q += word_emb.value.row(w);
  if (!words.empty()) q /= static_cast<double>(words.size());

  const Eigen::RowVectorXd p = feat_proj.forward(feature.transpose()).row(0);
  Eigen::RowVectorXd x(2 * cfg.embed);
  x << q, p;
  const Eigen::RowVectorXd h = fusion.forward(x).cwiseMax(0.0).row(0);
  return head.forward(h).row(0).transpose();
}

std::string ToyModel::predict(const QATriplet& triplet, const FeatureRecord& record) const {
  const Eigen::VectorXd feature = encode_domain(pooled_feature(record), record.domain);
  const Eigen::VectorXd l = logits(vocab.encode(triplet.question), feature);
  return space.token(space.eval_argmax(l, triplet.domain));
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Example {
  const QATriplet* triplet = nullptr;
  const FeatureRecord* record = nullptr;
  int target = 0;
  int dataset = 0;
};

struct AlignedFeatures {
  // image_id -> feature as seen by feat_proj, per dataset.
  std::vector<std::map<std::string, Eigen::VectorXd>> by_dataset;
};

Eigen::MatrixXd stack_pooled(const ToyModel& model, const ToyDataset& ds) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(ds.store.records.size());
  for (const FeatureRecord& r : ds.store.records) rows.push_back(model.pooled_feature(r));
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<int>(rows.size()), rows[0].size());
  for (int i = 0; i < m.rows(); ++i) m.row(i) = rows[static_cast<std::size_t>(i)];
  return m;
}

Eigen::MatrixXd sample_rows(const Eigen::MatrixXd& x, int n, Rng& rng) {
  Eigen::MatrixXd out(n, x.cols());
  for (int i = 0; i < n; ++i)
    out.row(i) = x.row(static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(x.rows()))));
  return out;
}

// Stage one of the two-stage methods: fit the alignment encoders on pooled
// features, then freeze them for the answer training below.
void fit_aligners(ToyModel& model, const std::vector<const ToyDataset*>& datasets,
                  const TrainSettings& settings, int pooled_dim) {
  std::vector<Eigen::MatrixXd> real_parts, synth_parts;
  for (const ToyDataset* ds : datasets) {
    Eigen::MatrixXd m = stack_pooled(model, *ds);
    if (m.rows() == 0) continue;
    (ds->domain == Domain::R ? real_parts : synth_parts).push_back(std::move(m));
  }
  auto vcat = [](const std::vector<Eigen::MatrixXd>& parts) {
    long rows = 0;
    for (const auto& p : parts) rows += p.rows();
    if (parts.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd out(rows, parts[0].cols());
    long at = 0;
    for (const auto& p : parts) {
      out.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return out;
  };
  const Eigen::MatrixXd xr = vcat(real_parts);
  const Eigen::MatrixXd xs = vcat(synth_parts);
  if (xr.rows() == 0 || xs.rows() == 0)
    throw ValidationError("alignment methods need both a real and a synthetic dataset");

  AlignConfig cfg = settings.align;
  Rng rng = Rng(settings.seed).split("aligner");
  Adam opt{cfg.adam};
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>((xr.rows() + cfg.batch_size - 1) / cfg.batch_size));
  const int total = cfg.ae_epochs * steps_per_epoch;
  const int batch = std::min<int>(cfg.batch_size, static_cast<int>(std::min(xr.rows(), xs.rows())));

  if (settings.method == TrainMethod::Mmd) {
    auto aligner = std::make_shared<MmdAlignModel>();
    aligner->has_w = true;
    aligner->has_h = false;
    Rng init_rng = rng.split("init");
    aligner->init(pooled_dim, cfg.hidden, init_rng);
    const Eigen::MatrixXd empty_h(0, pooled_dim);
    for (int step = 0; step < total; ++step) {
      Rng draw = rng.split("batch").split(static_cast<std::uint64_t>(step));
      const Eigen::MatrixXd br = sample_rows(xr, batch, draw);
      const Eigen::MatrixXd bw = sample_rows(xs, batch, draw);
      mmd_align_train_step(br, bw, empty_h, *aligner, cfg, opt);
    }
    model.mmd_aligner = std::move(aligner);
  } else {
    auto aligner = std::make_shared<AutoencoderPair>();
    Rng init_rng = rng.split("init");
    aligner->init(pooled_dim, cfg.hidden, init_rng);
    for (int step = 0; step < total; ++step) {
      Rng draw = rng.split("batch").split(static_cast<std::uint64_t>(step));
      const Eigen::MatrixXd br = sample_rows(xr, batch, draw);
      const Eigen::MatrixXd bs = sample_rows(xs, batch, draw);
      const double p = total > 1 ? static_cast<double>(step) / (total - 1) : 1.0;
      grl_train_step(br, bs, *aligner, cfg, opt, p);
    }
    model.adv_aligner = std::move(aligner);
  }
  model.feature_dim = cfg.hidden;
}

}  // namespace

TrainResult train(const std::vector<const ToyDataset*>& datasets, const TrainSettings& settings) {
  if (datasets.empty()) throw ValidationError("train: no datasets");

  TrainResult result;
  ToyModel& model = result.model;
  model.cfg = settings.model;
  model.method = settings.method;

  std::vector<std::string> real_answers, synth_answers;
  for (const ToyDataset* ds : datasets) {
    for (const QATriplet& t : ds->triplets) {
      (ds->domain == Domain::R ? real_answers : synth_answers).push_back(t.answer);
      model.vocab.add_question(t.question);
    }
  }
  model.space = build_answer_space(real_answers, synth_answers,
                                   settings.method == TrainMethod::DomainIndependent,
                                   settings.di_token_budget);

  int pooled_dim = 0;
  for (const ToyDataset* ds : datasets)
    for (const FeatureRecord& r : ds->store.records) pooled_dim = std::max(pooled_dim, r.dim());
  if (pooled_dim == 0) throw ValidationError("train: no feature records");
  model.feature_dim = pooled_dim;

  const bool aligned =
      settings.method == TrainMethod::Mmd || settings.method == TrainMethod::Adversarial;
  if (aligned) fit_aligners(model, datasets, settings, pooled_dim);
  model.init(settings.seed);

  // F-SWAP swaps real-record regions for same-label synthetic features, so the
  // dictionaries come from the non-real datasets.
  std::vector<FeatureDict> dicts;
  SwapSource swap_source;
  if (settings.method == TrainMethod::FSwap) {
    for (const ToyDataset* ds : datasets)
      if (ds->domain != Domain::R) dicts.push_back(build_dictionary(ds->store, ds->domain));
    std::size_t refs = 0;
    std::size_t di = 0;
    for (const ToyDataset* ds : datasets)
      if (ds->domain != Domain::R) {
        refs += dicts[di].reference_count();
        swap_source.parts.push_back({&dicts[di++], &ds->store});
      }
    if (refs == 0) throw ValidationError("fswap: empty synthetic dictionaries");
  }

  std::vector<Example> examples;
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const ToyDataset* ds = datasets[d];
    for (const QATriplet& t : ds->triplets) {
      const FeatureRecord* rec = ds->store.find(t.image_id);
      if (!rec) throw LookupError("train: no feature record for image " + t.image_id);
      const auto target = model.space.target_index(t.answer, ds->domain);
      if (!target) throw LookupError("train: answer not in the answer space: " + t.answer);
      examples.push_back({&t, rec, *target, static_cast<int>(d)});
    }
  }
  if (examples.empty()) throw ValidationError("train: no training examples");

  // Pre-encode features for the frozen-aligner methods; plain methods pool on
  // the fly so F-SWAP can perturb per epoch.
  std::map<const FeatureRecord*, Eigen::VectorXd> encoded;
  if (aligned)
    for (const Example& e : examples)
      if (!encoded.count(e.record))
        encoded[e.record] = model.encode_domain(model.pooled_feature(*e.record),
                                                e.record->domain);

  Rng order_rng = Rng(settings.seed).split("epoch-order");
  Rng swap_rng = Rng(settings.seed).split("swap-seeds");
  Adam opt{model.cfg.adam};
  const int batch_size = model.cfg.batch_size;
  long step_index = 0;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < model.cfg.epochs; ++epoch) {
    Rng shuffle = order_rng.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle.uniform_u64(i);
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const int bs = static_cast<int>(std::min<std::size_t>(batch_size, order.size() - start));

      Eigen::MatrixXd feats(bs, model.feature_dim);
      std::vector<std::vector<int>> word_lists(static_cast<std::size_t>(bs));
      Eigen::VectorXi targets(bs);
      for (int b = 0; b < bs; ++b) {
        const Example& e = examples[order[start + static_cast<std::size_t>(b)]];
        targets[b] = e.target;
        word_lists[static_cast<std::size_t>(b)] = model.vocab.encode(e.triplet->question);
        if (aligned) {
          feats.row(b) = encoded.at(e.record);
        } else if (settings.method == TrainMethod::FSwap && e.record->domain == Domain::R) {
          SwapConfig sc = settings.swap;
          sc.seed = swap_rng.split(static_cast<std::uint64_t>(epoch))
                        .split(e.record->image_id)
                        .state();
          feats.row(b) = model.pooled_feature(fswap(*e.record, swap_source, sc));
        } else {
          feats.row(b) = model.pooled_feature(*e.record);
        }
      }

      // Forward.
      Eigen::MatrixXd q = Eigen::MatrixXd::Zero(bs, model.cfg.embed);
      for (int b = 0; b < bs; ++b) {
        const auto& ws = word_lists[static_cast<std::size_t>(b)];
        for (int w : ws) q.row(b) += model.word_emb.value.row(w);
        if (!ws.empty()) q.row(b) /= static_cast<double>(ws.size());
      }
      const Eigen::MatrixXd proj = model.feat_proj.forward(feats);
      Eigen::MatrixXd x(bs, 2 * model.cfg.embed);
      x << q, proj;
      const Eigen::MatrixXd pre = model.fusion.forward(x);
      const Eigen::MatrixXd hidden = pre.cwiseMax(0.0);
      const Eigen::MatrixXd logits = model.head.forward(hidden);

      // Softmax cross-entropy, mean over the batch.
      Eigen::MatrixXd probs = logits;
      double loss = 0.0;
      for (int b = 0; b < bs; ++b) {
        const double mx = logits.row(b).maxCoeff();
        const Eigen::ArrayXd ex = (logits.row(b).array() - mx).exp();
        probs.row(b) = (ex / ex.sum()).matrix();
        loss -= std::log(std::max(probs(b, targets[b]), 1e-300));
      }
      loss /= bs;
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "training diverged at step " << step_index << " (loss not finite)";
        throw DivergenceError(msg.str());
      }
      result.loss_curve.push_back(loss);

      // Backward.
      for (Tensor* t : model.params()) t->zero_grad();
      Eigen::MatrixXd dlogits = probs;
      for (int b = 0; b < bs; ++b) dlogits(b, targets[b]) -= 1.0;
      dlogits /= static_cast<double>(bs);
      const Eigen::MatrixXd dhidden = model.head.backward(hidden, dlogits);
      const Eigen::MatrixXd dpre =
          dhidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
      const Eigen::MatrixXd dx = model.fusion.backward(x, dpre);
      const Eigen::MatrixXd dq = dx.leftCols(model.cfg.embed);
      model.feat_proj.backward(feats, dx.rightCols(model.cfg.embed));
      for (int b = 0; b < bs; ++b) {
        const auto& ws = word_lists[static_cast<std::size_t>(b)];
        if (ws.empty()) continue;
        const double inv = 1.0 / static_cast<double>(ws.size());
        for (int w : ws) model.word_emb.grad.row(w) += inv * dq.row(b);
      }

      opt.step(model.params());
      ++step_index;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport evaluate(const ToyModel& model, const ToyDataset& dataset) {
  EvalReport report;
  int hit_numeric = 0, hit_others = 0;
  for (const QATriplet& t : dataset.triplets) {
    const FeatureRecord* rec = dataset.store.find(t.image_id);
    if (!rec) throw LookupError("evaluate: no feature record for image " + t.image_id);
    const bool correct = model.predict(t, *rec) == t.answer;
    if (t.qtype == QType::Counting) {
      ++report.n_numeric;
      hit_numeric += correct;
    } else {
      ++report.n_others;
      hit_others += correct;
    }
  }
  if (report.n_numeric > 0) report.numeric = 100.0 * hit_numeric / report.n_numeric;
  if (report.n_others > 0) report.others = 100.0 * hit_others / report.n_others;
  const int total = report.n_numeric + report.n_others;
  if (total > 0) report.overall = 100.0 * (hit_numeric + hit_others) / total;
  return report;
}

std::string serialize(const EvalReport& report) {
  std::ostringstream out;
  out << std::setprecision(17) << "[report]\n";
  if (report.numeric) out << "numeric = " << *report.numeric << "\n";
  if (report.others) out << "others = " << *report.others << "\n";
  if (report.overall) out << "overall = " << *report.overall << "\n";
  out << "n_numeric = " << report.n_numeric << "\n";
  out << "n_others = " << report.n_others << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Experiment harness

namespace {

void build_split(ToyDataset& out, const AssetLibrary& lib,
                 const std::vector<SceneTemplate>& templates, const std::set<QType>& qtypes,
                 int scenes, const DomainProfile& profile, int per_scene, Rng& rng) {
  const std::vector<std::string> vocab = lib.categories();
  int made = 0;
  for (int i = 0; made < scenes && i < 4 * scenes + 16; ++i) {
    const SceneTemplate& tpl = templates[static_cast<std::size_t>(i) % templates.size()];
    std::ostringstream id;
    id << out.name << "-" << std::setw(4) << std::setfill('0') << i;
    Rng scene_rng = rng.split("scene").split(static_cast<std::uint64_t>(i));
    GeneratedScene gen;
    try {
      gen = generate_scene(lib, templates, tpl.id, id.str(), scene_rng.state());
    } catch (const GenerationExhaustedError&) {
      continue;  // skip templates that refuse to settle under this seed
    }
    QaContext ctx{&gen.scene, &gen.report, &lib, out.domain};
    std::vector<QATriplet> qa =
        generate_qa(ctx, qtypes, rng.split("qa").split(static_cast<std::uint64_t>(i)).state());
    if (qa.empty()) continue;
    Rng pick = rng.split("pick").split(static_cast<std::uint64_t>(i));
    for (std::size_t k = qa.size(); k > 1; --k) {
      const std::size_t j = pick.uniform_u64(k);
      std::swap(qa[k - 1], qa[j]);
    }
    if (static_cast<int>(qa.size()) > per_scene) qa.resize(static_cast<std::size_t>(per_scene));
    for (QATriplet& t : qa) {
      t.split = out.name;
      out.triplets.push_back(std::move(t));
    }
    FeatureRecord rec = simulate_features(
        gen.scene, profile, rng.split("feat").split(static_cast<std::uint64_t>(i)).state(), vocab);
    rec.domain = out.domain;
    out.store.records.push_back(std::move(rec));
    ++made;
  }
  if (made < scenes) throw GenerationExhaustedError("experiment split " + out.name + " starved");
}

}  // namespace

ExperimentData build_experiment_data(const AssetLibrary& lib,
                                     const std::vector<SceneTemplate>& templates,
                                     const ExperimentOptions& opt, std::uint64_t seed) {
  const Rng root(seed);
  ExperimentData data;

  std::vector<SceneTemplate> pool;
  if (opt.template_ids.empty()) {
    pool = templates;
  } else {
    for (const std::string& id : opt.template_ids) {
      const auto it = std::find_if(templates.begin(), templates.end(),
                                   [&](const SceneTemplate& t) { return t.id == id; });
      if (it == templates.end()) throw LookupError("unknown template '" + id + "'");
      pool.push_back(*it);
    }
  }

  const DomainProfile real_profile =
      DomainProfile::identity(Domain::R, opt.feature_dim);
  DomainProfile synth_profile = DomainProfile::partial_rotation(
      Domain::W, opt.feature_dim, root.split("profile").state(), opt.domain_gap,
      opt.offset_scale, opt.noise_sigma, 0.0);

  std::set<QType> no_counting = opt.real_qtypes;
  no_counting.erase(QType::Counting);
  const std::set<QType> counting_only{QType::Counting};
  const std::set<QType> all{QType::Counting, QType::YesNo, QType::Color, QType::Material,
                            QType::Position};

  data.real_train.name = "real-train";
  data.real_train.domain = Domain::R;
  Rng r1 = root.split("real-train");
  build_split(data.real_train, lib, pool, no_counting, opt.train_real_scenes, real_profile,
              8, r1);

  data.synth_train.name = "synth-train";
  data.synth_train.domain = Domain::W;
  Rng r2 = root.split("synth-train");
  build_split(data.synth_train, lib, pool, counting_only, opt.train_synth_scenes,
              synth_profile, 8, r2);

  data.real_test.name = "real-test";
  data.real_test.domain = Domain::R;
  Rng r3 = root.split("real-test");
  build_split(data.real_test, lib, pool, all, opt.test_scenes, real_profile, 10, r3);
  return data;
}

double MethodResult::mean_numeric() const {
  double s = 0.0;
  int n = 0;
  for (const EvalReport& r : per_seed)
    if (r.numeric) {
      s += *r.numeric;
      ++n;
    }
  return n ? s / n : 0.0;
}

double MethodResult::mean_others() const {
  double s = 0.0;
  int n = 0;
  for (const EvalReport& r : per_seed)
    if (r.others) {
      s += *r.others;
      ++n;
    }
  return n ? s / n : 0.0;
}

std::vector<MethodResult> run_experiment(const ExperimentData& data,
                                         const std::vector<TrainMethod>& methods,
                                         const ExperimentOptions& opt, std::uint64_t seed) {
  const Rng root(seed);
  std::vector<MethodResult> results;

  auto run = [&](const std::string& label, const std::vector<const ToyDataset*>& sets,
                 TrainMethod method) {
    MethodResult mr;
    mr.label = label;
    for (int s = 0; s < opt.seeds; ++s) {
      TrainSettings settings = opt.settings;
      settings.method = method;
      settings.seed = root.split(label).split(static_cast<std::uint64_t>(s)).state();
      const TrainResult trained = train(sets, settings);
      mr.per_seed.push_back(evaluate(trained.model, data.real_test));
    }
    results.push_back(std::move(mr));
  };

  run("baseline", {&data.real_train}, TrainMethod::Simple);
  for (TrainMethod m : methods)
    run(to_string(m), {&data.real_train, &data.synth_train}, m);
  return results;
}

std::string results_table(const std::vector<MethodResult>& results) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "method" << std::right << std::setw(10) << "numeric"
      << std::setw(10) << "others" << std::setw(8) << "seeds" << "\n";
  out << std::string(48, '-') << "\n";
  out << std::fixed << std::setprecision(2);
  for (const MethodResult& r : results) {
    out << std::left << std::setw(20) << r.label << std::right << std::setw(10)
        << r.mean_numeric() << std::setw(10) << r.mean_others() << std::setw(8)
        << r.per_seed.size() << "\n";
  }
  return out.str();
}

}  // namespace synthvqa
