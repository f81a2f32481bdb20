#ifndef SYNTHVQA_TOYVQA_HPP
#define SYNTHVQA_TOYVQA_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "synthvqa/align.hpp"
#include "synthvqa/features.hpp"
#include "synthvqa/qa.hpp"

namespace synthvqa {

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Answer space

struct AnswerSpace {
  std::vector<std::string> real_tokens;
  std::vector<std::string> extension_tokens;  // synthetic-only classes
  bool domain_independent = false;

  int size() const { return static_cast<int>(real_tokens.size() + extension_tokens.size()); }
  std::optional<int> real_index(const std::string& token) const;
  std::optional<int> extension_index(const std::string& token) const;
  // Training target: synthetic answers map to extension indices when the
  // domain-independent split is on.
  std::optional<int> target_index(const std::string& answer, Domain d) const;
  // Argmax over the logits; real-domain evaluation never returns an
  // extension token.
  int eval_argmax(const Eigen::VectorXd& logits, Domain d) const;
  const std::string& token(int index) const;
};

AnswerSpace build_answer_space(const std::vector<std::string>& real_answers,
                               const std::vector<std::string>& synthetic_answers,
                               bool domain_independent, int di_token_budget = 100);

// ---------------------------------------------------------------------------
// Datasets

struct ToyDataset {
  std::string name;
  Domain domain = Domain::R;
  std::vector<QATriplet> triplets;
  RecordStore store;  // one record per distinct image_id
};

enum class TrainMethod { Simple, FSwap, Mmd, Adversarial, DomainIndependent };

const char* to_string(TrainMethod m);
std::optional<TrainMethod> method_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Model

struct ToyModelConfig {
  int embed = 32;
  int hidden = 64;
  int n_max = 32;  // pooling denominator / padding rows
  int epochs = 40;
  int batch_size = 32;
  AdamConfig adam{.lr = 1.5e-3, .beta1 = 0.9, .beta2 = 0.98, .eps = 1e-9, .weight_decay = 1e-4};
};

struct Vocabulary {
  std::map<std::string, int> index;

  void add_question(const std::string& question);
  std::vector<int> encode(const std::string& question) const;  // unknown words dropped
  int size() const { return static_cast<int>(index.size()); }
};

struct ToyModel {
  ToyModelConfig cfg;
  Vocabulary vocab;
  AnswerSpace space;
  int feature_dim = 0;  // dim seen by feat_proj (latent dim when aligned)
  TrainMethod method = TrainMethod::Simple;

  Tensor word_emb;  // vocab x embed
  Dense feat_proj;  // feature_dim -> embed
  Dense fusion;     // 2*embed -> hidden
  Dense head;       // hidden -> answer space

  // Feature encoders from the two-stage alignment methods, applied to pooled
  // features before feat_proj.
  std::shared_ptr<MmdAlignModel> mmd_aligner;
  std::shared_ptr<AutoencoderPair> adv_aligner;

  void init(std::uint64_t seed);
  std::vector<Tensor*> params();

  // Mean pooling over n_max slots, so the sum (and with it object counts)
  // stays linearly decodable.
  Eigen::VectorXd pooled_feature(const FeatureRecord& record) const;
  Eigen::VectorXd encode_domain(const Eigen::VectorXd& pooled, Domain d) const;
  Eigen::VectorXd logits(const std::vector<int>& words, const Eigen::VectorXd& feature) const;
  std::string predict(const QATriplet& triplet, const FeatureRecord& record) const;
};

struct TrainSettings {
  TrainMethod method = TrainMethod::Simple;
  ToyModelConfig model;
  SwapConfig swap;       // for FSwap
  AlignConfig align;     // for Mmd / Adversarial stage 1
  int di_token_budget = 100;
  std::uint64_t seed = 0;
};

struct TrainResult {
  ToyModel model;
  std::vector<double> loss_curve;
};

// Mini-batch training over the union of the datasets. The first dataset with
// domain R supplies the real answer tokens. Throws DivergenceError on
// non-finite loss.
TrainResult train(const std::vector<const ToyDataset*>& datasets, const TrainSettings& settings);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  std::optional<double> numeric;  // percentage on counting questions
  std::optional<double> others;
  std::optional<double> overall;
  int n_numeric = 0, n_others = 0;
};

EvalReport evaluate(const ToyModel& model, const ToyDataset& dataset);
std::string serialize(const EvalReport& report);

// ---------------------------------------------------------------------------
// Two-domain experiment harness

struct ExperimentOptions {
  int train_real_scenes = 160;
  int train_synth_scenes = 400;
  int test_scenes = 64;
  int feature_dim = 64;
  double domain_gap = 0.05;
  // The synthetic profile's per-image style offset. Large enough that a model
  // trained naively on synthetic counting absorbs it into its counting
  // biases and miscounts once it is absent.
  double offset_scale = 40.0;
  double noise_sigma = 0.01;
  int seeds = 5;
  // Templates to draw scenes from; empty means all. Counting transfer needs
  // templates with a variable-count node.
  std::vector<std::string> template_ids{"table-with-small-objects", "outdoor-cluster"};
  // Question types for the real-domain training split (never counting; the
  // counting skill must come from the synthetic split).
  std::set<QType> real_qtypes{QType::YesNo};
  // Transfer through the shared feature projection only appears once the
  // real task is trained to convergence, hence the long default schedule.
  TrainSettings settings = [] {
    TrainSettings s;
    s.model.hidden = 64;
    s.model.epochs = 240;
    s.model.adam.lr = 3e-3;
    return s;
  }();
};

struct ExperimentData {
  ToyDataset real_train;   // no counting questions
  ToyDataset synth_train;  // counting questions only
  ToyDataset real_test;    // all question types
};

ExperimentData build_experiment_data(const AssetLibrary& lib,
                                     const std::vector<SceneTemplate>& templates,
                                     const ExperimentOptions& opt, std::uint64_t seed);

struct MethodResult {
  std::string label;
  std::vector<EvalReport> per_seed;

  double mean_numeric() const;
  double mean_others() const;
};

// Runs baseline (real-only) plus the requested methods over opt.seeds
// training seeds on shared data.
std::vector<MethodResult> run_experiment(const ExperimentData& data,
                                         const std::vector<TrainMethod>& methods,
                                         const ExperimentOptions& opt, std::uint64_t seed);

std::string results_table(const std::vector<MethodResult>& results);

}  // namespace synthvqa

#endif
