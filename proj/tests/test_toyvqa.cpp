#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "synthvqa/rng.hpp"
#include "synthvqa/toyvqa.hpp"

using namespace synthvqa;

namespace {
const std::string kDataDir = SYNTHVQA_DATA_DIR;

// Tiny linearly separable task: two feature prototypes, two answers.
ToyDataset separable_dataset(const std::string& name, Domain domain, int n, int dim,
                             std::uint64_t seed) {
  Rng rng(seed);
  ToyDataset ds;
  ds.name = name;
  ds.domain = domain;
  for (int i = 0; i < n; ++i) {
    const bool hot = rng.bernoulli(0.5);
    FeatureRecord rec;
    rec.image_id = name + "-" + std::to_string(i);
    rec.domain = domain;
    Region reg;
    reg.feature = Eigen::VectorXf::Zero(dim);
    reg.feature[hot ? 0 : 1] = 4.0f;
    for (int j = 2; j < dim; ++j) reg.feature[j] = static_cast<float>(rng.normal(0.0, 0.05));
    reg.pseudo_label = hot ? "lamp" : "mug";
    rec.regions.push_back(std::move(reg));
    ds.store.records.push_back(std::move(rec));

    QATriplet t;
    t.image_id = name + "-" + std::to_string(i);
    t.question = "Is there a lamp in the picture?";
    t.answer = hot ? "yes" : "no";
    t.qtype = QType::YesNo;
    t.domain = domain;
    ds.triplets.push_back(std::move(t));
  }
  return ds;
}
}  // namespace

TEST_CASE("build_answer_space keeps duplicated tokens when domain-independent") {
  const AnswerSpace s =
      build_answer_space({"1", "2", "yes"}, {"2", "red"}, /*domain_independent=*/true);
  CHECK(s.size() == 5);  // "2" appears as a real token and an extension token
  CHECK(s.real_tokens.size() == 3);
  CHECK(s.extension_tokens.size() == 2);
  CHECK(s.domain_independent);

  const AnswerSpace u =
      build_answer_space({"1", "2", "yes"}, {"2", "red"}, /*domain_independent=*/false);
  CHECK(u.size() == 4);  // union
  CHECK(u.extension_tokens.empty());
}

TEST_CASE("answer space capacity errors past the extension budget") {
  std::vector<std::string> synth;
  for (int i = 0; i < 120; ++i) synth.push_back("tok-" + std::to_string(i));
  CHECK_THROWS_AS((void)build_answer_space({"yes"}, synth, true, 100), CapacityError);
  CHECK_NOTHROW((void)build_answer_space({"yes"}, synth, false, 100));
}

TEST_CASE("evaluation argmax never returns an extension token on real data") {
  const AnswerSpace s = build_answer_space({"no", "yes"}, {"3", "7"}, true);
  // Logits favor an extension index; the masked argmax must pick a real one.
  Eigen::VectorXd logits(s.size());
  logits << 0.1, 0.2, 5.0, 6.0;
  const int idx = s.eval_argmax(logits, Domain::R);
  CHECK(idx < static_cast<int>(s.real_tokens.size()));
  CHECK(s.token(idx) == "yes");

  const int free_idx = s.eval_argmax(logits, Domain::W);
  CHECK(s.token(free_idx) == "7");
}

TEST_CASE("training reaches 100% on a separable two-answer task") {
  const ToyDataset ds = separable_dataset("sep", Domain::R, 96, 8, 5);
  TrainSettings settings;
  settings.method = TrainMethod::Simple;
  settings.model.epochs = 30;
  settings.model.embed = 8;
  settings.model.hidden = 16;
  settings.seed = 3;
  const TrainResult result = train({&ds}, settings);
  const EvalReport report = evaluate(result.model, ds);
  REQUIRE(report.others.has_value());
  CHECK(*report.others == doctest::Approx(100.0));
  CHECK(result.loss_curve.size() > 10);
  // Loss decreases overall across training.
  CHECK(result.loss_curve.back() < result.loss_curve.front());
}

TEST_CASE("lambda 0 fswap training matches simple step for step") {
  const ToyDataset real = separable_dataset("r", Domain::R, 64, 8, 7);
  const ToyDataset synth = separable_dataset("w", Domain::W, 64, 8, 8);

  TrainSettings simple;
  simple.method = TrainMethod::Simple;
  simple.model.epochs = 5;
  simple.seed = 11;

  TrainSettings fswap = simple;
  fswap.method = TrainMethod::FSwap;
  fswap.swap.lambda = 0.0;

  const TrainResult a = train({&real, &synth}, simple);
  const TrainResult b = train({&real, &synth}, fswap);
  REQUIRE(a.loss_curve.size() == b.loss_curve.size());
  for (std::size_t i = 0; i < a.loss_curve.size(); ++i)
    CHECK(a.loss_curve[i] == b.loss_curve[i]);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const ToyDataset ds = separable_dataset("det", Domain::R, 48, 8, 21);
  TrainSettings settings;
  settings.model.epochs = 8;
  settings.seed = 4;
  const TrainResult a = train({&ds}, settings);
  const TrainResult b = train({&ds}, settings);
  CHECK(a.loss_curve == b.loss_curve);
  const EvalReport ra = evaluate(a.model, ds);
  const EvalReport rb = evaluate(b.model, ds);
  CHECK(serialize(ra) == serialize(rb));
}

TEST_CASE("evaluate splits numeric and others and weights the overall") {
  ToyDataset ds = separable_dataset("mix", Domain::R, 40, 8, 9);
  // Relabel some questions as counting so both splits are populated.
  for (std::size_t i = 0; i < ds.triplets.size(); i += 2) {
    ds.triplets[i].qtype = QType::Counting;
    ds.triplets[i].question = "How many lamps are there?";
    ds.triplets[i].answer = ds.triplets[i].answer == "yes" ? "1" : "0";
  }
  TrainSettings settings;
  settings.model.epochs = 25;
  settings.seed = 2;
  const TrainResult result = train({&ds}, settings);
  const EvalReport report = evaluate(result.model, ds);
  REQUIRE(report.numeric.has_value());
  REQUIRE(report.others.has_value());
  REQUIRE(report.overall.has_value());
  const double recomputed =
      (report.n_numeric * *report.numeric + report.n_others * *report.others) /
      (report.n_numeric + report.n_others);
  CHECK(*report.overall == doctest::Approx(recomputed).epsilon(1e-12));
}

TEST_CASE("empty splits are reported as absent") {
  const ToyDataset ds = separable_dataset("yn", Domain::R, 20, 8, 13);
  TrainSettings settings;
  settings.model.epochs = 2;
  settings.seed = 1;
  const TrainResult result = train({&ds}, settings);
  const EvalReport report = evaluate(result.model, ds);
  CHECK_FALSE(report.numeric.has_value());
  CHECK(report.others.has_value());
}

TEST_CASE("all five training methods run and evaluate") {
  const ToyDataset real = separable_dataset("mr", Domain::R, 48, 8, 31);
  const ToyDataset synth = separable_dataset("mw", Domain::W, 48, 8, 32);
  for (const TrainMethod m :
       {TrainMethod::Simple, TrainMethod::FSwap, TrainMethod::Mmd, TrainMethod::Adversarial,
        TrainMethod::DomainIndependent}) {
    TrainSettings settings;
    settings.method = m;
    settings.model.epochs = 4;
    settings.align.ae_epochs = 3;
    settings.seed = 6;
    const TrainResult result = train({&real, &synth}, settings);
    const EvalReport report = evaluate(result.model, real);
    REQUIRE(report.others.has_value());
    CHECK(*report.others >= 0.0);
    CHECK(*report.others <= 100.0);
  }
}

TEST_CASE("method names round-trip") {
  for (const TrainMethod m :
       {TrainMethod::Simple, TrainMethod::FSwap, TrainMethod::Mmd, TrainMethod::Adversarial,
        TrainMethod::DomainIndependent}) {
    const auto back = method_from_string(to_string(m));
    REQUIRE(back.has_value());
    CHECK(*back == m);
  }
  CHECK_FALSE(method_from_string("warp-drive").has_value());
}

TEST_CASE("experiment data splits respect the question-type recipe") {
  const AssetLibrary lib = load_asset_library(kDataDir + "/library.txt");
  const auto templates = load_templates(kDataDir + "/templates.txt");
  ExperimentOptions opt;
  opt.train_real_scenes = 6;
  opt.train_synth_scenes = 6;
  opt.test_scenes = 4;
  opt.seeds = 1;
  const ExperimentData data = build_experiment_data(lib, templates, opt, 77);

  CHECK(data.real_train.domain == Domain::R);
  CHECK(data.synth_train.domain == Domain::W);
  for (const auto& t : data.real_train.triplets) CHECK(t.qtype != QType::Counting);
  for (const auto& t : data.synth_train.triplets) CHECK(t.qtype == QType::Counting);
  bool test_has_counting = false;
  for (const auto& t : data.real_test.triplets)
    test_has_counting |= t.qtype == QType::Counting;
  CHECK(test_has_counting);
  CHECK_FALSE(data.real_train.store.records.empty());
}

TEST_CASE("results table lists one row per method") {
  MethodResult r;
  r.label = "simple";
  EvalReport rep;
  rep.numeric = 50.0;
  rep.others = 60.0;
  rep.n_numeric = 10;
  rep.n_others = 10;
  r.per_seed.push_back(rep);
  const std::string table = results_table({r});
  CHECK(table.find("simple") != std::string::npos);
  CHECK(table.find("50.00") != std::string::npos);
}
