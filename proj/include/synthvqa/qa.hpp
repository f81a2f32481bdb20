#ifndef SYNTHVQA_QA_HPP
#define SYNTHVQA_QA_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synthvqa/compositor.hpp"
#include "synthvqa/domain.hpp"
#include "synthvqa/scene.hpp"

namespace synthvqa {

enum class QType : int { Counting = 0, YesNo, Color, Material, Position };

const char* to_string(QType t);
std::optional<QType> qtype_from_string(const std::string& s);

struct QATriplet {
  std::string image_id;
  std::string question;
  std::string answer;
  QType qtype = QType::Counting;
  Domain domain = Domain::W;
  std::string split = "train";
};

// Tab-separated line format: image_id, question, answer, qtype, domain, split.
std::string to_line(const QATriplet& t);
QATriplet triplet_from_line(const std::string& line);
std::vector<QATriplet> load_qa_file(const std::string& path);
void save_qa_file(const std::string& path, const std::vector<QATriplet>& triplets);

// Pluralization follows a small irregular table plus standard suffix rules.
std::string pluralize(const std::string& noun);

struct RejectedSceneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseQuestionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything generate_qa reads: the verified scene plus the library the
// distractor vocabulary comes from.
struct QaContext {
  const PlacedScene* scene = nullptr;
  const VerificationReport* report = nullptr;
  const AssetLibrary* library = nullptr;
  Domain domain = Domain::W;
};

// Expands the template grammar over the scene facts. Throws
// RejectedSceneError unless report->pass. Deterministic per seed.
std::vector<QATriplet> generate_qa(const QaContext& ctx, const std::set<QType>& qtypes,
                                   std::uint64_t seed);

// Draws total triplets matching the requested per-qtype proportions.
std::vector<QATriplet> select_balanced(const std::vector<QATriplet>& pool,
                                       const std::map<QType, double>& proportions,
                                       std::size_t total, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Question parsing (round-trip checks)

struct ParsedQuestion {
  QType qtype = QType::Counting;
  std::string color;     // empty when the slot is absent
  std::string material;  // empty when the slot is absent
  std::string noun;      // singular category
  std::string noun2;     // reference category for position slots
  bool operator==(const ParsedQuestion&) const = default;
};

// Slot recognition needs the grammar vocabulary, so the parser is built from
// the same library the generator used.
class QuestionParser {
 public:
  explicit QuestionParser(const AssetLibrary& lib);

  ParsedQuestion parse(const std::string& question) const;

 private:
  std::set<std::string> colors_, materials_;
  std::map<std::string, std::string> singular_of_plural_;
  std::set<std::string> nouns_;

  std::string singularize(const std::string& word) const;
};

// ---------------------------------------------------------------------------
// Annotated-scene ingestion (schema in docs/annotated_scene_format.md)

struct AnnotatedInstance {
  int id = 0;
  std::string category;
  Position center;
  Eigen::Vector3d extents;
};

struct AnnotatedScene {
  std::string scene_id;
  CameraConfig camera;
  std::vector<AnnotatedInstance> instances;
};

AnnotatedScene parse_annotated_scene(const std::string& text);
std::string export_annotated_scene(const PlacedScene& scene);

struct IngestResult {
  SceneGraph graph;
  std::vector<QATriplet> triplets;
};

// Builds a scene graph from instance centers via cluster_and_relate and emits
// counting + yes/no + position triplets with domain H. distractors supplies
// absent categories for "no" questions; empty means yes-only.
IngestResult ingest_annotated_scene(const AnnotatedScene& meta,
                                    const std::vector<std::string>& distractors,
                                    std::uint64_t seed);

}  // namespace synthvqa

#endif
