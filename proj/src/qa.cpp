#include "synthvqa/qa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "synthvqa/rng.hpp"
#include "synthvqa/text_format.hpp"

namespace synthvqa {

const char* to_string(QType t) {
  switch (t) {
    case QType::Counting: return "counting";
    case QType::YesNo: return "yesno";
    case QType::Color: return "color";
    case QType::Material: return "material";
    case QType::Position: return "position";
  }
  return "?";
}

std::optional<QType> qtype_from_string(const std::string& s) {
  for (QType t : {QType::Counting, QType::YesNo, QType::Color, QType::Material, QType::Position})
    if (s == to_string(t)) return t;
  return std::nullopt;
}

std::string to_line(const QATriplet& t) {
  return t.image_id + "\t" + t.question + "\t" + t.answer + "\t" + to_string(t.qtype) + "\t" +
         to_string(t.domain) + "\t" + t.split;
}

QATriplet triplet_from_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (fields.size() != 6) throw FormatError("expected 6 tab-separated fields", 0);
  QATriplet t;
  t.image_id = fields[0];
  t.question = fields[1];
  t.answer = fields[2];
  const auto qt = qtype_from_string(fields[3]);
  const auto dm = domain_from_string(fields[4]);
  if (!qt) throw FormatError("unknown qtype '" + fields[3] + "'", 0);
  if (!dm) throw FormatError("unknown domain '" + fields[4] + "'", 0);
  t.qtype = *qt;
  t.domain = *dm;
  t.split = fields[5];
  return t;
}

std::vector<QATriplet> load_qa_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::vector<QATriplet> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    out.push_back(triplet_from_line(line));
  }
  return out;
}

void save_qa_file(const std::string& path, const std::vector<QATriplet>& triplets) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  for (const auto& t : triplets) f << to_line(t) << "\n";
}

// ---------------------------------------------------------------------------
// Morphology

namespace {

const std::map<std::string, std::string>& irregular_plurals() {
  static const std::map<std::string, std::string> table = {
      {"shelf", "shelves"}, {"knife", "knives"}, {"leaf", "leaves"},
      {"mouse", "mice"},    {"person", "people"},
  };
  return table;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

}  // namespace

std::string pluralize(const std::string& noun) {
  if (auto it = irregular_plurals().find(noun); it != irregular_plurals().end())
    return it->second;
  if (ends_with(noun, "s") || ends_with(noun, "x") || ends_with(noun, "z") ||
      ends_with(noun, "ch") || ends_with(noun, "sh"))
    return noun + "es";
  if (noun.size() >= 2 && noun.back() == 'y' && !is_vowel(noun[noun.size() - 2]))
    return noun.substr(0, noun.size() - 1) + "ies";
  return noun + "s";
}

// ---------------------------------------------------------------------------
// Generation

namespace {

struct CategoryFacts {
  int placed = 0;
  int visible = 0;
  std::set<std::string> colors, materials;
};

std::map<std::string, CategoryFacts> gather_facts(const QaContext& ctx) {
  std::map<std::string, CategoryFacts> facts;
  for (const auto& o : ctx.scene->objects) {
    auto& f = facts[o.category];
    ++f.placed;
    f.colors.insert(o.color);
    f.materials.insert(o.material);
  }
  for (const auto& [cat, n] : ctx.report->visible_counts) facts[cat].visible = n;
  return facts;
}

std::string article(const std::string& noun) {
  return noun.empty() || !is_vowel(noun[0]) ? "a" : "an";
}

}  // namespace

std::vector<QATriplet> generate_qa(const QaContext& ctx, const std::set<QType>& qtypes,
                                   std::uint64_t seed) {
  if (!ctx.report->pass)
    throw RejectedSceneError("generate_qa: scene '" + ctx.scene->scene_id +
                             "' failed verification");
  Rng rng = Rng(seed).split("qa").split(ctx.scene->scene_id);
  const auto facts = gather_facts(ctx);

  std::vector<QATriplet> out;
  auto emit = [&](QType qt, std::string q, std::string a) {
    out.push_back({ctx.scene->scene_id, std::move(q), std::move(a), qt, ctx.domain, "train"});
  };

  if (qtypes.count(QType::Counting)) {
    for (const auto& [cat, f] : facts) {
      const std::string pl = pluralize(cat);
      const std::string n = std::to_string(f.visible);
      emit(QType::Counting, "How many " + pl + " are there?", n);
      if (f.colors.size() == 1) {
        const std::string& col = *f.colors.begin();
        emit(QType::Counting, "How many " + col + " " + pl + " are there?", n);
        if (f.materials.size() == 1)
          emit(QType::Counting,
               "How many " + col + " " + *f.materials.begin() + " " + pl + " are there?", n);
      }
    }
  }

  if (qtypes.count(QType::YesNo)) {
    // Absent categories become distractors so yes/no stays balanced.
    std::vector<std::string> absent;
    for (const auto& cat : ctx.library->categories())
      if (!facts.count(cat)) absent.push_back(cat);
    for (const auto& [cat, f] : facts) {
      if (f.visible == 0) continue;
      emit(QType::YesNo, "Is there " + article(cat) + " " + cat + " in the picture?", "yes");
      if (!absent.empty()) {
        const std::string d = absent[rng.uniform_u64(absent.size())];
        emit(QType::YesNo, "Is there " + article(d) + " " + d + " in the picture?", "no");
      }
    }
  }

  if (qtypes.count(QType::Color)) {
    for (const auto& [cat, f] : facts)
      if (f.colors.size() == 1 && f.visible > 0)
        emit(QType::Color, "What is the color of the " + cat + "?", *f.colors.begin());
  }

  if (qtypes.count(QType::Material)) {
    for (const auto& [cat, f] : facts)
      if (f.materials.size() == 1 && f.visible > 0)
        emit(QType::Material, "What is the " + cat + " made of?", *f.materials.begin());
  }

  if (qtypes.count(QType::Position)) {
    std::vector<IdentifiedPosition> pts;
    std::map<std::string, std::string> cat_of;
    for (const auto& o : ctx.scene->objects) {
      const std::string key = std::to_string(o.instance_id);
      pts.push_back({key, o.position});
      cat_of[key] = o.category;
    }
    for (const auto& rel : cluster_and_relate(pts, ctx.scene->camera)) {
      const std::string& ca = cat_of.at(rel.subject);
      const std::string& cb = cat_of.at(rel.object);
      if (ca == cb) continue;
      // Only category pairs with unique instances stay unambiguous.
      if (facts.at(ca).placed != 1 || facts.at(cb).placed != 1) continue;
      emit(QType::Position, "Where is the " + ca + " with respect to the " + cb + "?",
           to_string(rel.position));
    }
  }

  return out;
}

std::vector<QATriplet> select_balanced(const std::vector<QATriplet>& pool,
                                       const std::map<QType, double>& proportions,
                                       std::size_t total, std::uint64_t seed) {
  std::map<QType, std::vector<QATriplet>> by_type;
  for (const auto& t : pool) by_type[t.qtype].push_back(t);

  // Largest-remainder allocation so the per-type counts sum to exactly
  // `total` (independent rounding can overshoot by one).
  std::map<QType, std::size_t> want;
  std::vector<std::pair<double, QType>> remainders;
  std::size_t assigned = 0;
  for (const auto& [qt, prop] : proportions) {
    if (by_type.find(qt) == by_type.end()) continue;
    const double exact = prop * static_cast<double>(total);
    const auto base = static_cast<std::size_t>(exact);
    want[qt] = base;
    assigned += base;
    remainders.emplace_back(exact - static_cast<double>(base), qt);
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  for (const auto& [rem, qt] : remainders) {
    if (assigned >= total) break;
    ++want[qt];
    ++assigned;
  }

  Rng rng = Rng(seed).split("select");
  std::vector<QATriplet> out;
  for (const auto& [qt, count] : want) {
    auto& group = by_type.at(qt);
    // Fisher-Yates with the portable generator.
    for (std::size_t i = group.size(); i > 1; --i)
      std::swap(group[i - 1], group[rng.uniform_u64(i)]);
    const std::size_t take = std::min(group.size(), count);
    out.insert(out.end(), group.begin(), group.begin() + take);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

QuestionParser::QuestionParser(const AssetLibrary& lib) {
  for (const auto& c : lib.colors()) colors_.insert(c);
  for (const auto& m : lib.material_names()) materials_.insert(m);
  for (const auto& cat : lib.categories()) {
    nouns_.insert(cat);
    singular_of_plural_[pluralize(cat)] = cat;
  }
}

std::string QuestionParser::singularize(const std::string& word) const {
  if (auto it = singular_of_plural_.find(word); it != singular_of_plural_.end())
    return it->second;
  throw ParseQuestionError("unknown plural noun '" + word + "'");
}

ParsedQuestion QuestionParser::parse(const std::string& question) const {
  std::string q = question;
  if (q.empty() || q.back() != '?') throw ParseQuestionError("question must end with '?'");
  q.pop_back();
  const auto tokens = split_ws(q);
  auto tok = [&](std::size_t i) -> const std::string& {
    static const std::string empty;
    return i < tokens.size() ? tokens[i] : empty;
  };

  ParsedQuestion p;
  if (tok(0) == "How" && tok(1) == "many") {
    p.qtype = QType::Counting;
    std::size_t are = 2;
    while (are < tokens.size() && tokens[are] != "are") ++are;
    if (are >= tokens.size() || are < 3)
      throw ParseQuestionError("counting question missing 'are': " + question);
    // Tokens between "many" and "are": [color] [material] noun_plural.
    std::vector<std::string> mid(tokens.begin() + 2, tokens.begin() + are);
    p.noun = singularize(mid.back());
    mid.pop_back();
    for (const auto& w : mid) {
      if (colors_.count(w) && p.color.empty() && p.material.empty())
        p.color = w;
      else if (materials_.count(w) && p.material.empty())
        p.material = w;
      else
        throw ParseQuestionError("unknown adjective '" + w + "' in: " + question);
    }
    // Trailer: "there" | "in the picture" | "on the <noun2>".
    if (tok(are + 1) == "there" && are + 2 == tokens.size()) return p;
    if (tok(are + 1) == "in" && tok(are + 2) == "the" && tok(are + 3) == "picture") return p;
    if (tok(are + 1) == "on" && tok(are + 2) == "the" && are + 4 == tokens.size()) {
      if (!nouns_.count(tok(are + 3)))
        throw ParseQuestionError("unknown noun '" + tok(are + 3) + "' in: " + question);
      p.noun2 = tok(are + 3);
      return p;
    }
    throw ParseQuestionError("unrecognized counting trailer in: " + question);
  }

  if (tok(0) == "Is" && tok(1) == "there") {
    p.qtype = QType::YesNo;
    // "Is there a [color] <noun> in the picture"
    if (tok(2) != "a" && tok(2) != "an")
      throw ParseQuestionError("yes/no question missing article: " + question);
    std::size_t i = 3;
    if (colors_.count(tok(i))) {
      p.color = tok(i);
      ++i;
    }
    if (!nouns_.count(tok(i)))
      throw ParseQuestionError("unknown noun '" + tok(i) + "' in: " + question);
    p.noun = tok(i);
    if (tok(i + 1) == "in" && tok(i + 2) == "the" && tok(i + 3) == "picture" &&
        i + 4 == tokens.size())
      return p;
    throw ParseQuestionError("unrecognized yes/no trailer in: " + question);
  }

  if (tok(0) == "What" && tok(1) == "is" && tok(2) == "the" && tok(3) == "color" &&
      tok(4) == "of" && tok(5) == "the" && tokens.size() == 7) {
    p.qtype = QType::Color;
    if (!nouns_.count(tok(6)))
      throw ParseQuestionError("unknown noun '" + tok(6) + "' in: " + question);
    p.noun = tok(6);
    return p;
  }

  if (tok(0) == "What" && tok(1) == "is" && tok(2) == "the" && tokens.size() == 6 &&
      tok(4) == "made" && tok(5) == "of") {
    p.qtype = QType::Material;
    if (!nouns_.count(tok(3)))
      throw ParseQuestionError("unknown noun '" + tok(3) + "' in: " + question);
    p.noun = tok(3);
    return p;
  }

  if (tok(0) == "Where" && tok(1) == "is" && tok(2) == "the" && tok(4) == "with" &&
      tok(5) == "respect" && tok(6) == "to" && tok(7) == "the" && tokens.size() == 9) {
    p.qtype = QType::Position;
    if (!nouns_.count(tok(3)) || !nouns_.count(tok(8)))
      throw ParseQuestionError("unknown noun in: " + question);
    p.noun = tok(3);
    p.noun2 = tok(8);
    return p;
  }

  throw ParseQuestionError("question does not match the grammar: " + question);
}

// ---------------------------------------------------------------------------
// Annotated-scene ingestion

AnnotatedScene parse_annotated_scene(const std::string& text) {
  AnnotatedScene s;
  std::vector<int> missing;
  for (const auto& sec : parse_sections(text)) {
    if (sec.name == "annotated_scene") {
      s.scene_id = sec.get("id");
      if (sec.has("camera_position")) {
        const auto p = sec.get_list("camera_position");
        if (p.size() != 3) throw FormatError("camera_position needs 3 values", sec.line);
        s.camera.x_c = std::stod(p[0]);
        s.camera.y_c = std::stod(p[1]);
        s.camera.z_c = std::stod(p[2]);
      }
      s.camera.theta_c = sec.has("camera_theta") ? sec.get_double("camera_theta") : 0.0;
      s.camera.y_0 = sec.has("floor") ? sec.get_double("floor") : 0.0;
    } else if (sec.name == "instance") {
      AnnotatedInstance inst;
      inst.id = static_cast<int>(sec.get_long("id"));
      inst.category = sec.get("category");
      if (!sec.has("center")) {
        missing.push_back(inst.id);
        continue;
      }
      const auto c = sec.get_list("center");
      const auto e = sec.get_list(sec.has("extents") ? "extents" : "center");
      if (c.size() != 3) throw FormatError("center needs 3 values", sec.line);
      inst.center = {std::stod(c[0]), std::stod(c[1]), std::stod(c[2])};
      if (sec.has("extents") && e.size() == 3)
        inst.extents = {std::stod(e[0]), std::stod(e[1]), std::stod(e[2])};
      else
        inst.extents = {0.1, 0.1, 0.1};
      s.instances.push_back(inst);
    } else {
      throw FormatError("unknown section [" + sec.name + "]", sec.line);
    }
  }
  if (!missing.empty()) {
    std::string ids;
    for (int id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    throw IngestError("instances missing positions: " + ids);
  }
  return s;
}

std::string export_annotated_scene(const PlacedScene& scene) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "[annotated_scene]\n";
  os << "id = " << scene.scene_id << "\n";
  os << "camera_position = " << scene.camera.x_c << " " << scene.camera.y_c << " "
     << scene.camera.z_c << "\n";
  os << "camera_theta = " << scene.camera.theta_c << "\n";
  os << "floor = " << scene.camera.y_0 << "\n";
  for (const auto& o : scene.objects) {
    os << "[instance]\n";
    os << "id = " << o.instance_id << "\n";
    os << "category = " << o.category << "\n";
    os << "center = " << o.position.x() << " " << o.position.y() << " " << o.position.z() << "\n";
    os << "extents = " << o.extents.x() << " " << o.extents.y() << " " << o.extents.z() << "\n";
  }
  return os.str();
}

IngestResult ingest_annotated_scene(const AnnotatedScene& meta,
                                    const std::vector<std::string>& distractors,
                                    std::uint64_t seed) {
  IngestResult res;
  res.graph.template_id = "ingested";
  res.graph.seed = seed;

  std::map<std::string, std::vector<const AnnotatedInstance*>> by_cat;
  for (const auto& inst : meta.instances) by_cat[inst.category].push_back(&inst);

  for (const auto& [cat, insts] : by_cat) {
    if (insts.size() > 20)
      throw IngestError("category '" + cat + "' has more than 20 instances");
    GraphNode n;
    n.node_id = cat;
    std::set<SizeClass> classes;
    for (const auto* i : insts) classes.insert(assign_size_class(i->extents.prod()));
    n.size_classes.assign(classes.begin(), classes.end());
    n.count = static_cast<int>(insts.size());
    res.graph.nodes.push_back(std::move(n));
  }

  std::vector<IdentifiedPosition> pts;
  std::map<std::string, std::string> cat_of;
  for (const auto& inst : meta.instances) {
    const std::string key = std::to_string(inst.id);
    pts.push_back({key, inst.center});
    cat_of[key] = inst.category;
  }
  const auto relations = pts.size() >= 2
                             ? cluster_and_relate(pts, meta.camera)
                             : std::vector<IdRelation>{};
  std::set<std::tuple<std::string, int, std::string>> seen;
  for (const auto& rel : relations) {
    const std::string& ca = cat_of.at(rel.subject);
    const std::string& cb = cat_of.at(rel.object);
    if (ca == cb) continue;
    if (seen.insert({ca, static_cast<int>(rel.position), cb}).second)
      res.graph.relations.push_back({ca, rel.position, cb});
  }
  res.graph.validate();

  Rng rng = Rng(seed).split("ingest").split(meta.scene_id);
  auto emit = [&](QType qt, std::string q, std::string a) {
    res.triplets.push_back(
        {meta.scene_id, std::move(q), std::move(a), qt, Domain::H, "train"});
  };
  for (const auto& [cat, insts] : by_cat) {
    emit(QType::Counting, "How many " + pluralize(cat) + " are there?",
         std::to_string(insts.size()));
    emit(QType::YesNo, "Is there " + article(cat) + " " + cat + " in the picture?", "yes");
    if (!distractors.empty()) {
      std::vector<std::string> absent;
      for (const auto& d : distractors)
        if (!by_cat.count(d)) absent.push_back(d);
      if (!absent.empty()) {
        const std::string d = absent[rng.uniform_u64(absent.size())];
        emit(QType::YesNo, "Is there " + article(d) + " " + d + " in the picture?", "no");
      }
    }
  }
  for (const auto& rel : relations) {
    const std::string& ca = cat_of.at(rel.subject);
    const std::string& cb = cat_of.at(rel.object);
    if (ca == cb) continue;
    if (by_cat.at(ca).size() != 1 || by_cat.at(cb).size() != 1) continue;
    emit(QType::Position, "Where is the " + ca + " with respect to the " + cb + "?",
         to_string(rel.position));
  }
  return res;
}

}  // namespace synthvqa
