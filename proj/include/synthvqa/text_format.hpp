#ifndef SYNTHVQA_TEXT_FORMAT_HPP
#define SYNTHVQA_TEXT_FORMAT_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace synthvqa {

// Human-editable section/key-value format used by the asset library,
// scene-graph templates, and annotated-scene files:
//
//   # comment
//   [section]
//   key = value
//   key = a b c          (space-separated list values)
//
// Sections repeat; order is preserved.

struct FormatError : std::runtime_error {
  FormatError(const std::string& msg, int line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  // Throws FormatError naming the section when the key is missing.
  const std::string& get(const std::string& key) const;
  std::string get_or(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  long get_long(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
};

std::vector<Section> parse_sections(const std::string& text);
std::vector<Section> load_sections(const std::string& path);

std::vector<std::string> split_ws(const std::string& s);

}  // namespace synthvqa

#endif
