#include "synthvqa/text_format.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace synthvqa {

namespace {
std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}
}  // namespace

bool Section::has(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return true;
  return false;
}

const std::string& Section::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  throw FormatError("section [" + name + "] missing key '" + key + "'", line);
}

std::string Section::get_or(const std::string& key, const std::string& fallback) const {
  return has(key) ? get(key) : fallback;
}

double Section::get_double(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw FormatError("key '" + key + "': '" + v + "' is not a number", line);
  return d;
}

long Section::get_long(const std::string& key) const {
  const std::string& v = get(key);
  char* end = nullptr;
  const long l = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw FormatError("key '" + key + "': '" + v + "' is not an integer", line);
  return l;
}

std::vector<std::string> Section::get_list(const std::string& key) const {
  return split_ws(get(key));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

std::vector<Section> parse_sections(const std::string& text) {
  std::vector<Section> out;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("unterminated section header", lineno);
      Section s;
      s.name = trim(line.substr(1, line.size() - 2));
      s.line = lineno;
      if (s.name.empty()) throw FormatError("empty section name", lineno);
      out.push_back(std::move(s));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("expected 'key = value'", lineno);
    if (out.empty()) throw FormatError("key/value before any [section]", lineno);
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw FormatError("empty key", lineno);
    out.back().entries.emplace_back(std::move(key), std::move(val));
  }
  return out;
}

std::vector<Section> load_sections(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_sections(buf.str());
}

}  // namespace synthvqa
