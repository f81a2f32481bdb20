#ifndef SYNTHVQA_DOMAIN_HPP
#define SYNTHVQA_DOMAIN_HPP

#include <optional>
#include <string>

namespace synthvqa {

// Dataset domains: R = real, H = annotated-ingestion, W = generated.
enum class Domain : int { R = 0, H = 1, W = 2 };

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::R: return "R";
    case Domain::H: return "H";
    case Domain::W: return "W";
  }
  return "?";
}

inline std::optional<Domain> domain_from_string(const std::string& s) {
  if (s == "R") return Domain::R;
  if (s == "H") return Domain::H;
  if (s == "W") return Domain::W;
  return std::nullopt;
}

}  // namespace synthvqa

#endif
