#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "synthvqa/text_format.hpp"

using namespace synthvqa;

TEST_CASE("parse_sections reads sections, keys, and comments") {
  const std::string text =
      "# header comment\n"
      "[asset]\n"
      "id = mug-1\n"
      "extents = 0.1 0.08 0.1\n"
      "\n"
      "[asset]\n"
      "id = table-1\n";
  const auto secs = parse_sections(text);
  REQUIRE(secs.size() == 2);
  CHECK(secs[0].name == "asset");
  CHECK(secs[0].get("id") == "mug-1");
  CHECK(secs[1].get("id") == "table-1");
  const auto list = secs[0].get_list("extents");
  REQUIRE(list.size() == 3);
  CHECK(list[0] == "0.1");
  CHECK(list[2] == "0.1");
}

TEST_CASE("values may contain spaces and equals signs") {
  const auto secs = parse_sections("[q]\ntext = what is x = y?\n");
  REQUIRE(secs.size() == 1);
  CHECK(secs[0].get("text") == "what is x = y?");
}

TEST_CASE("missing key throws FormatError naming the section line") {
  const auto secs = parse_sections("[asset]\nid = a\n");
  CHECK(secs[0].has("id"));
  CHECK_FALSE(secs[0].has("volume"));
  CHECK_THROWS_AS((void)secs[0].get("volume"), FormatError);
  CHECK(secs[0].get_or("volume", "0.5") == "0.5");
}

TEST_CASE("numeric accessors parse and reject garbage") {
  const auto secs = parse_sections("[a]\nx = 2.5\nn = 7\nbad = zebra\n");
  CHECK(secs[0].get_double("x") == doctest::Approx(2.5));
  CHECK(secs[0].get_long("n") == 7);
  CHECK_THROWS_AS((void)secs[0].get_double("bad"), FormatError);
}

TEST_CASE("entries outside any section are rejected with the line number") {
  try {
    parse_sections("key = value\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line == 1);
  }
}

TEST_CASE("malformed line reports its position") {
  try {
    parse_sections("[a]\nok = 1\nnot-a-kv-line\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("section order and repeats are preserved") {
  const auto secs = parse_sections("[b]\nk = 1\n[a]\nk = 2\n[b]\nk = 3\n");
  REQUIRE(secs.size() == 3);
  CHECK(secs[0].name == "b");
  CHECK(secs[1].name == "a");
  CHECK(secs[2].name == "b");
  CHECK(secs[2].get("k") == "3");
}

TEST_CASE("split_ws splits on arbitrary whitespace runs") {
  const auto parts = split_ws("  a\t b   c ");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[2] == "c");
  CHECK(split_ws("").empty());
}
