#include <doctest.h>

#include <set>

#include "formatbias/errors.hpp"
#include "formatbias/format_registry.hpp"

namespace fb = formatbias;

TEST_CASE("registry holds exactly fifteen formats with unique ids") {
  const auto& formats = fb::all_formats();
  CHECK(formats.size() == 15);
  std::set<std::string> ids;
  for (const auto& f : formats) {
    CHECK(ids.insert(f.id).second);
    CHECK(!f.instruction_text.empty());
  }
}

TEST_CASE("category partition is 2 + 7 + 4 + 2") {
  CHECK(fb::list_formats(fb::Category::MCQ).size() == 2);
  CHECK(fb::list_formats(fb::Category::Wrapping).size() == 7);
  CHECK(fb::list_formats(fb::Category::List).size() == 4);
  CHECK(fb::list_formats(fb::Category::Mapping).size() == 2);
}

TEST_CASE("wrapping formats carry their token pairs") {
  CHECK(fb::get_format("wrap.special").wrapping_tokens ==
        std::make_pair(std::string("<ANSWER>"), std::string("</ANSWER>")));
  CHECK(fb::get_format("wrap.bold").wrapping_tokens->first == "**");
  CHECK(fb::get_format("wrap.italic").wrapping_tokens->first == "*");
  CHECK(fb::get_format("wrap.brackets").wrapping_tokens->second == "]]");
  CHECK(fb::get_format("wrap.parens").wrapping_tokens->first == "((");
  CHECK(fb::get_format("wrap.quote").wrapping_tokens->first == "\"\"\"");
  CHECK(!fb::get_format("wrap.placeholder").wrapping_tokens.has_value());
}

TEST_CASE("mapping formats share the four-key schema") {
  const std::vector<std::string> schema{"Task", "Method", "Material",
                                       "Metric"};
  CHECK(fb::get_format("map.json").map_schema == schema);
  CHECK(fb::get_format("map.yaml").map_schema == schema);
}

TEST_CASE("unknown ids raise") {
  CHECK_THROWS_AS(fb::get_format("wrap.nope"), fb::UnknownFormatError);
  CHECK(fb::find_format("wrap.nope") == nullptr);
}
