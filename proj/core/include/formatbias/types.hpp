#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace formatbias {

enum class Category { MCQ, Wrapping, List, Mapping };
enum class AnswerType { McqChar, McqValue, FreeText, StringList, CategoryMap };
enum class ListStyle { Bracketed, Bullet, Sep, Newline };
enum class MapStyle { Json, Yaml };
enum class Method { ZS, ZS_CoT };

/// Category -> entity strings, as produced by the mapping extractor.
using CategoryMap = std::map<std::string, std::vector<std::string>>;

struct Choice {
  std::string id;     // identifier, e.g. "A"
  std::string value;  // textual value, e.g. "yes"
};

struct FormatSpec {
  std::string id;
  Category category;
  std::optional<std::pair<std::string, std::string>> wrapping_tokens;
  std::string instruction_text;
  AnswerType answer_type;
  std::optional<ListStyle> list_style;
  std::optional<MapStyle> map_style;
  std::vector<std::string> map_schema;  // Mapping only
};

enum class TaskKind { Mcq, Qa, Math, Ranking, Keyphrase, Extraction };

/// Gold answer variants: answer string, string list, binary relevance
/// list, or category map.
using Gold = std::variant<std::string, std::vector<std::string>,
                          std::vector<int>, CategoryMap>;

struct Sample {
  std::string id;
  TaskKind task_kind = TaskKind::Qa;
  std::string question;
  std::string context;
  std::vector<Choice> choices;  // MCQ only
  Gold gold;
};

std::string to_string(Category c);
std::string to_string(TaskKind t);
std::string to_string(Method m);
std::optional<Category> category_from_string(const std::string& s);
std::optional<TaskKind> task_kind_from_string(const std::string& s);
std::optional<Method> method_from_string(const std::string& s);

}  // namespace formatbias
