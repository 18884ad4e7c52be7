#include "formatbias/types.hpp"

#include <cctype>

namespace formatbias {

std::string to_string(Category c) {
  switch (c) {
    case Category::MCQ: return "MCQ";
    case Category::Wrapping: return "Wrapping";
    case Category::List: return "List";
    case Category::Mapping: return "Mapping";
  }
  return "?";
}

std::string to_string(TaskKind t) {
  switch (t) {
    case TaskKind::Mcq: return "mcq";
    case TaskKind::Qa: return "qa";
    case TaskKind::Math: return "math";
    case TaskKind::Ranking: return "ranking";
    case TaskKind::Keyphrase: return "keyphrase";
    case TaskKind::Extraction: return "extraction";
  }
  return "?";
}

std::string to_string(Method m) {
  return m == Method::ZS ? "ZS" : "ZS_CoT";
}

std::optional<Category> category_from_string(const std::string& s) {
  std::string k;
  for (char c : s) k += static_cast<char>(std::tolower(
      static_cast<unsigned char>(c)));
  if (k == "mcq") return Category::MCQ;
  if (k == "wrapping") return Category::Wrapping;
  if (k == "list") return Category::List;
  if (k == "mapping") return Category::Mapping;
  return std::nullopt;
}

std::optional<TaskKind> task_kind_from_string(const std::string& s) {
  if (s == "mcq") return TaskKind::Mcq;
  if (s == "qa") return TaskKind::Qa;
  if (s == "math") return TaskKind::Math;
  if (s == "ranking") return TaskKind::Ranking;
  if (s == "keyphrase") return TaskKind::Keyphrase;
  if (s == "extraction") return TaskKind::Extraction;
  return std::nullopt;
}

std::optional<Method> method_from_string(const std::string& s) {
  std::string lower(s);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "zs") return Method::ZS;
  if (lower == "zs_cot" || lower == "zs-cot") return Method::ZS_CoT;
  return std::nullopt;
}

}  // namespace formatbias
