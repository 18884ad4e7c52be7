#include "formatbias/format_registry.hpp"

#include <nlohmann/json.hpp>

#include "formatbias/errors.hpp"

namespace formatbias {

namespace {

std::vector<FormatSpec> build_registry() {
  std::vector<FormatSpec> v;
  auto add = [&v](FormatSpec s) { v.push_back(std::move(s)); };

  // MCQ. Instruction fragments are the part shared by the ZS and CoT
  // instruction variants.
  add({.id = "mcq.char",
       .category = Category::MCQ,
       .wrapping_tokens = std::nullopt,
       .instruction_text =
           "by outputting only the designated character identifier.",
       .answer_type = AnswerType::McqChar});
  add({.id = "mcq.value",
       .category = Category::MCQ,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "by outputting the textual value of your choice "
                           "without the character identifier",
       .answer_type = AnswerType::McqValue});

  // Wrapping, in table order.
  add({.id = "wrap.special",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"<ANSWER>", "</ANSWER>"}},
       .instruction_text = "Wrap your final answer by <ANSWER> and </ANSWER>.",
       .answer_type = AnswerType::FreeText});
  add({.id = "wrap.bold",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"**", "**"}},
       .instruction_text = "Wrap your final answer in bold by enclosing it "
                           "with double asterisks.",
       .answer_type = AnswerType::FreeText});
  add({.id = "wrap.italic",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"*", "*"}},
       .instruction_text = "Wrap your final answer in italics by enclosing "
                           "it with single asterisks.",
       .answer_type = AnswerType::FreeText});
  add({.id = "wrap.brackets",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"[[", "]]"}},
       .instruction_text =
           "Wrap your final answer using double square brackets.",
       .answer_type = AnswerType::FreeText});
  add({.id = "wrap.parens",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"((", "))"}},
       .instruction_text = "Wrap your final answer using double parentheses.",
       .answer_type = AnswerType::FreeText});
  add({.id = "wrap.placeholder",
       .category = Category::Wrapping,
       .wrapping_tokens = std::nullopt,  // Placeholder | None
       .instruction_text =
           "Wrap your final answer by filling in the placeholder below: "
           "\"So the answer is: {{placeholder}}\"",
       .answer_type = AnswerType::FreeText});
  // Three literal '"' characters per side: the prose ("triple
  // double-quotation marks") is what the model sees.
  add({.id = "wrap.quote",
       .category = Category::Wrapping,
       .wrapping_tokens = {{"\"\"\"", "\"\"\""}},
       .instruction_text =
           "Wrap your final answer using triple quotation marks.",
       .answer_type = AnswerType::FreeText});

  // List.
  add({.id = "list.bracketed",
       .category = Category::List,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "Generate your binary list as a Python list",
       .answer_type = AnswerType::StringList,
       .list_style = ListStyle::Bracketed});
  add({.id = "list.bullet",
       .category = Category::List,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "Generate your binary list using bullet points",
       .answer_type = AnswerType::StringList,
       .list_style = ListStyle::Bullet});
  add({.id = "list.sep",
       .category = Category::List,
       .wrapping_tokens = std::nullopt,
       .instruction_text =
           "Generate your binary list using <SEP> to separate elements",
       .answer_type = AnswerType::StringList,
       .list_style = ListStyle::Sep});
  add({.id = "list.newline",
       .category = Category::List,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "Generate your binary list such that each element "
                           "is in a new line",
       .answer_type = AnswerType::StringList,
       .list_style = ListStyle::Newline});

  // Mapping. Instruction fragments are shared by the easy/medium/hard
  // schema variants; the full prompt is composed per sample.
  add({.id = "map.json",
       .category = Category::Mapping,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "Your output must be a Python dictionary with the key",
       .answer_type = AnswerType::CategoryMap,
       .list_style = std::nullopt,
       .map_style = MapStyle::Json,
       .map_schema = {"Task", "Method", "Material", "Metric"}});
  add({.id = "map.yaml",
       .category = Category::Mapping,
       .wrapping_tokens = std::nullopt,
       .instruction_text = "Your output must be in YAML format:",
       .answer_type = AnswerType::CategoryMap,
       .list_style = std::nullopt,
       .map_style = MapStyle::Yaml,
       .map_schema = {"Task", "Method", "Material", "Metric"}});

  return v;
}

}  // namespace

const std::vector<FormatSpec>& all_formats() {
  static const std::vector<FormatSpec> registry = build_registry();
  return registry;
}

const FormatSpec* find_format(std::string_view id) {
  for (const auto& f : all_formats())
    if (f.id == id) return &f;
  return nullptr;
}

const FormatSpec& get_format(std::string_view id) {
  if (const FormatSpec* f = find_format(id)) return *f;
  throw UnknownFormatError(std::string(id));
}

std::vector<FormatSpec> list_formats(std::optional<Category> category) {
  std::vector<FormatSpec> out;
  for (const auto& f : all_formats())
    if (!category || f.category == *category) out.push_back(f);
  return out;
}

std::string registry_json() {
  nlohmann::ordered_json doc;
  for (const auto& f : all_formats()) {
    nlohmann::ordered_json j;
    j["category"] = to_string(f.category);
    if (f.wrapping_tokens) {
      j["start_token"] = f.wrapping_tokens->first;
      j["end_token"] = f.wrapping_tokens->second;
    }
    j["instruction_text"] = f.instruction_text;
    switch (f.answer_type) {
      case AnswerType::McqChar: j["answer_type"] = "mcq_char"; break;
      case AnswerType::McqValue: j["answer_type"] = "mcq_value"; break;
      case AnswerType::FreeText: j["answer_type"] = "free_text"; break;
      case AnswerType::StringList: j["answer_type"] = "string_list"; break;
      case AnswerType::CategoryMap: j["answer_type"] = "category_map"; break;
    }
    if (!f.map_schema.empty()) j["map_schema"] = f.map_schema;
    doc[f.id] = std::move(j);
  }
  return doc.dump(2) + "\n";
}

}  // namespace formatbias
