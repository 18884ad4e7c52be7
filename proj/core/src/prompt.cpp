#include "formatbias/prompt.hpp"

#include <sstream>

#include "formatbias/errors.hpp"
#include "formatbias/extractor.hpp"
#include "formatbias/format_registry.hpp"

namespace formatbias {

namespace {

const std::string kCotWrapAnswer =
    "Wrap your final answer by <ANSWER> and </ANSWER>.";
const std::string kCotWrapList =
    "Wrap your final list by <ANSWER> and </ANSWER>.";

bool is_mcq_task(TaskKind t) { return t == TaskKind::Mcq; }

std::string mcq_instruction(AnswerType at, Method m) {
  bool cot = m == Method::ZS_CoT;
  if (at == AnswerType::McqValue) {
    return cot ? "Answer the following multiple-choice question step-by-step "
                 "by outputting the textual value of your choice without the "
                 "character identifier."
               : "Answer the following multiple-choice question by outputting "
                 "the textual value of your choice without the character "
                 "identifier without any textual description.";
  }
  return cot ? "Answer the following multiple-choice question step-by-step by "
               "outputting only the designated character identifier."
             : "Answer the following multiple-choice question by outputting "
               "only the designated character identifier.";
}

std::string generation_instruction(Method m) {
  return m == Method::ZS_CoT
             ? "Answer the following question step by step."
             : "Answer the following question without any explanation.";
}

std::string question_block(const Sample& s) {
  std::ostringstream os;
  os << "Question: " << s.question;
  if (!s.context.empty()) os << "\nContext: " << s.context;
  if (!s.choices.empty()) {
    os << "\nAnswer choices: ";
    for (size_t i = 0; i < s.choices.size(); ++i) {
      if (i) os << " | ";
      os << s.choices[i].id << ". " << s.choices[i].value;
    }
  }
  return os.str();
}

std::string entity_phrase(const std::vector<std::string>& keys) {
  std::ostringstream os;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (i) os << (i + 1 == keys.size() && keys.size() == 2 ? " and " : ", ");
    os << lowercase(keys[i]) << " name entities";
  }
  return os.str();
}

std::vector<std::string> mapping_keys(const Sample& s, const FormatSpec& fmt) {
  std::vector<std::string> keys;
  const auto* gold_map = std::get_if<CategoryMap>(&s.gold);
  for (const auto& k : fmt.map_schema)
    if (gold_map && gold_map->count(k)) keys.push_back(k);
  if (keys.empty()) keys = fmt.map_schema;
  return keys;
}

std::string mapping_instruction(const FormatSpec& fmt,
                                const std::vector<std::string>& keys) {
  std::ostringstream os;
  if (fmt.map_style == MapStyle::Yaml) {
    os << fmt.instruction_text << " \"\"\"";
    if (keys.size() == 1) {
      os << " " << keys[0] << ": [...] ";
    } else {
      os << "\n";
      for (const auto& k : keys) os << k << ": [...]\n";
    }
    os << "\"\"\"";
    return os.str();
  }
  std::ostringstream schema;
  schema << "{";
  for (size_t i = 0; i < keys.size(); ++i) {
    if (i) schema << ", ";
    schema << "\"" << keys[i] << "\": [...]";
  }
  schema << "}";
  if (keys.size() == 1) {
    os << fmt.instruction_text << " '" << keys[0]
       << "' and value as a list of " << entity_phrase(keys) << ": "
       << schema.str();
  } else {
    os << "Your output must be a Python dictionary with the keys ";
    for (size_t i = 0; i < keys.size(); ++i) {
      if (i) os << (i + 1 == keys.size() && keys.size() == 2 ? " and " : ", ");
      os << "'" << keys[i] << "'";
    }
    os << ", and value is a list of " << entity_phrase(keys) << ": "
       << schema.str();
  }
  return os.str();
}

std::string document_text(const Sample& s) {
  return s.context.empty() ? s.question : s.context;
}

std::string join_blocks(const std::vector<std::string>& blocks) {
  std::ostringstream os;
  bool first = true;
  for (const auto& b : blocks) {
    if (b.empty()) continue;
    if (!first) os << "\n\n";
    os << b;
    first = false;
  }
  return os.str();
}

std::vector<std::string> render_items(const Gold& gold) {
  std::vector<std::string> items;
  if (const auto* xs = std::get_if<std::vector<std::string>>(&gold)) {
    items = *xs;
  } else if (const auto* bits = std::get_if<std::vector<int>>(&gold)) {
    for (int b : *bits) items.push_back(std::to_string(b));
  } else if (const auto* s = std::get_if<std::string>(&gold)) {
    items.push_back(*s);
  }
  return items;
}

std::string render_list(const std::vector<std::string>& items, ListStyle style) {
  std::ostringstream os;
  switch (style) {
    case ListStyle::Bracketed: {
      os << "[";
      for (size_t i = 0; i < items.size(); ++i) {
        if (i) os << ", ";
        os << "\"" << items[i] << "\"";
      }
      os << "]";
      break;
    }
    case ListStyle::Bullet:
      for (size_t i = 0; i < items.size(); ++i)
        os << (i ? "\n" : "") << "- " << items[i];
      break;
    case ListStyle::Sep:
      for (size_t i = 0; i < items.size(); ++i)
        os << (i ? " <SEP> " : "") << items[i];
      break;
    case ListStyle::Newline:
      for (size_t i = 0; i < items.size(); ++i)
        os << (i ? "\n" : "") << items[i];
      break;
  }
  return os.str();
}

std::string scalar_answer(const Gold& gold, const std::vector<Choice>& choices,
                          AnswerType at) {
  const auto* s = std::get_if<std::string>(&gold);
  std::string id = s ? *s : std::string();
  if (at == AnswerType::McqValue) {
    for (const auto& c : choices)
      if (c.id == id) return c.value;
  }
  return id;
}

}  // namespace

Demonstration make_demonstration(std::string question, std::string answer,
                                 const FormatSpec& format,
                                 const std::vector<Choice>* choices,
                                 const std::vector<std::string>* expected_keys) {
  auto verdict = score_format(answer, format, choices, expected_keys);
  if (!verdict.follows)
    throw IncompatibleFormatError("demonstration answer fails the format "
                                  "check for " + format.id);
  return Demonstration{std::move(question), std::move(answer)};
}

std::string build_prompt(const PromptRequest& req) {
  const Sample& s = req.sample;
  const FormatSpec& fmt = req.format;
  const bool cot = req.method == Method::ZS_CoT;
  std::vector<std::string> blocks;

  switch (fmt.category) {
    case Category::MCQ: {
      if (!is_mcq_task(s.task_kind))
        throw IncompatibleFormatError("MCQ format on non-MCQ sample " + s.id);
      blocks.push_back(mcq_instruction(fmt.answer_type, req.method));
      blocks.push_back(question_block(s));
      if (cot) blocks.push_back(kCotWrapAnswer);
      break;
    }
    case Category::Wrapping: {
      if (s.task_kind == TaskKind::Ranking ||
          s.task_kind == TaskKind::Keyphrase ||
          s.task_kind == TaskKind::Extraction)
        throw IncompatibleFormatError("wrapping format on structured task");
      blocks.push_back(is_mcq_task(s.task_kind)
                           ? mcq_instruction(AnswerType::McqChar, req.method)
                           : generation_instruction(req.method));
      blocks.push_back(question_block(s));
      blocks.push_back(fmt.instruction_text);
      break;
    }
    case Category::List: {
      if (s.task_kind == TaskKind::Ranking) {
        blocks.push_back("Given a query, and a list of documents:\nTopic: " +
                         s.question + "\nList of documents: " + s.context);
        blocks.push_back(
            "You are required to transform the list of documents into a "
            "binary list of 1 or 0 where 1 indicates the document brings "
            "useful information to the topic, and 0 indicates the document "
            "does not bring useful information to the topic.");
      } else if (s.task_kind == TaskKind::Keyphrase) {
        blocks.push_back(
            "Extract a list of keyphrases from the following document:");
        blocks.push_back("Document: " + document_text(s));
      } else {
        throw IncompatibleFormatError("list format on task " +
                                      to_string(s.task_kind));
      }
      blocks.push_back(fmt.instruction_text + " " +
                       (cot ? "step by step" : "without any explanation."));
      if (cot) blocks.push_back(kCotWrapList);
      break;
    }
    case Category::Mapping: {
      if (s.task_kind != TaskKind::Extraction)
        throw IncompatibleFormatError("mapping format on task " +
                                      to_string(s.task_kind));
      blocks.push_back(cot ? "Extract the entities reflecting the tasks in "
                             "the following document step-by-step:"
                           : "Extract the entities reflecting the tasks in "
                             "the following document:");
      blocks.push_back("Document: " + document_text(s));
      blocks.push_back(mapping_instruction(fmt, mapping_keys(s, fmt)));
      if (cot) blocks.push_back(kCotWrapList);
      break;
    }
  }

  std::string prompt = join_blocks(blocks);
  if (!req.demos.empty()) prompt = attach_demonstrations(prompt, req.demos);
  if (req.repeat_instruction > 1)
    prompt = repeat_format_instruction(prompt, req.repeat_instruction);
  return prompt;
}

std::string attach_demonstrations(const std::string& prompt,
                                  const std::vector<Demonstration>& demos) {
  if (demos.empty()) return prompt;
  std::ostringstream block;
  for (const auto& d : demos)
    block << "Question: " << d.question << "\nAnswer: " << d.answer << "\n\n";
  for (const char* marker : {"\n\nQuestion:", "\n\nGiven a query",
                             "\n\nDocument:"}) {
    size_t pos = prompt.find(marker);
    if (pos != std::string::npos)
      return prompt.substr(0, pos + 2) + block.str() + prompt.substr(pos + 2);
  }
  // no recognizable live-question block; append
  return prompt + "\n\n" + trim(block.str());
}

std::string repeat_format_instruction(const std::string& prompt, int k) {
  if (k <= 1) return prompt;
  // Identify the format-instruction sentence: prefer the non-MCQ categories
  // (a wrapping prompt on an MCQ task also contains the MCQ fragment).
  auto try_category = [&](Category cat) -> const FormatSpec* {
    for (const auto& f : all_formats())
      if (f.category == cat && prompt.find(f.instruction_text) !=
                                   std::string::npos)
        return &f;
    return nullptr;
  };
  const FormatSpec* fmt = nullptr;
  for (Category cat : {Category::Wrapping, Category::List, Category::Mapping,
                       Category::MCQ})
    if ((fmt = try_category(cat))) break;
  if (!fmt) return prompt;
  size_t pos = prompt.find(fmt->instruction_text);
  std::ostringstream rep;
  for (int i = 0; i < k; ++i)
    rep << (i ? " " : "") << fmt->instruction_text;
  return prompt.substr(0, pos) + rep.str() +
         prompt.substr(pos + fmt->instruction_text.size());
}

std::vector<std::string> mapping_schema_keys(const Sample& sample,
                                             const FormatSpec& format) {
  if (format.category != Category::Mapping) return {};
  return mapping_keys(sample, format);
}

std::string render_answer(const Gold& gold, const std::vector<Choice>& choices,
                          const FormatSpec& format, bool cot) {
  std::string body;
  switch (format.category) {
    case Category::MCQ:
      body = scalar_answer(gold, choices, format.answer_type);
      break;
    case Category::Wrapping: {
      std::string content = scalar_answer(
          gold, choices, choices.empty() ? AnswerType::FreeText
                                         : AnswerType::McqChar);
      if (format.wrapping_tokens) {
        body = format.wrapping_tokens->first + content +
               format.wrapping_tokens->second;
      } else {
        body = "So the answer is: " + content;
      }
      break;
    }
    case Category::List:
      body = render_list(render_items(gold), *format.list_style);
      break;
    case Category::Mapping: {
      const auto* map = std::get_if<CategoryMap>(&gold);
      CategoryMap m = map ? *map : CategoryMap{};
      if (format.map_style == MapStyle::Json) {
        std::ostringstream os;
        os << "{";
        bool first = true;
        for (const auto& key : format.map_schema) {
          auto it = m.find(key);
          if (it == m.end()) continue;
          if (!first) os << ", ";
          first = false;
          os << "\"" << key << "\": [";
          for (size_t i = 0; i < it->second.size(); ++i) {
            if (i) os << ", ";
            os << "\"" << it->second[i] << "\"";
          }
          os << "]";
        }
        os << "}";
        body = os.str();
      } else {
        std::ostringstream os;
        bool first = true;
        for (const auto& key : format.map_schema) {
          auto it = m.find(key);
          if (it == m.end()) continue;
          if (!first) os << "\n";
          first = false;
          os << key << ":";
          for (const auto& item : it->second) os << "\n- " << item;
        }
        body = os.str();
      }
      break;
    }
  }
  if (cot && format.category != Category::Wrapping)
    return "<ANSWER>" + body + "</ANSWER>";
  return body;
}

std::string render_answer(const Sample& sample, const FormatSpec& format,
                          bool cot) {
  return render_answer(sample.gold, sample.choices, format, cot);
}

}  // namespace formatbias
