#include "formatbias/extractor.hpp"

#include <algorithm>
#include <cctype>

#include <json.hpp>

namespace formatbias {

namespace {

constexpr std::string_view kCotStart = "<ANSWER>";
constexpr std::string_view kCotEnd = "</ANSWER>";
constexpr std::string_view kPlaceholderPattern = "So the answer is:";

size_t count_nonoverlapping(std::string_view text, std::string_view token) {
  size_t n = 0, pos = 0;
  while ((pos = text.find(token, pos)) != std::string_view::npos) {
    ++n;
    pos += token.size();
  }
  return n;
}

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  while (start <= s.size()) {
    size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(start));
      break;
    }
    lines.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

std::string strip_item_quotes(std::string item) {
  if (item.size() >= 2) {
    char a = item.front(), b = item.back();
    if ((a == '"' && b == '"') || (a == '\'' && b == '\'')) {
      return trim(std::string_view(item).substr(1, item.size() - 2));
    }
  }
  return item;
}

// Splits "a, b, c" on top-level commas, honoring quotes.
std::vector<std::string> split_flow_items(std::string_view inner) {
  std::vector<std::string> items;
  std::string cur;
  char quote = 0;
  for (char c : inner) {
    if (quote) {
      cur.push_back(c);
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
      cur.push_back(c);
    } else if (c == ',') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  items.push_back(cur);
  std::vector<std::string> out;
  for (auto& it : items) {
    std::string t = strip_item_quotes(trim(it));
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

bool is_bullet_line(std::string_view trimmed) {
  if (trimmed.empty()) return false;
  if (trimmed[0] == '-' || trimmed[0] == '*') return true;
  // UTF-8 bullet "•"
  return trimmed.size() >= 3 && trimmed.substr(0, 3) == "\xe2\x80\xa2";
}

std::string bullet_item(std::string_view trimmed) {
  size_t skip =
      (trimmed.size() >= 3 && trimmed.substr(0, 3) == "\xe2\x80\xa2") ? 3 : 1;
  return trim(trimmed.substr(skip));
}

std::optional<std::vector<std::string>> parse_bracketed(std::string_view text,
                                                        Strictness strict) {
  std::string t = trim(text);
  if (strict == Strictness::Lenient) {
    size_t open = t.find('[');
    if (open == std::string::npos) return std::nullopt;
    size_t close = t.rfind(']');
    if (close == std::string::npos || close < open) return std::nullopt;
    t = t.substr(open, close - open + 1);
  }
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') return std::nullopt;
  std::string_view inner(t);
  inner = inner.substr(1, inner.size() - 2);
  if (trim(inner).empty()) return std::nullopt;
  auto items = split_flow_items(inner);
  if (items.empty()) return std::nullopt;
  return items;
}

std::optional<std::vector<std::string>> parse_bullets(std::string_view text,
                                                      Strictness strict) {
  std::vector<std::string> items;
  bool in_run = false;
  for (auto line : split_lines(text)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (is_bullet_line(t)) {
      std::string item = bullet_item(t);
      if (!item.empty()) items.push_back(std::move(item));
      in_run = true;
    } else if (strict == Strictness::Strict) {
      return std::nullopt;  // every non-empty line must be a bullet
    } else if (in_run) {
      break;  // lenient: first consecutive bullet block only
    }
  }
  if (items.empty()) return std::nullopt;
  return items;
}

std::optional<std::vector<std::string>> parse_sep(std::string_view text) {
  static constexpr std::string_view kSep = "<SEP>";
  std::vector<std::string> items;
  size_t start = 0;
  while (true) {
    size_t pos = text.find(kSep, start);
    std::string_view piece = pos == std::string_view::npos
                                 ? text.substr(start)
                                 : text.substr(start, pos - start);
    std::string t = trim(piece);
    if (!t.empty()) items.push_back(std::move(t));
    if (pos == std::string_view::npos) break;
    start = pos + kSep.size();
  }
  if (items.empty()) return std::nullopt;
  return items;
}

std::optional<std::vector<std::string>> parse_newlines(std::string_view text) {
  std::vector<std::string> items;
  for (auto line : split_lines(text)) {
    std::string t = trim(line);
    if (!t.empty()) items.push_back(std::move(t));
  }
  if (items.empty()) return std::nullopt;
  return items;
}

std::optional<std::vector<std::string>> json_value_to_list(
    const nlohmann::json& v, Strictness strict) {
  std::vector<std::string> out;
  if (v.is_string()) {
    out.push_back(v.get<std::string>());  // scalar promoted
    return out;
  }
  if (v.is_number() || v.is_boolean()) {
    if (strict == Strictness::Strict) return std::nullopt;
    out.push_back(v.dump());
    return out;
  }
  if (!v.is_array()) return std::nullopt;
  for (const auto& e : v) {
    if (e.is_string()) {
      out.push_back(e.get<std::string>());
    } else if (strict == Strictness::Lenient && (e.is_number() || e.is_boolean())) {
      out.push_back(e.dump());
    } else {
      return std::nullopt;
    }
  }
  return out;
}

std::optional<CategoryMap> parse_json_mapping(
    std::string_view text, const std::vector<std::string>& expected_keys,
    Strictness strict) {
  std::string t = trim(text);
  if (strict == Strictness::Lenient) {
    size_t open = t.find('{');
    size_t close = t.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
      return std::nullopt;
    t = t.substr(open, close - open + 1);
  }
  nlohmann::json doc = nlohmann::json::parse(t, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  CategoryMap out;
  for (const auto& key : expected_keys) {
    if (!doc.contains(key)) return std::nullopt;
    auto list = json_value_to_list(doc.at(key), strict);
    if (!list) return std::nullopt;
    out[key] = std::move(*list);
  }
  if (strict == Strictness::Strict &&
      doc.size() != expected_keys.size()) {
    return std::nullopt;  // extra keys
  }
  return out;
}

// The YAML subset used by the mapping prompts: block mappings whose values
// are inline scalars, flow sequences, or "- item" block sequences.
std::optional<CategoryMap> parse_yaml_mapping(
    std::string_view text, const std::vector<std::string>& expected_keys,
    Strictness strict) {
  CategoryMap doc;
  std::string current_key;
  bool started = false;
  for (auto raw : split_lines(text)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (is_bullet_line(line) && line[0] == '-') {
      if (current_key.empty()) {
        // top-level sequence, not a mapping
        if (strict == Strictness::Lenient && !started) continue;
        return std::nullopt;
      }
      std::string item = strip_item_quotes(trim(line.substr(1)));
      if (!item.empty()) doc[current_key].push_back(std::move(item));
      continue;
    }
    size_t colon = line.find(':');
    if (colon == std::string::npos || colon == 0) {
      if (strict == Strictness::Lenient) {
        if (!started) continue;  // leading prose
        break;                   // trailing prose
      }
      return std::nullopt;
    }
    std::string key = trim(std::string_view(line).substr(0, colon));
    std::string value = trim(std::string_view(line).substr(colon + 1));
    if (key.empty() || doc.count(key)) return std::nullopt;
    started = true;
    current_key = key;
    doc[key] = {};
    if (value.empty()) continue;
    if (value.front() == '[' && value.back() == ']') {
      std::string_view inner(value);
      doc[key] = split_flow_items(inner.substr(1, inner.size() - 2));
    } else {
      doc[key].push_back(strip_item_quotes(value));  // scalar promoted
    }
  }
  if (doc.empty()) return std::nullopt;
  CategoryMap out;
  for (const auto& key : expected_keys) {
    auto it = doc.find(key);
    if (it == doc.end()) return std::nullopt;
    out[key] = it->second;
  }
  if (strict == Strictness::Strict && doc.size() != expected_keys.size())
    return std::nullopt;
  return out;
}

FIVerdict fail(FailureReason r) {
  return FIVerdict{false, std::nullopt, r};
}

FIVerdict pass(Extracted e) {
  return FIVerdict{true, std::move(e), std::nullopt};
}

// Finds the placeholder pattern case-insensitively; returns the position of
// the last occurrence or npos.
size_t find_last_placeholder(std::string_view text) {
  std::string lower = lowercase(text);
  std::string pat = lowercase(kPlaceholderPattern);
  return lower.rfind(pat);
}

}  // namespace

std::string to_string(FailureReason r) {
  switch (r) {
    case FailureReason::MissingToken: return "MissingToken";
    case FailureReason::TokenCountMismatch: return "TokenCountMismatch";
    case FailureReason::NotInChoiceSet: return "NotInChoiceSet";
    case FailureReason::ParseFailure: return "ParseFailure";
    case FailureReason::EmptyAnswer: return "EmptyAnswer";
  }
  return "?";
}

std::optional<FailureReason> failure_reason_from_string(const std::string& s) {
  if (s == "MissingToken") return FailureReason::MissingToken;
  if (s == "TokenCountMismatch") return FailureReason::TokenCountMismatch;
  if (s == "NotInChoiceSet") return FailureReason::NotInChoiceSet;
  if (s == "ParseFailure") return FailureReason::ParseFailure;
  if (s == "EmptyAnswer") return FailureReason::EmptyAnswer;
  return std::nullopt;
}

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string normalize_value(std::string_view s) {
  std::string t = lowercase(trim(s));
  size_t b = 0, e = t.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(t[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(t[e - 1]))) --e;
  return trim(std::string_view(t).substr(b, e - b));
}

std::string strip_code_fence(std::string_view s) {
  std::string t = trim(s);
  if (t.size() < 6 || t.compare(0, 3, "```") != 0 ||
      t.compare(t.size() - 3, 3, "```") != 0)
    return t;
  std::string_view inner(t);
  inner = inner.substr(3, inner.size() - 6);
  // optional language tag on the opening fence
  size_t nl = inner.find('\n');
  if (nl != std::string_view::npos) {
    std::string tag = trim(inner.substr(0, nl));
    bool word = !tag.empty() &&
                std::all_of(tag.begin(), tag.end(), [](unsigned char c) {
                  return std::isalnum(c) != 0;
                });
    if (word) inner = inner.substr(nl + 1);
  }
  return trim(inner);
}

std::optional<std::string> extract_wrapped(std::string_view output,
                                           std::string_view start,
                                           std::string_view end) {
  if (output.find(start) == std::string_view::npos ||
      output.find(end) == std::string_view::npos)
    return std::nullopt;
  if (start == end) {
    if (count_nonoverlapping(output, start) != 2) return std::nullopt;
    size_t a = output.find(start);
    size_t b = output.find(end, a + start.size());
    return trim(output.substr(a + start.size(), b - a - start.size()));
  }
  if (count_nonoverlapping(output, start) +
          count_nonoverlapping(output, end) != 2)
    return std::nullopt;
  size_t a = output.find(start);
  size_t b = output.find(end, a + start.size());
  if (b == std::string_view::npos) return std::nullopt;  // end precedes start
  return trim(output.substr(a + start.size(), b - a - start.size()));
}

std::optional<std::string> parse_placeholder(std::string_view output) {
  size_t pos = find_last_placeholder(output);
  if (pos == std::string_view::npos) return std::nullopt;
  size_t begin = pos + kPlaceholderPattern.size();
  size_t eol = output.find('\n', begin);
  std::string_view rest = output.substr(
      begin, eol == std::string_view::npos ? std::string_view::npos
                                           : eol - begin);
  std::string ans = trim(rest);
  if (!ans.empty() && ans.back() == '.') ans.pop_back();
  ans = trim(ans);
  if (ans.empty()) return std::nullopt;
  return ans;
}

std::optional<std::vector<std::string>> parse_list(std::string_view text,
                                                   ListStyle style,
                                                   Strictness strictness) {
  std::string body = strip_code_fence(text);
  switch (style) {
    case ListStyle::Bracketed: return parse_bracketed(body, strictness);
    case ListStyle::Bullet: return parse_bullets(body, strictness);
    case ListStyle::Sep: return parse_sep(body);
    case ListStyle::Newline: return parse_newlines(body);
  }
  return std::nullopt;
}

std::optional<CategoryMap> parse_mapping(
    std::string_view text, MapStyle style,
    const std::vector<std::string>& expected_keys, Strictness strictness) {
  std::string body = strip_code_fence(text);
  if (style == MapStyle::Json)
    return parse_json_mapping(body, expected_keys, strictness);
  return parse_yaml_mapping(body, expected_keys, strictness);
}

FIVerdict score_format(std::string_view output, const FormatSpec& format,
                       const std::vector<Choice>* choices,
                       const std::vector<std::string>* expected_keys,
                       ScoreOptions opts) {
  std::string ans(output);

  // ZS-CoT envelope for non-wrapping categories: the same token-count rule
  // is applied to the envelope tokens, then the inner format is checked.
  if (opts.cot && format.category != Category::Wrapping) {
    if (ans.find(kCotStart) == std::string::npos ||
        ans.find(kCotEnd) == std::string::npos)
      return fail(FailureReason::MissingToken);
    auto inner = extract_wrapped(ans, kCotStart, kCotEnd);
    if (!inner) return fail(FailureReason::TokenCountMismatch);
    ans = *inner;
  }

  if (format.wrapping_tokens) {
    const auto& [w1, w2] = *format.wrapping_tokens;
    if (ans.find(w1) == std::string::npos ||
        ans.find(w2) == std::string::npos)
      return fail(FailureReason::MissingToken);
    auto inner = extract_wrapped(ans, w1, w2);
    if (!inner) return fail(FailureReason::TokenCountMismatch);
    ans = *inner;
  } else if (format.id == "wrap.placeholder") {
    if (find_last_placeholder(ans) == std::string_view::npos)
      return fail(FailureReason::MissingToken);
    auto captured = parse_placeholder(ans);
    if (!captured) return fail(FailureReason::EmptyAnswer);
    ans = *captured;
  } else {
    ans = trim(ans);
  }

  // MCQ membership (generalized to the sample's actual identifier set).
  if (choices && format.category != Category::List &&
      format.category != Category::Mapping) {
    if (format.answer_type == AnswerType::McqValue) {
      std::string norm = normalize_value(ans);
      for (const auto& c : *choices)
        if (normalize_value(c.value) == norm) return pass(c.value);
      return fail(FailureReason::NotInChoiceSet);
    }
    std::string t = trim(ans);
    if (!t.empty() && t.back() == '.') t = trim(t.substr(0, t.size() - 1));
    for (const auto& c : *choices)
      if (c.id == t) return pass(c.id);
    return fail(FailureReason::NotInChoiceSet);
  }

  switch (format.answer_type) {
    case AnswerType::McqChar:
    case AnswerType::McqValue: {
      // No choice set supplied: Algorithm-1 literal {A, B, C, D}.
      std::string t = trim(ans);
      if (format.answer_type == AnswerType::McqChar &&
          (t == "A" || t == "B" || t == "C" || t == "D"))
        return pass(t);
      return fail(FailureReason::NotInChoiceSet);
    }
    case AnswerType::FreeText: {
      std::string t = trim(ans);
      if (t.empty()) return fail(FailureReason::EmptyAnswer);
      return pass(t);
    }
    case AnswerType::StringList: {
      auto list = parse_list(ans, *format.list_style, opts.strictness);
      if (!list) return fail(FailureReason::ParseFailure);
      return pass(*list);
    }
    case AnswerType::CategoryMap: {
      if (!expected_keys || expected_keys->empty())
        return fail(FailureReason::ParseFailure);
      auto map =
          parse_mapping(ans, *format.map_style, *expected_keys, opts.strictness);
      if (!map) return fail(FailureReason::ParseFailure);
      return pass(*map);
    }
  }
  return fail(FailureReason::ParseFailure);
}

}  // namespace formatbias
