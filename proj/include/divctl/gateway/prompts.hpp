#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/gateway/types.hpp"

namespace divctl::prompts {

inline constexpr std::string_view kSystemPrompt =
    "You are a useful assistant. You give very brief answers, in very few words, no need to be "
    "polite, do not provide explanations.";

/// Label-suggestion request for attribute `attribute` in context `context`.
inline CompletionRequest label_request(std::string_view context, std::string_view attribute,
                                       std::size_t count) {
  CompletionRequest r;
  r.system = std::string(kSystemPrompt);
  r.instruction =
      "For the extracted attribute " + std::string(attribute) + " in the context of " +
      std::string(context) +
      ", suggest possible labels for the attribute and provide a precise definition. Consider "
      "general knowledge or common scenarios for accuracy. Example: for the attribute 'color' in "
      "the context of 'sky', some possible labels are blue, white, grey, orange, and red. For the "
      "attribute 'ethnicity' in the context of 'person', some possible labels are Caucasian, "
      "Black, Asian, Hispanic, and Middle Eastern.";
  r.answer_template = "Here are " + std::to_string(count) + " possible labels of attribute " +
                      std::string(attribute) + " in the context of " + std::string(context) +
                      ":\n1.";
  r.task = CompletionTask::SuggestLabels;
  r.context = std::string(context);
  r.attribute = std::string(attribute);
  r.count = count;
  return r;
}

/// Attribute-suggestion request; always asks for three attributes.
inline CompletionRequest attribute_request(std::string_view context) {
  CompletionRequest r;
  r.system = std::string(kSystemPrompt);
  // "diversify.Consider" is kept byte-for-byte.
  r.instruction = "For the context of " + std::string(context) +
                  ", suggest possible attributes to diversify.Consider general knowledge or "
                  "common scenarios for accuracy.";
  r.answer_template = "Here are 3 possible attributes in the context of " + std::string(context) +
                      ":\n1.";
  r.task = CompletionTask::SuggestAttributes;
  r.context = std::string(context);
  r.count = 3;
  return r;
}

namespace detail {

inline std::string strip_quotes(std::string s) {
  static constexpr std::string_view kQuotes[] = {"\"", "'", "`", "\xE2\x80\x9C", "\xE2\x80\x9D",
                                                 "\xE2\x80\x98", "\xE2\x80\x99"};
  bool changed = true;
  while (changed && !s.empty()) {
    changed = false;
    for (auto q : kQuotes) {
      if (s.size() >= q.size() && s.compare(0, q.size(), q) == 0) {
        s.erase(0, q.size());
        changed = true;
      }
      if (s.size() >= q.size() && s.compare(s.size() - q.size(), q.size(), q) == 0) {
        s.erase(s.size() - q.size());
        changed = true;
      }
    }
    s = trim(s);
  }
  return s;
}

inline std::string clean_item(std::string_view raw) {
  std::string s = trim(raw);
  s = strip_quotes(std::move(s));
  // Drop a trailing definition ("Vintage: older than 25 years", "Old - worn").
  for (std::string_view sep : {std::string_view(":"), std::string_view(" - "),
                               std::string_view(" \xE2\x80\x93 "), std::string_view(" (")}) {
    auto pos = s.find(sep);
    if (pos != std::string::npos && pos > 0) s.erase(pos);
  }
  s = trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) s.pop_back();
  return strip_quotes(trim(s));
}

}  // namespace detail

/// Extracts exactly `count` items from a numbered list ("1. x" or "1) x").
/// Lines without numbering are ignored; duplicate items (case-insensitive)
/// are skipped. Throws ParseFailure when fewer than `count` items remain.
inline std::vector<std::string> parse_numbered_list(std::string_view text, std::size_t count) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (start <= text.size() && items.size() < count) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;

    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t digits = i;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    if (i == digits || i >= line.size() || (line[i] != '.' && line[i] != ')')) continue;

    auto item = detail::clean_item(line.substr(i + 1));
    if (item.empty()) continue;
    bool duplicate = false;
    for (const auto& existing : items) duplicate = duplicate || iequals(existing, item);
    if (!duplicate) items.push_back(std::move(item));
  }
  if (items.size() < count)
    fail(Errc::ParseFailure, "expected " + std::to_string(count) + " numbered items, found " +
                                 std::to_string(items.size()));
  return items;
}

}  // namespace divctl::prompts
