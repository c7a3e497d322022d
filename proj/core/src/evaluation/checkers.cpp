#include "steer/evaluation/checkers.hpp"

#include <algorithm>
#include <cctype>

#include "steer/errors.hpp"

namespace steer {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string> string_list(const nlohmann::json& kwargs, const std::string& key, const std::string& id) {
  if (!kwargs.is_object() || !kwargs.contains(key) || !kwargs.at(key).is_array()) {
    throw KwargsError(id + ": kwargs must contain a list '" + key + "'");
  }
  std::vector<std::string> out;
  for (const auto& v : kwargs.at(key)) {
    if (!v.is_string()) throw KwargsError(id + ": '" + key + "' entries must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

void require_empty(const nlohmann::json& kwargs, const std::string& id) {
  if (!kwargs.is_null() && !(kwargs.is_object() && kwargs.empty())) {
    throw KwargsError(id + ": takes no kwargs");
  }
}

bool keywords_existence(const nlohmann::json& kwargs, const std::string& response) {
  const auto keywords = string_list(kwargs, "keywords", "keywords:existence");
  const std::string hay = lower(response);
  return std::all_of(keywords.begin(), keywords.end(),
                     [&](const std::string& k) { return hay.find(lower(k)) != std::string::npos; });
}

bool forbidden_words(const nlohmann::json& kwargs, const std::string& response) {
  const auto words = string_list(kwargs, "forbidden_words", "keywords:forbidden_words");
  const std::string hay = lower(response);
  return std::none_of(words.begin(), words.end(),
                      [&](const std::string& w) { return hay.find(lower(w)) != std::string::npos; });
}

bool number_words(const nlohmann::json& kwargs, const std::string& response) {
  const std::string id = "length_constraints:number_words";
  if (!kwargs.is_object() || !kwargs.contains("relation") || !kwargs.at("relation").is_string() ||
      !kwargs.contains("num_words") || !kwargs.at("num_words").is_number_integer() ||
      kwargs.at("num_words").get<std::int64_t>() < 0) {
    throw KwargsError(id + ": kwargs need 'relation' (string) and 'num_words' (non-negative integer)");
  }
  const auto relation = kwargs.at("relation").get<std::string>();
  const auto n = kwargs.at("num_words").get<std::size_t>();
  const std::size_t words = count_words(response);
  if (relation == "at least") return words >= n;
  if (relation == "at most") return words <= n;
  if (relation == "less than") return words < n;
  throw KwargsError(id + ": unknown relation '" + relation + "'");
}

bool no_comma(const nlohmann::json& kwargs, const std::string& response) {
  require_empty(kwargs, "punctuation:no_comma");
  return response.find(',') == std::string::npos;
}

bool english_lowercase(const nlohmann::json& kwargs, const std::string& response) {
  require_empty(kwargs, "change_case:english_lowercase");
  return std::none_of(response.begin(), response.end(), [](unsigned char c) { return std::isupper(c) != 0; });
}

}  // namespace

std::size_t count_words(const std::string& text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

const CheckerRegistry& CheckerRegistry::builtin() {
  static const CheckerRegistry reg = [] {
    CheckerRegistry r;
    r.add("keywords:existence", keywords_existence);
    r.add("keywords:forbidden_words", forbidden_words);
    r.add("length_constraints:number_words", number_words);
    r.add("punctuation:no_comma", no_comma);
    r.add("change_case:english_lowercase", english_lowercase);
    return r;
  }();
  return reg;
}

void CheckerRegistry::add(const std::string& id, CheckerFn fn) { checkers_[id] = std::move(fn); }

std::vector<std::string> CheckerRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : checkers_) out.push_back(id);
  return out;
}

bool CheckerRegistry::check(const std::string& id, const nlohmann::json& kwargs, const std::string& response) const {
  auto it = checkers_.find(id);
  if (it == checkers_.end()) throw RegistryError("unknown instruction checker '" + id + "'");
  return it->second(kwargs, response);
}

bool check_instruction(const std::string& checker_id, const nlohmann::json& kwargs, const std::string& response) {
  return CheckerRegistry::builtin().check(checker_id, kwargs, response);
}

}  // namespace steer
