#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace steer {

// A verifiable instruction: validates its kwargs (throwing KwargsError) and
// then tests the response text.
using CheckerFn = std::function<bool(const nlohmann::json& kwargs, const std::string& response)>;

class CheckerRegistry {
 public:
  // Registry holding the built-in checkers:
  //   keywords:existence               {"keywords": [str, ...]}
  //   keywords:forbidden_words         {"forbidden_words": [str, ...]}
  //   length_constraints:number_words  {"relation": "at least"|"at most"|"less than", "num_words": int}
  //   punctuation:no_comma             {}
  //   change_case:english_lowercase    {}
  static const CheckerRegistry& builtin();

  void add(const std::string& id, CheckerFn fn);
  bool contains(const std::string& id) const { return checkers_.contains(id); }
  std::vector<std::string> ids() const;

  // Raises RegistryError for an unknown id.
  bool check(const std::string& id, const nlohmann::json& kwargs, const std::string& response) const;

 private:
  std::map<std::string, CheckerFn> checkers_;
};

bool check_instruction(const std::string& checker_id, const nlohmann::json& kwargs, const std::string& response);

// Whitespace-delimited token count.
std::size_t count_words(const std::string& text);

}  // namespace steer
