#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "steer/control.hpp"

namespace steer {

inline constexpr const char* kSegmentSeparator = "\n\n";

struct ExampleEntry {
  std::string input;
  std::string output;
};

struct ExamplePool {
  std::vector<ExampleEntry> examples;
  std::string format = "Input: {input}\nOutput: {output}";

  std::string render(const ExampleEntry& e) const;
};

// JSON lines: {"input": ..., "output": ...}
std::vector<ExampleEntry> load_example_pool(const std::filesystem::path& path);
std::vector<ExampleEntry> examples_from_json(const nlohmann::json& array);

// k examples drawn uniformly without replacement (seeded), rendered and
// joined by blank lines, then the original prompt. k = 0 is the identity.
std::string few_shot_adapt(const std::string& prompt, const ExamplePool& pool, std::size_t k, std::uint64_t seed);

// prefix + "\n\n" + prompt; an empty prefix leaves the prompt unchanged.
std::string prefix_adapt(const std::string& prompt, const std::string& prefix);

//   params: k, seed (0), format (optional)
class FewShot final : public InputControl {
 public:
  FewShot(std::string name, nlohmann::json params, std::vector<ExampleEntry> pool);
  void steer(Model& model) override;
  std::string adapt(const std::string& prompt) const override;

 private:
  ExamplePool pool_;
  std::size_t k_;
  std::uint64_t seed_;
};

//   params: prefix
class Prefix final : public InputControl {
 public:
  Prefix(std::string name, nlohmann::json params);
  std::string adapt(const std::string& prompt) const override;

 private:
  std::string prefix_;
};

}  // namespace steer
