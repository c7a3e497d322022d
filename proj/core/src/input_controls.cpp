#include "steer/input_controls.hpp"

#include <fstream>
#include <numeric>

#include "steer/errors.hpp"

namespace steer {

std::string ExamplePool::render(const ExampleEntry& e) const {
  // Substitute both slots in one pass so example text containing "{output}"
  // is not re-expanded.
  std::string out;
  std::size_t i = 0;
  while (i < format.size()) {
    if (format.compare(i, 7, "{input}") == 0) {
      out += e.input;
      i += 7;
    } else if (format.compare(i, 8, "{output}") == 0) {
      out += e.output;
      i += 8;
    } else {
      out += format[i++];
    }
  }
  return out;
}

std::vector<ExampleEntry> examples_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw ConfigError("example pool must be a JSON array");
  std::vector<ExampleEntry> out;
  for (const auto& obj : array) {
    try {
      out.push_back({obj.at("input").get<std::string>(), obj.at("output").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed pool example: ") + e.what());
    }
  }
  return out;
}

std::vector<ExampleEntry> load_example_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open example pool " + path.string());
  nlohmann::json arr = nlohmann::json::array();
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      arr.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  return examples_from_json(arr);
}

std::string few_shot_adapt(const std::string& prompt, const ExamplePool& pool, std::size_t k, std::uint64_t seed) {
  if (k == 0) return prompt;
  const std::size_t n = pool.examples.size();
  if (k > n) {
    throw PoolExhaustedError("requested " + std::to_string(k) + " examples from a pool of " + std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots are the sample, in draw order.
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.uniform_int(n - i)]);
  std::string out;
  for (std::size_t i = 0; i < k; ++i) {
    out += pool.render(pool.examples[idx[i]]);
    out += kSegmentSeparator;
  }
  return out + prompt;
}

std::string prefix_adapt(const std::string& prompt, const std::string& prefix) {
  if (prefix.empty()) return prompt;
  return prefix + kSegmentSeparator + prompt;
}

FewShot::FewShot(std::string name, nlohmann::json params, std::vector<ExampleEntry> pool)
    : InputControl(std::move(name), std::move(params)) {
  pool_.examples = std::move(pool);
  if (this->params().contains("format")) pool_.format = param<std::string>("format");
  k_ = param<std::size_t>("k");
  seed_ = param_or<std::uint64_t>("seed", 0);
}

void FewShot::steer(Model&) {
  if (k_ > pool_.examples.size()) {
    throw PoolExhaustedError("k=" + std::to_string(k_) + " exceeds pool size " + std::to_string(pool_.examples.size()));
  }
}

std::string FewShot::adapt(const std::string& prompt) const { return few_shot_adapt(prompt, pool_, k_, seed_); }

Prefix::Prefix(std::string name, nlohmann::json params)
    : InputControl(std::move(name), std::move(params)), prefix_(param<std::string>("prefix")) {}

std::string Prefix::adapt(const std::string& prompt) const { return prefix_adapt(prompt, prefix_); }

}  // namespace steer
