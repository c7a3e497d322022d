#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "steer/model.hpp"

namespace steer {

struct ContrastivePair {
  std::string prompt;
  std::string positive;
  std::string negative;
};
using ContrastivePairs = std::vector<ContrastivePair>;

// JSON lines: {"prompt": ..., "positive": ..., "negative": ...}
ContrastivePairs load_contrastive_pairs(const std::filesystem::path& path);
ContrastivePairs contrastive_pairs_from_json(const nlohmann::json& array);
// Nonempty, and every completion nonempty; raises EmptyDataError otherwise.
void validate_pairs(const ContrastivePairs& pairs);

enum class TrainMethod { MeanDiff, SinglePair, ProbeMassShift };
enum class Accumulate { LastToken, MeanOverTokens };

struct VectorTrainSpec {
  TrainMethod method = TrainMethod::MeanDiff;
  Accumulate accumulate = Accumulate::LastToken;
};
VectorTrainSpec train_spec_from_json(const nlohmann::json& j);

// Mean over pairs of (h_pos - h_neg) at ResidualPost(layer), where each side
// is BOS + prompt + completion and h is taken at the last token or averaged
// over the completion tokens.
Tensor estimate_mean_difference(const Model& model, const ContrastivePairs& pairs, std::size_t layer,
                                Accumulate accumulate);

// Per-position ResidualPost(layer) differences of BOS + prompt for the two
// prompts, the shorter one right-padded with PAD. Shape [m x d_model].
Tensor estimate_single_pair(const Model& model, const std::string& prompt_pos, const std::string& prompt_neg,
                            std::size_t layer);

// ---- per-head probes ------------------------------------------------------

struct LabeledPrompt {
  std::string prompt;
  int label = 0;  // 0 or 1
};

struct HeadProbe {
  std::size_t layer = 0;
  std::size_t head = 0;
  Tensor direction;  // unit-norm mass-mean shift, [d_head]
  float sigma = 0.0f;
  float accuracy = 0.0f;
};

// One entry per (layer, head), layer-major.
using ProbeTable = std::vector<HeadProbe>;

struct ProbeHyperparams {
  double learning_rate = 0.1;
  std::size_t epochs = 200;
};

struct ProbeSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Stratified split from one seeded shuffle; each class keeps at least one
// example on each side. Invariant under swapping the two labels.
ProbeSplit split_examples(const std::vector<int>& labels, double val_fraction, std::uint64_t seed);

struct LogisticProbe {
  std::vector<double> weights;
  double bias = 0.0;
  double decision(std::span<const float> x) const;
};

// Full-batch gradient descent on binary cross-entropy from a zero start.
LogisticProbe fit_logistic_probe(std::span<const Tensor> features, const std::vector<int>& labels,
                                 const std::vector<std::size_t>& train_idx, const ProbeHyperparams& hp = {});

// activations[layer * n_heads + head][example] is that head's [d_head]
// activation for the example.
ProbeTable train_probes_on_activations(const std::vector<std::vector<Tensor>>& activations, std::size_t n_heads,
                                       const std::vector<int>& labels, double val_fraction, std::uint64_t seed,
                                       const ProbeHyperparams& hp = {});

// Collects HeadOut activations at the last token of BOS + prompt and trains
// one probe per (layer, head).
ProbeTable train_head_probes(const Model& model, const std::vector<LabeledPrompt>& data, double val_fraction,
                             std::uint64_t seed, const ProbeHyperparams& hp = {});

// K heads with the highest validation accuracy; ties go to the lower
// (layer, head). Raises SelectionError unless 1 <= K <= table size.
std::vector<std::pair<std::size_t, std::size_t>> select_topk_heads(const ProbeTable& table, std::size_t k);

}  // namespace steer
