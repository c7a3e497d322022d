#include "steer/state/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "steer/errors.hpp"
#include "steer/runtime.hpp"

namespace steer {

namespace {

TokenIds bos_encode(const std::string& text) {
  TokenIds ids{kBos};
  const auto body = tokenize(text);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

void check_layer(const Model& model, std::size_t layer) {
  if (layer >= model.config.n_layers) {
    throw SelectionError("layer " + std::to_string(layer) + " out of range for a " +
                         std::to_string(model.config.n_layers) + "-layer model");
  }
}

Tensor residual_post(const Model& model, const TokenIds& ids, std::size_t layer) {
  const HookSite site = HookSite::residual_post(layer);
  return std::move(capture_sites(model, ids, std::span(&site, 1)).front());
}

// Activation summary of one side of a contrastive pair.
std::vector<double> side_activation(const Model& model, const std::string& prompt, const std::string& completion,
                                    std::size_t layer, Accumulate acc, std::size_t pair_index) {
  const TokenIds ids = bos_encode(prompt + completion);
  if (ids.size() > model.config.max_seq) {
    throw LengthError("contrastive pair " + std::to_string(pair_index) + " has " + std::to_string(ids.size()) +
                      " tokens, more than max_seq " + std::to_string(model.config.max_seq));
  }
  const Tensor h = residual_post(model, ids, layer);
  const std::size_t d = h.cols();
  std::vector<double> out(d, 0.0);
  if (acc == Accumulate::LastToken) {
    auto last = h.row(h.rows() - 1);
    for (std::size_t c = 0; c < d; ++c) out[c] = last[c];
    return out;
  }
  const std::size_t first = 1 + prompt.size();
  for (std::size_t r = first; r < h.rows(); ++r) {
    auto row = h.row(r);
    for (std::size_t c = 0; c < d; ++c) out[c] += row[c];
  }
  const double n = static_cast<double>(h.rows() - first);
  for (auto& v : out) v /= n;
  return out;
}

}  // namespace

ContrastivePairs contrastive_pairs_from_json(const nlohmann::json& array) {
  if (!array.is_array()) throw ConfigError("contrastive pairs must be a JSON array");
  ContrastivePairs pairs;
  for (const auto& obj : array) {
    try {
      pairs.push_back({obj.at("prompt").get<std::string>(), obj.at("positive").get<std::string>(),
                       obj.at("negative").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed contrastive pair: ") + e.what());
    }
  }
  return pairs;
}

ContrastivePairs load_contrastive_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open contrastive pairs file " + path.string());
  nlohmann::json arr = nlohmann::json::array();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      arr.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return contrastive_pairs_from_json(arr);
}

void validate_pairs(const ContrastivePairs& pairs) {
  if (pairs.empty()) throw EmptyDataError("contrastive pair set is empty");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].positive.empty() || pairs[i].negative.empty()) {
      throw EmptyDataError("contrastive pair " + std::to_string(i) + " has an empty completion");
    }
  }
}

VectorTrainSpec train_spec_from_json(const nlohmann::json& j) {
  VectorTrainSpec spec;
  if (j.is_null()) return spec;
  const std::string method = j.value("method", "mean_diff");
  const std::string acc = j.value("accumulate", "last_token");
  if (method == "mean_diff") spec.method = TrainMethod::MeanDiff;
  else if (method == "single_pair") spec.method = TrainMethod::SinglePair;
  else if (method == "probe_mass_shift") spec.method = TrainMethod::ProbeMassShift;
  else throw ConfigError("unknown train_spec method '" + method + "'");
  if (acc == "last_token") spec.accumulate = Accumulate::LastToken;
  else if (acc == "mean_over_tokens") spec.accumulate = Accumulate::MeanOverTokens;
  else throw ConfigError("unknown train_spec accumulate '" + acc + "'");
  return spec;
}

Tensor estimate_mean_difference(const Model& model, const ContrastivePairs& pairs, std::size_t layer,
                                Accumulate accumulate) {
  validate_pairs(pairs);
  check_layer(model, layer);
  const std::size_t d = model.config.d_model;
  std::vector<double> sum(d, 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto pos = side_activation(model, pairs[i].prompt, pairs[i].positive, layer, accumulate, i);
    const auto neg = side_activation(model, pairs[i].prompt, pairs[i].negative, layer, accumulate, i);
    for (std::size_t c = 0; c < d; ++c) sum[c] += pos[c] - neg[c];
  }
  Tensor out({d});
  for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>(sum[c] / static_cast<double>(pairs.size()));
  return out;
}

Tensor estimate_single_pair(const Model& model, const std::string& prompt_pos, const std::string& prompt_neg,
                            std::size_t layer) {
  if (prompt_pos.empty() || prompt_neg.empty()) throw EmptyDataError("single-pair prompts must be nonempty");
  check_layer(model, layer);
  TokenIds pos = bos_encode(prompt_pos);
  TokenIds neg = bos_encode(prompt_neg);
  const std::size_t m = std::max(pos.size(), neg.size());
  if (m > model.config.max_seq) {
    throw LengthError("single-pair prompt has " + std::to_string(m) + " tokens, more than max_seq " +
                      std::to_string(model.config.max_seq));
  }
  pos.resize(m, kPad);
  neg.resize(m, kPad);
  const Tensor hp = residual_post(model, pos, layer);
  const Tensor hn = residual_post(model, neg, layer);
  Tensor out({m, model.config.d_model});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = hp[i] - hn[i];
  return out;
}

ProbeSplit split_examples(const std::vector<int>& labels, double val_fraction, std::uint64_t seed) {
  std::size_t count[2] = {0, 0};
  for (int y : labels) {
    if (y != 0 && y != 1) throw ClassBalanceError("probe labels must be 0 or 1");
    ++count[y];
  }
  if (count[0] < 2 || count[1] < 2) {
    throw ClassBalanceError("probe training needs at least two examples of each class (got " +
                            std::to_string(count[0]) + " and " + std::to_string(count[1]) + ")");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");

  std::size_t quota[2];
  for (int c = 0; c < 2; ++c) {
    auto q = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(count[c])));
    quota[c] = std::clamp<std::size_t>(q, 1, count[c] - 1);
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(i)]);

  ProbeSplit split;
  std::size_t taken[2] = {0, 0};
  for (std::size_t idx : order) {
    const int y = labels[idx];
    if (taken[y] < quota[y]) {
      ++taken[y];
      split.val.push_back(idx);
    } else {
      split.train.push_back(idx);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  return split;
}

double LogisticProbe::decision(std::span<const float> x) const {
  double z = bias;
  for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
  return z;
}

LogisticProbe fit_logistic_probe(std::span<const Tensor> features, const std::vector<int>& labels,
                                 const std::vector<std::size_t>& train_idx, const ProbeHyperparams& hp) {
  if (train_idx.empty()) throw EmptyDataError("probe training set is empty");
  const std::size_t d = features[train_idx.front()].size();
  LogisticProbe probe;
  probe.weights.assign(d, 0.0);
  std::vector<double> grad(d);
  const double inv_n = 1.0 / static_cast<double>(train_idx.size());
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t idx : train_idx) {
      const auto x = features[idx].data();
      const double p = 1.0 / (1.0 + std::exp(-probe.decision(x)));
      const double err = p - static_cast<double>(labels[idx]);
      for (std::size_t c = 0; c < d; ++c) grad[c] += err * x[c];
      grad_b += err;
    }
    for (std::size_t c = 0; c < d; ++c) probe.weights[c] -= hp.learning_rate * grad[c] * inv_n;
    probe.bias -= hp.learning_rate * grad_b * inv_n;
  }
  return probe;
}

ProbeTable train_probes_on_activations(const std::vector<std::vector<Tensor>>& activations, std::size_t n_heads,
                                       const std::vector<int>& labels, double val_fraction, std::uint64_t seed,
                                       const ProbeHyperparams& hp) {
  if (n_heads == 0 || activations.empty() || activations.size() % n_heads != 0) {
    throw DimensionError("activation table does not match the head count");
  }
  const ProbeSplit split = split_examples(labels, val_fraction, seed);
  ProbeTable table;
  table.reserve(activations.size());
  for (std::size_t g = 0; g < activations.size(); ++g) {
    const auto& acts = activations[g];
    if (acts.size() != labels.size()) throw DimensionError("activation count does not match label count");
    HeadProbe hp_out;
    hp_out.layer = g / n_heads;
    hp_out.head = g % n_heads;

    std::vector<Tensor> cls[2];
    for (std::size_t idx : split.train) cls[labels[idx]].push_back(acts[idx]);
    const Tensor mu0 = vec_stats(cls[0]).mean();
    const Tensor mu1 = vec_stats(cls[1]).mean();
    Tensor dir(mu1.shape());
    for (std::size_t c = 0; c < dir.size(); ++c) dir[c] = mu1[c] - mu0[c];
    const float norm = l2_norm(dir.data());
    if (norm == 0.0f) {
      throw NormalizationError("head (" + std::to_string(hp_out.layer) + ", " + std::to_string(hp_out.head) +
                               ") has identical class means; direction is undefined");
    }
    for (auto& v : dir.data()) v /= norm;

    std::vector<Tensor> train_rows;
    for (std::size_t idx : split.train) train_rows.push_back(acts[idx]);
    hp_out.sigma = vec_stats(train_rows).std_along(dir.data());
    hp_out.direction = std::move(dir);

    const LogisticProbe probe = fit_logistic_probe(acts, labels, split.train, hp);
    std::size_t correct = 0;
    for (std::size_t idx : split.val) {
      const int pred = probe.decision(acts[idx].data()) > 0.0 ? 1 : 0;
      if (pred == labels[idx]) ++correct;
    }
    hp_out.accuracy = static_cast<float>(static_cast<double>(correct) / static_cast<double>(split.val.size()));
    table.push_back(std::move(hp_out));
  }
  return table;
}

ProbeTable train_head_probes(const Model& model, const std::vector<LabeledPrompt>& data, double val_fraction,
                             std::uint64_t seed, const ProbeHyperparams& hp) {
  const ModelConfig& cfg = model.config;
  std::vector<int> labels;
  for (const auto& ex : data) labels.push_back(ex.label);
  // Validate class balance before paying for forward passes.
  split_examples(labels, val_fraction, seed);

  std::vector<HookSite> sites;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) sites.push_back(HookSite::head_out(l));

  std::vector<std::vector<Tensor>> acts(cfg.total_heads());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const TokenIds ids = bos_encode(data[i].prompt);
    if (ids.size() > cfg.max_seq) {
      throw LengthError("probe example " + std::to_string(i) + " exceeds max_seq");
    }
    const auto captured = capture_sites(model, ids, sites);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
      const Tensor& ho = captured[l];  // [n x heads x d_head]
      const std::size_t last = ids.size() - 1;
      for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        const float* src = ho.data().data() + (last * cfg.n_heads + h) * cfg.d_head();
        acts[l * cfg.n_heads + h].emplace_back(Shape{cfg.d_head()}, std::vector<float>(src, src + cfg.d_head()));
      }
    }
  }
  return train_probes_on_activations(acts, cfg.n_heads, labels, val_fraction, seed, hp);
}

std::vector<std::pair<std::size_t, std::size_t>> select_topk_heads(const ProbeTable& table, std::size_t k) {
  if (k < 1 || k > table.size()) {
    throw SelectionError("K=" + std::to_string(k) + " must be between 1 and " + std::to_string(table.size()));
  }
  std::vector<std::size_t> order(table.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = table[a];
    const auto& pb = table[b];
    if (pa.accuracy != pb.accuracy) return pa.accuracy > pb.accuracy;
    if (pa.layer != pb.layer) return pa.layer < pb.layer;
    return pa.head < pb.head;
  });
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < k; ++i) out.emplace_back(table[order[i]].layer, table[order[i]].head);
  return out;
}

}  // namespace steer
