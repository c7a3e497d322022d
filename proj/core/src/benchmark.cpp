#include "steer/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iterator>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "steer/registry.hpp"
#include "steer/weights_io.hpp"

namespace steer {

// ---- config -----------------------------------------------------------------

namespace {

nlohmann::json plain(const nlohmann::ordered_json& j) { return nlohmann::json::parse(j.dump()); }

PipelineItem item_from_json(const nlohmann::ordered_json& j, const std::string& pipeline) {
  if (!j.is_object() || !j.contains("control") || !j.at("control").is_string()) {
    throw ConfigError("pipeline '" + pipeline + "': every entry needs a string 'control' class");
  }
  const auto cls = j.at("control").get<std::string>();
  const auto name = j.contains("name") ? j.at("name").get<std::string>() : cls;
  nlohmann::json params = j.contains("params") ? plain(j.at("params")) : nlohmann::json::object();
  if (!params.is_object()) throw ConfigError("pipeline '" + pipeline + "': params of '" + name + "' must be an object");
  if (!j.contains("vars")) return FixedControl{cls, name, std::move(params)};

  ControlSpec spec;
  spec.control_cls = cls;
  spec.name = name;
  spec.params = std::move(params);
  const auto& vars = j.at("vars");
  if (!vars.is_object()) throw ConfigError("pipeline '" + pipeline + "': 'vars' must map names to value lists");
  for (const auto& [var, values] : vars.items()) {
    if (!values.is_array()) throw ConfigError("pipeline '" + pipeline + "': var '" + var + "' needs a value list");
    SweepVar sv{var, {}};
    for (const auto& v : values) sv.values.push_back(plain(v));
    spec.vars.push_back(std::move(sv));
  }
  const auto mode = j.contains("mode") ? j.at("mode").get<std::string>() : std::string("grid");
  if (mode == "grid") {
    spec.mode = SweepMode::Grid;
  } else if (mode == "zip") {
    spec.mode = SweepMode::Zip;
  } else {
    throw ConfigError("pipeline '" + pipeline + "': unknown sweep mode '" + mode + "'");
  }
  return spec;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::filesystem::path& p) {
  return p.is_relative() && !base.empty() ? base / p : p;
}

}  // namespace

BenchmarkConfig benchmark_config_from_json(const nlohmann::ordered_json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("benchmark config must be a JSON object");
  static const std::set<std::string> known = {"use_case",   "model",   "steering_pipelines", "runtime_overrides",
                                              "num_trials", "gen_params", "workers",       "output_dir", "plot"};
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) throw ConfigError("unknown benchmark config field '" + k + "'");
  }
  BenchmarkConfig cfg;
  cfg.base_dir = base_dir;
  try {
    if (!j.contains("use_case")) throw ConfigError("benchmark config needs 'use_case'");
    cfg.use_case = plain(j.at("use_case"));
    if (!j.contains("model")) throw ConfigError("benchmark config needs 'model'");
    cfg.model_path = resolve(base_dir, j.at("model").get<std::string>());
    if (!j.contains("steering_pipelines") || !j.at("steering_pipelines").is_object()) {
      throw ConfigError("benchmark config needs a 'steering_pipelines' object");
    }
    for (const auto& [name, items] : j.at("steering_pipelines").items()) {
      if (!items.is_array()) throw ConfigError("pipeline '" + name + "' must be a list of controls");
      auto& dst = cfg.pipelines[name];
      for (const auto& item : items) dst.push_back(item_from_json(item, name));
    }
    if (j.contains("runtime_overrides")) cfg.overrides = overrides_from_json(plain(j.at("runtime_overrides")));
    cfg.num_trials = j.contains("num_trials") ? j.at("num_trials").get<std::size_t>() : 1;
    if (cfg.num_trials == 0) throw ConfigError("num_trials must be >= 1");
    if (j.contains("gen_params")) {
      const auto& g = j.at("gen_params");
      cfg.gen = GenParams(g.contains("max_new_tokens") ? g.at("max_new_tokens").get<std::size_t>() : cfg.gen.max_new_tokens,
                          g.contains("do_sample") ? g.at("do_sample").get<bool>() : false,
                          g.contains("temperature") ? g.at("temperature").get<float>() : 1.0f,
                          g.contains("seed") ? g.at("seed").get<std::uint64_t>() : 0);
      cfg.seed_given = g.contains("seed");
    }
    cfg.workers = j.contains("workers") ? j.at("workers").get<std::size_t>() : 1;
    if (cfg.workers == 0) throw ConfigError("workers must be >= 1");
    if (j.contains("output_dir")) cfg.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("plot")) {
      const auto& plot = j.at("plot");
      if (plot.contains("x")) cfg.plot_x = plot.at("x").get<std::string>();
      if (plot.contains("y")) cfg.plot_y = plot.at("y").get<std::string>();
      if (plot.contains("group_by")) cfg.plot_group_by = plot.at("group_by").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("benchmark config: ") + e.what());
  }
  return cfg;
}

BenchmarkConfig load_benchmark_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark config " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return benchmark_config_from_json(j, path.parent_path());
}

// ---- expansion --------------------------------------------------------------

std::vector<ConfigInstance> expand_benchmark(const BenchmarkConfig& cfg) {
  std::vector<ConfigInstance> out;
  for (const auto& [pipeline, items] : cfg.pipelines) {
    std::set<std::string> names;
    std::vector<ConfigInstance> partial{{pipeline, {}, {}}};
    for (const auto& item : items) {
      std::vector<std::pair<FixedControl, ParamMap>> choices;
      if (const auto* fixed = std::get_if<FixedControl>(&item)) {
        choices.push_back({*fixed, {}});
      } else {
        const auto& spec = std::get<ControlSpec>(item);
        const auto swept = spec.swept_names();
        for (auto& params : expand_control_spec(spec)) {
          ParamMap labels;
          for (const auto& var : swept) labels[spec.instance_name() + "." + var] = params.at(var);
          choices.push_back({FixedControl{spec.control_cls, spec.instance_name(), std::move(params)}, std::move(labels)});
        }
      }
      if (!names.insert(choices.front().first.name).second) {
        throw ConfigError("pipeline '" + pipeline + "' has two controls named '" + choices.front().first.name + "'");
      }
      std::vector<ConfigInstance> next;
      for (const auto& base : partial) {
        for (const auto& [control, labels] : choices) {
          ConfigInstance inst = base;
          inst.controls.push_back(control);
          inst.params.insert(labels.begin(), labels.end());
          next.push_back(std::move(inst));
        }
      }
      partial = std::move(next);
    }
    for (auto& inst : partial) out.push_back(std::move(inst));
  }
  return out;
}

// ---- running ----------------------------------------------------------------

std::unique_ptr<UseCase> make_use_case(const nlohmann::json& spec, std::shared_ptr<const Model> model,
                                       const std::filesystem::path& base_dir) {
  if (!spec.is_object()) throw ConfigError("use_case must be an object");
  const auto type = spec.value("type", std::string("instruction_following"));
  if (type != "instruction_following") throw ConfigError("unknown use case type '" + type + "'");
  if (!spec.contains("data")) throw ConfigError("use_case needs 'data'");
  const auto& data = spec.at("data");
  auto points = data.is_string() ? load_datapoints(resolve(base_dir, data.get<std::string>())) : datapoints_from_json(data);

  const auto names = spec.value("metrics", std::vector<std::string>{"strict_instruction", "reward_score"});
  const auto transform = score_transform_from_string(spec.value("score_transform", std::string("identity")));
  std::vector<MetricPtr> metrics;
  for (const auto& n : names) {
    if (n == "strict_instruction") {
      metrics.push_back(std::make_shared<StrictInstructionMetric>());
    } else if (n == "reward_score") {
      metrics.push_back(std::make_shared<RewardScoreMetric>(std::make_shared<LoglikScorer>(model, transform)));
    } else {
      throw ConfigError("unknown metric '" + n + "'");
    }
  }
  return std::make_unique<InstructionFollowing>(std::move(points), std::move(metrics));
}

namespace {

struct UnitResult {
  std::vector<ResultRow> rows;
  std::vector<ErrorRecord> errors;
  bool failed = false;
};

UnitResult run_unit(const ConfigInstance& inst, const BenchmarkConfig& cfg, const Model& model, const UseCase& uc) {
  UnitResult res;
  auto fail = [&](const std::string& stage, const std::string& msg) {
    res.errors.push_back({inst.pipeline, inst.params, stage, msg});
    res.failed = true;
    return res;
  };

  std::vector<ControlPtr> controls;
  std::set<std::string> present;
  try {
    for (const auto& c : inst.controls) {
      controls.push_back(make_control(c.control_cls, c.name, c.params, cfg.base_dir));
      present.insert(c.name);
    }
  } catch (const std::exception& e) {
    return fail("setup", e.what());
  }

  std::optional<SteeringPipeline> pipeline;
  try {
    pipeline.emplace(model, std::move(controls));
    pipeline->steer();
  } catch (const std::exception& e) {
    return fail("steer", e.what());
  }

  RuntimeOverrides overrides;
  for (const auto& [control, fields] : cfg.overrides) {
    if (present.contains(control)) overrides[control] = fields;
  }

  UseCaseResult run;
  try {
    run = usecase_run(uc, *pipeline, overrides, cfg.num_trials, cfg.gen, inst.pipeline);
  } catch (const std::exception& e) {
    return fail("generate", e.what());
  }
  for (const auto& f : run.failures) res.errors.push_back({inst.pipeline, inst.params, "metric:" + f.metric, f.message});
  for (std::size_t g = 0; g < run.generations.size(); ++g) {
    const auto& gen = run.generations[g];
    for (const auto& m : run.metrics) {
      res.rows.push_back({inst.pipeline, inst.params, gen.trial, gen.datapoint_id, m.name, m.scores[g]});
    }
  }
  return res;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ResultTable run_benchmark(const BenchmarkConfig& cfg, const Model& model, const UseCase& use_case) {
  const auto units = expand_benchmark(cfg);
  std::set<std::string> all_controls;
  for (const auto& u : units)
    for (const auto& c : u.controls) all_controls.insert(c.name);
  for (const auto& [control, _] : cfg.overrides) {
    if (!all_controls.contains(control)) {
      throw ConfigError("runtime_overrides references control '" + control + "' that no pipeline contains");
    }
  }

  std::vector<UnitResult> results(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) results[i] = run_unit(units[i], cfg, model, use_case);
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(cfg.workers, units.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  }

  ResultTable table;
  table.configs_total = units.size();
  for (auto& r : results) {
    if (r.failed) ++table.configs_failed;
    std::move(r.rows.begin(), r.rows.end(), std::back_inserter(table.rows));
    std::move(r.errors.begin(), r.errors.end(), std::back_inserter(table.errors));
  }
  std::vector<std::string> pipelines;
  for (const auto& [name, _] : cfg.pipelines) pipelines.push_back(name);
  table.metadata = {
      {"seed", cfg.gen.seed},
      {"model_checksum", checksum_hex(weights_checksum(model.weights))},
      {"timestamp", utc_timestamp()},
      {"num_trials", cfg.num_trials},
      {"max_new_tokens", cfg.gen.max_new_tokens},
      {"do_sample", cfg.gen.do_sample},
      {"pipelines", pipelines},
      {"datapoints", use_case.data().size()},
      {"configs_total", table.configs_total},
      {"configs_failed", table.configs_failed},
  };
  return table;
}

ResultTable run_benchmark(const BenchmarkConfig& cfg) {
  auto model = std::make_shared<const Model>(load_weights(cfg.model_path));
  auto uc = make_use_case(cfg.use_case, model, cfg.base_dir);
  return run_benchmark(cfg, *model, *uc);
}

// ---- pareto -----------------------------------------------------------------

std::vector<std::size_t> pareto_frontier(const std::vector<std::pair<double, double>>& points) {
  for (const auto& [x, y] : points) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw PlotError("pareto_frontier needs finite coordinates");
  }
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].first != points[b].first) return points[a].first > points[b].first;
    return a < b;
  });

  // Sweep from largest x; best_y is the highest y among strictly larger x.
  std::vector<std::size_t> frontier;
  double best_y = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_max = -std::numeric_limits<double>::infinity();
    while (j < order.size() && points[order[j]].first == points[order[i]].first) {
      group_max = std::max(group_max, points[order[j]].second);
      ++j;
    }
    if (group_max > best_y) {
      for (std::size_t k = i; k < j; ++k)
        if (points[order[k]].second == group_max) frontier.push_back(order[k]);
    }
    best_y = std::max(best_y, group_max);
    i = j;
  }
  std::sort(frontier.begin(), frontier.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].first != points[b].first) return points[a].first < points[b].first;
    return a < b;
  });
  return frontier;
}

// ---- export -----------------------------------------------------------------

std::string format_score(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

std::string param_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json score_json(double v) {
  if (std::isfinite(v)) return v;
  return format_score(v);
}

double score_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  throw ConfigError("invalid score '" + s + "'");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json params_json(const ParamMap& params) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : params) j[k] = v;
  return j;
}

ParamMap params_from_json(const nlohmann::json& j) {
  ParamMap out;
  for (const auto& [k, v] : j.items()) out[k] = v;
  return out;
}

}  // namespace

std::string results_csv(const ResultTable& table) {
  std::set<std::string> columns;
  for (const auto& r : table.rows)
    for (const auto& [k, _] : r.params) columns.insert(k);
  std::string out = "pipeline";
  for (const auto& c : columns) out += "," + csv_field(c);
  out += ",trial,datapoint,metric,score\n";
  for (const auto& r : table.rows) {
    out += csv_field(r.pipeline);
    for (const auto& c : columns) {
      out += ',';
      auto it = r.params.find(c);
      if (it != r.params.end()) out += csv_field(param_text(it->second));
    }
    out += "," + std::to_string(r.trial) + "," + csv_field(r.datapoint) + "," + csv_field(r.metric) + "," +
           format_score(r.score) + "\n";
  }
  return out;
}

std::string results_jsonl(const ResultTable& table) {
  std::string out;
  for (const auto& r : table.rows) {
    nlohmann::json j = {{"pipeline", r.pipeline}, {"params", params_json(r.params)}, {"trial", r.trial},
                        {"datapoint", r.datapoint}, {"metric", r.metric},         {"score", score_json(r.score)}};
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }
  return out;
}

std::vector<ResultRow> rows_from_jsonl(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      rows.push_back({j.at("pipeline").get<std::string>(), params_from_json(j.at("params")),
                      j.at("trial").get<std::size_t>(), j.at("datapoint").get<std::string>(),
                      j.at("metric").get<std::string>(), score_from_json(j.at("score"))});
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("results line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void export_results(const ResultTable& table, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "results.csv", results_csv(table));
  write_file(dir / "results.jsonl", results_jsonl(table));

  nlohmann::json meta = table.metadata;
  meta["rows"] = table.rows.size();
  meta["configs_total"] = table.configs_total;
  meta["configs_failed"] = table.configs_failed;
  auto& errors = meta["errors"] = nlohmann::json::array();
  for (const auto& e : table.errors) {
    errors.push_back({{"pipeline", e.pipeline}, {"params", params_json(e.params)}, {"stage", e.stage}, {"message", e.message}});
  }
  write_file(dir / "metadata.json", meta.dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
}

ResultTable load_results(const std::filesystem::path& dir) {
  ResultTable table;
  table.rows = rows_from_jsonl(read_file(dir / "results.jsonl"));
  if (std::filesystem::exists(dir / "metadata.json")) {
    try {
      table.metadata = nlohmann::json::parse(read_file(dir / "metadata.json"));
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError((dir / "metadata.json").string() + ": " + e.what());
    }
    table.configs_total = table.metadata.value("configs_total", std::size_t{0});
    table.configs_failed = table.metadata.value("configs_failed", std::size_t{0});
    for (const auto& e : table.metadata.value("errors", nlohmann::json::array())) {
      table.errors.push_back({e.value("pipeline", ""), params_from_json(e.value("params", nlohmann::json::object())),
                              e.value("stage", ""), e.value("message", "")});
    }
  }
  return table;
}

// ---- plotting ---------------------------------------------------------------

std::vector<TradeoffPoint> tradeoff_points(const ResultTable& table, const std::string& x_metric,
                                           const std::string& y_metric, const std::string& group_by) {
  for (const auto& m : {x_metric, y_metric}) {
    const bool found = std::any_of(table.rows.begin(), table.rows.end(), [&](const ResultRow& r) { return r.metric == m; });
    if (!found) throw PlotError("metric '" + m + "' not found in results");
  }
  struct Acc {
    TradeoffPoint point;
    double sx = 0, sy = 0;
    std::size_t nx = 0, ny = 0;
  };
  std::vector<Acc> groups;
  std::map<std::string, std::size_t> index;
  for (const auto& r : table.rows) {
    if (r.metric != x_metric && r.metric != y_metric) continue;
    const std::string key = r.pipeline + '\x1f' + params_json(r.params).dump();
    auto [it, fresh] = index.emplace(key, groups.size());
    if (fresh) groups.push_back({TradeoffPoint{r.pipeline, r.params, {}, 0, 0, r.pipeline == "baseline"}});
    Acc& a = groups[it->second];
    if (r.metric == x_metric) a.sx += r.score, ++a.nx;
    if (r.metric == y_metric) a.sy += r.score, ++a.ny;
  }
  std::vector<TradeoffPoint> out;
  for (auto& a : groups) {
    if (a.nx == 0 || a.ny == 0) continue;
    TradeoffPoint p = a.point;
    p.x = a.sx / static_cast<double>(a.nx);
    p.y = a.sy / static_cast<double>(a.ny);
    if (p.baseline) {
      p.label = "baseline";
    } else {
      for (const auto& [k, v] : p.params) {
        const bool match = group_by.empty() || k == group_by ||
                           (k.size() > group_by.size() && k.ends_with("." + group_by));
        if (!match) continue;
        const auto dot = k.rfind('.');
        if (!p.label.empty()) p.label += ", ";
        p.label += (dot == std::string::npos ? k : k.substr(dot + 1)) + "=" + param_text(v);
      }
      if (p.label.empty()) p.label = p.pipeline;
    }
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v, const char* fmt = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Axis {
  double lo, hi;
  double px_lo, px_hi;
  double map(double v) const { return px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

Axis make_axis(double lo, double hi, double px_lo, double px_hi) {
  if (hi - lo < 1e-12) {
    const double pad = std::max(std::abs(lo) * 0.1, 0.5);
    return {lo - pad, hi + pad, px_lo, px_hi};
  }
  const double pad = (hi - lo) * 0.08;
  return {lo - pad, hi + pad, px_lo, px_hi};
}

}  // namespace

std::string render_tradeoff_svg(const ResultTable& table, const std::string& x_metric, const std::string& y_metric,
                                const std::string& group_by) {
  const auto points = tradeoff_points(table, x_metric, y_metric, group_by);
  constexpr double W = 720, H = 480, L = 80, R = 30, T = 40, B = 60;

  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  if (!points.empty()) {
    x_lo = x_hi = points.front().x;
    y_lo = y_hi = points.front().y;
    for (const auto& p : points) {
      x_lo = std::min(x_lo, p.x), x_hi = std::max(x_hi, p.x);
      y_lo = std::min(y_lo, p.y), y_hi = std::max(y_hi, p.y);
    }
  }
  const Axis ax = make_axis(x_lo, x_hi, L, W - R);
  const Axis ay = make_axis(y_lo, y_hi, H - B, T);

  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
    << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(y_metric)
    << " vs " << xml_escape(x_metric) << "</text>\n";

  s << "<g stroke=\"black\" stroke-width=\"1\">\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\"/>\n";
  s << "</g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double vx = ax.lo + (ax.hi - ax.lo) * i / 4.0;
    const double vy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
    const double px = ax.map(vx), py = ay.map(vy);
    s << "<line x1=\"" << num(px) << "\" y1=\"" << H - B << "\" x2=\"" << num(px) << "\" y2=\"" << H - B + 5
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << num(px) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << num(vx, "%.3g")
      << "</text>\n";
    s << "<line x1=\"" << L - 5 << "\" y1=\"" << num(py) << "\" x2=\"" << L << "\" y2=\"" << num(py)
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << L - 8 << "\" y=\"" << num(py + 4) << "\" text-anchor=\"end\">" << num(vy, "%.3g")
      << "</text>\n";
  }
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 18 << "\" text-anchor=\"middle\">" << xml_escape(x_metric)
    << "</text>\n";
  s << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
    << (T + H - B) / 2 << ")\">" << xml_escape(y_metric) << "</text>\n";

  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) xy.emplace_back(p.x, p.y);
  const auto frontier = pareto_frontier(xy);
  if (!frontier.empty()) {
    s << "<polyline class=\"frontier\" fill=\"none\" stroke=\"#999999\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      if (i) s << ' ';
      s << num(ax.map(xy[frontier[i]].first)) << ',' << num(ay.map(xy[frontier[i]].second));
    }
    s << "\"/>\n";
  }

  for (const auto& p : points) {
    const double px = ax.map(p.x), py = ay.map(p.y);
    if (p.baseline) {
      s << "<g class=\"baseline\" stroke=\"black\" stroke-width=\"2.5\">"
        << "<line x1=\"" << num(px - 6) << "\" y1=\"" << num(py - 6) << "\" x2=\"" << num(px + 6) << "\" y2=\""
        << num(py + 6) << "\"/>"
        << "<line x1=\"" << num(px - 6) << "\" y1=\"" << num(py + 6) << "\" x2=\"" << num(px + 6) << "\" y2=\""
        << num(py - 6) << "\"/></g>\n";
    } else {
      s << "<circle class=\"point\" cx=\"" << num(px) << "\" cy=\"" << num(py)
        << "\" r=\"5\" fill=\"#3b6fb6\" stroke=\"white\"/>\n";
    }
    s << "<text class=\"label\" x=\"" << num(px + 8) << "\" y=\"" << num(py - 8) << "\">" << xml_escape(p.label)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

void render_tradeoff_svg(const ResultTable& table, const std::string& x_metric, const std::string& y_metric,
                         const std::string& group_by, const std::filesystem::path& path) {
  write_file(path, render_tradeoff_svg(table, x_metric, y_metric, group_by));
}

}  // namespace steer
