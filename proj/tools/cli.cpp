#include "cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "steer/benchmark.hpp"
#include "steer/registry.hpp"
#include "steer/weights_io.hpp"

namespace steer::cli {

namespace {

using json = nlohmann::json;

std::string dump(const json& j, int indent = -1) { return j.dump(indent, ' ', false, json::error_handler_t::replace); }

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// "@path" reads the file, anything else is taken literally.
std::string text_or_file(const std::string& arg) { return !arg.empty() && arg[0] == '@' ? read_text(arg.substr(1)) : arg; }

json parse_json_arg(const std::string& arg, const std::string& what) {
  try {
    return json::parse(text_or_file(arg));
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("STEERBENCH_SEED");
  if (!v || !*v) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used == std::string(v).size()) return s;
  } catch (const std::exception&) {
  }
  throw ConfigError(std::string("STEERBENCH_SEED is not an unsigned integer: '") + v + "'");
}

std::uint64_t seed_or_default(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  return env_seed().value_or(0);
}

json tensor_listing(const Model& model) {
  json tensors = json::array();
  for (const auto& [name, t] : model.weights) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"checksum", checksum_hex(tensor_checksum(t))}});
  }
  return tensors;
}

int cmd_model_init(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag,
                   const std::string& out_path, bool as_json, std::ostream& out) {
  ModelConfig cfg;
  if (!config_path.empty()) {
    const std::string text = read_text(config_path);
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(config_path + ": " + e.what());
    }
    cfg = config_from_json(j);
  }
  const std::uint64_t seed = seed_or_default(seed_flag);
  const Model model = init_random(cfg, seed);
  save_weights(model, out_path);
  const auto checksum = checksum_hex(weights_checksum(model.weights));
  if (as_json) {
    out << dump({{"path", out_path}, {"seed", seed}, {"tensors", model.weights.size()}, {"checksum", checksum}}) << "\n";
  } else {
    out << "wrote " << out_path << " (" << model.weights.size() << " tensors, seed " << seed << ", checksum "
        << checksum << ")\n";
  }
  return kOk;
}

int cmd_model_info(const std::string& path, bool as_json, std::ostream& out) {
  const Model model = load_weights(path);
  const auto checksum = checksum_hex(weights_checksum(model.weights));
  if (as_json) {
    out << dump({{"config", to_json(model.config)},
                 {"tensor_count", model.weights.size()},
                 {"checksum", checksum},
                 {"tensors", tensor_listing(model)}})
        << "\n";
    return kOk;
  }
  out << "config: " << dump(to_json(model.config)) << "\n";
  out << "tensors: " << model.weights.size() << "\n";
  out << "checksum: " << checksum << "\n";
  for (const auto& [name, t] : model.weights) {
    std::string shape;
    for (auto d : t.shape()) shape += (shape.empty() ? "" : "x") + std::to_string(d);
    out << "  " << name << " [" << shape << "] " << checksum_hex(tensor_checksum(t)) << "\n";
  }
  return kOk;
}

struct RunArgs {
  std::string model, pipeline, prompt, overrides, datapoint;
  std::size_t max_new_tokens = 32;
  std::optional<std::uint64_t> seed;
  bool sample = false;
  float temperature = 1.0f;
  bool as_json = false;
};

int cmd_run(const RunArgs& a, std::ostream& out) {
  const std::string prompt = text_or_file(a.prompt);
  std::vector<ControlPtr> controls = a.pipeline.empty() ? std::vector<ControlPtr>{} : load_pipeline_config(a.pipeline);
  const RuntimeOverrides overrides = a.overrides.empty() ? RuntimeOverrides{}
                                                         : overrides_from_json(parse_json_arg(a.overrides, "--overrides"));
  json datapoint = a.datapoint.empty() ? json::object() : parse_json_arg(a.datapoint, "--datapoint");
  if (!datapoint.is_object()) throw ConfigError("--datapoint must be a JSON object");
  if (!datapoint.contains("prompt")) datapoint["prompt"] = prompt;
  const GenParams gen(a.max_new_tokens, a.sample, a.temperature, seed_or_default(a.seed));

  Model model = load_weights(a.model);
  const auto t0 = std::chrono::steady_clock::now();
  SteeringPipeline pipeline(model, std::move(controls));
  pipeline.steer();
  const auto t1 = std::chrono::steady_clock::now();
  const GenerationOutput res = pipeline.generate(prompt, gen, overrides, datapoint);
  const auto t2 = std::chrono::steady_clock::now();

  if (a.as_json) {
    using ms = std::chrono::duration<double, std::milli>;
    out << dump({{"prompt", prompt},
                 {"adapted_prompt", res.adapted_prompt},
                 {"response", res.response},
                 {"tokens", res.ids},
                 {"timing", {{"steer_ms", ms(t1 - t0).count()}, {"generate_ms", ms(t2 - t1).count()}}}})
        << "\n";
  } else {
    out << res.response << "\n";
  }
  return kOk;
}

struct BenchArgs {
  std::string config, out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  bool as_json = false;
};

int cmd_benchmark(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchmarkConfig cfg = load_benchmark_config(a.config);
  if (a.workers) {
    if (*a.workers == 0) throw ConfigError("--workers must be >= 1");
    cfg.workers = *a.workers;
  }
  if (a.seed) {
    cfg.gen.seed = *a.seed;
  } else if (!cfg.seed_given) {
    cfg.gen.seed = env_seed().value_or(0);
  }
  if (!a.out_dir.empty()) cfg.output_dir = a.out_dir;
  if (cfg.output_dir.empty()) throw ConfigError("no output directory: pass --out or set output_dir");

  const ResultTable table = run_benchmark(cfg);
  export_results(table, cfg.output_dir);
  std::string svg_note;
  try {
    render_tradeoff_svg(table, cfg.plot_x, cfg.plot_y, cfg.plot_group_by, cfg.output_dir / "tradeoff.svg");
  } catch (const PlotError& e) {
    svg_note = e.what();
    err << "warning: tradeoff plot skipped: " << e.what() << "\n";
  }
  for (const auto& e : table.errors) {
    std::string params;
    for (const auto& [k, v] : e.params) params += (params.empty() ? "" : ",") + k + "=" + v.dump();
    err << "error [" << e.pipeline << (params.empty() ? "" : " " + params) << "] " << e.stage << ": " << e.message
        << "\n";
  }
  const std::size_t ok = table.configs_total - table.configs_failed;
  if (a.as_json) {
    out << dump({{"output_dir", cfg.output_dir.string()},
                 {"configs_total", table.configs_total},
                 {"configs_failed", table.configs_failed},
                 {"rows", table.rows.size()},
                 {"errors", table.errors.size()},
                 {"plot", svg_note.empty() ? json((cfg.output_dir / "tradeoff.svg").string()) : json(nullptr)}})
        << "\n";
  } else {
    out << "configs: " << table.configs_total << " (" << ok << " ok, " << table.configs_failed << " failed)\n";
    out << "rows: " << table.rows.size() << "\n";
    out << "results: " << cfg.output_dir.string() << "\n";
  }
  return ok > 0 ? kOk : kAllConfigsFailed;
}

int cmd_report(const std::string& dir, const std::string& x, const std::string& y, const std::string& group_by,
               const std::string& out_path, bool as_json, std::ostream& out) {
  const ResultTable table = load_results(dir);
  const std::filesystem::path path = out_path.empty() ? std::filesystem::path(dir) / "tradeoff.svg" : std::filesystem::path(out_path);
  const auto points = tradeoff_points(table, x, y, group_by);
  render_tradeoff_svg(table, x, y, group_by, path);
  std::vector<std::pair<double, double>> xy;
  for (const auto& p : points) xy.emplace_back(p.x, p.y);
  const auto frontier = pareto_frontier(xy);
  if (as_json) {
    json pts = json::array();
    for (const auto& p : points) {
      pts.push_back({{"pipeline", p.pipeline}, {"label", p.label}, {"x", p.x}, {"y", p.y}, {"baseline", p.baseline}});
    }
    out << dump({{"svg", path.string()}, {"points", pts}, {"frontier", frontier}}) << "\n";
  } else {
    for (const auto& p : points) {
      out << p.label << "\t" << x << "=" << format_score(p.x) << "\t" << y << "=" << format_score(p.y) << "\n";
    }
    out << "wrote " << path.string() << "\n";
  }
  return kOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kInputError;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const SpecError*>(&e) ||
      dynamic_cast<const RegistryError*>(&e) || dynamic_cast<const CompositionError*>(&e) ||
      dynamic_cast<const KwargsError*>(&e)) {
    return kConfigError;
  }
  return kRuntimeError;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steering toolkit: models, pipelines, benchmarks and reports", "steerbench"};
  app.require_subcommand(1);

  bool as_json = false;

  auto* init = app.add_subcommand("model-init", "Write a randomly initialised STW1 model");
  std::string init_config, init_out;
  std::optional<std::uint64_t> init_seed;
  init->add_option("--config", init_config, "JSON model config (defaults to the reference config)");
  init->add_option("--seed", init_seed, "Initialisation seed (falls back to STEERBENCH_SEED, then 0)");
  init->add_option("--out", init_out, "Output path")->required();
  init->add_flag("--json", as_json, "Machine-readable output");

  auto* info = app.add_subcommand("model-info", "Print config and per-tensor checksums");
  std::string info_model;
  info->add_option("--model,model", info_model, "STW1 model file")->required();
  info->add_flag("--json", as_json, "Machine-readable output");

  auto* run = app.add_subcommand("run", "Steer a pipeline and generate for one prompt");
  RunArgs ra;
  run->add_option("--model", ra.model, "STW1 model file")->required();
  run->add_option("--pipeline", ra.pipeline, "Pipeline config JSON (omit for no controls)");
  run->add_option("--prompt", ra.prompt, "Prompt text, or @file")->required();
  run->add_option("--max-new-tokens", ra.max_new_tokens, "Generation budget");
  run->add_option("--seed", ra.seed, "Sampling seed (falls back to STEERBENCH_SEED, then 0)");
  run->add_flag("--sample", ra.sample, "Sample instead of greedy decoding");
  run->add_option("--temperature", ra.temperature, "Sampling temperature");
  run->add_option("--overrides", ra.overrides, "Runtime overrides JSON, or @file");
  run->add_option("--datapoint", ra.datapoint, "Fields override references resolve against (JSON or @file)");
  run->add_flag("--json", ra.as_json, "Machine-readable output");

  auto* bench = app.add_subcommand("benchmark", "Run a benchmark config and export results");
  BenchArgs ba;
  bench->add_option("--config", ba.config, "Benchmark config JSON")->required();
  bench->add_option("--out", ba.out_dir, "Output directory (overrides output_dir)");
  bench->add_option("--workers", ba.workers, "Worker threads");
  bench->add_option("--seed", ba.seed, "Base generation seed");
  bench->add_flag("--json", ba.as_json, "Machine-readable output");

  auto* report = app.add_subcommand("report", "Render the tradeoff plot from stored results");
  std::string rep_dir, rep_x = "strict_instruction", rep_y = "reward_score", rep_group, rep_out;
  report->add_option("--results", rep_dir, "Benchmark output directory")->required();
  report->add_option("--x", rep_x, "Metric on the x axis");
  report->add_option("--y", rep_y, "Metric on the y axis");
  report->add_option("--group-by", rep_group, "Parameter used for point labels");
  report->add_option("--out", rep_out, "SVG path (defaults to <results>/tradeoff.svg)");
  report->add_flag("--json", as_json, "Machine-readable output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (*init) return cmd_model_init(init_config, init_seed, init_out, as_json, out);
    if (*info) return cmd_model_info(info_model, as_json, out);
    if (*run) return cmd_run(ra, out);
    if (*bench) return cmd_benchmark(ba, out, err);
    if (*report) return cmd_report(rep_dir, rep_x, rep_y, rep_group, rep_out, as_json, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kInputError;
}

}  // namespace steer::cli
