#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

#include "citeaudit/orchestrator/pipeline.hpp"

namespace ca = citeaudit;
namespace orch = citeaudit::orchestrator;

namespace {

int calibrate_command(const std::string& labels, const std::string& min_accuracy, const std::string& output) {
  ca::matcher::CalibrationObjective obj;
  obj.min_accuracy = ca::matcher::parse_decimal(min_accuracy);
  auto r = ca::matcher::calibrate(ca::matcher::load_labelled_pairs(labels), obj);
  r.thresholds.provenance = "calibrated:" + labels;
  auto j = ca::matcher::to_json(r.thresholds);
  j["confusion"] = ca::matcher::to_json(r.confusion);
  j["accuracy"] = ca::format_fixed(r.confusion.accuracy(), 4);
  j["accuracy_floor_reached"] = r.floor_reached;
  j["grid_size"] = r.grid_size;
  if (output.empty()) {
    std::cout << orch::dump(j);
  } else {
    orch::write_json(output, j);
    spdlog::info("thresholds written to {}", output);
  }
  if (!r.floor_reached) spdlog::warn("no threshold pair reaches the accuracy floor {}", min_accuracy);
  return orch::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audit LLM-generated citations against a scholarly index"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path = "citeaudit.json";
  std::optional<std::string> cache_dir, out_dir, mock_dir;
  bool refresh = false;
  std::string log_level = "info";
  app.add_option("--config", config_path, "Pipeline configuration file")->capture_default_str();
  app.add_option("--cache-dir", cache_dir, "Override the cache directory");
  app.add_option("--out-dir", out_dir, "Override the output directory");
  app.add_flag("--refresh", refresh, "Ignore cached responses and recompute every stage output");
  app.add_option("--mock", mock_dir, "Serve every model from this directory of canned responses");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

  orch::StageRequest req;
  std::optional<std::string> model, strategy;
  std::optional<int> runs;
  for (const char* name : orch::kStageOrder) {
    auto* sub = app.add_subcommand(name, std::string("Run the ") + name + " stage");
    if (std::string(name) == "generate") {
      sub->add_option("--model", model, "Only this model id");
      sub->add_option("--strategy", strategy, "vanilla or iterative")
          ->check(CLI::IsMember({"vanilla", "iterative"}));
      sub->add_option("--runs", runs, "Number of runs (overrides the config)")->check(CLI::PositiveNumber);
    }
  }
  auto* all = app.add_subcommand("all", "Run every stage in order");

  std::string labels, min_accuracy = "0.95", output;
  auto* cal = app.add_subcommand("calibrate", "Pick matcher thresholds from a labelled set");
  cal->add_option("--labels", labels, "Labelled CSV")->required()->check(CLI::ExistingFile);
  cal->add_option("--min-accuracy", min_accuracy, "Accuracy floor")->capture_default_str();
  cal->add_option("--output", output, "Write thresholds JSON here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_default_logger(spdlog::stderr_color_mt("citeaudit"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (cal->parsed()) return calibrate_command(labels, min_accuracy, output);

    auto cfg = ca::orchestrator::load_config(config_path);
    if (all->parsed()) {
      req = orch::all_stages();
    } else {
      for (auto* sub : app.get_subcommands()) req.stages.insert(sub->get_name());
    }
    req.runs.model = model;
    req.runs.runs = runs;
    if (strategy) req.strategy = ca::llmgate::strategy_from_string(*strategy);
    if (model) (void)cfg.model(*model);

    orch::Overrides ov;
    ov.cache_dir = cache_dir;
    ov.out_dir = out_dir;
    if (mock_dir) ov.mock_dir = *mock_dir;
    ov.refresh = refresh;
    return orch::run_pipeline(cfg, req, ov);
  } catch (const ca::ConfigError& e) {
    spdlog::error("{}", e.what());
    return orch::kConfigInvalid;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return orch::kStageFailed;
  }
}
