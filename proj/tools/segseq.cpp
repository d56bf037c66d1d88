// segseq: command-line front end for generating synthetic data, fitting the
// shared-kernel segmentation model, segmenting data and exporting features.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "segseq/features.hpp"
#include "segseq/generator.hpp"
#include "segseq/io.hpp"
#include "segseq/model.hpp"
#include "segseq/parallel.hpp"
#include "segseq/svg.hpp"
#include "segseq/trainer.hpp"

namespace fs = std::filesystem;
using namespace segseq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitSchema = 2;
constexpr int kExitIo = 3;

fs::path sibling(const fs::path& path, const std::string& suffix) {
  fs::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

Dataset load_valid_dataset(const fs::path& path) {
  Dataset data = read_dataset(path);
  if (data.empty()) throw SchemaError("dataset '" + path.string() + "' contains no sequences");
  const auto report = validate_dataset(data);
  if (!report.ok()) throw SchemaError("invalid dataset '" + path.string() + "':\n" + report.to_string());
  return data;
}

int cmd_generate(const fs::path& config, const fs::path& out, std::optional<fs::path> truth_path) {
  const GeneratorSpec spec = generator_spec_from_json(read_json(config));
  const GeneratedData gen = sample_dataset(spec);
  const fs::path truth = truth_path ? *truth_path : sibling(out, ".truth.json");
  write_text(out, dump(dataset_to_json(gen.data)));
  write_text(truth, dump(truth_to_json(gen)));
  std::cout << "wrote " << gen.data.size() << " sequences to " << out.string() << " and ground truth to "
            << truth.string() << '\n';
  return kExitOk;
}

int cmd_fit(const fs::path& data_path, const fs::path& config, const fs::path& model_out,
            std::optional<fs::path> diag_path, std::optional<std::uint64_t> seed, std::size_t threads) {
  Hyperparams hp = hyperparams_from_json(read_json(config));
  if (seed) hp.seed = *seed;
  Dataset data = load_valid_dataset(data_path);
  if (hp.standardize) data = standardize(data);

  const fs::path diagnostics = diag_path ? *diag_path : sibling(model_out, ".diagnostics.jsonl");
  std::string lines;
  // The checkpoint is rewritten after every round, so an interrupted run
  // leaves the last completed round on disk.
  auto on_round = [&](const ModelState& state, const RoundDiagnostics& diag) {
    lines += diagnostics_to_json(diag).dump() + "\n";
    write_text(model_out, dump(checkpoint_to_json(state, hp)));
    write_text(diagnostics, lines);
  };
  const FitResult result = fit(data, hp, resolve_threads(threads), on_round);
  write_text(model_out, dump(checkpoint_to_json(result.state, hp)));
  const auto& last = result.rounds.back();
  std::cout << "rounds: " << result.rounds.size() << (result.converged ? " (converged)" : "") << '\n';
  std::cout << "active kernels: " << last.active_kernels << '\n';
  std::cout << "objective: " << last.objective << '\n';
  return kExitOk;
}

int cmd_segment(const fs::path& data_path, const fs::path& model_path, const fs::path& out,
                std::optional<std::size_t> samples, std::optional<fs::path> plot, std::optional<std::uint64_t> seed,
                std::size_t threads) {
  Checkpoint cp = checkpoint_from_json(read_json(model_path));
  Dataset data = load_valid_dataset(data_path);
  if (cp.hyperparams.standardize) data = standardize(data);
  if (samples) {
    if (*samples == 0) throw SchemaError("--samples must be at least 1");
    cp.hyperparams.gibbs.num_samples = *samples;
  }
  if (seed) cp.hyperparams.seed = *seed;
  const SegmentReport report = segment(data, cp.state, cp.hyperparams, resolve_threads(threads));
  write_text(out, dump(report_to_json(report)));
  if (plot) {
    for (std::size_t d = 0; d < data.size(); ++d) {
      fs::path target = *plot;
      if (data.size() > 1 || target.extension() != ".svg") target = sibling(*plot, "_" + data[d].id + ".svg");
      write_text(target, render_segmentation_svg(data[d], report.sequences[d], report.num_kernels));
    }
  }
  std::cout << "segmented " << data.size() << " sequences with " << cp.hyperparams.gibbs.num_samples
            << " samples each\n";
  return kExitOk;
}

int cmd_features(const fs::path& report_path, const fs::path& out, std::size_t window,
                 std::optional<fs::path> model_path) {
  if (window == 0) throw SchemaError("--window must be at least 1");
  const SegmentReport report = report_from_json(read_json(report_path));
  if (model_path) {
    const Checkpoint cp = checkpoint_from_json(read_json(*model_path));
    if (cp.state.num_kernels() != report.num_kernels) {
      throw SchemaError("report 'num_kernels' (" + std::to_string(report.num_kernels) + ") does not match model M (" +
                        std::to_string(cp.state.num_kernels()) + ")");
    }
  }
  std::string csv;
  try {
    csv = features_csv(report, window);
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("malformed segmentation report: ") + e.what());
  }
  write_text(out, csv);
  std::cout << "wrote features for " << report.sequences.size() << " sequences to " << out.string() << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared multi-sequence Bayesian time-series segmentation with GP kernels"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: SEGSEQ_THREADS or 1)");

  std::optional<std::uint64_t> seed;
  std::string config, out, data, model, report, model_for_features;
  std::optional<std::string> truth, diagnostics, plot;
  std::optional<std::size_t> samples;
  std::size_t window = 10;

  auto* gen = app.add_subcommand("generate", "Sample a synthetic dataset and its ground truth");
  gen->add_option("config", config, "Generator spec JSON")->required();
  gen->add_option("out", out, "Dataset JSON to write")->required();
  gen->add_option("--truth", truth, "Ground-truth JSON (default: <out>.truth.json)");

  auto* fitc = app.add_subcommand("fit", "Fit kernels, noise and mixing weights");
  fitc->add_option("data", data, "Dataset JSON or CSV")->required();
  fitc->add_option("config", config, "Hyperparameter JSON")->required();
  fitc->add_option("model", out, "Checkpoint JSON to write")->required();
  fitc->add_option("--diagnostics", diagnostics, "JSON-lines diagnostics (default: <model>.diagnostics.jsonl)");
  fitc->add_option("--seed", seed, "Override the config seed");

  auto* seg = app.add_subcommand("segment", "Sample segmentations under a trained model");
  seg->add_option("data", data, "Dataset JSON or CSV")->required();
  seg->add_option("model", model, "Checkpoint JSON")->required();
  seg->add_option("out", out, "Segmentation report JSON to write")->required();
  seg->add_option("--samples", samples, "Number of retained samples L");
  seg->add_option("--plot", plot, "SVG output path (one file per sequence)");
  seg->add_option("--seed", seed, "Override the checkpoint seed");

  auto* feat = app.add_subcommand("features", "Export cluster strings and frequency vectors");
  feat->add_option("report", report, "Segmentation report JSON")->required();
  feat->add_option("out", out, "Features CSV to write")->required();
  feat->add_option("--window", window, "Timesteps per symbol")->capture_default_str();
  feat->add_option("--model", model_for_features, "Checkpoint to check the kernel count against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (gen->parsed()) return cmd_generate(config, out, truth ? std::optional<fs::path>(*truth) : std::nullopt);
    if (fitc->parsed()) {
      return cmd_fit(data, config, out, diagnostics ? std::optional<fs::path>(*diagnostics) : std::nullopt, seed,
                     threads);
    }
    if (seg->parsed()) {
      return cmd_segment(data, model, out, samples, plot ? std::optional<fs::path>(*plot) : std::nullopt, seed,
                         threads);
    }
    if (feat->parsed()) {
      return cmd_features(report, out, window,
                          model_for_features.empty() ? std::nullopt : std::optional<fs::path>(model_for_features));
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
