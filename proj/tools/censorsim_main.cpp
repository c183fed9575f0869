#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "censorsim/config.hpp"
#include "censorsim/io.hpp"
#include "censorsim/util.hpp"

namespace {

std::filesystem::path default_out_root() {
  if (const char* env = std::getenv("CENSORSIM_OUT")) return env;
  return "out";
}

void print_summary(const std::vector<censorsim::MetricReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.cell << ": observed_auc=" << r.observed_auc.mean
              << " true_auc=" << r.true_auc.mean
              << " approved_z1%=" << r.approved_pct_z1.mean
              << " gain/loss=" << r.gain.mean << "/" << r.loss.mean << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"censorsim: selective-labeling feedback-loop simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_dir;
  std::string figure_id;
  std::string out_dir;
  int jobs = 1;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> replicates_override;

  auto* run = app.add_subcommand("run", "run an experiment matrix from a config file");
  run->add_option("config", config_path, "config file (JSON, // comments allowed)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory (default: config value under $CENSORSIM_OUT)");
  run->add_option("--jobs", jobs, "parallel replicate workers")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed_override, "override the master seed for every cell");
  run->add_option("--replicates", replicates_override, "override the replicate count");

  auto* metrics = app.add_subcommand("metrics", "recompute metrics from persisted traces");
  metrics->add_option("trace_dir", trace_dir, "directory written by `run`")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* figure = app.add_subcommand("figure", "emit plot-ready CSV for a figure id");
  figure->add_option("trace_dir", trace_dir, "directory written by `run`")
      ->required()
      ->check(CLI::ExistingDirectory);
  figure->add_option("--id", figure_id, "figure id (see --id help on error)")->required();

  auto* validate = app.add_subcommand("validate", "validate a config file");
  validate->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      censorsim::ExperimentMatrix matrix = censorsim::load_matrix(config_path);
      for (auto& cell : matrix.cells) {
        if (seed_override) cell.seed = *seed_override;
        if (replicates_override) cell.replicates = *replicates_override;
      }
      std::filesystem::path out =
          out_dir.empty() ? default_out_root() / matrix.output_dir : std::filesystem::path(out_dir);
      if (matrix.cells.empty()) {
        std::cout << "empty matrix: nothing to run\n";
        return 0;
      }
      const auto reports = censorsim::run_matrix(matrix, jobs, out);
      print_summary(reports);
      std::cout << "wrote " << (out / "manifest.json").string() << "\n";
    } else if (*metrics) {
      const auto reports = censorsim::metrics_from_traces(trace_dir);
      std::cout << censorsim::metrics_long_csv(reports);
    } else if (*figure) {
      std::cout << censorsim::emit_figure_data(trace_dir, figure_id);
    } else if (*validate) {
      censorsim::ExperimentMatrix matrix = censorsim::load_matrix(config_path);
      std::cout << "ok: " << matrix.cells.size() << " cells\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
