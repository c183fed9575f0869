#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "censorsim/config.hpp"
#include "censorsim/metrics.hpp"
#include "censorsim/trace.hpp"

namespace censorsim {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Newline-delimited records: a header line followed by one line per period.
std::string trace_to_jsonl(const ReplicateTrace& trace);
ReplicateTrace trace_from_jsonl(const std::string& text);

std::filesystem::path trace_path(const std::filesystem::path& out_dir,
                                 const std::string& cell, int replicate);

// Runs every cell of the matrix, persists traces / model snapshots /
// metrics, and writes a manifest with content hashes. Returns the reports
// in cell order.
std::vector<MetricReport> run_matrix(const ExperimentMatrix& matrix, int jobs,
                                     const std::filesystem::path& out_dir);

// Recomputes every cell's metrics from persisted traces (no simulation).
std::vector<MetricReport> metrics_from_traces(const std::filesystem::path& out_dir);

// Metric tables: one long-format row per metric x cell x replicate plus
// aggregate rows, and a summary table with metric rows x policy columns in
// per-DGP blocks.
std::string metrics_long_csv(const std::vector<MetricReport>& reports);
std::string metrics_summary_csv(const std::vector<MetricReport>& reports);
nlohmann::json metrics_report_json(const std::vector<MetricReport>& reports);

// Plot-ready per-period series for a known figure id. Errors name the runs
// a figure needs when they are missing; unknown ids list the catalog.
std::vector<std::string> figure_catalog();
std::string emit_figure_data(const std::filesystem::path& out_dir,
                             const std::string& figure_id);

}  // namespace censorsim
