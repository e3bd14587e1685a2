#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "l1zo/concentration.hpp"
#include "l1zo/experiment.hpp"
#include "l1zo/fed_sim.hpp"

namespace l1zo {

/// Writes `content` to a sibling temporary file and renames it into place.
/// Throws std::runtime_error naming the path on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Throws std::runtime_error unless `dir` exists (creating it if needed) and
/// accepts a new file.
void ensure_writable_dir(const std::filesystem::path& dir);

/// Columns: t, x_1..x_d, f_x_t, regret_t, g_norm_sq, bytes. Doubles use 17
/// significant digits so that read_trace_csv reproduces them exactly.
std::string trace_csv(const RunTrace& trace);

/// Parses a trace CSV. The records carry t, x, f_x, regret, g_norm_sq and
/// bytes_per_worker; g is not part of the format and is left empty.
std::vector<RoundRecord> read_trace_csv(std::string_view text);

/// JSON summary of a run: config, hash, regret summaries, bound terms and
/// budgets, and the figure list.
std::string run_summary_json(const RunTrace& trace, const std::vector<std::string>& figures);

/// Writes trace-<hash>.csv and summary-<hash>.json, plus regret-<hash>.svg
/// when `plot` is set. Returns the written paths.
std::vector<std::filesystem::path> emit_run_report(const RunTrace& trace, const std::filesystem::path& dir, bool plot);

/// Columns: kind, d, N, r, empirical, se, envelope, violated, function.
std::string tail_csv(const std::vector<TailReport>& reports);

/// One CSV per (kind, d), a tails_summary.json with violation totals, and
/// one overlay SVG per (kind, d) when `plot` is set.
std::vector<std::filesystem::path> emit_tails_report(const std::vector<TailReport>& reports,
                                                     const std::filesystem::path& dir, bool plot);

std::vector<std::filesystem::path> emit_martingale_report(const std::vector<MartingaleRow>& rows,
                                                          const std::filesystem::path& dir, bool plot);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(std::string_view text);

/// sweep_summary.json with the rate fits (n m over all rows, n over m = 1
/// rows) and, with `plot`, a log-log SVG.
std::vector<std::filesystem::path> emit_sweep_summary(const SweepResult& result, const std::filesystem::path& dir,
                                                      bool plot);

/// Prints a human-readable digest of every report found in `dir`.
void describe_directory(const std::filesystem::path& dir, std::ostream& out);

// Minimal SVG line charts.

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
    bool markers = false;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<PlotSeries> series;
};

/// Non-finite points, and non-positive ones on log axes, are skipped.
std::string render_svg(const PlotSpec& spec);

}  // namespace l1zo
