// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <prunetir/backends.hpp>
#include <prunetir/controller.hpp>
#include <prunetir/episode_log.hpp>
#include <prunetir/report.hpp>
#include <prunetir/toolgate.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunetir
{

struct Problem
{
    std::string id;
    std::string question;
    std::string answer;

    bool operator==(Problem const&) const = default;
};

/// Malformed dataset, script or grid input. Messages name the offending line or key.
class InputError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

[[nodiscard]] std::vector<Problem> load_dataset(std::filesystem::path const& path);
[[nodiscard]] std::vector<Problem> parse_dataset(std::string_view jsonl);

/// Scripted responses keyed by problem id, then run index. A problem mapped to a plain list uses
/// that list for every run.
class ScriptBook
{
  public:
    [[nodiscard]] static ScriptBook parse(std::string_view json);
    [[nodiscard]] static ScriptBook load(std::filesystem::path const& path);

    void set(std::string problem_id, std::optional<std::size_t> run_index, std::vector<std::string> responses);

    /// Throws InputError when no script covers the cell.
    [[nodiscard]] std::vector<std::string> const& lookup(std::string const& problem_id, std::size_t run_index) const;

  private:
    std::map<std::string, std::vector<std::string>> _shared;
    std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> _per_run;
};

enum class BackendKind
{
    Http,
    Scripted,
    Stochastic,
};

enum class RunMode
{
    Vanilla,
    PruneTir,
    Ablation,
};

[[nodiscard]] std::optional<BackendKind> parse_backend_kind(std::string_view text) noexcept;
[[nodiscard]] std::optional<RunMode> parse_run_mode(std::string_view text) noexcept;
[[nodiscard]] std::string_view to_string(BackendKind kind) noexcept;
[[nodiscard]] std::string_view to_string(RunMode mode) noexcept;

/// "stp,stpr,rtts,intent-merge" or a subset; "none" and "" disable all. Throws InputError otherwise.
[[nodiscard]] FeatureFlags parse_features(std::string_view text);
[[nodiscard]] std::string to_string(FeatureFlags const& flags);

struct ExperimentSpec
{
    std::filesystem::path dataset_path;
    std::size_t runs = 32;
    RunMode mode = RunMode::PruneTir;
    EngineConfig engine;
    BackendKind backend = BackendKind::Stochastic;
    HttpBackendConfig http;
    std::filesystem::path script_path;
    StochasticModelParams stochastic;
    std::uint64_t seed_base = 0;
    std::string sandbox_url; // empty: offline SimulatedTool
    HttpToolConfig sandbox;
    std::size_t parallelism = 1;
    std::filesystem::path output_dir;
    std::string label; // report row name; derived from mode and features when empty

    /// Throws InputError or ContractViolation.
    void validate() const;
};

/// Seed of the stochastic backend for one (problem, run) cell.
[[nodiscard]] std::uint64_t cell_seed(std::uint64_t seed_base, std::string_view problem_id, std::size_t run_index) noexcept;

/// File-name-safe, collision-free key of a cell.
[[nodiscard]] std::string cell_key(std::string_view problem_id, std::size_t run_index);

/// Runs problems × runs episodes and writes, under output_dir:
///   logs/<cell>.jsonl, summaries/<cell>.json, episodes.jsonl, run_config.json,
///   report.json, report.txt, resolution_histogram.csv.
/// Cells with a stored summary are skipped unless it records a backend failure. The returned row
/// is computed from the files on disk, exactly as report_from_directory would.
ReportRow run_experiment(ExperimentSpec const& spec);

/// Four rows {vanilla, +STP, +STP+STPR, +STP+STPR+RTTS}, one subdirectory each, plus a combined
/// ablation.json / ablation.txt in output_dir.
std::vector<ReportRow> run_ablation(ExperimentSpec const& spec);

struct SweepGrid
{
    std::vector<std::size_t> turn_limit;
    std::vector<std::size_t> retry_limit;
    std::vector<double> alpha;
    std::vector<double> theta;
};

/// JSON object with any of turn_limit, retry_limit, alpha, theta as non-empty arrays; missing
/// axes take the base spec's value.
[[nodiscard]] SweepGrid parse_sweep_grid(std::string_view json, EngineConfig const& base);

/// One experiment per grid point in output_dir/tl<T>_rl<R>_a<A>_th<H>, plus sweep.json / sweep.txt.
std::vector<ReportRow> run_sweep(ExperimentSpec const& spec, SweepGrid const& grid);

/// Recomputes the report of an experiment directory from its summaries and logs.
[[nodiscard]] ReportRow report_from_directory(std::filesystem::path const& dir);

/// report.json, report.txt and resolution_histogram.csv for one row.
void write_report(std::filesystem::path const& dir, ReportRow const& row);

} // namespace prunetir
