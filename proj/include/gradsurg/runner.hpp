#ifndef GRADSURG_RUNNER_HPP
#define GRADSURG_RUNNER_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "gradsurg/config.hpp"

namespace gradsurg {

/// Executes config.repeats runs with seeds seed .. seed+repeats-1. Each run
/// writes one CSV of per-epoch metrics (columns: epoch, task_id, mean_loss,
/// conflict_fraction, mean_cosine, prob_assigned, wallclock_s; one row per
/// epoch and task); a single summary.json aggregates final losses, the RNG
/// algorithm id, a config echo, and the per-epoch distribution history.
/// Returns 0 iff every run completed without divergence. Output files are
/// byte-stable: rerunning an identical config reproduces them exactly, which
/// is why the wallclock_s column is pinned to 0 on disk (real timings go to
/// `log`).
int run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Prints per-task final-loss means, stddevs, and percent deltas of each
/// later summary relative to the first. All summaries must describe the same
/// problem. Returns 0 on success.
int compare_summaries(const std::vector<std::string>& summary_paths,
                      std::ostream& out, std::ostream& err);

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

} // namespace gradsurg

#endif
