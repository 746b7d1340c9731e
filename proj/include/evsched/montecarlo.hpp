#pragma once

#include "evsched/models.hpp"
#include "evsched/policies.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evsched {

struct TrajectoryOptions {
    int stages = 200;
    /// Leading stages excluded from the warm-up-adjusted average.
    int warmup = 20;
    /// Start here instead of an empty system with randomly drawn grid/demand.
    std::optional<SystemState> initial;
    bool record_stages = false;
};

struct TrajectoryResult {
    int stages = 0;
    int warmup = 0;
    Rational total;
    Rational charging;
    Rational penalty;
    Rational total_after_warmup;
    long long rejected = 0;
    std::vector<StageCost> per_stage;  ///< only when record_stages

    [[nodiscard]] double time_average() const { return total.to_double() / stages; }
    [[nodiscard]] double time_average_after_warmup() const {
        return stages > warmup ? total_after_warmup.to_double() / (stages - warmup) : 0.0;
    }
};

/// Simulates stages 0..T-1 under `policy`; deterministic given the seed.
[[nodiscard]] TrajectoryResult run_trajectory(const ScenarioModel& model, Policy& policy, const TrajectoryOptions& options,
                                              std::uint64_t seed);

/// Seed of trajectory `index` under `base_seed`; shared by all policies.
[[nodiscard]] std::uint64_t trajectory_seed(std::uint64_t base_seed, std::size_t index);

struct SampleSummary {
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Mean and standard error (sample standard deviation / sqrt(n));
/// the error is 0 for a single sample.
[[nodiscard]] SampleSummary summarize(const std::vector<double>& samples);

struct MonteCarloEstimate {
    std::size_t trajectories = 0;
    std::uint64_t seed = 0;
    SampleSummary warm;  ///< warm-up excluded
    SampleSummary raw;
    std::vector<double> samples;      ///< per trajectory, warm-up excluded
    std::vector<double> raw_samples;  ///< per trajectory, all stages

    [[nodiscard]] double mean() const { return warm.mean; }
    [[nodiscard]] double standard_error() const { return warm.stderr_; }
};

[[nodiscard]] MonteCarloEstimate monte_carlo(const ScenarioModel& model, const Policy& policy,
                                             const TrajectoryOptions& options, std::size_t trajectories,
                                             std::uint64_t base_seed, int threads = 1);

struct ComparisonRow {
    std::string policy;
    std::string penalty;
    int arrival_rate = 0;
    int stages = 0;
    std::size_t trajectories = 0;
    double mean_cost = 0.0;
    double standard_error = 0.0;
    double raw_mean_cost = 0.0;
    double raw_standard_error = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> samples;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    [[nodiscard]] const ComparisonRow& find(std::string_view policy, std::string_view penalty, int rate) const;
    /// Columns policy,penalty,arrival_rate,T,n_traj,mean_cost,stderr,seed.
    void write_csv(std::ostream& os) const;
};

struct ExperimentOptions {
    std::vector<std::string> policies{"edf", "llsp", "lllp"};
    std::vector<int> rates;
    int stages = 200;
    int warmup = 20;
    std::size_t trajectories = 10000;
    std::uint64_t seed = 7;
    int threads = 1;
    bool keep_samples = false;
};

/// Paired comparison on the capacity benchmark: every policy sees the same
/// trajectory seeds at every rate.
[[nodiscard]] ComparisonTable figure_experiment(PenaltyKind penalty, const ExperimentOptions& options);

/// Same grid over an arbitrary base scenario whose arrival count is replaced
/// by each rate (the arrival law's marks are kept).
[[nodiscard]] ComparisonTable compare_policies(const ScenarioModel& base, const ExperimentOptions& options);

/// Replaces the arrival count of every demand state with a constant.
[[nodiscard]] ScenarioModel with_arrival_rate(ScenarioModel model, int rate);

/// Mean and standard error of the per-trajectory difference a - b.
[[nodiscard]] SampleSummary paired_difference(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace evsched
