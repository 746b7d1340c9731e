#include "evsched/montecarlo.hpp"

#include "evsched/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace evsched {

TrajectoryResult run_trajectory(const ScenarioModel& model, Policy& policy, const TrajectoryOptions& options,
                                std::uint64_t seed) {
    if (options.stages < 1) throw std::invalid_argument("trajectory needs at least one stage");
    TrajectoryResult out;
    out.stages = options.stages;
    out.warmup = std::max(options.warmup, 0);
    SystemState x = options.initial ? *options.initial : initial_state(model, seed);
    for (std::int64_t t = 0; t < options.stages; ++t) {
        const ActionVector a = policy.decide(x);
        const StageResult r = advance_stage(model, x, a, seed, t);
        out.charging += r.cost.charging;
        out.penalty += r.cost.penalty;
        if (t >= out.warmup) out.total_after_warmup += r.cost.total();
        out.rejected += r.rejected;
        if (options.record_stages) out.per_stage.push_back(r.cost);
    }
    out.total = out.charging + out.penalty;
    return out;
}

std::uint64_t trajectory_seed(std::uint64_t base_seed, std::size_t index) { return mix_seed(base_seed, index); }

SampleSummary summarize(const std::vector<double>& samples) {
    SampleSummary s;
    const auto n = samples.size();
    if (n == 0) return s;
    // Summed in index order so the result does not depend on scheduling.
    double sum = 0.0;
    for (double v : samples) sum += v;
    s.mean = sum / static_cast<double>(n);
    if (n < 2) return s;
    double squares = 0.0;
    for (double v : samples) squares += (v - s.mean) * (v - s.mean);
    s.stderr_ = std::sqrt(squares / static_cast<double>(n - 1) / static_cast<double>(n));
    return s;
}

MonteCarloEstimate monte_carlo(const ScenarioModel& model, const Policy& policy, const TrajectoryOptions& options,
                               std::size_t trajectories, std::uint64_t base_seed, int threads) {
    if (trajectories < 1) throw std::invalid_argument("monte_carlo needs at least one trajectory");
    MonteCarloEstimate est;
    est.trajectories = trajectories;
    est.seed = base_seed;
    est.samples.resize(trajectories);
    est.raw_samples.resize(trajectories);
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(trajectories)));
    std::vector<std::unique_ptr<Policy>> clones;
    for (int w = 0; w < workers; ++w) clones.push_back(policy.clone());
    // One policy clone per contiguous block of trajectories.
    parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
        const std::size_t begin = trajectories * w / static_cast<std::size_t>(workers);
        const std::size_t end = trajectories * (w + 1) / static_cast<std::size_t>(workers);
        for (std::size_t k = begin; k < end; ++k) {
            auto fresh = clones[w]->clone();
            const TrajectoryResult r = run_trajectory(model, *fresh, options, trajectory_seed(base_seed, k));
            est.samples[k] = r.time_average_after_warmup();
            est.raw_samples[k] = r.time_average();
        }
    });
    est.warm = summarize(est.samples);
    est.raw = summarize(est.raw_samples);
    return est;
}

const ComparisonRow& ComparisonTable::find(std::string_view policy, std::string_view penalty, int rate) const {
    for (const auto& row : rows)
        if (row.policy == policy && row.penalty == penalty && row.arrival_rate == rate) return row;
    throw std::out_of_range("no comparison row for " + std::string(policy) + "/" + std::string(penalty) + "/" +
                            std::to_string(rate));
}

void ComparisonTable::write_csv(std::ostream& os) const {
    os << "policy,penalty,arrival_rate,T,n_traj,mean_cost,stderr,seed\n";
    char buffer[64];
    for (const auto& row : rows) {
        os << row.policy << ',' << row.penalty << ',' << row.arrival_rate << ',' << row.stages << ','
           << row.trajectories << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.mean_cost);
        os << buffer << ',';
        std::snprintf(buffer, sizeof buffer, "%.17g", row.standard_error);
        os << buffer << ',' << row.seed << '\n';
    }
}

ScenarioModel with_arrival_rate(ScenarioModel model, int rate) {
    if (rate < 0) throw std::invalid_argument("arrival rate must be >= 0");
    std::vector<Distribution> kernel;
    std::vector<ArrivalLaw> laws;
    for (int d = 0; d < model.demand.state_count(); ++d) {
        kernel.push_back(model.demand.transition(d));
        ArrivalLaw law = model.demand.law(d);
        law.count = Distribution::point(static_cast<std::size_t>(rate) + 1, static_cast<std::size_t>(rate));
        laws.push_back(std::move(law));
    }
    const Distribution initial = model.demand.initial();
    model.demand = DemandModel(std::move(kernel), std::move(laws));
    model.demand.set_initial(initial);
    return model;
}

ComparisonTable compare_policies(const ScenarioModel& base, const ExperimentOptions& options) {
    ComparisonTable table;
    TrajectoryOptions traj;
    traj.stages = options.stages;
    traj.warmup = options.warmup;
    for (const auto& name : options.policies) {
        for (int rate : options.rates) {
            const ScenarioModel model = with_arrival_rate(base, rate);
            const auto policy = make_policy(name, model);
            MonteCarloEstimate est = monte_carlo(model, *policy, traj, options.trajectories, options.seed, options.threads);
            ComparisonRow row;
            row.policy = name;
            row.penalty = base.penalty.name();
            row.arrival_rate = rate;
            row.stages = options.stages;
            row.trajectories = options.trajectories;
            row.mean_cost = est.warm.mean;
            row.standard_error = est.warm.stderr_;
            row.raw_mean_cost = est.raw.mean;
            row.raw_standard_error = est.raw.stderr_;
            row.seed = options.seed;
            if (options.keep_samples) row.samples = std::move(est.samples);
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

ComparisonTable figure_experiment(PenaltyKind penalty, const ExperimentOptions& options) {
    return compare_policies(scenario_sec5(0, penalty), options);
}

SampleSummary paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
    std::vector<double> diff(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) diff[k] = a[k] - b[k];
    return summarize(diff);
}

}  // namespace evsched
