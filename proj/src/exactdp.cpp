#include "evsched/exactdp.hpp"

#include "evsched/parallel.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

namespace evsched {

namespace {

using Exact = boost::multiprecision::cpp_rational;

Exact to_exact(const Rational& r) { return Exact(r.num(), r.den()); }

std::string exact_string(const Exact& v) { return v.str(); }

/// Key that orders masks as bit vectors (a_0, ..., a_{N-1}), a_0 most significant.
std::uint32_t lex_key(std::uint32_t mask, int chargers) {
    std::uint32_t key = 0;
    for (int k = 0; k < chargers; ++k)
        if (mask & (1u << k)) key |= 1u << (chargers - 1 - k);
    return key;
}

}  // namespace

std::vector<std::string> Assumption2Report::findings() const {
    std::vector<std::string> out;
    if (!zero_arrival) out.emplace_back("some demand state has zero probability of no arrivals");
    if (!special_grid_reachable) out.emplace_back("no grid state is reachable from every grid state under A = 0");
    if (!demand_irreducible) out.emplace_back("demand chain is not irreducible");
    return out;
}

Assumption2Report check_assumption2(const ScenarioModel& model) {
    Assumption2Report report;
    const int D = model.demand.state_count();
    report.zero_arrival = true;
    for (int d = 0; d < D; ++d) {
        const Rational p = model.demand.law(d).zero_arrival_probability();
        if (d == 0 || p < report.min_zero_arrival_probability) report.min_zero_arrival_probability = p;
        if (p <= Rational{0}) report.zero_arrival = false;
    }
    report.demand_irreducible = model.demand.irreducible();

    const int S = model.grid.state_count();
    for (int target = 0; target < S && !report.special_grid_reachable; ++target) {
        // Reverse search from the target along A = 0 edges.
        std::vector<char> reaches(static_cast<std::size_t>(S), 0);
        reaches[static_cast<std::size_t>(target)] = 1;
        bool grew = true;
        while (grew) {
            grew = false;
            for (int s = 0; s < S; ++s) {
                if (reaches[static_cast<std::size_t>(s)]) continue;
                const auto row = model.grid.transition(s, 0).probabilities();
                for (int t = 0; t < S; ++t) {
                    if (row[static_cast<std::size_t>(t)] > Rational{0} && reaches[static_cast<std::size_t>(t)]) {
                        reaches[static_cast<std::size_t>(s)] = 1;
                        grew = true;
                        break;
                    }
                }
            }
        }
        if (std::all_of(reaches.begin(), reaches.end(), [](char c) { return c != 0; })) {
            report.special_grid_reachable = true;
            report.special_grid_state = target;
        }
    }
    return report;
}

std::size_t lattice_size(const Dimensions& dims, int grid_states, int demand_states) {
    const std::size_t radix = 1 + static_cast<std::size_t>(dims.max_stay) * static_cast<std::size_t>(dims.max_request + 1);
    const std::size_t cap = std::numeric_limits<std::size_t>::max() / 4;
    std::size_t n = static_cast<std::size_t>(grid_states) * static_cast<std::size_t>(demand_states);
    for (int k = 0; k < dims.chargers; ++k) {
        if (n > cap / radix) return std::numeric_limits<std::size_t>::max();
        n *= radix;
    }
    return n;
}

std::uint32_t EnumeratedMDP::encode(const SystemState& x) const {
    if (static_cast<int>(x.chargers()) != dims_.chargers) throw InvalidStateError("state has the wrong charger count");
    if (x.grid < 0 || x.grid >= grid_states_ || x.demand < 0 || x.demand >= demand_states_)
        throw InvalidStateError("grid or demand state out of range");
    std::uint64_t cfg = 0;
    for (int k = dims_.chargers - 1; k >= 0; --k) {
        const auto& v = x.vehicles[static_cast<std::size_t>(k)];
        validate(v, dims_);
        const std::uint64_t code =
            v.present() ? 1 + static_cast<std::uint64_t>(v.lambda - 1) * static_cast<std::uint64_t>(dims_.max_request + 1) +
                              static_cast<std::uint64_t>(v.gamma)
                        : 0;
        cfg = cfg * radix_ + code;
    }
    return static_cast<std::uint32_t>((cfg * static_cast<std::uint64_t>(grid_states_) + static_cast<std::uint64_t>(x.grid)) *
                                          static_cast<std::uint64_t>(demand_states_) +
                                      static_cast<std::uint64_t>(x.demand));
}

SystemState EnumeratedMDP::decode(std::uint32_t index) const {
    if (index >= state_count_) throw std::out_of_range("state index out of range");
    SystemState x;
    x.demand = static_cast<int>(index % static_cast<std::uint32_t>(demand_states_));
    index /= static_cast<std::uint32_t>(demand_states_);
    x.grid = static_cast<int>(index % static_cast<std::uint32_t>(grid_states_));
    index /= static_cast<std::uint32_t>(grid_states_);
    x.vehicles.resize(static_cast<std::size_t>(dims_.chargers));
    for (int k = 0; k < dims_.chargers; ++k) {
        const std::uint32_t code = index % radix_;
        index /= radix_;
        if (code == 0) continue;
        const auto e1 = static_cast<std::uint32_t>(dims_.max_request + 1);
        x.vehicles[static_cast<std::size_t>(k)] = {static_cast<int>((code - 1) / e1) + 1, static_cast<int>((code - 1) % e1)};
    }
    return x;
}

std::size_t EnumeratedMDP::action_position(std::uint32_t x, std::uint32_t mask) const {
    for (std::size_t k = 0; k < action_count(x); ++k)
        if (action_mask(x, k) == mask) return k;
    throw InfeasibleActionError("action mask " + std::to_string(mask) + " is not feasible at state " + std::to_string(x));
}

ActionVector EnumeratedMDP::action_vector(std::uint32_t mask) const {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(dims_.chargers), 0);
    for (int k = 0; k < dims_.chargers; ++k) bits[static_cast<std::size_t>(k)] = (mask >> k) & 1u;
    return ActionVector::from_bits(std::move(bits));
}

std::span<const Transition> EnumeratedMDP::transitions(std::uint32_t x, std::size_t k) const {
    const std::size_t row = action_offset_[x] + k;
    return {targets_.data() + row_offset_[row], row_offset_[row + 1] - row_offset_[row]};
}

std::span<const double> EnumeratedMDP::transition_values(std::uint32_t x, std::size_t k) const {
    const std::size_t row = action_offset_[x] + k;
    return {probs_d_.data() + row_offset_[row], row_offset_[row + 1] - row_offset_[row]};
}

double EnumeratedMDP::q_value(std::uint32_t x, std::size_t k, std::span<const double> h) const {
    const std::size_t row = action_offset_[x] + k;
    double q = cost_d_[row];
    for (std::size_t t = row_offset_[row]; t < row_offset_[row + 1]; ++t) q += probs_d_[t] * h[targets_[t].target];
    return q;
}

EnumeratedMDP enumerate(const ScenarioModel& model, const EnumerationOptions& options) {
    model.validate();
    EnumeratedMDP mdp;
    mdp.dims_ = model.dims;
    mdp.grid_states_ = model.grid.state_count();
    mdp.demand_states_ = model.demand.state_count();
    const int N = model.dims.chargers;
    if (N > 24) throw StateSpaceTooLarge("exact enumeration supports at most 24 chargers");
    const std::size_t n = lattice_size(model.dims, mdp.grid_states_, mdp.demand_states_);
    if (n > options.max_states || n > std::numeric_limits<std::uint32_t>::max())
        throw StateSpaceTooLarge("lattice has " + (n == std::numeric_limits<std::size_t>::max() ? std::string("too many")
                                                                                                  : std::to_string(n)) +
                                 " states, ceiling is " + std::to_string(options.max_states));
    mdp.state_count_ = n;
    mdp.radix_ = static_cast<std::uint32_t>(1 + model.dims.max_stay * (model.dims.max_request + 1));
    mdp.assumption2_ = check_assumption2(model);
    if (options.require_assumption2 && !mdp.assumption2_.holds()) {
        std::string what = "constant-gain conditions fail:";
        for (const auto& f : mdp.assumption2_.findings()) what += " " + f + ";";
        throw ModelError(what);
    }
    const auto S = static_cast<std::uint64_t>(mdp.grid_states_);
    const auto D = static_cast<std::uint64_t>(mdp.demand_states_);
    mdp.special_ = static_cast<std::uint32_t>(static_cast<std::uint64_t>(mdp.assumption2_.special_grid_state) * D);

    std::vector<std::uint64_t> power(static_cast<std::size_t>(N) + 1, 1);
    for (int k = 1; k <= N; ++k) power[static_cast<std::size_t>(k)] = power[static_cast<std::size_t>(k) - 1] * mdp.radix_;
    const auto e1 = static_cast<std::uint64_t>(model.dims.max_request + 1);
    auto code_of = [&](const VehicleState& v) -> std::uint64_t {
        return v.present() ? 1 + static_cast<std::uint64_t>(v.lambda - 1) * e1 + static_cast<std::uint64_t>(v.gamma) : 0;
    };

    // Arrival placements for a set of empty chargers and a demand state:
    // configuration increment and probability.
    using Fill = std::vector<std::pair<std::uint64_t, Rational>>;
    std::unordered_map<std::uint64_t, Fill> fill_cache;
    auto fills_for = [&](std::uint32_t empty_mask, int d) -> const Fill& {
        const std::uint64_t key = static_cast<std::uint64_t>(empty_mask) * D + static_cast<std::uint64_t>(d);
        auto it = fill_cache.find(key);
        if (it != fill_cache.end()) return it->second;
        const ArrivalLaw& law = model.demand.law(d);
        std::vector<int> empties;
        for (int k = 0; k < N; ++k)
            if (empty_mask & (1u << k)) empties.push_back(k);
        std::vector<Rational> placed(empties.size() + 1);
        for (std::size_t c = 0; c < law.count.size(); ++c) {
            const Rational& p = law.count.probability(c);
            if (p == Rational{0}) continue;
            placed[std::min(c, empties.size())] += p;
        }
        std::map<std::uint64_t, Rational> merged;
        for (std::size_t k = 0; k < placed.size(); ++k) {
            if (placed[k] == Rational{0}) continue;
            // All k-tuples of marks, odometer style.
            std::vector<std::size_t> pick(k, 0);
            while (true) {
                Rational p = placed[k];
                std::uint64_t delta = 0;
                bool zero = false;
                for (std::size_t t = 0; t < k; ++t) {
                    const Rational& pm = law.mark_probabilities.probability(pick[t]);
                    if (pm == Rational{0}) {
                        zero = true;
                        break;
                    }
                    p *= pm;
                    delta += code_of(law.marks[pick[t]]) * power[static_cast<std::size_t>(empties[t])];
                }
                if (!zero) merged[delta] += p;
                std::size_t t = 0;
                while (t < k && ++pick[t] == law.marks.size()) pick[t++] = 0;
                if (t == k) break;
            }
        }
        Fill fill(merged.begin(), merged.end());
        return fill_cache.emplace(key, std::move(fill)).first->second;
    };

    mdp.action_offset_.reserve(n + 1);
    mdp.action_offset_.push_back(0);
    mdp.row_offset_.push_back(0);
    std::vector<std::uint32_t> masks;
    std::vector<std::pair<std::uint32_t, Rational>> row;
    for (std::uint32_t index = 0; index < n; ++index) {
        const SystemState x = mdp.decode(index);
        std::uint32_t chargeable = 0;
        for (int k = 0; k < N; ++k)
            if (x.vehicles[static_cast<std::size_t>(k)].chargeable()) chargeable |= 1u << k;
        masks.clear();
        for (std::uint32_t sub = chargeable;; sub = (sub - 1) & chargeable) {
            masks.push_back(sub);
            if (sub == 0) break;
        }
        std::sort(masks.begin(), masks.end(),
                  [N](std::uint32_t a, std::uint32_t b) { return lex_key(a, N) < lex_key(b, N); });
        for (std::uint32_t mask : masks) {
            const ActionVector a = mdp.action_vector(mask);
            const int A = a.aggregate();
            const Rational g = stage_cost(x, a, model.grid.cost_function(), model.penalty);
            const std::vector<VehicleState> stepped = step_vehicles(x, a);
            std::uint64_t stepped_cfg = 0;
            std::uint32_t empty_mask = 0;
            for (int k = N - 1; k >= 0; --k) {
                const auto& v = stepped[static_cast<std::size_t>(k)];
                stepped_cfg = stepped_cfg * mdp.radix_ + code_of(v);
                if (!v.present()) empty_mask |= 1u << k;
            }
            const Fill& fill = fills_for(empty_mask, x.demand);
            const auto grid_row = model.grid.transition(x.grid, A).probabilities();
            const auto demand_row = model.demand.transition(x.demand).probabilities();
            row.clear();
            for (const auto& [delta, pf] : fill) {
                for (std::uint64_t s2 = 0; s2 < S; ++s2) {
                    if (grid_row[s2] == Rational{0}) continue;
                    const Rational pfs = pf * grid_row[s2];
                    for (std::uint64_t d2 = 0; d2 < D; ++d2) {
                        if (demand_row[d2] == Rational{0}) continue;
                        const std::uint64_t target = ((stepped_cfg + delta) * S + s2) * D + d2;
                        row.emplace_back(static_cast<std::uint32_t>(target), pfs * demand_row[d2]);
                    }
                }
            }
            std::sort(row.begin(), row.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
            Rational sum;
            std::size_t start = mdp.targets_.size();
            for (const auto& [target, p] : row) {
                sum += p;
                if (mdp.targets_.size() > start && mdp.targets_.back().target == target) {
                    mdp.targets_.back().probability += p;
                } else {
                    mdp.targets_.push_back({target, p});
                }
            }
            if (sum != Rational{1})
                throw ModelError("transition row of state " + std::to_string(index) + " sums to " + sum.to_string());
            for (std::size_t t = start; t < mdp.targets_.size(); ++t)
                mdp.probs_d_.push_back(mdp.targets_[t].probability.to_double());
            mdp.row_offset_.push_back(mdp.targets_.size());
            mdp.masks_.push_back(mask);
            mdp.cost_.push_back(g);
            mdp.cost_d_.push_back(g.to_double());
        }
        mdp.action_offset_.push_back(mdp.masks_.size());
    }
    return mdp;
}

double bellman_residual(const EnumeratedMDP& mdp, double gain, std::span<const double> h, int threads) {
    const std::size_t n = mdp.state_count();
    std::vector<double> per_state(n, 0.0);
    parallel_for(n, threads, [&](std::size_t x) {
        const auto s = static_cast<std::uint32_t>(x);
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < mdp.action_count(s); ++k) best = std::min(best, mdp.q_value(s, k, h));
        per_state[x] = std::abs(gain + h[x] - best);
    });
    double worst = 0.0;
    for (double r : per_state) worst = std::max(worst, r);
    return worst;
}

DPSolution relative_value_iteration(const EnumeratedMDP& mdp, const RviOptions& options) {
    const std::size_t n = mdp.state_count();
    const std::uint32_t anchor = mdp.special_state();
    DPSolution sol;
    sol.h.assign(n, 0.0);
    sol.policy.assign(n, 0);
    std::vector<double> th(n, 0.0);
    double tau = 1.0;
    double window_span = std::numeric_limits<double>::infinity();
    std::size_t window_start = 0;

    for (std::size_t it = 1; it <= options.max_iter; ++it) {
        parallel_for(n, options.threads, [&](std::size_t x) {
            const auto s = static_cast<std::uint32_t>(x);
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;
            for (std::size_t k = 0; k < mdp.action_count(s); ++k) {
                const double q = mdp.q_value(s, k, sol.h);
                if (k == 0 || q < best - 1e-12 * std::max(1.0, std::abs(best))) {
                    best = q;
                    best_k = k;
                }
            }
            th[x] = tau * best + (1.0 - tau) * sol.h[x];
            sol.policy[x] = mdp.action_mask(s, best_k);
        });
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t x = 0; x < n; ++x) {
            const double diff = th[x] - sol.h[x];
            lo = std::min(lo, diff);
            hi = std::max(hi, diff);
        }
        sol.span = hi - lo;
        sol.iterations = it;
        sol.gain = (th[anchor] - sol.h[anchor]) / tau;
        if (sol.span <= options.tol * tau) {
            sol.converged = true;
            sol.residual = bellman_residual(mdp, sol.gain, sol.h, options.threads);
            return sol;
        }
        const double a = th[anchor];
        for (std::size_t x = 0; x < n; ++x) sol.h[x] = th[x] - a;

        if (it - window_start >= options.stall_window) {
            if (sol.span > 0.9 * window_span) {
                if (options.allow_damping && !sol.damped) {
                    sol.damped = true;
                    sol.damping = tau = options.damping;
                } else {
                    sol.residual = bellman_residual(mdp, sol.gain, sol.h, options.threads);
                    throw ConvergenceError("relative value iteration stalled at span " + std::to_string(sol.span) +
                                               " after " + std::to_string(it) + " iterations",
                                           sol);
                }
            }
            window_start = it;
            window_span = sol.span;
        } else if (window_start == 0 && it == 1) {
            window_span = sol.span;
        }
    }
    sol.residual = bellman_residual(mdp, sol.gain, sol.h, options.threads);
    throw ConvergenceError("relative value iteration did not converge in " + std::to_string(options.max_iter) +
                               " iterations (span " + std::to_string(sol.span) + ")",
                           sol);
}

namespace {

struct PolicyGraph {
    std::vector<std::size_t> offset;
    std::vector<std::uint32_t> target;
    std::vector<double> prob;
    std::vector<double> cost;
};

PolicyGraph policy_graph(const EnumeratedMDP& mdp, const StationaryPolicy& policy) {
    const std::size_t n = mdp.state_count();
    if (policy.size() != n) throw std::invalid_argument("policy size does not match the state count");
    PolicyGraph g;
    g.offset.reserve(n + 1);
    g.offset.push_back(0);
    g.cost.resize(n);
    for (std::uint32_t x = 0; x < n; ++x) {
        const std::size_t k = mdp.action_position(x, policy[x]);
        g.cost[x] = mdp.cost_value(x, k);
        const auto tr = mdp.transitions(x, k);
        const auto pv = mdp.transition_values(x, k);
        for (std::size_t t = 0; t < tr.size(); ++t) {
            g.target.push_back(tr[t].target);
            g.prob.push_back(pv[t]);
        }
        g.offset.push_back(g.target.size());
    }
    return g;
}

/// Strongly connected components (iterative Tarjan); returns component id per node.
std::vector<int> strong_components(const PolicyGraph& g, int& count) {
    const std::size_t n = g.cost.size();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<std::uint32_t> stack;
    std::vector<std::pair<std::uint32_t, std::size_t>> call;
    int next = 0;
    count = 0;
    for (std::uint32_t root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        call.emplace_back(root, g.offset[root]);
        index[root] = low[root] = next++;
        stack.push_back(root);
        on_stack[root] = 1;
        while (!call.empty()) {
            auto& [v, e] = call.back();
            if (e < g.offset[v + 1]) {
                const std::uint32_t w = g.target[e++];
                if (index[w] < 0) {
                    index[w] = low[w] = next++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    call.emplace_back(w, g.offset[w]);
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                while (true) {
                    const std::uint32_t w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = count;
                    if (w == v) break;
                }
                ++count;
            }
            const std::uint32_t done = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        }
    }
    return comp;
}

}  // namespace

PolicyEvaluation evaluate_policy(const EnumeratedMDP& mdp, const StationaryPolicy& policy) {
    const PolicyGraph g = policy_graph(mdp, policy);
    const std::size_t n = g.cost.size();
    int components = 0;
    const std::vector<int> comp = strong_components(g, components);
    std::vector<char> closed(static_cast<std::size_t>(components), 1);
    for (std::uint32_t x = 0; x < n; ++x)
        for (std::size_t e = g.offset[x]; e < g.offset[x + 1]; ++e)
            if (comp[g.target[e]] != comp[x]) closed[static_cast<std::size_t>(comp[x])] = 0;

    PolicyEvaluation out;
    out.gain.assign(n, 0.0);
    std::vector<char> recurrent(n, 0);
    for (int c = 0; c < components; ++c) {
        if (!closed[static_cast<std::size_t>(c)]) continue;
        ++out.recurrent_classes;
        std::vector<std::uint32_t> members;
        std::unordered_map<std::uint32_t, int> local;
        for (std::uint32_t x = 0; x < n; ++x)
            if (comp[x] == c) {
                local[x] = static_cast<int>(members.size());
                members.push_back(x);
            }
        const int m = static_cast<int>(members.size());
        // pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
        std::vector<Eigen::Triplet<double>> trip;
        for (int r = 0; r < m; ++r) {
            const std::uint32_t x = members[static_cast<std::size_t>(r)];
            for (std::size_t e = g.offset[x]; e < g.offset[x + 1]; ++e) {
                const int col = local.at(g.target[e]);
                if (col != m - 1) trip.emplace_back(col, r, g.prob[e]);
            }
            if (r != m - 1) trip.emplace_back(r, r, -1.0);
            trip.emplace_back(m - 1, r, 1.0);
        }
        Eigen::SparseMatrix<double> M(m, m);
        M.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(M);
        if (lu.info() != Eigen::Success) throw std::runtime_error("stationary distribution solve failed");
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        rhs[m - 1] = 1.0;
        const Eigen::VectorXd pi = lu.solve(rhs);
        double gain = 0.0;
        for (int r = 0; r < m; ++r) gain += pi[r] * g.cost[members[static_cast<std::size_t>(r)]];
        for (std::uint32_t x : members) {
            out.gain[x] = gain;
            recurrent[x] = 1;
        }
    }

    // Transient states: gain_T = P_TT gain_T + P_TR gain_R.
    std::vector<std::uint32_t> transient;
    std::vector<int> local(n, -1);
    for (std::uint32_t x = 0; x < n; ++x)
        if (!recurrent[x]) {
            local[x] = static_cast<int>(transient.size());
            transient.push_back(x);
        }
    if (!transient.empty()) {
        const int m = static_cast<int>(transient.size());
        std::vector<Eigen::Triplet<double>> trip;
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
        for (int r = 0; r < m; ++r) {
            const std::uint32_t x = transient[static_cast<std::size_t>(r)];
            trip.emplace_back(r, r, 1.0);
            for (std::size_t e = g.offset[x]; e < g.offset[x + 1]; ++e) {
                const std::uint32_t y = g.target[e];
                if (recurrent[y]) rhs[r] += g.prob[e] * out.gain[y];
                else trip.emplace_back(r, local[y], -g.prob[e]);
            }
        }
        Eigen::SparseMatrix<double> M(m, m);
        M.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(M);
        if (lu.info() != Eigen::Success) throw std::runtime_error("absorption solve failed");
        const Eigen::VectorXd gt = lu.solve(rhs);
        for (int r = 0; r < m; ++r) out.gain[transient[static_cast<std::size_t>(r)]] = gt[r];
    }
    out.min_gain = *std::min_element(out.gain.begin(), out.gain.end());
    out.max_gain = *std::max_element(out.gain.begin(), out.gain.end());
    return out;
}

GainCheck verify_constant_gain(const EnumeratedMDP& mdp, const DPSolution& solution, double tol) {
    GainCheck check;
    check.assumption2 = mdp.assumption2().holds();
    for (const auto& f : mdp.assumption2().findings()) check.findings.push_back(f);
    if (!solution.converged) check.findings.emplace_back("solution did not converge");
    check.residual = bellman_residual(mdp, solution.gain, solution.h);
    check.bellman_ok = solution.converged && check.residual <= tol;
    if (!check.bellman_ok && solution.converged)
        check.findings.push_back("Bellman residual " + std::to_string(check.residual) + " exceeds tolerance");
    const PolicyEvaluation eval = evaluate_policy(mdp, solution.policy);
    check.recurrent_classes = eval.recurrent_classes;
    check.gain_spread = eval.max_gain - eval.min_gain;
    check.constant_gain = check.gain_spread <= tol;
    if (!check.constant_gain)
        check.findings.push_back("greedy policy gain ranges over [" + std::to_string(eval.min_gain) + ", " +
                                 std::to_string(eval.max_gain) + "] across initial states");
    if (eval.recurrent_classes > 1)
        check.findings.push_back("greedy policy has " + std::to_string(eval.recurrent_classes) + " recurrent classes");
    return check;
}

namespace {

/// Solves lambda + h(x) - sum_y p h(y) = g(x) over `states` (closed under the
/// policy, anchor first, h(anchor) = 0). Unknown 0 is lambda.
std::vector<Exact> solve_exact_evaluation(const EnumeratedMDP& mdp, const StationaryPolicy& policy,
                                          const std::vector<std::uint32_t>& states) {
    const std::size_t m = states.size();
    std::unordered_map<std::uint32_t, std::size_t> local;
    for (std::size_t r = 0; r < m; ++r) local[states[r]] = r;
    // Dense augmented matrix; column 0 is lambda, column r (r >= 1) is h(states[r]), column m is the rhs.
    std::vector<std::vector<Exact>> a(m, std::vector<Exact>(m + 1));
    for (std::size_t r = 0; r < m; ++r) {
        const std::uint32_t x = states[r];
        const std::size_t k = mdp.action_position(x, policy[x]);
        a[r][0] += 1;
        if (r != 0) a[r][r] += 1;
        for (const auto& tr : mdp.transitions(x, k)) {
            const auto it = local.find(tr.target);
            if (it == local.end()) throw std::logic_error("state set is not closed under the policy");
            if (it->second != 0) a[r][it->second] -= to_exact(tr.probability);
        }
        a[r][m] = to_exact(mdp.cost(x, k));
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        while (pivot < m && a[pivot][col] == 0) ++pivot;
        if (pivot == m) throw std::domain_error("policy evaluation equations are singular (policy is not unichain)");
        std::swap(a[pivot], a[col]);
        const Exact inv = 1 / a[col][col];
        for (std::size_t c = col; c <= m; ++c)
            if (a[col][c] != 0) a[col][c] *= inv;
        for (std::size_t r = 0; r < m; ++r) {
            if (r == col || a[r][col] == 0) continue;
            const Exact f = a[r][col];
            for (std::size_t c = col; c <= m; ++c)
                if (a[col][c] != 0) a[r][c] -= f * a[col][c];
        }
    }
    std::vector<Exact> out(m);
    for (std::size_t r = 0; r < m; ++r) out[r] = a[r][m];
    return out;  // out[0] = lambda, out[r] = h(states[r]) for r >= 1
}

std::vector<std::uint32_t> states_with_anchor_first(const EnumeratedMDP& mdp) {
    std::vector<std::uint32_t> states;
    states.reserve(mdp.state_count());
    states.push_back(mdp.special_state());
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x)
        if (x != mdp.special_state()) states.push_back(x);
    return states;
}

struct ExactValues {
    Exact gain;
    std::vector<Exact> h;  // indexed by state
};

ExactValues exact_values(const EnumeratedMDP& mdp, const StationaryPolicy& policy) {
    const auto states = states_with_anchor_first(mdp);
    const auto sol = solve_exact_evaluation(mdp, policy, states);
    ExactValues v;
    v.gain = sol[0];
    v.h.assign(mdp.state_count(), Exact(0));
    for (std::size_t r = 1; r < states.size(); ++r) v.h[states[r]] = sol[r];
    return v;
}

Exact exact_q(const EnumeratedMDP& mdp, std::uint32_t x, std::size_t k, const std::vector<Exact>& h) {
    Exact q = to_exact(mdp.cost(x, k));
    for (const auto& tr : mdp.transitions(x, k)) q += to_exact(tr.probability) * h[tr.target];
    return q;
}

constexpr std::size_t kExactStateLimit = 4000;

}  // namespace

ExactEvaluation evaluate_policy_exact(const EnumeratedMDP& mdp, const StationaryPolicy& policy) {
    if (mdp.state_count() > kExactStateLimit)
        throw StateSpaceTooLarge("exact evaluation is limited to " + std::to_string(kExactStateLimit) + " states");
    const ExactValues v = exact_values(mdp, policy);
    ExactEvaluation out;
    out.gain = exact_string(v.gain);
    out.gain_value = v.gain.convert_to<double>();
    for (const auto& hx : v.h) out.h.push_back(exact_string(hx));
    return out;
}

DPSolution exact_policy_iteration(const EnumeratedMDP& mdp, DPSolution start, std::size_t max_iter) {
    if (mdp.state_count() > kExactStateLimit)
        throw StateSpaceTooLarge("exact policy iteration is limited to " + std::to_string(kExactStateLimit) + " states");
    StationaryPolicy policy = start.policy;
    if (policy.size() != mdp.state_count()) throw std::invalid_argument("start policy has the wrong size");
    ExactValues v;
    std::size_t it = 0;
    for (;; ++it) {
        if (it >= max_iter) throw ConvergenceError("exact policy iteration did not terminate", start);
        v = exact_values(mdp, policy);
        bool changed = false;
        for (std::uint32_t x = 0; x < mdp.state_count(); ++x) {
            const std::size_t current = mdp.action_position(x, policy[x]);
            Exact best = exact_q(mdp, x, current, v.h);
            std::size_t best_k = current;
            for (std::size_t k = 0; k < mdp.action_count(x); ++k) {
                if (k == current) continue;
                const Exact q = exact_q(mdp, x, k, v.h);
                if (q < best) {
                    best = q;
                    best_k = k;
                }
            }
            if (best_k != current) {
                policy[x] = mdp.action_mask(x, best_k);
                changed = true;
            }
        }
        if (!changed) break;
    }
    DPSolution out = std::move(start);
    out.exact = true;
    out.exact_iterations = it + 1;
    out.policy = std::move(policy);
    out.exact_gain = exact_string(v.gain);
    out.gain = v.gain.convert_to<double>();
    out.exact_h.clear();
    out.h.assign(mdp.state_count(), 0.0);
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x) {
        out.exact_h.push_back(exact_string(v.h[x]));
        out.h[x] = v.h[x].convert_to<double>();
    }
    out.residual = bellman_residual(mdp, out.gain, out.h);
    out.converged = true;
    return out;
}

std::size_t count_violations(const EnumeratedMDP& mdp, const StationaryPolicy& policy) {
    const int N = mdp.dims().chargers;
    const int B = mdp.dims().max_stay;
    std::size_t total = 0;
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x) {
        const SystemState s = mdp.decode(x);
        const std::uint32_t mask = policy.at(x);
        for (int i = 0; i < N; ++i) {
            if (!(mask & (1u << i))) continue;
            for (int j = 0; j < N; ++j) {
                if (mask & (1u << j)) continue;
                const auto& vj = s.vehicles[static_cast<std::size_t>(j)];
                if (vj.present() && has_priority_over(vj, s.vehicles[static_cast<std::size_t>(i)], B)) ++total;
            }
        }
    }
    return total;
}

ProjectionResult lllp_projection(const EnumeratedMDP& mdp, const DPSolution& solution, double tol) {
    ProjectionResult out;
    out.policy = solution.policy;
    out.violations_before = count_violations(mdp, out.policy);
    std::vector<Exact> h_exact;
    if (solution.exact) {
        h_exact.reserve(solution.exact_h.size());
        for (const auto& text : solution.exact_h) h_exact.emplace_back(text);
    }
    out.max_q_increase = -std::numeric_limits<double>::infinity();
    const int B = mdp.dims().max_stay;
    for (std::uint32_t x = 0; x < mdp.state_count(); ++x) {
        const SystemState s = mdp.decode(x);
        while (true) {
            const auto violation = check_lllp_compliance(s, mdp.action_vector(out.policy[x]), B);
            if (!violation) break;
            const std::uint32_t original = out.policy[x];
            const std::uint32_t swapped = (original & ~(1u << violation->i)) | (1u << violation->j);
            const std::size_t ko = mdp.action_position(x, original);
            const std::size_t ks = mdp.action_position(x, swapped);
            SwapCheck check{x, *violation, mdp.q_value(x, ko, solution.h), mdp.q_value(x, ks, solution.h)};
            out.max_q_increase = std::max(out.max_q_increase, check.q_swapped - check.q_original);
            const bool ok = solution.exact ? exact_q(mdp, x, ks, h_exact) <= exact_q(mdp, x, ko, h_exact)
                                           : check.q_swapped <= check.q_original + tol;
            if (!ok)
                throw std::logic_error("interchange at state " + std::to_string(x) + " raises Q from " +
                                       std::to_string(check.q_original) + " to " + std::to_string(check.q_swapped));
            out.checks.push_back(check);
            out.policy[x] = swapped;
            ++out.swaps;
        }
    }
    if (out.checks.empty()) out.max_q_increase = 0.0;
    out.violations_after = count_violations(mdp, out.policy);
    return out;
}

BruteForceResult brute_force_min_gain(const EnumeratedMDP& mdp, std::size_t max_policies) {
    const std::size_t n = mdp.state_count();
    const std::uint32_t anchor = mdp.special_state();
    std::vector<int> choice(n, -1);
    std::vector<std::uint32_t> order{anchor};
    std::vector<int> position(n, -1);
    position[anchor] = 0;

    BruteForceResult out;
    out.best_gain = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, StationaryPolicy>> candidates;
    constexpr double kCandidateBand = 1e-9;

    auto evaluate_leaf = [&]() {
        const int m = static_cast<int>(order.size());
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd rhs(m);
        for (int r = 0; r < m; ++r) {
            const std::uint32_t x = order[static_cast<std::size_t>(r)];
            const auto k = static_cast<std::size_t>(choice[x]);
            M(r, 0) += 1.0;
            if (r != 0) M(r, r) += 1.0;
            const auto tr = mdp.transitions(x, k);
            const auto pv = mdp.transition_values(x, k);
            for (std::size_t t = 0; t < tr.size(); ++t) {
                const int c = position[tr[t].target];
                if (c != 0) M(r, c) -= pv[t];
            }
            rhs[r] = mdp.cost_value(x, k);
        }
        const double gain = M.partialPivLu().solve(rhs)[0];
        if (++out.policies > max_policies)
            throw std::length_error("more than " + std::to_string(max_policies) + " policies");
        if (gain < out.best_gain + kCandidateBand) {
            if (gain < out.best_gain) {
                out.best_gain = gain;
                std::erase_if(candidates, [&](const auto& c) { return c.first > gain + kCandidateBand; });
            }
            StationaryPolicy p(n, 0);
            for (std::uint32_t x : order) p[x] = mdp.action_mask(x, static_cast<std::size_t>(choice[x]));
            candidates.emplace_back(gain, std::move(p));
        }
    };

    // Depth-first over actions of states in discovery order; each leaf is one
    // policy on a set of states closed under it.
    auto recurse = [&](auto&& self, std::size_t depth) -> void {
        if (depth == order.size()) {
            evaluate_leaf();
            return;
        }
        const std::uint32_t x = order[depth];
        for (std::size_t k = 0; k < mdp.action_count(x); ++k) {
            choice[x] = static_cast<int>(k);
            const std::size_t mark = order.size();
            for (const auto& tr : mdp.transitions(x, k)) {
                if (position[tr.target] < 0) {
                    position[tr.target] = static_cast<int>(order.size());
                    order.push_back(tr.target);
                }
            }
            self(self, depth + 1);
            while (order.size() > mark) {
                position[order.back()] = -1;
                order.pop_back();
            }
        }
        choice[x] = -1;
    };
    recurse(recurse, 0);

    std::optional<Exact> best;
    for (const auto& [gain, policy] : candidates) {
        (void)gain;
        // The states the policy reaches from the anchor, anchor first.
        std::vector<std::uint32_t> states{anchor};
        std::vector<char> seen(n, 0);
        seen[anchor] = 1;
        for (std::size_t r = 0; r < states.size(); ++r) {
            const std::uint32_t x = states[r];
            for (const auto& tr : mdp.transitions(x, mdp.action_position(x, policy[x])))
                if (!seen[tr.target]) {
                    seen[tr.target] = 1;
                    states.push_back(tr.target);
                }
        }
        const Exact g = solve_exact_evaluation(mdp, policy, states)[0];
        ++out.exact_candidates;
        if (!best || g < *best) {
            best = g;
            out.best = policy;
        }
    }
    if (best) {
        out.exact_gain = exact_string(*best);
        out.best_gain = best->convert_to<double>();
    }
    return out;
}

}  // namespace evsched
