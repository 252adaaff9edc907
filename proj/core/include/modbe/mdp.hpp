#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

namespace modbe {

inline constexpr double kInputProbabilityTolerance = 1e-12;
inline constexpr double kDerivedProbabilityTolerance = 1e-10;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Dense table over (state, action), state-major.
class StateActionTable {
public:
    StateActionTable() = default;
    StateActionTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0);
    StateActionTable(std::size_t num_states, std::size_t num_actions, std::vector<double> values);

    double operator()(std::size_t x, std::size_t a) const { return values_[x * num_actions_ + a]; }
    double& operator()(std::size_t x, std::size_t a) { return values_[x * num_actions_ + a]; }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }

    double max_over_actions(std::size_t x) const;
    /// Lowest index among maximizers.
    std::size_t argmax(std::size_t x) const;
    double sum() const;

    friend bool operator==(const StateActionTable&, const StateActionTable&) = default;

private:
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
    std::vector<double> values_;
};

/// Finite-horizon tabular MDP with step-dependent transitions P_h(x'|x,a),
/// deterministic rewards r(x,a) in [0,1] and initial distribution rho.
/// Steps are 0-based in the API (h = 0 .. H-1). Immutable once built.
class TabularMdp {
public:
    /// `transitions[h]` holds S*A rows of S next-state probabilities, row (x,a) at x*A+a.
    TabularMdp(std::size_t num_states, std::size_t num_actions, std::size_t horizon,
               std::vector<double> initial_dist, std::vector<std::vector<double>> transitions,
               std::vector<double> rewards);

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t horizon() const noexcept { return horizon_; }

    std::span<const double> initial_dist() const noexcept { return initial_dist_; }
    std::span<const double> next_state_dist(std::size_t h, std::size_t x, std::size_t a) const {
        return {transitions_[h].data() + (x * num_actions_ + a) * num_states_, num_states_};
    }
    double transition(std::size_t h, std::size_t x, std::size_t a, std::size_t next) const {
        return transitions_[h][(x * num_actions_ + a) * num_states_ + next];
    }
    double reward(std::size_t x, std::size_t a) const { return rewards_[x * num_actions_ + a]; }
    std::span<const double> rewards() const noexcept { return rewards_; }

    friend bool operator==(const TabularMdp&, const TabularMdp&) = default;

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::size_t horizon_;
    std::vector<double> initial_dist_;
    std::vector<std::vector<double>> transitions_;
    std::vector<double> rewards_;
};

/// Markov policy pi_h(a|x). Deterministic policies are point masses.
class Policy {
public:
    Policy(std::size_t num_states, std::size_t num_actions, std::vector<StateActionTable> steps);

    static Policy deterministic(std::size_t num_states, std::size_t num_actions,
                                const std::vector<std::vector<std::size_t>>& actions);
    static Policy uniform(std::size_t num_states, std::size_t num_actions, std::size_t horizon);

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t horizon() const noexcept { return steps_.size(); }

    double prob(std::size_t h, std::size_t x, std::size_t a) const { return steps_[h](x, a); }
    const StateActionTable& step(std::size_t h) const { return steps_[h]; }

    /// Action with largest probability at (h, x); lowest index on ties.
    std::size_t mode(std::size_t h, std::size_t x) const { return steps_[h].argmax(x); }
    bool is_deterministic() const;

    friend bool operator==(const Policy&, const Policy&) = default;

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<StateActionTable> steps_;
};

/// Per-step state-action densities P^pi_h(x,a).
using OccupancyMeasure = std::vector<StateActionTable>;

/// Per-step sampling distribution mu_h over (x,a).
struct DataDistribution {
    std::vector<StateActionTable> steps;

    /// Throws InputError unless each step is a probability table over the MDP's pairs.
    void validate(const TabularMdp& mdp) const;
    static DataDistribution uniform(const TabularMdp& mdp);
};

/// T*_h q_next (x,a) = r(x,a) + E_{x'~P_h(.|x,a)} max_a' q_next(x',a').
/// Pass an empty table for the terminal convention q_next == 0.
StateActionTable bellman_backup(const TabularMdp& mdp, std::size_t h, const StateActionTable& q_next);

/// Q*_1..Q*_H by backward induction from Q*_{H+1} == 0.
std::vector<StateActionTable> optimal_q(const TabularMdp& mdp);

/// Greedy policy over a sequence of tables, lowest action index on ties.
Policy greedy_policy(std::span<const StateActionTable> q);

/// Exact v(pi) = E_{x~rho}[V^pi_1(x)].
double policy_value(const TabularMdp& mdp, const Policy& pi);
double optimal_value(const TabularMdp& mdp);
double regret(const TabularMdp& mdp, const Policy& pi);

OccupancyMeasure occupancy(const TabularMdp& mdp, const Policy& pi);

/// max over policies of P^pi_h(x), indexed [h][x].
std::vector<std::vector<double>> max_reach_probability(const TabularMdp& mdp);

/// sup_{h,x,a,pi} P^pi_h(x,a) / mu_h(x,a). Returns kInfinity when some pair that
/// a policy can reach has no data mass.
double concentrability(const TabularMdp& mdp, const DataDistribution& mu);

/// ||f_h - T*_h f_{h+1}||^2_{mu_h} for each h, with f_{H+1} == 0.
std::vector<double> bellman_residuals(const TabularMdp& mdp, const DataDistribution& mu,
                                      std::span<const StateActionTable> f);

/// 2 sqrt(C(mu) * sum_h ||f_h - T*_h f_{h+1}||^2_{mu_h}); kInfinity when C(mu) is.
double perf_diff_bound(const TabularMdp& mdp, const DataDistribution& mu, std::span<const StateActionTable> f);

/// (1 - eps) * greedy(Q*) + eps * uniform.
Policy epsilon_optimal_policy(const TabularMdp& mdp, double eps);

/// Deterministic policy file: H rows of S action indices (`#` comments).
Policy read_policy(std::istream& in, std::size_t num_states, std::size_t num_actions, std::size_t horizon);
Policy load_policy(const std::filesystem::path& path, std::size_t num_states, std::size_t num_actions,
                   std::size_t horizon);

/// Plain-text MDP format:
///   S A H
///   rho (S numbers)
///   H blocks of S*A rows with S next-state probabilities, row (x,a) in state-major order
///   S*A rewards in state-major order
/// `#` starts a comment. Values are written in shortest round-trip form.
TabularMdp read_mdp(std::istream& in);
void write_mdp(std::ostream& out, const TabularMdp& mdp);
TabularMdp load_mdp(const std::filesystem::path& path);
void save_mdp(const std::filesystem::path& path, const TabularMdp& mdp);

}  // namespace modbe
