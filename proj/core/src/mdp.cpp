#include "modbe/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>

#include "modbe/error.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

void check_distribution(std::span<const double> p, double tol, const std::string& what) {
    double total = 0.0;
    for (const double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw InputError(what + " has a negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > tol) {
        throw InputError(what + " sums to " + text::format_double(total) + ", expected 1");
    }
}

}  // namespace

StateActionTable::StateActionTable(std::size_t num_states, std::size_t num_actions, double fill)
    : num_states_(num_states), num_actions_(num_actions), values_(num_states * num_actions, fill) {}

StateActionTable::StateActionTable(std::size_t num_states, std::size_t num_actions, std::vector<double> values)
    : num_states_(num_states), num_actions_(num_actions), values_(std::move(values)) {
    if (values_.size() != num_states * num_actions) throw InputError("table size does not match S*A");
}

double StateActionTable::max_over_actions(std::size_t x) const {
    const auto row = values_.begin() + static_cast<std::ptrdiff_t>(x * num_actions_);
    return *std::max_element(row, row + static_cast<std::ptrdiff_t>(num_actions_));
}

std::size_t StateActionTable::argmax(std::size_t x) const {
    std::size_t best = 0;
    for (std::size_t a = 1; a < num_actions_; ++a) {
        if ((*this)(x, a) > (*this)(x, best)) best = a;
    }
    return best;
}

double StateActionTable::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

TabularMdp::TabularMdp(std::size_t num_states, std::size_t num_actions, std::size_t horizon,
                       std::vector<double> initial_dist, std::vector<std::vector<double>> transitions,
                       std::vector<double> rewards)
    : num_states_(num_states),
      num_actions_(num_actions),
      horizon_(horizon),
      initial_dist_(std::move(initial_dist)),
      transitions_(std::move(transitions)),
      rewards_(std::move(rewards)) {
    if (num_states_ == 0 || num_actions_ == 0 || horizon_ == 0) throw InputError("S, A and H must be positive");
    if (initial_dist_.size() != num_states_) throw InputError("initial distribution must have S entries");
    check_distribution(initial_dist_, kInputProbabilityTolerance, "initial distribution");
    if (transitions_.size() != horizon_) throw InputError("expected H transition blocks");
    for (std::size_t h = 0; h < horizon_; ++h) {
        if (transitions_[h].size() != num_states_ * num_actions_ * num_states_) {
            throw InputError("transition block " + std::to_string(h + 1) + " must have S*A*S entries");
        }
        for (std::size_t x = 0; x < num_states_; ++x) {
            for (std::size_t a = 0; a < num_actions_; ++a) {
                check_distribution(next_state_dist(h, x, a), kInputProbabilityTolerance,
                                   "transition row (h=" + std::to_string(h + 1) + ", x=" + std::to_string(x) +
                                       ", a=" + std::to_string(a) + ")");
            }
        }
    }
    if (rewards_.size() != num_states_ * num_actions_) throw InputError("expected S*A rewards");
    for (const double r : rewards_) {
        if (!(r >= 0.0 && r <= 1.0)) throw InputError("rewards must lie in [0, 1]");
    }
}

Policy::Policy(std::size_t num_states, std::size_t num_actions, std::vector<StateActionTable> steps)
    : num_states_(num_states), num_actions_(num_actions), steps_(std::move(steps)) {
    for (std::size_t h = 0; h < steps_.size(); ++h) {
        const auto& t = steps_[h];
        if (t.num_states() != num_states_ || t.num_actions() != num_actions_) {
            throw InputError("policy step has wrong dimensions");
        }
        for (std::size_t x = 0; x < num_states_; ++x) {
            check_distribution(t.values().subspan(x * num_actions_, num_actions_), kInputProbabilityTolerance,
                               "policy row (h=" + std::to_string(h + 1) + ", x=" + std::to_string(x) + ")");
        }
    }
}

Policy Policy::deterministic(std::size_t num_states, std::size_t num_actions,
                             const std::vector<std::vector<std::size_t>>& actions) {
    std::vector<StateActionTable> steps;
    steps.reserve(actions.size());
    for (const auto& row : actions) {
        if (row.size() != num_states) throw InputError("deterministic policy needs one action per state");
        StateActionTable t(num_states, num_actions);
        for (std::size_t x = 0; x < num_states; ++x) {
            if (row[x] >= num_actions) throw InputError("policy action out of range");
            t(x, row[x]) = 1.0;
        }
        steps.push_back(std::move(t));
    }
    return Policy(num_states, num_actions, std::move(steps));
}

Policy Policy::uniform(std::size_t num_states, std::size_t num_actions, std::size_t horizon) {
    return Policy(num_states, num_actions,
                  std::vector<StateActionTable>(
                      horizon, StateActionTable(num_states, num_actions, 1.0 / static_cast<double>(num_actions))));
}

bool Policy::is_deterministic() const {
    return std::all_of(steps_.begin(), steps_.end(), [](const StateActionTable& t) {
        return std::all_of(t.values().begin(), t.values().end(), [](double p) { return p == 0.0 || p == 1.0; });
    });
}

void DataDistribution::validate(const TabularMdp& mdp) const {
    if (steps.size() != mdp.horizon()) throw InputError("data distribution must have H steps");
    for (std::size_t h = 0; h < steps.size(); ++h) {
        if (steps[h].num_states() != mdp.num_states() || steps[h].num_actions() != mdp.num_actions()) {
            throw InputError("data distribution step has wrong dimensions");
        }
        check_distribution(steps[h].values(), kInputProbabilityTolerance,
                           "data distribution at h=" + std::to_string(h + 1));
    }
}

DataDistribution DataDistribution::uniform(const TabularMdp& mdp) {
    const double mass = 1.0 / static_cast<double>(mdp.num_states() * mdp.num_actions());
    return {std::vector<StateActionTable>(mdp.horizon(),
                                          StateActionTable(mdp.num_states(), mdp.num_actions(), mass))};
}

StateActionTable bellman_backup(const TabularMdp& mdp, std::size_t h, const StateActionTable& q_next) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    if (h >= mdp.horizon()) throw InputError("step index out of range");
    const bool terminal = q_next.values().empty();
    if (!terminal && (q_next.num_states() != S || q_next.num_actions() != A)) {
        throw InputError("q_next dimensions do not match the MDP");
    }
    std::vector<double> next_value(S, 0.0);
    if (!terminal) {
        for (std::size_t x = 0; x < S; ++x) next_value[x] = q_next.max_over_actions(x);
    }
    StateActionTable out(S, A);
    for (std::size_t x = 0; x < S; ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto p = mdp.next_state_dist(h, x, a);
            double expect = 0.0;
            for (std::size_t y = 0; y < S; ++y) expect += p[y] * next_value[y];
            out(x, a) = mdp.reward(x, a) + expect;
        }
    }
    return out;
}

std::vector<StateActionTable> optimal_q(const TabularMdp& mdp) {
    const std::size_t H = mdp.horizon();
    std::vector<StateActionTable> q(H);
    StateActionTable next;
    for (std::size_t h = H; h-- > 0;) {
        q[h] = bellman_backup(mdp, h, next);
        next = q[h];
    }
    return q;
}

Policy greedy_policy(std::span<const StateActionTable> q) {
    if (q.empty()) throw InputError("greedy policy needs at least one step");
    const std::size_t S = q.front().num_states();
    const std::size_t A = q.front().num_actions();
    std::vector<std::vector<std::size_t>> actions(q.size(), std::vector<std::size_t>(S));
    for (std::size_t h = 0; h < q.size(); ++h) {
        if (q[h].num_states() != S || q[h].num_actions() != A) throw InputError("inconsistent table dimensions");
        for (std::size_t x = 0; x < S; ++x) actions[h][x] = q[h].argmax(x);
    }
    return Policy::deterministic(S, A, actions);
}

namespace {

void check_policy(const TabularMdp& mdp, const Policy& pi) {
    if (pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() ||
        pi.horizon() != mdp.horizon()) {
        throw InputError("policy dimensions do not match the MDP");
    }
}

}  // namespace

double policy_value(const TabularMdp& mdp, const Policy& pi) {
    check_policy(mdp, pi);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    std::vector<double> v_next(S, 0.0);
    std::vector<double> v(S);
    for (std::size_t h = mdp.horizon(); h-- > 0;) {
        for (std::size_t x = 0; x < S; ++x) {
            double total = 0.0;
            for (std::size_t a = 0; a < A; ++a) {
                const double p_a = pi.prob(h, x, a);
                if (p_a == 0.0) continue;
                const auto p = mdp.next_state_dist(h, x, a);
                double q = mdp.reward(x, a);
                for (std::size_t y = 0; y < S; ++y) q += p[y] * v_next[y];
                total += p_a * q;
            }
            v[x] = total;
        }
        std::swap(v, v_next);
    }
    const auto rho = mdp.initial_dist();
    double value = 0.0;
    for (std::size_t x = 0; x < S; ++x) value += rho[x] * v_next[x];
    return value;
}

double optimal_value(const TabularMdp& mdp) {
    const auto q = optimal_q(mdp);
    const auto rho = mdp.initial_dist();
    double value = 0.0;
    for (std::size_t x = 0; x < mdp.num_states(); ++x) value += rho[x] * q.front().max_over_actions(x);
    return value;
}

double regret(const TabularMdp& mdp, const Policy& pi) {
    const auto q = optimal_q(mdp);
    return policy_value(mdp, greedy_policy(q)) - policy_value(mdp, pi);
}

OccupancyMeasure occupancy(const TabularMdp& mdp, const Policy& pi) {
    check_policy(mdp, pi);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    OccupancyMeasure out;
    out.reserve(mdp.horizon());
    std::vector<double> state_mass(mdp.initial_dist().begin(), mdp.initial_dist().end());
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        StateActionTable d(S, A);
        std::vector<double> next_mass(S, 0.0);
        for (std::size_t x = 0; x < S; ++x) {
            for (std::size_t a = 0; a < A; ++a) {
                const double m = state_mass[x] * pi.prob(h, x, a);
                d(x, a) = m;
                if (m == 0.0) continue;
                const auto p = mdp.next_state_dist(h, x, a);
                for (std::size_t y = 0; y < S; ++y) next_mass[y] += m * p[y];
            }
        }
        out.push_back(std::move(d));
        state_mass = std::move(next_mass);
    }
    return out;
}

std::vector<std::vector<double>> max_reach_probability(const TabularMdp& mdp) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const std::size_t H = mdp.horizon();
    std::vector<std::vector<double>> reach(H, std::vector<double>(S, 0.0));
    const auto rho = mdp.initial_dist();
    for (std::size_t x = 0; x < S; ++x) reach[0][x] = rho[x];
    // For each target (h, x): backward DP of the best probability of standing on x at step h.
    std::vector<double> value(S);
    std::vector<double> earlier(S);
    for (std::size_t h = 1; h < H; ++h) {
        for (std::size_t target = 0; target < S; ++target) {
            std::fill(value.begin(), value.end(), 0.0);
            value[target] = 1.0;
            for (std::size_t t = h; t-- > 0;) {
                for (std::size_t x = 0; x < S; ++x) {
                    double best = 0.0;
                    for (std::size_t a = 0; a < A; ++a) {
                        const auto p = mdp.next_state_dist(t, x, a);
                        double reach_prob = 0.0;
                        for (std::size_t y = 0; y < S; ++y) reach_prob += p[y] * value[y];
                        best = std::max(best, reach_prob);
                    }
                    earlier[x] = best;
                }
                std::swap(value, earlier);
            }
            double total = 0.0;
            for (std::size_t x = 0; x < S; ++x) total += rho[x] * value[x];
            reach[h][target] = total;
        }
    }
    return reach;
}

double concentrability(const TabularMdp& mdp, const DataDistribution& mu) {
    mu.validate(mdp);
    const auto reach = max_reach_probability(mdp);
    double worst = 0.0;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            if (reach[h][x] == 0.0) continue;
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
                const double mass = mu.steps[h](x, a);
                if (mass == 0.0) return kInfinity;
                worst = std::max(worst, reach[h][x] / mass);
            }
        }
    }
    return worst;
}

std::vector<double> bellman_residuals(const TabularMdp& mdp, const DataDistribution& mu,
                                      std::span<const StateActionTable> f) {
    mu.validate(mdp);
    if (f.size() != mdp.horizon()) throw InputError("f-sequence must have H tables");
    std::vector<double> out(mdp.horizon());
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        if (f[h].num_states() != mdp.num_states() || f[h].num_actions() != mdp.num_actions()) {
            throw InputError("f-sequence table has wrong dimensions");
        }
        const auto backup = bellman_backup(mdp, h, h + 1 < mdp.horizon() ? f[h + 1] : StateActionTable{});
        double norm = 0.0;
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            for (std::size_t a = 0; a < mdp.num_actions(); ++a) {
                const double diff = f[h](x, a) - backup(x, a);
                norm += mu.steps[h](x, a) * diff * diff;
            }
        }
        out[h] = norm;
    }
    return out;
}

double perf_diff_bound(const TabularMdp& mdp, const DataDistribution& mu, std::span<const StateActionTable> f) {
    const double c = concentrability(mdp, mu);
    const auto residuals = bellman_residuals(mdp, mu, f);
    const double total = std::accumulate(residuals.begin(), residuals.end(), 0.0);
    if (std::isinf(c)) return kInfinity;
    return 2.0 * std::sqrt(c * total);
}

Policy epsilon_optimal_policy(const TabularMdp& mdp, double eps) {
    if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("epsilon must lie in [0, 1]");
    const auto q = optimal_q(mdp);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    std::vector<StateActionTable> steps;
    for (const auto& qh : q) {
        StateActionTable t(S, A, eps / static_cast<double>(A));
        for (std::size_t x = 0; x < S; ++x) t(x, qh.argmax(x)) += 1.0 - eps;
        steps.push_back(std::move(t));
    }
    return Policy(S, A, std::move(steps));
}

Policy read_policy(std::istream& in, std::size_t num_states, std::size_t num_actions, std::size_t horizon) {
    text::TokenReader reader(in);
    std::vector<std::vector<std::size_t>> actions(horizon, std::vector<std::size_t>(num_states));
    for (auto& row : actions) {
        for (auto& a : row) {
            a = reader.next_index();
            if (a >= num_actions) throw InputError("action index out of range", reader.line());
        }
    }
    if (!reader.done()) throw InputError("trailing tokens after the policy", reader.line());
    return Policy::deterministic(num_states, num_actions, actions);
}

Policy load_policy(const std::filesystem::path& path, std::size_t num_states, std::size_t num_actions,
                   std::size_t horizon) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open policy file " + path.string());
    return read_policy(in, num_states, num_actions, horizon);
}

TabularMdp read_mdp(std::istream& in) {
    text::TokenReader reader(in);
    const std::size_t S = reader.next_index();
    const std::size_t A = reader.next_index();
    const std::size_t H = reader.next_index();
    if (S == 0 || A == 0 || H == 0) throw InputError("S, A and H must be positive", reader.line());
    std::vector<double> rho(S);
    for (auto& v : rho) v = reader.next_double();
    std::vector<std::vector<double>> transitions(H, std::vector<double>(S * A * S));
    for (auto& block : transitions) {
        for (auto& v : block) v = reader.next_double();
    }
    std::vector<double> rewards(S * A);
    for (auto& v : rewards) v = reader.next_double();
    if (!reader.done()) throw InputError("trailing tokens after rewards", reader.line());
    try {
        return TabularMdp(S, A, H, std::move(rho), std::move(transitions), std::move(rewards));
    } catch (const InputError& e) {
        throw InputError(std::string("invalid MDP: ") + e.what(), reader.line());
    }
}

void write_mdp(std::ostream& out, const TabularMdp& mdp) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const auto row = [&out](std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out << ' ';
            out << text::format_double(values[i]);
        }
        out << '\n';
    };
    out << S << ' ' << A << ' ' << mdp.horizon() << '\n';
    row(mdp.initial_dist());
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        out << "# transitions h=" << h + 1 << '\n';
        for (std::size_t x = 0; x < S; ++x) {
            for (std::size_t a = 0; a < A; ++a) row(mdp.next_state_dist(h, x, a));
        }
    }
    out << "# rewards\n";
    for (std::size_t x = 0; x < S; ++x) row(mdp.rewards().subspan(x * A, A));
}

TabularMdp load_mdp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open MDP file " + path.string());
    return read_mdp(in);
}

void save_mdp(const std::filesystem::path& path, const TabularMdp& mdp) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_mdp(out, mdp);
}

}  // namespace modbe
