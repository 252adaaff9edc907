#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the library's dynamic programs: values come from forward recursion
// over explicitly enumerated deterministic policies, and randomness comes from
// std::mt19937_64 rather than the library's counter streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "modbe/mdp.hpp"

namespace oracle {

using Actions = std::vector<std::vector<std::size_t>>;  // [h][x]

inline double unit(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }
inline std::size_t pick(std::mt19937_64& gen, std::size_t n) { return static_cast<std::size_t>(gen() % n); }

/// `units` indivisible quanta spread over `n` cells; at least `floor` per cell.
inline std::vector<double> random_quanta(std::mt19937_64& gen, std::size_t n, std::size_t units, std::size_t floor) {
    std::vector<std::size_t> count(n, floor);
    for (std::size_t u = floor * n; u < units; ++u) ++count[pick(gen, n)];
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(count[i]) / static_cast<double>(units);
    return out;
}

/// Transition rows and rho in multiples of 1/16, rewards in multiples of 1/8,
/// so every product and sum the DPs form over H <= 4 steps is exact in binary.
inline modbe::TabularMdp random_dyadic_mdp(std::mt19937_64& gen, std::size_t S, std::size_t A, std::size_t H) {
    auto rho = random_quanta(gen, S, 16, 0);
    std::vector<std::vector<double>> transitions(H);
    for (auto& block : transitions) {
        for (std::size_t row = 0; row < S * A; ++row) {
            const auto p = random_quanta(gen, S, 16, 0);
            block.insert(block.end(), p.begin(), p.end());
        }
    }
    std::vector<double> rewards(S * A);
    for (auto& r : rewards) r = static_cast<double>(pick(gen, 9)) / 8.0;
    return modbe::TabularMdp(S, A, H, rho, transitions, rewards);
}

/// Full-support mu in multiples of 1/64.
inline modbe::DataDistribution random_dyadic_mu(std::mt19937_64& gen, std::size_t S, std::size_t A, std::size_t H) {
    modbe::DataDistribution mu;
    for (std::size_t h = 0; h < H; ++h) mu.steps.emplace_back(S, A, random_quanta(gen, S * A, 64, 1));
    return mu;
}

inline std::size_t policy_count(std::size_t S, std::size_t A, std::size_t H) {
    std::size_t n = 1;
    for (std::size_t i = 0; i < S * H; ++i) n *= A;
    return n;
}

/// Calls visit(actions) for every deterministic Markov policy.
template <typename Visit>
void for_each_policy(std::size_t S, std::size_t A, std::size_t H, Visit visit) {
    Actions actions(H, std::vector<std::size_t>(S, 0));
    for (;;) {
        visit(static_cast<const Actions&>(actions));
        std::size_t i = 0;
        for (; i < S * H; ++i) {
            auto& digit = actions[i / S][i % S];
            if (++digit < A) break;
            digit = 0;
        }
        if (i == S * H) return;
    }
}

/// State distributions d_h(x) under a deterministic policy, forward from rho.
inline std::vector<std::vector<double>> forward_states(const modbe::TabularMdp& mdp, const Actions& pi) {
    const std::size_t S = mdp.num_states();
    std::vector<std::vector<double>> d(mdp.horizon());
    d[0].assign(mdp.initial_dist().begin(), mdp.initial_dist().end());
    for (std::size_t h = 0; h + 1 < mdp.horizon(); ++h) {
        d[h + 1].assign(S, 0.0);
        for (std::size_t x = 0; x < S; ++x) {
            for (std::size_t y = 0; y < S; ++y) d[h + 1][y] += d[h][x] * mdp.transition(h, x, pi[h][x], y);
        }
    }
    return d;
}

inline double forward_value(const modbe::TabularMdp& mdp, const Actions& pi) {
    const auto d = forward_states(mdp, pi);
    double v = 0.0;
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        for (std::size_t x = 0; x < mdp.num_states(); ++x) v += d[h][x] * mdp.reward(x, pi[h][x]);
    }
    return v;
}

struct Extremes {
    double best = -std::numeric_limits<double>::infinity();
    double worst = std::numeric_limits<double>::infinity();
};

inline Extremes enumerate_values(const modbe::TabularMdp& mdp) {
    Extremes e;
    for_each_policy(mdp.num_states(), mdp.num_actions(), mdp.horizon(), [&](const Actions& pi) {
        const double v = forward_value(mdp, pi);
        e.best = std::max(e.best, v);
        e.worst = std::min(e.worst, v);
    });
    return e;
}

/// max over deterministic policies and (h, x, a) of P^pi_h(x, a) / mu_h(x, a).
inline double brute_concentrability(const modbe::TabularMdp& mdp, const modbe::DataDistribution& mu) {
    double c = 0.0;
    for_each_policy(mdp.num_states(), mdp.num_actions(), mdp.horizon(), [&](const Actions& pi) {
        const auto d = forward_states(mdp, pi);
        for (std::size_t h = 0; h < mdp.horizon(); ++h) {
            for (std::size_t x = 0; x < mdp.num_states(); ++x) {
                if (d[h][x] == 0.0) continue;
                const double m = mu.steps[h](x, pi[h][x]);
                c = std::max(c, m == 0.0 ? std::numeric_limits<double>::infinity() : d[h][x] / m);
            }
        }
    });
    return c;
}

/// Plain loops for r + E max q_next, written independently of the library.
inline std::vector<double> naive_backup(const modbe::TabularMdp& mdp, std::size_t h, const std::vector<double>& q_next) {
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    std::vector<double> out(S * A);
    for (std::size_t x = 0; x < S; ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            double cont = 0.0;
            for (std::size_t y = 0; y < S && !q_next.empty(); ++y) {
                double best = q_next[y * A];
                for (std::size_t b = 1; b < A; ++b) best = std::max(best, q_next[y * A + b]);
                cont += mdp.transition(h, x, a, y) * best;
            }
            out[x * A + a] = mdp.reward(x, a) + cont;
        }
    }
    return out;
}

/// Kahan-compensated mean of squared residuals in reverse order.
inline double compensated_mse(const std::vector<double>& pred, const std::vector<double>& y) {
    double sum = 0.0, comp = 0.0;
    for (std::size_t i = y.size(); i-- > 0;) {
        const double d = pred[i] - y[i];
        const double term = d * d - comp;
        const double t = sum + term;
        comp = (t - sum) - term;
        sum = t;
    }
    return sum / static_cast<double>(y.size());
}

/// Brute-force completeness error for tabular classes given as member lists:
/// max over step h and outer members u whose values fit step h+1 (<= H-h-1,
/// 0-based h) of min over inner members of the mu_h-weighted squared distance
/// to the backup of u.
inline double brute_completeness(const modbe::TabularMdp& mdp, const modbe::DataDistribution& mu,
                                 const std::vector<std::vector<double>>& outer,
                                 const std::vector<std::vector<double>>& inner) {
    const std::size_t H = mdp.horizon();
    double worst = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
        const double cap = static_cast<double>(H - h - 1);
        for (const auto& u : outer) {
            if (*std::max_element(u.begin(), u.end()) > cap + 1e-12) continue;
            const auto target = naive_backup(mdp, h, h + 1 < H ? u : std::vector<double>{});
            double best = std::numeric_limits<double>::infinity();
            for (const auto& f : inner) {
                double d = 0.0;
                for (std::size_t c = 0; c < target.size(); ++c) {
                    d += mu.steps[h].values()[c] * (f[c] - target[c]) * (f[c] - target[c]);
                }
                best = std::min(best, d);
            }
            worst = std::max(worst, best);
        }
    }
    return worst;
}

/// Block-constant continuation tables on a grid of `levels` values in [0, top]
/// per block (all actions equal).
inline std::vector<std::vector<double>> block_grid(const std::vector<std::size_t>& block_of, std::size_t A,
                                                   double top, std::size_t levels) {
    const std::size_t B = *std::max_element(block_of.begin(), block_of.end()) + 1;
    std::vector<std::vector<double>> out;
    std::vector<std::size_t> digit(B, 0);
    for (;;) {
        std::vector<double> t(block_of.size() * A);
        for (std::size_t x = 0; x < block_of.size(); ++x) {
            for (std::size_t a = 0; a < A; ++a) {
                t[x * A + a] = top * static_cast<double>(digit[block_of[x]]) / static_cast<double>(levels - 1);
            }
        }
        out.push_back(std::move(t));
        std::size_t i = 0;
        for (; i < B; ++i) {
            if (++digit[i] < levels) break;
            digit[i] = 0;
        }
        if (i == B) return out;
    }
}

/// min over block tables in [0, bound] of the weighted distance, one cell at a
/// time by golden-section search (the objective is a convex quadratic per cell).
inline double abstraction_distance(const std::vector<std::size_t>& block_of, std::size_t A, double bound,
                                   const std::vector<double>& w, const std::vector<double>& target) {
    const std::size_t B = *std::max_element(block_of.begin(), block_of.end()) + 1;
    double total = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t a = 0; a < A; ++a) {
            const auto cost = [&](double v) {
                double s = 0.0;
                for (std::size_t x = 0; x < block_of.size(); ++x) {
                    if (block_of[x] == b) s += w[x * A + a] * (v - target[x * A + a]) * (v - target[x * A + a]);
                }
                return s;
            };
            double lo = 0.0, hi = bound;
            const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
            for (int it = 0; it < 200; ++it) {
                const double m1 = hi - phi * (hi - lo);
                const double m2 = lo + phi * (hi - lo);
                if (cost(m1) <= cost(m2)) hi = m2; else lo = m1;
            }
            total += cost(0.5 * (lo + hi));
        }
    }
    return total;
}

/// Monte-Carlo rollouts of a (possibly stochastic) policy.
struct RolloutStats {
    double mean_return = 0.0;
    double stderr_return = 0.0;
    std::vector<std::vector<double>> visits;  // [h][x*A+a] frequencies
};

inline std::size_t draw(std::mt19937_64& gen, const double* p, std::size_t n) {
    const double u = unit(gen);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    for (std::size_t i = n; i-- > 0;) {
        if (p[i] > 0.0) return i;
    }
    return n - 1;
}

inline RolloutStats rollouts(const modbe::TabularMdp& mdp, const modbe::Policy& pi, std::size_t count,
                             std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    RolloutStats out;
    out.visits.assign(mdp.horizon(), std::vector<double>(S * A, 0.0));
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> probs(A);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t x = draw(gen, mdp.initial_dist().data(), S);
        double ret = 0.0;
        for (std::size_t h = 0; h < mdp.horizon(); ++h) {
            for (std::size_t a = 0; a < A; ++a) probs[a] = pi.prob(h, x, a);
            const std::size_t a = draw(gen, probs.data(), A);
            out.visits[h][x * A + a] += 1.0;
            ret += mdp.reward(x, a);
            x = draw(gen, mdp.next_state_dist(h, x, a).data(), S);
        }
        sum += ret;
        sum_sq += ret * ret;
    }
    const double n = static_cast<double>(count);
    out.mean_return = sum / n;
    out.stderr_return = std::sqrt(std::max(0.0, sum_sq / n - out.mean_return * out.mean_return) / n);
    for (auto& step : out.visits) {
        for (auto& v : step) v /= n;
    }
    return out;
}

}  // namespace oracle
