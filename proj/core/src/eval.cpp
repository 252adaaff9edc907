#include "modbe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "modbe/error.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

double weighted_distance(const StateActionTable& w, const StateActionTable& f, const StateActionTable& t) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.values().size(); ++c) {
        const double d = f.values()[c] - t.values()[c];
        s += w.values()[c] * d * d;
    }
    return s;
}

/// min over f in cls of ||f - target||^2_w; nullopt for linear classes.
std::optional<double> inner_min(const FunctionClass& cls, const StateActionTable& w, const StateActionTable& target) {
    switch (cls.kind()) {
        case ClassKind::finite: {
            double best = kInfinity;
            for (std::size_t m = 0; m < cls.size(); ++m) {
                best = std::min(best, weighted_distance(w, cls.member_table(m), target));
            }
            return best;
        }
        case ClassKind::abstraction:
            return weighted_distance(w, tabulate(cls.project(w, target), target.num_states()), target);
        case ClassKind::linear: return std::nullopt;
    }
    return std::nullopt;
}

/// Candidate continuation tables (all actions equal to u(x') = max_a f'(x', a))
/// for the outer max at step h; nullopt if not enumerable.
std::optional<std::vector<StateActionTable>> outer_candidates(const FunctionClass& outer, const FunctionClass& inner,
                                                              std::size_t S, std::size_t A, double cap) {
    std::vector<StateActionTable> out;
    switch (outer.kind()) {
        case ClassKind::finite:
            for (std::size_t m = 0; m < outer.size(); ++m) {
                const auto& t = outer.member_table(m);
                bool valid = true;
                StateActionTable next(S, A);
                for (std::size_t x = 0; x < S && valid; ++x) {
                    const double u = t.max_over_actions(x);
                    valid = u <= cap;
                    for (std::size_t a = 0; a < A; ++a) next(x, a) = u;
                }
                if (valid) out.push_back(std::move(next));
            }
            return out;
        case ClassKind::abstraction: {
            // Vertex enumeration is exact only for a convex inner class.
            if (inner.kind() != ClassKind::abstraction) return std::nullopt;
            const std::size_t B = outer.num_blocks();
            if (B > kMaxVertexBlocks) return std::nullopt;
            const double top = std::min(std::floor(cap), outer.value_bound());
            const std::size_t count = top > 0.0 ? (std::size_t{1} << B) : 1;
            for (std::size_t mask = 0; mask < count; ++mask) {
                StateActionTable next(S, A);
                for (std::size_t x = 0; x < S; ++x) {
                    const double u = (mask >> outer.block_of()[x]) & 1U ? top : 0.0;
                    for (std::size_t a = 0; a < A; ++a) next(x, a) = u;
                }
                out.push_back(std::move(next));
            }
            return out;
        }
        case ClassKind::linear: return std::nullopt;
    }
    return std::nullopt;
}

std::optional<double> completeness_error(const FunctionClass& outer, const FunctionClass& inner,
                                         const TabularMdp& mdp, const DataDistribution& mu) {
    mu.validate(mdp);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const std::size_t H = mdp.horizon();
    if (inner.kind() == ClassKind::linear || outer.kind() == ClassKind::linear) return std::nullopt;
    if (inner.num_states() != S || outer.num_states() != S || inner.num_actions() != A) {
        throw InputError("class and MDP disagree on the state-action space");
    }
    double worst = 0.0;
    for (std::size_t h = 0; h < H; ++h) {
        const double cap = static_cast<double>(H - h - 1) + 1e-12;
        const auto candidates = outer_candidates(outer, inner, S, A, cap);
        if (!candidates) return std::nullopt;
        for (const auto& next : *candidates) {
            const auto target = bellman_backup(mdp, h, next);
            const auto m = inner_min(inner, mu.steps[h], target);
            if (!m) return std::nullopt;
            worst = std::max(worst, *m);
        }
    }
    return worst;
}

std::string maybe(const std::optional<double>& v) { return v ? text::format_double(*v) : "n/a"; }

}  // namespace

std::optional<double> approx_error(const FunctionClass& cls, const TabularMdp& mdp, const DataDistribution& mu) {
    return completeness_error(cls, cls, mdp, mu);
}

std::optional<double> global_xi(const NestedSequence& classes, std::size_t k, const TabularMdp& mdp,
                                const DataDistribution& mu) {
    if (k >= classes.size()) throw InputError("class index out of range");
    return completeness_error(classes[classes.size() - 1], classes[k], mdp, mu);
}

DiagnosticReport diagnose(const TabularMdp& mdp, const NestedSequence& classes, const DataDistribution& mu) {
    DiagnosticReport report;
    report.concentrability = concentrability(mdp, mu);
    for (std::size_t k = 0; k < classes.size(); ++k) {
        report.approx.push_back(approx_error(classes[k], mdp, mu));
        report.xi.push_back(global_xi(classes, k, mdp, mu));
        const auto f = fqi_oracle(mdp, mu, classes[k]);
        report.population_regret.push_back(regret(mdp, greedy_policy(f, mdp.num_states())));
        if (!report.k_star && report.approx.back() && *report.approx.back() <= kCompletenessTolerance) {
            report.k_star = k + 1;
        }
    }
    return report;
}

void write_report(std::ostream& out, const DiagnosticReport& report) {
    out << "concentrability " << text::format_double(report.concentrability) << '\n';
    out << "k_star " << (report.k_star ? std::to_string(*report.k_star) : std::string("none")) << '\n';
    out << std::left << std::setw(4) << "k" << std::setw(24) << "approx" << std::setw(24) << "xi"
        << "population_regret\n";
    for (std::size_t k = 0; k < report.approx.size(); ++k) {
        out << std::setw(4) << k + 1 << std::setw(24) << maybe(report.approx[k]) << std::setw(24)
            << maybe(report.xi[k]) << text::format_double(report.population_regret[k]) << '\n';
    }
    if (!report.methods.empty()) {
        out << std::setw(12) << "method" << std::setw(6) << "k" << "regret\n";
        for (const auto& m : report.methods) {
            out << std::setw(12) << m.method << std::setw(6) << m.selected_k << text::format_double(m.regret) << '\n';
        }
    }
}

std::vector<QSequence> fit_all(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                               double delta) {
    std::vector<QSequence> fits;
    fits.reserve(classes.size());
    for (const auto& cls : classes) fits.push_back(base.fit(split.train, cls, delta));
    return fits;
}

BaselineResult holdout_select(const PreparedSplit& split, std::span<const QSequence> fits) {
    if (fits.empty()) throw InputError("need at least one function class");
    BaselineResult result;
    std::size_t best = 0;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        const auto& f = fits[k];
        double score = 0.0;
        for (std::size_t h = 0; h < f.horizon(); ++h) {
            score += validation_loss(f[h], h + 1 < f.horizon() ? &f[h + 1] : nullptr, split.valid, h);
        }
        result.scores.push_back(score);
        if (score < result.scores[best]) best = k;
    }
    result.selected = best + 1;
    result.f = fits[best];
    return result;
}

BaselineResult holdout_select(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                              std::uint64_t seed, double delta) {
    const auto split = prepare_split(dataset, classes, seed);
    return holdout_select(split, fit_all(split, base, classes, delta));
}

BaselineResult oracle_select(std::span<const QSequence> fits, const TabularMdp& mdp) {
    if (fits.empty()) throw InputError("need at least one function class");
    BaselineResult result;
    std::size_t best = 0;
    for (std::size_t k = 0; k < fits.size(); ++k) {
        result.scores.push_back(regret(mdp, greedy_policy(fits[k], mdp.num_states())));
        if (result.scores[k] < result.scores[best]) best = k;
    }
    result.selected = best + 1;
    result.f = fits[best];
    return result;
}

BaselineResult oracle_select(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                             const TabularMdp& mdp, std::uint64_t seed, double delta) {
    const auto split = prepare_split(dataset, classes, seed);
    return oracle_select(fit_all(split, base, classes, delta), mdp);
}

double holdout_score_discounted(const QFunction& f, const FlatProblem& problem, double gamma) {
    return validation_loss_discounted(f, discounted_targets(problem.valid, &f, gamma), problem.valid_design);
}

}  // namespace modbe
