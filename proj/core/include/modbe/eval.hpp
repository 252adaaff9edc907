#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "modbe/base_algorithm.hpp"
#include "modbe/function_class.hpp"
#include "modbe/mdp.hpp"
#include "modbe/selection.hpp"

namespace modbe {

/// Completeness error of `cls` under mu:
///   max_h max_{f'} min_{f in F} ||f - T*_h f'||^2_{mu_h}
/// where f' ranges over members whose values are valid step-(h+1) values,
/// i.e. lie in [0, H-h] (1-based h); only f' == 0 at the last step.
/// std::nullopt when the class cannot be enumerated exactly (linear classes,
/// abstractions with more than kMaxVertexBlocks blocks).
std::optional<double> approx_error(const FunctionClass& cls, const TabularMdp& mdp, const DataDistribution& mu);

/// Global completeness error xi_k: outer max over F_M, inner min over F_k (k 0-based).
std::optional<double> global_xi(const NestedSequence& classes, std::size_t k, const TabularMdp& mdp,
                                const DataDistribution& mu);

inline constexpr std::size_t kMaxVertexBlocks = 16;
/// Classes whose Approx is at most this are reported as complete.
inline constexpr double kCompletenessTolerance = 1e-12;

struct MethodRegret {
    std::string method;
    std::size_t selected_k = 0;
    double regret = 0.0;
};

struct DiagnosticReport {
    std::vector<std::optional<double>> approx;
    std::vector<std::optional<double>> xi;
    /// Regret of greedy(fqi_oracle(F_k)): the population limit of FQI on class k.
    std::vector<double> population_regret;
    std::optional<std::size_t> k_star;  ///< 1-based; unset if no class is certifiably complete
    double concentrability = 0.0;
    std::vector<MethodRegret> methods;
};

DiagnosticReport diagnose(const TabularMdp& mdp, const NestedSequence& classes, const DataDistribution& mu);
void write_report(std::ostream& out, const DiagnosticReport& report);

struct BaselineResult {
    std::size_t selected = 0;  ///< 1-based
    QSequence f;
    std::vector<double> scores;  ///< per-class criterion the selector minimized
};

/// base(F_k) on the training half for every k.
std::vector<QSequence> fit_all(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                               double delta);

/// argmin_k sum_h L~(f^k_h, f^k_{h+1}) on the validation half; ties to the smallest k.
BaselineResult holdout_select(const PreparedSplit& split, std::span<const QSequence> fits);
BaselineResult holdout_select(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                              std::uint64_t seed, double delta);

/// argmin_k regret(greedy(f^k)) under the true MDP; ties to the smallest k.
BaselineResult oracle_select(std::span<const QSequence> fits, const TabularMdp& mdp);
BaselineResult oracle_select(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                             const TabularMdp& mdp, std::uint64_t seed, double delta);

/// Discounted hold-out score L~(f, f): mean (f_raw(x, a) - r - gamma clip(max f(x')))^2 on validation.
double holdout_score_discounted(const QFunction& f, const FlatProblem& problem, double gamma);

}  // namespace modbe
