#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modbe/base_algorithm.hpp"
#include "modbe/dataset.hpp"
#include "modbe/function_class.hpp"

namespace modbe {

enum class ToleranceMode { theoretical, practical, fixed };

std::string to_string(ToleranceMode mode);
ToleranceMode parse_tolerance_mode(std::string_view name);

/// zeta = 96 H^2 ln(16 M^2 H / delta) / n_valid.
double zeta(std::size_t horizon, std::size_t num_classes, double delta, std::size_t n_valid);

/// Tolerances for the generalization test between classes k < k' (0-based).
///   theoretical: Tol(k, k') = 2 alpha(k') + 2 zeta + omega_{n_train, delta/4M}(F_k), with
///                alpha(k') = max{omega_{n_train, delta/4M}(F_k'), 200 H^2 ln(8 M^2 H |F_k'| / delta) / n_train}
///   practical:   Tol(k, k') = complexity(F_k') / n
///   fixed:       a constant (degenerate schedules for testing)
class ToleranceSchedule {
public:
    static ToleranceSchedule theoretical(const NestedSequence& classes, const BaseAlgorithm& base,
                                         std::size_t horizon, double delta, std::size_t n_train,
                                         std::size_t n_valid);
    static ToleranceSchedule practical(const NestedSequence& classes, std::size_t n);
    static ToleranceSchedule fixed(double tolerance);

    ToleranceMode mode() const noexcept { return mode_; }
    double zeta() const noexcept { return zeta_; }
    double omega(std::size_t k) const { return omega_.at(k); }
    double alpha(std::size_t k_prime) const { return alpha_.at(k_prime); }
    double tol(std::size_t k, std::size_t k_prime) const;

private:
    ToleranceMode mode_ = ToleranceMode::fixed;
    double zeta_ = 0.0;
    double fixed_ = 0.0;
    std::size_t n_ = 0;
    std::vector<double> omega_;
    std::vector<double> alpha_;
    std::vector<double> complexity_;
};

enum class TestOutcome { keep, reject };

/// Reject class k iff loss_g < loss_f - tol (strict).
TestOutcome generalization_test(double loss_g, double loss_f, double tol);

/// One generalization-test comparison. Indices are 1-based as reported.
struct TestEvent {
    std::size_t k = 0;
    std::size_t k_prime = 0;
    std::size_t h = 0;
    double loss_g = 0.0;
    double loss_f = 0.0;
    double tol = 0.0;
    TestOutcome outcome = TestOutcome::keep;

    friend bool operator==(const TestEvent&, const TestEvent&) = default;
};

struct SelectionTrace {
    std::size_t selected = 0;  ///< k-hat, 1-based
    QSequence final_f;
    std::optional<Policy> policy;  ///< set when the state space is finite
    std::vector<TestEvent> events;
    std::vector<std::size_t> visited;  ///< classes the base algorithm ran on, in order (1-based)
    std::size_t erm_calls = 0;
    std::size_t base_calls = 0;
    std::uint64_t seed = 0;
    ToleranceMode mode = ToleranceMode::practical;
    double delta = 0.0;
    std::size_t n = 0;
    std::size_t n_train = 0;
    std::size_t n_valid = 0;
};

/// One event per line (`event k k' h loss_g loss_f tol outcome`), then a
/// summary block. Doubles use shortest round-trip form, so equal traces
/// serialize to identical bytes.
void write_trace(std::ostream& out, const SelectionTrace& trace);

struct SelectionOptions {
    double delta = 0.1;
    ToleranceMode schedule = ToleranceMode::practical;
    double fixed_tolerance = 0.0;
    std::uint64_t seed = 0;
};

/// Train/validation halves with cached regression designs.
struct PreparedSplit {
    PreparedDataset train;
    PreparedDataset valid;
    std::uint64_t seed = 0;
    std::size_t n = 0;
};

PreparedSplit prepare_split(const OfflineDataset& dataset, const NestedSequence& classes, std::uint64_t seed);

/// g_h = erm(F_k', {(x, a) -> r + max_a' f_next(x', a')}) on the training slot h.
QFunction regress_to_targets(const FunctionClass& cls, const PreparedDataset& train, std::size_t h,
                             const QFunction* f_next);

/// (1/n_valid) sum (f_raw(x, a) - r - max_a' f_next(x', a'))^2 over validation slot h.
double validation_loss(const QFunction& f, const QFunction* f_next, const PreparedDataset& valid, std::size_t h);

ToleranceSchedule make_schedule(const SelectionOptions& options, const NestedSequence& classes,
                                const BaseAlgorithm& base, std::size_t horizon, std::size_t n);

/// Model selection via Bellman error over a nested sequence.
SelectionTrace modbe(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                     const SelectionOptions& options);
SelectionTrace modbe(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                     const SelectionOptions& options);
/// Same loop with an explicit schedule (used for degenerate tolerances).
SelectionTrace modbe(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                     const ToleranceSchedule& schedule, const SelectionOptions& options);

/// Step-free data split 80/20 with cached designs.
struct FlatProblem {
    std::vector<Transition> train;
    std::vector<Transition> valid;
    RegressionDesign train_design;
    RegressionDesign valid_design;
    std::uint64_t seed = 0;
    std::size_t n = 0;
};

FlatProblem prepare_flat(std::span<const Transition> data, std::size_t num_states, std::size_t num_actions,
                         std::shared_ptr<const FeatureMap> features, std::uint64_t seed);

struct DiscountedOptions {
    SelectionOptions selection;
    double gamma = 0.99;
    std::size_t iterations = 50;
};

/// Discounted variant: base is fitted_q_discounted; at class k every k' >= k
/// regresses onto r + gamma f^k(x'), and k is rejected when some k' > k beats
/// the same-class regression g^k by more than Tol on validation data.
SelectionTrace modbe_discounted(const FlatProblem& problem, const NestedSequence& classes,
                                const DiscountedOptions& options);
SelectionTrace modbe_discounted(const FlatProblem& problem, const NestedSequence& classes,
                                const ToleranceSchedule& schedule, const DiscountedOptions& options);

/// Validation loss on flat data: mean (g_raw(x, a) - r - gamma clip(max f(x')))^2.
double validation_loss_discounted(const QFunction& g, std::span<const double> targets, const RegressionDesign& valid);

}  // namespace modbe
