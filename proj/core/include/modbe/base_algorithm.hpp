#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "modbe/dataset.hpp"
#include "modbe/function_class.hpp"
#include "modbe/mdp.hpp"

namespace modbe {

/// A dataset with one cached regression design per step, so a slot can be
/// regressed onto many target vectors (different classes, different f_{h+1}).
class PreparedDataset {
public:
    PreparedDataset(OfflineDataset data, std::size_t num_states, std::size_t num_actions,
                    std::shared_ptr<const FeatureMap> features = nullptr);

    const OfflineDataset& data() const noexcept { return data_; }
    const RegressionDesign& design(std::size_t h) const { return designs_[h]; }
    std::size_t horizon() const noexcept { return data_.horizon(); }
    std::size_t per_step() const noexcept { return data_.per_step(); }
    std::size_t num_states() const noexcept { return num_states_; }

    /// y_i = r_i + max_a f_{h+1}(x'_i, a), with f clipped and f_{H+1} == 0.
    std::vector<double> targets(std::size_t h, const QSequence& f) const;
    /// Same, with the continuation taken from an explicit next-step function.
    std::vector<double> targets(std::size_t h, const QFunction* next) const;

private:
    OfflineDataset data_;
    std::size_t num_states_;
    std::vector<RegressionDesign> designs_;
};

/// Base offline RL algorithm: (training data, class, delta) -> f_1..f_H with
/// f_{H+1} == 0, together with its estimation-error function omega_{n,delta}(F).
class BaseAlgorithm {
public:
    virtual ~BaseAlgorithm() = default;
    virtual std::string name() const = 0;
    virtual QSequence fit(const PreparedDataset& train, const FunctionClass& cls, double delta) const = 0;
    virtual double omega(std::size_t n, double delta, const FunctionClass& cls, std::size_t horizon) const = 0;
};

/// Single backward pass of squared-loss regressions onto r + max_a f_{h+1}.
QSequence fqi(const PreparedDataset& train, const FunctionClass& cls);
QSequence fqi(const OfflineDataset& train, const FunctionClass& cls);

class FittedQIteration final : public BaseAlgorithm {
public:
    std::string name() const override { return "fqi"; }
    QSequence fit(const PreparedDataset& train, const FunctionClass& cls, double) const override {
        return fqi(train, cls);
    }
    double omega(std::size_t n, double delta, const FunctionClass& cls, std::size_t horizon) const override;
};

/// FQI with empirical means replaced by exact expectations under mu_h: each
/// f_h minimizes ||f - T*_h f_{h+1}||^2_{mu_h} over the class.
QSequence fqi_oracle(const TabularMdp& mdp, const DataDistribution& mu, const FunctionClass& cls);

/// 200 H^2 ln(16 H |F| / delta) / n. Linear classes use d + ln(16 H / delta)
/// in place of ln(16 H |F| / delta); abstractions use their complexity as ln|F|.
/// Requires n >= 1 and 0 < delta <= 1/e.
double omega_fqi(std::size_t n, double delta, const FunctionClass& cls, std::size_t horizon);
double omega_fqi(std::size_t n, double delta, double log_class_size, std::size_t horizon);

/// Throws InputError unless 0 < delta <= 1/e.
void check_delta(double delta);

/// Discounted fitted Q iteration on a step-free transition list: starting from
/// f == 0, repeat f <- erm(class, r + gamma * max_a' f(x', a')) with f clipped
/// to [0, 1/(1-gamma)] inside the targets.
QFunction fitted_q_discounted(const RegressionDesign& design, std::span<const Transition> data,
                              const FunctionClass& cls, double gamma, std::size_t iterations);
QFunction fitted_q_discounted(std::span<const Transition> data, const FunctionClass& cls, double gamma,
                              std::size_t iterations);

/// r_i + gamma * clip(max_a' next(x'_i, a')) with the clip at 1/(1-gamma).
std::vector<double> discounted_targets(std::span<const Transition> data, const QFunction* next, double gamma);

}  // namespace modbe
