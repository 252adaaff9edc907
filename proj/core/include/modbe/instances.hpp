#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modbe/dataset.hpp"
#include "modbe/function_class.hpp"
#include "modbe/mdp.hpp"

namespace modbe {

/// A tabular benchmark: MDP, nested classes and the data distribution.
struct TabularInstance {
    std::string name;
    TabularMdp mdp;
    NestedSequence classes;
    DataDistribution mu;
};

/// 4-state stochastic chain, H = 3, two actions: left moves down w.p. 0.6,
/// right moves up w.p. 0.9, otherwise stay. State rewards (0, 1, 0.75, 1).
/// Classes are nested abstractions: one block, {0}{1,2,3}, identity. Uniform mu.
TabularInstance chain4_instance();

/// States {s, z}; every transition lands in the absorbing z with zero reward.
/// F_1 = {0}, F_2 = {0, r on s} (complete), F_3 = F_2 plus six more tables.
/// H = 2.
TabularInstance never_overshoot_instance();

/// H = 2. From s0 either action moves to s1 or s2 with probability 1/2;
/// r(s1, .) = 1, every other reward 0. mu_2 puts 10% of its mass on s1.
/// F_1 merges {s1, s2} and has the higher Bellman error, but its targets at
/// step 1 are nearly constant, so hold-out prefers it. F_2 is tabular.
TabularInstance variance_bias_instance();

std::vector<std::string> tabular_instance_names();
/// Throws InputError for unknown names.
TabularInstance tabular_instance(std::string_view name);

struct CBSpec {
    std::size_t dimension = 200;
    std::size_t active = 30;
    std::size_t actions = 10;
    std::vector<std::size_t> class_dims{15, 20, 25, 28, 29, 30, 50, 75, 100, 200};
    double theta_norm = 1.0;
    double noise = 0.5;
    std::uint64_t instance_seed = 20220101;
};

/// Gaussian action features phi_a(x) with a per-(action, coordinate) scale in
/// [0.5, 1.5]. Contexts are 64-bit ids; coordinates are drawn in order from a
/// stream keyed by (instance seed, context, action), so every prefix of the
/// feature vector is the same regardless of how many coordinates are asked for.
class CBFeatureMap final : public FeatureMap {
public:
    CBFeatureMap(std::size_t dimension, std::size_t actions, std::uint64_t instance_seed);

    std::size_t dimension() const override { return dimension_; }
    void features(std::size_t x, std::size_t a, std::span<double> out) const override;

private:
    std::size_t dimension_;
    std::size_t actions_;
    std::uint64_t instance_seed_;
    std::vector<double> scales_;
};

/// Linear contextual bandit: mean reward <theta*, phi_a(x)> with theta* zero
/// beyond the first `active` coordinates; observed reward adds N(0, noise^2).
class CBInstance {
public:
    explicit CBInstance(CBSpec spec = {});

    const CBSpec& spec() const noexcept { return spec_; }
    std::span<const double> theta() const noexcept { return theta_; }
    const std::shared_ptr<const CBFeatureMap>& features() const noexcept { return features_; }
    double mean_reward(std::size_t context, std::size_t action) const;

    /// Unclipped ridge classes over the coordinate prefixes in class_dims.
    NestedSequence classes() const;

    /// n logged rounds under the uniform logging policy (H = 1, x_next = 0).
    std::vector<Transition> sample(std::size_t n, std::uint64_t seed) const;

    struct Evaluation {
        std::vector<double> regret;
        std::vector<double> standard_error;
    };
    /// Regret of the greedy policy of each linear member against the greedy
    /// policy on theta*, averaged over `contexts` fresh contexts of `seed`.
    Evaluation evaluate(std::span<const QFunction> fs, std::size_t contexts, std::uint64_t seed) const;

private:
    CBSpec spec_;
    std::vector<double> theta_;
    std::shared_ptr<const CBFeatureMap> features_;
};

}  // namespace modbe
