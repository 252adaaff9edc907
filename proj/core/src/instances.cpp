#include "modbe/instances.hpp"

#include <algorithm>
#include <cmath>

#include "modbe/error.hpp"
#include "modbe/rng.hpp"

namespace modbe {
namespace {

std::vector<double> one_hot(std::size_t n, std::size_t i) {
    std::vector<double> v(n, 0.0);
    v[i] = 1.0;
    return v;
}

}  // namespace

TabularInstance chain4_instance() {
    constexpr std::size_t S = 4, A = 2, H = 3;
    std::vector<double> step(S * A * S, 0.0);
    auto row = [&](std::size_t x, std::size_t a) { return step.begin() + static_cast<std::ptrdiff_t>((x * A + a) * S); };
    for (std::size_t x = 0; x < S; ++x) {
        const std::size_t left = x == 0 ? 0 : x - 1;
        const std::size_t right = std::min(x + 1, S - 1);
        row(x, 0)[static_cast<std::ptrdiff_t>(left)] += 0.6;
        row(x, 0)[static_cast<std::ptrdiff_t>(x)] += 0.4;
        row(x, 1)[static_cast<std::ptrdiff_t>(right)] += 0.9;
        row(x, 1)[static_cast<std::ptrdiff_t>(x)] += 0.1;
    }
    // r(x, left), r(x, right)
    std::vector<double> rewards{0.0, 0.0, 1.0, 1.0, 0.75, 0.75, 1.0, 1.0};
    TabularMdp mdp(S, A, H, {0.25, 0.25, 0.25, 0.25}, std::vector<std::vector<double>>(H, step), std::move(rewards));
    const double bound = static_cast<double>(H);
    NestedSequence classes({FunctionClass::abstraction({0, 0, 0, 0}, A, bound),
                            FunctionClass::abstraction({0, 1, 1, 1}, A, bound),
                            FunctionClass::abstraction({0, 1, 2, 3}, A, bound)});
    auto mu = DataDistribution::uniform(mdp);
    return {"chain4", std::move(mdp), std::move(classes), std::move(mu)};
}

TabularInstance never_overshoot_instance() {
    constexpr std::size_t S = 2, A = 2, H = 2;
    // Every (x, a) moves to z = 1.
    const std::vector<double> step{0, 1, 0, 1, 0, 1, 0, 1};
    TabularMdp mdp(S, A, H, {1.0, 0.0}, std::vector<std::vector<double>>(H, step), {0.5, 1.0, 0.0, 0.0});
    const double bound = static_cast<double>(H);
    const StateActionTable zero(S, A, 0.0);
    const StateActionTable g(S, A, {0.5, 1.0, 0.0, 0.0});
    std::vector<StateActionTable> big{zero, g};
    const std::vector<std::vector<double>> extra{{1.0, 1.0, 0.0, 0.0}, {0.5, 1.0, 0.5, 0.5}, {2.0, 0.0, 0.0, 0.0},
                                                 {0.25, 1.5, 0.0, 0.25}, {1.0, 0.5, 1.0, 1.0}, {0.0, 0.0, 0.75, 0.0}};
    for (const auto& v : extra) big.emplace_back(S, A, v);
    NestedSequence classes({FunctionClass::finite({zero}, bound), FunctionClass::finite({zero, g}, bound),
                            FunctionClass::finite(big, bound)});
    auto mu = DataDistribution::uniform(mdp);
    return {"never-overshoot", std::move(mdp), std::move(classes), std::move(mu)};
}

TabularInstance variance_bias_instance() {
    constexpr std::size_t S = 3, A = 2, H = 2;
    std::vector<double> first(S * A * S, 0.0);
    std::vector<double> second(S * A * S, 0.0);
    for (std::size_t x = 0; x < S; ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            first[(x * A + a) * S + 1] = 0.5;
            first[(x * A + a) * S + 2] = 0.5;
            second[(x * A + a) * S + x] = 1.0;
        }
    }
    TabularMdp mdp(S, A, H, one_hot(S, 0), {first, second}, {0.0, 0.0, 1.0, 1.0, 0.0, 0.0});
    const double bound = static_cast<double>(H);
    NestedSequence classes({FunctionClass::abstraction({0, 1, 1}, A, bound),
                            FunctionClass::abstraction({0, 1, 2}, A, bound)});
    DataDistribution mu;
    mu.steps.emplace_back(S, A, std::vector<double>{0.5, 0.5, 0.0, 0.0, 0.0, 0.0});
    mu.steps.emplace_back(S, A, std::vector<double>{0.0, 0.0, 0.05, 0.05, 0.45, 0.45});
    return {"variance-bias", std::move(mdp), std::move(classes), std::move(mu)};
}

std::vector<std::string> tabular_instance_names() { return {"chain4", "never-overshoot", "variance-bias"}; }

TabularInstance tabular_instance(std::string_view name) {
    if (name == "chain4") return chain4_instance();
    if (name == "never-overshoot") return never_overshoot_instance();
    if (name == "variance-bias") return variance_bias_instance();
    throw InputError("unknown instance '" + std::string(name) + "'");
}

CBFeatureMap::CBFeatureMap(std::size_t dimension, std::size_t actions, std::uint64_t instance_seed)
    : dimension_(dimension), actions_(actions), instance_seed_(instance_seed), scales_(dimension * actions) {
    for (std::size_t a = 0; a < actions; ++a) {
        auto rng = CounterRng::keyed(instance_seed, 0x5ca1eULL, a);
        for (std::size_t j = 0; j < dimension; ++j) scales_[a * dimension + j] = 0.5 + rng.uniform();
    }
}

void CBFeatureMap::features(std::size_t x, std::size_t a, std::span<double> out) const {
    if (a >= actions_ || out.size() > dimension_) throw InputError("feature request outside the map");
    auto rng = CounterRng::keyed(instance_seed_, x, a);
    const double* scale = scales_.data() + a * dimension_;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = scale[j] * rng.normal();
}

CBInstance::CBInstance(CBSpec spec)
    : spec_(std::move(spec)),
      theta_(spec_.dimension, 0.0),
      features_(std::make_shared<CBFeatureMap>(spec_.dimension, spec_.actions, spec_.instance_seed)) {
    if (spec_.active == 0 || spec_.active > spec_.dimension) throw InputError("active dimension out of range");
    if (spec_.actions < 2) throw InputError("a bandit needs at least two actions");
    if (spec_.class_dims.empty()) throw InputError("need at least one truncation class");
    if (!std::is_sorted(spec_.class_dims.begin(), spec_.class_dims.end()) || spec_.class_dims.front() == 0 ||
        spec_.class_dims.back() > spec_.dimension) {
        throw InputError("truncation dimensions must be increasing and within the ambient dimension");
    }
    if (!(spec_.noise >= 0.0)) throw InputError("noise must be >= 0");
    // Equal magnitudes with random signs, so every active coordinate carries signal.
    auto rng = CounterRng::keyed(spec_.instance_seed, 0x7e7aULL);
    const double magnitude = spec_.theta_norm / std::sqrt(static_cast<double>(spec_.active));
    for (std::size_t j = 0; j < spec_.active; ++j) theta_[j] = rng.below(2) ? magnitude : -magnitude;
}

double CBInstance::mean_reward(std::size_t context, std::size_t action) const {
    std::vector<double> phi(spec_.active);
    features_->features(context, action, phi);
    double s = 0.0;
    for (std::size_t j = 0; j < spec_.active; ++j) s += theta_[j] * phi[j];
    return s;
}

NestedSequence CBInstance::classes() const {
    std::vector<FunctionClass> out;
    for (auto d : spec_.class_dims) out.push_back(FunctionClass::linear(features_, d, spec_.actions, kInfinity));
    return NestedSequence(std::move(out));
}

std::vector<Transition> CBInstance::sample(std::size_t n, std::uint64_t seed) const {
    std::vector<Transition> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = CounterRng::keyed(seed, 0xcbULL, i);
        const auto context = static_cast<std::size_t>(derive_key(seed, 0xc0ULL, i));
        const auto a = static_cast<std::size_t>(rng.below(spec_.actions));
        const double r = mean_reward(context, a) + spec_.noise * rng.normal();
        out.push_back({0, context, a, r, 0});
    }
    return out;
}

CBInstance::Evaluation CBInstance::evaluate(std::span<const QFunction> fs, std::size_t contexts,
                                            std::uint64_t seed) const {
    if (contexts == 0) throw InputError("need at least one evaluation context");
    std::size_t width = spec_.active;
    for (const auto& f : fs) {
        if (f.kind() != ClassKind::linear) throw InputError("bandit evaluation needs linear members");
        width = std::max(width, f.weights().size());
    }
    const std::size_t A = spec_.actions;
    std::vector<double> phi(A * width);
    std::vector<double> truth(A);
    std::vector<double> sum(fs.size(), 0.0);
    std::vector<double> sum_sq(fs.size(), 0.0);
    for (std::size_t j = 0; j < contexts; ++j) {
        const auto context = static_cast<std::size_t>(derive_key(seed, 0xe7a1ULL, j));
        for (std::size_t a = 0; a < A; ++a) {
            std::span<double> row(phi.data() + a * width, width);
            features_->features(context, a, row);
            double s = 0.0;
            for (std::size_t c = 0; c < spec_.active; ++c) s += theta_[c] * row[c];
            truth[a] = s;
        }
        const double best = *std::max_element(truth.begin(), truth.end());
        for (std::size_t m = 0; m < fs.size(); ++m) {
            const auto w = fs[m].weights();
            std::size_t choice = 0;
            double top = -kInfinity;
            for (std::size_t a = 0; a < A; ++a) {
                double s = 0.0;
                for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * phi[a * width + c];
                if (s > top) {
                    top = s;
                    choice = a;
                }
            }
            const double loss = best - truth[choice];
            sum[m] += loss;
            sum_sq[m] += loss * loss;
        }
    }
    Evaluation out;
    const double n = static_cast<double>(contexts);
    for (std::size_t m = 0; m < fs.size(); ++m) {
        const double mean = sum[m] / n;
        const double var = contexts > 1 ? std::max(0.0, (sum_sq[m] - n * mean * mean) / (n - 1.0)) : 0.0;
        out.regret.push_back(mean);
        out.standard_error.push_back(std::sqrt(var / n));
    }
    return out;
}

}  // namespace modbe
