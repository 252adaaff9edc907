#include "modbe/base_algorithm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modbe/error.hpp"

namespace modbe {
namespace {

std::vector<StateAction> inputs_of(std::span<const Transition> slot) {
    std::vector<StateAction> inputs;
    inputs.reserve(slot.size());
    for (const auto& t : slot) inputs.push_back({t.x, t.a});
    return inputs;
}

}  // namespace

PreparedDataset::PreparedDataset(OfflineDataset data, std::size_t num_states, std::size_t num_actions,
                                 std::shared_ptr<const FeatureMap> features)
    : data_(std::move(data)), num_states_(num_states) {
    if (num_states > 0) data_.check_domain(num_states, num_actions);
    designs_.reserve(data_.horizon());
    for (std::size_t h = 0; h < data_.horizon(); ++h) {
        designs_.emplace_back(inputs_of(data_.slot(h)), num_states, num_actions, features);
    }
}

std::vector<double> PreparedDataset::targets(std::size_t h, const QSequence& f) const {
    return targets(h, h + 1 < f.horizon() ? &f[h + 1] : nullptr);
}

std::vector<double> PreparedDataset::targets(std::size_t h, const QFunction* next) const {
    const auto slot = data_.slot(h);
    std::vector<double> y(slot.size());
    if (next == nullptr) {
        for (std::size_t i = 0; i < slot.size(); ++i) y[i] = slot[i].r;
        return y;
    }
    // Cache max_a f(x', a) per next state when the state space is finite.
    std::vector<double> cache;
    std::vector<bool> cached;
    if (num_states_ > 0) {
        cache.assign(num_states_, 0.0);
        cached.assign(num_states_, false);
    }
    for (std::size_t i = 0; i < slot.size(); ++i) {
        const std::size_t xn = slot[i].x_next;
        double v;
        if (num_states_ > 0) {
            if (!cached[xn]) {
                cache[xn] = next->state_value(xn);
                cached[xn] = true;
            }
            v = cache[xn];
        } else {
            v = next->state_value(xn);
        }
        y[i] = slot[i].r + v;
    }
    return y;
}

QSequence fqi(const PreparedDataset& train, const FunctionClass& cls) {
    const std::size_t H = train.horizon();
    QSequence out;
    out.steps.resize(H, QFunction::zero(cls.num_actions(), cls.value_bound()));
    out.class_index = cls.index();
    out.algorithm = "fqi";
    for (std::size_t h = H; h-- > 0;) {
        const auto y = train.targets(h, h + 1 < H ? &out.steps[h + 1] : nullptr);
        out.steps[h] = erm(cls, train.design(h), y);
    }
    return out;
}

QSequence fqi(const OfflineDataset& train, const FunctionClass& cls) {
    return fqi(PreparedDataset(train, cls.num_states(), cls.num_actions(),
                               cls.kind() == ClassKind::linear ? cls.feature_map() : nullptr),
               cls);
}

double FittedQIteration::omega(std::size_t n, double delta, const FunctionClass& cls, std::size_t horizon) const {
    return omega_fqi(n, delta, cls, horizon);
}

QSequence fqi_oracle(const TabularMdp& mdp, const DataDistribution& mu, const FunctionClass& cls) {
    mu.validate(mdp);
    const std::size_t S = mdp.num_states();
    const std::size_t A = mdp.num_actions();
    const std::size_t H = mdp.horizon();
    if (cls.num_actions() != A) throw InputError("class and MDP disagree on the action count");
    if (cls.kind() != ClassKind::linear && cls.num_states() != S) {
        throw InputError("class and MDP disagree on the state count");
    }
    QSequence out;
    out.steps.resize(H, QFunction::zero(A, cls.value_bound()));
    out.class_index = cls.index();
    out.algorithm = "fqi-oracle";
    StateActionTable next;
    for (std::size_t h = H; h-- > 0;) {
        const StateActionTable target = bellman_backup(mdp, h, next);
        const StateActionTable& weight = mu.steps[h];
        switch (cls.kind()) {
            case ClassKind::finite: {
                std::size_t best = 0;
                double best_loss = kInfinity;
                for (std::size_t m = 0; m < cls.size(); ++m) {
                    const auto& member = cls.member_table(m);
                    double loss = 0.0;
                    for (std::size_t c = 0; c < S * A; ++c) {
                        const double d = member.values()[c] - target.values()[c];
                        loss += weight.values()[c] * d * d;
                    }
                    if (loss < best_loss) {
                        best_loss = loss;
                        best = m;
                    }
                }
                out.steps[h] = cls.member(best);
                break;
            }
            case ClassKind::abstraction: out.steps[h] = cls.project(weight, target); break;
            case ClassKind::linear: {
                // Population normal equations, rows weighted by mu_h(x, a).
                std::vector<StateAction> inputs;
                std::vector<double> y;
                std::vector<double> w;
                for (std::size_t x = 0; x < S; ++x) {
                    for (std::size_t a = 0; a < A; ++a) {
                        if (weight(x, a) == 0.0) continue;
                        inputs.push_back({x, a});
                        y.push_back(target(x, a));
                        w.push_back(weight(x, a));
                    }
                }
                const Eigen::Index d = static_cast<Eigen::Index>(cls.dimension());
                Eigen::MatrixXd phi(static_cast<Eigen::Index>(inputs.size()), d);
                std::vector<double> row(cls.dimension());
                for (std::size_t i = 0; i < inputs.size(); ++i) {
                    cls.feature_map()->features(inputs[i].x, inputs[i].a, row);
                    const double s = std::sqrt(w[i]);
                    for (Eigen::Index j = 0; j < d; ++j) phi(static_cast<Eigen::Index>(i), j) = s * row[static_cast<std::size_t>(j)];
                    y[i] *= s;
                }
                const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
                const Eigen::VectorXd weights = phi.completeOrthogonalDecomposition().solve(yv);
                out.steps[h] = cls.linear_member(std::vector<double>(weights.data(), weights.data() + weights.size()));
                break;
            }
        }
        next = tabulate(out.steps[h], S);
    }
    return out;
}

void check_delta(double delta) {
    if (!(delta > 0.0 && delta <= 1.0 / std::numbers::e)) throw InputError("delta must lie in (0, 1/e]");
}

double omega_fqi(std::size_t n, double delta, double log_class_size, std::size_t horizon) {
    if (n == 0) throw InputError("omega needs n >= 1");
    check_delta(delta);
    const double H = static_cast<double>(horizon);
    return 200.0 * H * H * (log_class_size + std::log(16.0 * H / delta)) / static_cast<double>(n);
}

double omega_fqi(std::size_t n, double delta, const FunctionClass& cls, std::size_t horizon) {
    if (cls.kind() == ClassKind::finite) {
        if (n == 0) throw InputError("omega needs n >= 1");
        check_delta(delta);
        const double H = static_cast<double>(horizon);
        return 200.0 * H * H * std::log(16.0 * H * static_cast<double>(cls.size()) / delta) / static_cast<double>(n);
    }
    return omega_fqi(n, delta, cls.complexity(), horizon);
}

std::vector<double> discounted_targets(std::span<const Transition> data, const QFunction* next, double gamma) {
    std::vector<double> y(data.size());
    const double cap = 1.0 / (1.0 - gamma);
    for (std::size_t i = 0; i < data.size(); ++i) {
        double cont = 0.0;
        if (next != nullptr && gamma != 0.0) {
            cont = std::clamp(next->raw(data[i].x_next, 0), 0.0, cap);
            for (std::size_t a = 1; a < next->num_actions(); ++a) {
                cont = std::max(cont, std::clamp(next->raw(data[i].x_next, a), 0.0, cap));
            }
        }
        y[i] = data[i].r + gamma * cont;
    }
    return y;
}

QFunction fitted_q_discounted(const RegressionDesign& design, std::span<const Transition> data,
                              const FunctionClass& cls, double gamma, std::size_t iterations) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
    if (iterations == 0) throw InputError("iterations must be at least 1");
    if (design.size() != data.size()) throw InputError("design does not match the data");
    QFunction f = QFunction::zero(cls.num_actions(), cls.value_bound());
    for (std::size_t it = 0; it < iterations; ++it) {
        f = erm(cls, design, discounted_targets(data, it == 0 ? nullptr : &f, gamma));
        if (gamma == 0.0) break;
    }
    return f;
}

QFunction fitted_q_discounted(std::span<const Transition> data, const FunctionClass& cls, double gamma,
                              std::size_t iterations) {
    std::vector<StateAction> inputs;
    inputs.reserve(data.size());
    for (const auto& t : data) inputs.push_back({t.x, t.a});
    const RegressionDesign design(std::move(inputs), cls.kind() == ClassKind::linear ? 0 : cls.num_states(),
                                  cls.num_actions(), cls.kind() == ClassKind::linear ? cls.feature_map() : nullptr);
    return fitted_q_discounted(design, data, cls, gamma, iterations);
}

}  // namespace modbe
