#include "modbe/selection.hpp"

#include <cmath>
#include <ostream>

#include "modbe/error.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

double log_size(const FunctionClass& cls) {
    return cls.kind() == ClassKind::finite ? std::log(static_cast<double>(cls.size())) : cls.complexity();
}

std::vector<StateAction> inputs_of(std::span<const Transition> data) {
    std::vector<StateAction> inputs;
    inputs.reserve(data.size());
    for (const auto& t : data) inputs.push_back({t.x, t.a});
    return inputs;
}

double mean_sq(std::span<const double> pred, std::span<const double> targets) {
    if (targets.empty()) throw InputError("validation loss needs a nonempty validation set");
    double s = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = pred[i] - targets[i];
        s += d * d;
    }
    return s / static_cast<double>(targets.size());
}

std::shared_ptr<const FeatureMap> design_features(const NestedSequence& classes) {
    for (const auto& cls : classes) {
        if (cls.kind() == ClassKind::linear) return cls.feature_map();
    }
    return nullptr;
}

void check_classes(const NestedSequence& classes) {
    if (classes.size() == 0) throw InputError("need at least one function class");
}

}  // namespace

std::string to_string(ToleranceMode mode) {
    switch (mode) {
        case ToleranceMode::theoretical: return "theoretical";
        case ToleranceMode::practical: return "practical";
        case ToleranceMode::fixed: return "fixed";
    }
    return "unknown";
}

ToleranceMode parse_tolerance_mode(std::string_view name) {
    if (name == "theoretical") return ToleranceMode::theoretical;
    if (name == "practical") return ToleranceMode::practical;
    if (name == "fixed") return ToleranceMode::fixed;
    throw InputError("unknown schedule '" + std::string(name) + "' (expected theoretical or practical)");
}

double zeta(std::size_t horizon, std::size_t num_classes, double delta, std::size_t n_valid) {
    check_delta(delta);
    if (n_valid == 0) throw InputError("zeta needs n_valid >= 1");
    const double H = static_cast<double>(horizon);
    const double M = static_cast<double>(num_classes);
    return 96.0 * H * H * std::log(16.0 * M * M * H / delta) / static_cast<double>(n_valid);
}

ToleranceSchedule ToleranceSchedule::theoretical(const NestedSequence& classes, const BaseAlgorithm& base,
                                                 std::size_t horizon, double delta, std::size_t n_train,
                                                 std::size_t n_valid) {
    check_classes(classes);
    if (n_train == 0) throw InputError("tolerance needs n_train >= 1");
    ToleranceSchedule s;
    s.mode_ = ToleranceMode::theoretical;
    const std::size_t M = classes.size();
    const double Md = static_cast<double>(M);
    const double H = static_cast<double>(horizon);
    s.zeta_ = modbe::zeta(horizon, M, delta, n_valid);
    const double omega_delta = delta / (4.0 * Md);
    for (const auto& cls : classes) {
        const double w = base.omega(n_train, omega_delta, cls, horizon);
        const double explicit_term =
            200.0 * H * H * (std::log(8.0 * Md * Md * H / delta) + log_size(cls)) / static_cast<double>(n_train);
        s.omega_.push_back(w);
        s.alpha_.push_back(std::max(w, explicit_term));
        s.complexity_.push_back(cls.complexity());
    }
    return s;
}

ToleranceSchedule ToleranceSchedule::practical(const NestedSequence& classes, std::size_t n) {
    check_classes(classes);
    if (n == 0) throw InputError("tolerance needs n >= 1");
    ToleranceSchedule s;
    s.mode_ = ToleranceMode::practical;
    s.n_ = n;
    for (const auto& cls : classes) s.complexity_.push_back(cls.complexity());
    return s;
}

ToleranceSchedule ToleranceSchedule::fixed(double tolerance) {
    if (std::isnan(tolerance) || tolerance < 0.0) throw InputError("fixed tolerance must be >= 0");
    ToleranceSchedule s;
    s.mode_ = ToleranceMode::fixed;
    s.fixed_ = tolerance;
    return s;
}

double ToleranceSchedule::tol(std::size_t k, std::size_t k_prime) const {
    switch (mode_) {
        case ToleranceMode::theoretical: return 2.0 * alpha_.at(k_prime) + 2.0 * zeta_ + omega_.at(k);
        case ToleranceMode::practical: return complexity_.at(k_prime) / static_cast<double>(n_);
        case ToleranceMode::fixed: return fixed_;
    }
    return fixed_;
}

TestOutcome generalization_test(double loss_g, double loss_f, double tol) {
    return loss_g < loss_f - tol ? TestOutcome::reject : TestOutcome::keep;
}

void write_trace(std::ostream& out, const SelectionTrace& trace) {
    using text::format_double;
    out << "# modbe trace\n";
    out << "# event k k' h loss_g loss_f tol outcome\n";
    for (const auto& e : trace.events) {
        out << "event " << e.k << ' ' << e.k_prime << ' ' << e.h << ' ' << format_double(e.loss_g) << ' '
            << format_double(e.loss_f) << ' ' << format_double(e.tol) << ' '
            << (e.outcome == TestOutcome::reject ? "reject" : "keep") << '\n';
    }
    out << "summary\n";
    out << "selected_k " << trace.selected << '\n';
    out << "visited";
    for (auto k : trace.visited) out << ' ' << k;
    out << '\n';
    out << "base_calls " << trace.base_calls << '\n';
    out << "erm_calls " << trace.erm_calls << '\n';
    out << "events " << trace.events.size() << '\n';
    out << "seed " << trace.seed << '\n';
    out << "schedule " << to_string(trace.mode) << '\n';
    out << "delta " << format_double(trace.delta) << '\n';
    out << "n " << trace.n << " n_train " << trace.n_train << " n_valid " << trace.n_valid << '\n';
    if (trace.policy) {
        const Policy& pi = *trace.policy;
        for (std::size_t h = 0; h < pi.horizon(); ++h) {
            out << "policy h=" << h + 1;
            for (std::size_t x = 0; x < pi.num_states(); ++x) out << ' ' << pi.mode(h, x);
            out << '\n';
        }
    }
}

PreparedSplit prepare_split(const OfflineDataset& dataset, const NestedSequence& classes, std::uint64_t seed) {
    check_classes(classes);
    DataSplit parts = split(dataset, seed);
    const auto features = design_features(classes);
    return {PreparedDataset(std::move(parts.train), classes.num_states(), classes.num_actions(), features),
            PreparedDataset(std::move(parts.valid), classes.num_states(), classes.num_actions(), features), seed,
            dataset.per_step()};
}

QFunction regress_to_targets(const FunctionClass& cls, const PreparedDataset& train, std::size_t h,
                             const QFunction* f_next) {
    if (train.per_step() == 0) throw InputError("training slot is empty");
    return erm(cls, train.design(h), train.targets(h, f_next));
}

double validation_loss(const QFunction& f, const QFunction* f_next, const PreparedDataset& valid, std::size_t h) {
    const auto y = valid.targets(h, f_next);
    return mean_sq(valid.design(h).predict_raw(f), y);
}

ToleranceSchedule make_schedule(const SelectionOptions& options, const NestedSequence& classes,
                                const BaseAlgorithm& base, std::size_t horizon, std::size_t n) {
    switch (options.schedule) {
        case ToleranceMode::theoretical:
            return ToleranceSchedule::theoretical(classes, base, horizon, options.delta, train_size(n), valid_size(n));
        case ToleranceMode::practical: return ToleranceSchedule::practical(classes, n);
        case ToleranceMode::fixed: return ToleranceSchedule::fixed(options.fixed_tolerance);
    }
    throw InputError("unknown schedule");
}

SelectionTrace modbe(const OfflineDataset& dataset, const BaseAlgorithm& base, const NestedSequence& classes,
                     const SelectionOptions& options) {
    check_delta(options.delta);
    return modbe(prepare_split(dataset, classes, options.seed), base, classes, options);
}

SelectionTrace modbe(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                     const SelectionOptions& options) {
    check_delta(options.delta);
    const auto schedule = make_schedule(options, classes, base, split.train.horizon(), split.n);
    return modbe(split, base, classes, schedule, options);
}

SelectionTrace modbe(const PreparedSplit& split, const BaseAlgorithm& base, const NestedSequence& classes,
                     const ToleranceSchedule& schedule, const SelectionOptions& options) {
    check_classes(classes);
    const std::size_t M = classes.size();
    const std::size_t H = split.train.horizon();
    SelectionTrace trace;
    trace.seed = options.seed;
    trace.mode = schedule.mode();
    trace.delta = options.delta;
    trace.n = split.n;
    trace.n_train = split.train.per_step();
    trace.n_valid = split.valid.per_step();

    auto run_base = [&](std::size_t k) {
        ++trace.base_calls;
        trace.visited.push_back(k + 1);
        return base.fit(split.train, classes[k], options.delta);
    };

    std::size_t k = 0;
    QSequence f;
    bool accepted = false;
    while (k + 1 < M && !accepted) {
        f = run_base(k);
        // L~(f_h, f_{h+1}) does not depend on k'.
        std::vector<double> loss_f(H);
        for (std::size_t h = 0; h < H; ++h) {
            loss_f[h] = validation_loss(f[h], h + 1 < H ? &f[h + 1] : nullptr, split.valid, h);
        }
        bool rejected = false;
        for (std::size_t kp = k + 1; kp < M && !rejected; ++kp) {
            const double tol = schedule.tol(k, kp);
            for (std::size_t h = 0; h < H; ++h) {
                const QFunction* next = h + 1 < H ? &f[h + 1] : nullptr;
                const QFunction g = regress_to_targets(classes[kp], split.train, h, next);
                ++trace.erm_calls;
                const double loss_g = validation_loss(g, next, split.valid, h);
                const TestOutcome outcome = generalization_test(loss_g, loss_f[h], tol);
                trace.events.push_back({k + 1, kp + 1, h + 1, loss_g, loss_f[h], tol, outcome});
                rejected = rejected || outcome == TestOutcome::reject;
            }
        }
        if (rejected) {
            ++k;
        } else {
            accepted = true;
        }
    }
    if (!accepted) f = run_base(k);  // k == M - 1: the largest class is never tested against anything

    trace.selected = k + 1;
    if (classes.num_states() > 0) trace.policy = greedy_policy(f, classes.num_states());
    trace.final_f = std::move(f);
    return trace;
}

FlatProblem prepare_flat(std::span<const Transition> data, std::size_t num_states, std::size_t num_actions,
                         std::shared_ptr<const FeatureMap> features, std::uint64_t seed) {
    FlatSplit parts = split_flat(data, seed);
    RegressionDesign train_design(inputs_of(parts.train), num_states, num_actions, features);
    RegressionDesign valid_design(inputs_of(parts.valid), num_states, num_actions, features);
    return {std::move(parts.train), std::move(parts.valid), std::move(train_design), std::move(valid_design), seed,
            data.size()};
}

double validation_loss_discounted(const QFunction& g, std::span<const double> targets, const RegressionDesign& valid) {
    return mean_sq(valid.predict_raw(g), targets);
}

SelectionTrace modbe_discounted(const FlatProblem& problem, const NestedSequence& classes,
                                const DiscountedOptions& options) {
    check_classes(classes);
    const auto& sel = options.selection;
    switch (sel.schedule) {
        case ToleranceMode::practical:
            return modbe_discounted(problem, classes, ToleranceSchedule::practical(classes, problem.n), options);
        case ToleranceMode::fixed:
            return modbe_discounted(problem, classes, ToleranceSchedule::fixed(sel.fixed_tolerance), options);
        case ToleranceMode::theoretical: {
            // Effective horizon 1/(1 - gamma) stands in for H.
            const auto horizon = static_cast<std::size_t>(std::ceil(1.0 / (1.0 - options.gamma)));
            const FittedQIteration fqi_base;
            return modbe_discounted(problem, classes,
                                    ToleranceSchedule::theoretical(classes, fqi_base, horizon, sel.delta,
                                                                   problem.train.size(), problem.valid.size()),
                                    options);
        }
    }
    throw InputError("unknown schedule");
}

SelectionTrace modbe_discounted(const FlatProblem& problem, const NestedSequence& classes,
                                const ToleranceSchedule& schedule, const DiscountedOptions& options) {
    check_classes(classes);
    if (!(options.gamma >= 0.0 && options.gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
    const std::size_t M = classes.size();
    SelectionTrace trace;
    trace.seed = options.selection.seed;
    trace.mode = schedule.mode();
    trace.delta = options.selection.delta;
    trace.n = problem.n;
    trace.n_train = problem.train.size();
    trace.n_valid = problem.valid.size();

    auto run_base = [&](std::size_t k) {
        ++trace.base_calls;
        trace.visited.push_back(k + 1);
        return fitted_q_discounted(problem.train_design, problem.train, classes[k], options.gamma,
                                   options.iterations);
    };

    std::size_t k = 0;
    QFunction f = QFunction::zero(classes.num_actions(), classes.value_bound());
    bool accepted = false;
    while (k + 1 < M && !accepted) {
        f = run_base(k);
        const auto y_train = discounted_targets(problem.train, &f, options.gamma);
        const auto y_valid = discounted_targets(problem.valid, &f, options.gamma);
        const QFunction g_k = erm(classes[k], problem.train_design, y_train);
        ++trace.erm_calls;
        const double loss_k = validation_loss_discounted(g_k, y_valid, problem.valid_design);
        bool rejected = false;
        for (std::size_t kp = k + 1; kp < M && !rejected; ++kp) {
            const QFunction g = erm(classes[kp], problem.train_design, y_train);
            ++trace.erm_calls;
            const double loss_g = validation_loss_discounted(g, y_valid, problem.valid_design);
            const double tol = schedule.tol(k, kp);
            const TestOutcome outcome = generalization_test(loss_g, loss_k, tol);
            trace.events.push_back({k + 1, kp + 1, 1, loss_g, loss_k, tol, outcome});
            rejected = outcome == TestOutcome::reject;
        }
        if (rejected) {
            ++k;
        } else {
            accepted = true;
        }
    }
    if (!accepted) f = run_base(k);

    trace.selected = k + 1;
    trace.final_f.steps = {f};
    trace.final_f.class_index = k + 1;
    trace.final_f.algorithm = "fitted-q-discounted";
    if (classes.num_states() > 0) trace.policy = greedy_policy(trace.final_f, classes.num_states());
    return trace;
}

}  // namespace modbe
