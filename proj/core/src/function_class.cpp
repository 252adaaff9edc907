#include "modbe/function_class.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>

#include "modbe/error.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

// Declared quantization of abstraction members for complexity accounting.
constexpr double kAbstractionQuantum = 1.0 / 16.0;

void check_bound(double value_bound) {
    if (!(value_bound > 0.0)) throw InputError("value bound must be positive");
}

}  // namespace

std::string to_string(ClassKind kind) {
    switch (kind) {
        case ClassKind::finite: return "finite";
        case ClassKind::abstraction: return "abstraction";
        case ClassKind::linear: return "linear";
    }
    return "unknown";
}

TableFeatureMap::TableFeatureMap(std::size_t num_states, std::size_t num_actions, std::size_t dimension,
                                 std::vector<double> rows)
    : num_states_(num_states), num_actions_(num_actions), dimension_(dimension), rows_(std::move(rows)) {
    if (dimension_ == 0) throw InputError("feature dimension must be positive");
    if (rows_.size() != num_states_ * num_actions_ * dimension_) throw InputError("feature table must have S*A*D entries");
}

void TableFeatureMap::features(std::size_t x, std::size_t a, std::span<double> out) const {
    const double* row = rows_.data() + (x * num_actions_ + a) * dimension_;
    std::copy(row, row + out.size(), out.begin());
}

// ---------------------------------------------------------------------------
// QFunction

QFunction QFunction::zero(std::size_t num_actions, double value_bound) {
    QFunction f;
    f.kind_ = ClassKind::abstraction;
    f.num_actions_ = num_actions;
    f.value_bound_ = value_bound;
    f.block_of_ = nullptr;
    f.block_values_.assign(num_actions, 0.0);
    return f;
}

QFunction QFunction::table(StateActionTable values, double value_bound) {
    QFunction f;
    f.kind_ = ClassKind::finite;
    f.num_actions_ = values.num_actions();
    f.value_bound_ = value_bound;
    f.table_ = std::make_shared<const std::vector<double>>(values.values().begin(), values.values().end());
    return f;
}

double QFunction::raw(std::size_t x, std::size_t a) const {
    switch (kind_) {
        case ClassKind::finite: return (*table_)[x * num_actions_ + a];
        case ClassKind::abstraction: {
            const std::size_t block = block_of_ ? (*block_of_)[x] : 0;
            return block_values_[block * num_actions_ + a];
        }
        case ClassKind::linear: {
            thread_local std::vector<double> phi;
            phi.resize(weights_.size());
            feature_map_->features(x, a, phi);
            double v = 0.0;
            for (std::size_t j = 0; j < phi.size(); ++j) v += weights_[j] * phi[j];
            return v;
        }
    }
    return 0.0;
}

double QFunction::state_value(std::size_t x) const {
    double best = (*this)(x, 0);
    for (std::size_t a = 1; a < num_actions_; ++a) best = std::max(best, (*this)(x, a));
    return best;
}

std::size_t QFunction::greedy_action(std::size_t x) const {
    std::size_t best = 0;
    double best_value = (*this)(x, 0);
    for (std::size_t a = 1; a < num_actions_; ++a) {
        const double v = (*this)(x, a);
        if (v > best_value) {
            best = a;
            best_value = v;
        }
    }
    return best;
}

StateActionTable tabulate(const QFunction& f, std::size_t num_states) {
    StateActionTable t(num_states, f.num_actions());
    for (std::size_t x = 0; x < num_states; ++x) {
        for (std::size_t a = 0; a < f.num_actions(); ++a) t(x, a) = f(x, a);
    }
    return t;
}

// ---------------------------------------------------------------------------
// FunctionClass

FunctionClass FunctionClass::finite(std::vector<StateActionTable> members, double value_bound) {
    check_bound(value_bound);
    if (members.empty()) throw InputError("finite class needs at least one member");
    const std::size_t S = members.front().num_states();
    const std::size_t A = members.front().num_actions();
    bool has_zero = false;
    auto values = std::make_shared<std::vector<std::shared_ptr<const std::vector<double>>>>();
    for (const auto& m : members) {
        if (m.num_states() != S || m.num_actions() != A) throw InputError("finite class members differ in shape");
        bool zero = true;
        for (const double v : m.values()) {
            if (!(v >= 0.0 && v <= value_bound)) throw InputError("finite class member outside [0, H]");
            zero = zero && v == 0.0;
        }
        has_zero = has_zero || zero;
        values->push_back(std::make_shared<const std::vector<double>>(m.values().begin(), m.values().end()));
    }
    if (!has_zero) throw InputError("finite class must contain the zero function");
    FunctionClass cls;
    cls.kind_ = ClassKind::finite;
    cls.value_bound_ = value_bound;
    cls.num_actions_ = A;
    cls.complexity_ = std::log(static_cast<double>(members.size()));
    cls.members_ = std::make_shared<const std::vector<StateActionTable>>(std::move(members));
    cls.member_values_ = std::move(values);
    return cls;
}

FunctionClass FunctionClass::abstraction(std::vector<std::size_t> block_of, std::size_t num_actions,
                                         double value_bound) {
    check_bound(value_bound);
    if (block_of.empty() || num_actions == 0) throw InputError("abstraction needs states and actions");
    const std::size_t blocks = *std::max_element(block_of.begin(), block_of.end()) + 1;
    std::vector<bool> used(blocks, false);
    for (const auto b : block_of) used[b] = true;
    if (std::find(used.begin(), used.end(), false) != used.end()) {
        throw InputError("abstraction block ids must be contiguous from 0");
    }
    FunctionClass cls;
    cls.kind_ = ClassKind::abstraction;
    cls.value_bound_ = value_bound;
    cls.num_actions_ = num_actions;
    cls.num_blocks_ = blocks;
    cls.complexity_ = static_cast<double>(blocks * num_actions) * std::log(1.0 / kAbstractionQuantum);
    cls.block_of_ = std::make_shared<const std::vector<std::size_t>>(std::move(block_of));
    return cls;
}

FunctionClass FunctionClass::linear(std::shared_ptr<const FeatureMap> features, std::size_t dimension,
                                    std::size_t num_actions, double value_bound, double ridge) {
    if (!(value_bound > 0.0)) throw InputError("value bound must be positive");
    if (!features) throw InputError("linear class needs a feature map");
    if (dimension == 0 || dimension > features->dimension()) {
        throw InputError("linear class dimension must be in [1, feature dimension]");
    }
    FunctionClass cls;
    cls.kind_ = ClassKind::linear;
    cls.value_bound_ = value_bound;
    cls.num_actions_ = num_actions;
    cls.feature_map_ = std::move(features);
    cls.dimension_ = dimension;
    cls.ridge_ = ridge;
    cls.complexity_ = static_cast<double>(dimension);
    return cls;
}

std::size_t FunctionClass::num_states() const noexcept {
    switch (kind_) {
        case ClassKind::finite: return members_->front().num_states();
        case ClassKind::abstraction: return block_of_->size();
        case ClassKind::linear: {
            const auto* table = dynamic_cast<const TableFeatureMap*>(feature_map_.get());
            return table ? table->num_states() : 0;
        }
    }
    return 0;
}

QFunction FunctionClass::member(std::size_t i) const {
    if (kind_ != ClassKind::finite || i >= size()) throw InputError("member index out of range");
    QFunction f;
    f.kind_ = ClassKind::finite;
    f.num_actions_ = num_actions_;
    f.value_bound_ = value_bound_;
    f.class_index_ = index_;
    f.member_index_ = i;
    f.table_ = (*member_values_)[i];
    return f;
}

QFunction FunctionClass::project(const StateActionTable& weights, const StateActionTable& values, bool clip) const {
    if (kind_ != ClassKind::abstraction) throw InputError("weighted projection is defined for abstraction classes");
    const std::size_t A = num_actions_;
    std::vector<double> mass(num_blocks_ * A, 0.0);
    std::vector<double> total(num_blocks_ * A, 0.0);
    for (std::size_t x = 0; x < block_of_->size(); ++x) {
        for (std::size_t a = 0; a < A; ++a) {
            const std::size_t cell = (*block_of_)[x] * A + a;
            mass[cell] += weights(x, a);
            total[cell] += weights(x, a) * values(x, a);
        }
    }
    QFunction f;
    f.kind_ = ClassKind::abstraction;
    f.num_actions_ = A;
    f.value_bound_ = clip ? value_bound_ : kInfinity;
    f.class_index_ = index_;
    f.block_of_ = block_of_;
    f.block_values_.resize(mass.size());
    for (std::size_t c = 0; c < mass.size(); ++c) {
        const double mean = mass[c] > 0.0 ? total[c] / mass[c] : 0.0;
        f.block_values_[c] = clip ? f.clip(mean) : mean;
    }
    return f;
}

QFunction FunctionClass::linear_member(std::vector<double> weights) const {
    if (kind_ != ClassKind::linear) throw InputError("linear_member needs a linear class");
    if (weights.size() != dimension_) throw InputError("weight vector does not match the class dimension");
    QFunction f;
    f.kind_ = ClassKind::linear;
    f.num_actions_ = num_actions_;
    f.value_bound_ = value_bound_;
    f.class_index_ = index_;
    f.feature_map_ = feature_map_;
    f.weights_ = std::move(weights);
    return f;
}

// ---------------------------------------------------------------------------
// RegressionDesign and ERM

RegressionDesign::RegressionDesign(std::vector<StateAction> inputs, std::size_t num_states, std::size_t num_actions,
                                   std::shared_ptr<const FeatureMap> features)
    : inputs_(std::move(inputs)), num_states_(num_states), num_actions_(num_actions), features_(std::move(features)) {
    for (const auto& in : inputs_) {
        if (in.a >= num_actions_ || (num_states_ > 0 && in.x >= num_states_)) {
            throw InputError("regression input out of domain");
        }
    }
    if (num_states_ > 0) {
        cell_counts_.assign(num_states_ * num_actions_, 0.0);
        for (const auto& in : inputs_) cell_counts_[in.x * num_actions_ + in.a] += 1.0;
    }
    if (features_) {
        const std::size_t d = features_->dimension();
        phi_.resize(static_cast<Eigen::Index>(inputs_.size()), static_cast<Eigen::Index>(d));
        std::vector<double> row(d);
        for (std::size_t i = 0; i < inputs_.size(); ++i) {
            features_->features(inputs_[i].x, inputs_[i].a, row);
            for (std::size_t j = 0; j < d; ++j) phi_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
        }
        gram_.noalias() = phi_.transpose() * phi_;
    }
}

bool RegressionDesign::has_features_for(const FunctionClass& cls) const noexcept {
    return features_ && cls.kind() == ClassKind::linear && cls.feature_map() == features_;
}

std::vector<double> RegressionDesign::predict_raw(const QFunction& f) const {
    std::vector<double> out(inputs_.size());
    if (f.kind() == ClassKind::linear && features_ && f.feature_map_ == features_) {
        const Eigen::Index d = static_cast<Eigen::Index>(f.weights_.size());
        const Eigen::Map<const Eigen::VectorXd> w(f.weights_.data(), d);
        Eigen::Map<Eigen::VectorXd> pred(out.data(), static_cast<Eigen::Index>(out.size()));
        pred.noalias() = phi_.leftCols(d) * w;
        return out;
    }
    for (std::size_t i = 0; i < inputs_.size(); ++i) out[i] = f.raw(inputs_[i].x, inputs_[i].a);
    return out;
}

namespace {

void check_targets(const RegressionDesign& design, std::span<const double> targets) {
    if (design.size() == 0) throw InputError("ERM needs at least one sample");
    if (targets.size() != design.size()) throw InputError("target count does not match the design");
}

}  // namespace

QFunction erm(const FunctionClass& cls, const RegressionDesign& design, std::span<const double> targets) {
    check_targets(design, targets);
    const std::size_t n = design.size();
    const std::size_t A = cls.num_actions();
    if (design.num_actions() != A) throw InputError("design and class disagree on the action count");

    switch (cls.kind()) {
        case ClassKind::finite: {
            if (design.num_states() != cls.num_states()) throw InputError("design and class disagree on S");
            // sum_i (m(c_i) - y_i)^2 = sum_c [count_c m_c^2 - 2 m_c sum_c] + sum_i y_i^2; the last term is shared.
            std::vector<double> sum_y(design.num_states() * A, 0.0);
            for (std::size_t i = 0; i < n; ++i) sum_y[design.inputs()[i].x * A + design.inputs()[i].a] += targets[i];
            const auto& counts = design.cell_counts();
            std::size_t best = 0;
            double best_loss = kInfinity;
            for (std::size_t m = 0; m < cls.size(); ++m) {
                const auto values = cls.member_table(m).values();
                double loss = 0.0;
                for (std::size_t c = 0; c < values.size(); ++c) {
                    if (counts[c] == 0.0) continue;
                    loss += counts[c] * values[c] * values[c] - 2.0 * values[c] * sum_y[c];
                }
                if (loss < best_loss) {
                    best_loss = loss;
                    best = m;
                }
            }
            return cls.member(best);
        }
        case ClassKind::abstraction: {
            if (design.num_states() != cls.num_states()) throw InputError("design and class disagree on S");
            const auto& block_of = cls.block_of();
            std::vector<double> count(cls.num_blocks() * A, 0.0);
            std::vector<double> total(cls.num_blocks() * A, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto& in = design.inputs()[i];
                const std::size_t cell = block_of[in.x] * A + in.a;
                count[cell] += 1.0;
                total[cell] += targets[i];
            }
            QFunction f;
            f.kind_ = ClassKind::abstraction;
            f.num_actions_ = A;
            f.value_bound_ = cls.value_bound();
            f.class_index_ = cls.index();
            f.block_of_ = cls.block_of_;
            f.block_values_.resize(count.size());
            for (std::size_t c = 0; c < count.size(); ++c) {
                f.block_values_[c] = f.clip(count[c] > 0.0 ? total[c] / count[c] : 0.0);
            }
            return f;
        }
        case ClassKind::linear: {
            const Eigen::Index d = static_cast<Eigen::Index>(cls.dimension());
            const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<Eigen::Index>(n));
            Eigen::MatrixXd gram;
            Eigen::VectorXd rhs;
            if (design.has_features_for(cls)) {
                gram = design.gram().topLeftCorner(d, d);
                rhs.noalias() = design.feature_matrix().leftCols(d).transpose() * y;
            } else {
                Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), d);
                std::vector<double> row(static_cast<std::size_t>(d));
                for (std::size_t i = 0; i < n; ++i) {
                    cls.feature_map()->features(design.inputs()[i].x, design.inputs()[i].a, row);
                    for (Eigen::Index j = 0; j < d; ++j) phi(static_cast<Eigen::Index>(i), j) = row[static_cast<std::size_t>(j)];
                }
                gram.noalias() = phi.transpose() * phi;
                rhs.noalias() = phi.transpose() * y;
            }
            const double lambda = cls.ridge(n);
            Eigen::VectorXd w;
            if (lambda > 0.0) {
                gram.diagonal().array() += lambda;
                w = gram.ldlt().solve(rhs);
            } else {
                w = gram.completeOrthogonalDecomposition().solve(rhs);
            }
            return cls.linear_member(std::vector<double>(w.data(), w.data() + w.size()));
        }
    }
    throw InputError("unknown class kind");
}

namespace {

RegressionDesign design_for(const FunctionClass& cls, std::span<const Sample> samples) {
    std::vector<StateAction> inputs;
    inputs.reserve(samples.size());
    for (const auto& s : samples) inputs.push_back(s.input);
    return RegressionDesign(std::move(inputs), cls.kind() == ClassKind::linear ? 0 : cls.num_states(),
                            cls.num_actions());
}

std::vector<double> targets_of(std::span<const Sample> samples) {
    std::vector<double> y;
    y.reserve(samples.size());
    for (const auto& s : samples) y.push_back(s.target);
    return y;
}

}  // namespace

QFunction erm(const FunctionClass& cls, std::span<const Sample> samples) {
    if (samples.empty()) throw InputError("ERM needs at least one sample");
    return erm(cls, design_for(cls, samples), targets_of(samples));
}

double empirical_sq_loss(const QFunction& f, std::span<const Sample> samples) {
    if (samples.empty()) throw InputError("empirical loss needs at least one sample");
    double total = 0.0;
    for (const auto& s : samples) {
        const double r = f.raw(s.input.x, s.input.a) - s.target;
        total += r * r;
    }
    return total / static_cast<double>(samples.size());
}

double empirical_sq_loss(const QFunction& f, const RegressionDesign& design, std::span<const double> targets) {
    check_targets(design, targets);
    const auto pred = design.predict_raw(f);
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double r = pred[i] - targets[i];
        total += r * r;
    }
    return total / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// NestedSequence

namespace {

bool block_constant(const StateActionTable& t, const std::vector<std::size_t>& block_of) {
    const std::size_t blocks = *std::max_element(block_of.begin(), block_of.end()) + 1;
    std::vector<std::size_t> representative(blocks, block_of.size());
    for (std::size_t x = 0; x < block_of.size(); ++x) {
        auto& rep = representative[block_of[x]];
        if (rep == block_of.size()) {
            rep = x;
            continue;
        }
        for (std::size_t a = 0; a < t.num_actions(); ++a) {
            if (t(x, a) != t(rep, a)) return false;
        }
    }
    return true;
}

void check_nested(const FunctionClass& small, const FunctionClass& large, std::size_t k) {
    const std::string where = "classes " + std::to_string(k) + " and " + std::to_string(k + 1);
    if (small.num_actions() != large.num_actions()) throw InputError(where + " differ in action count");
    if (small.value_bound() != large.value_bound()) throw InputError(where + " differ in value bound");
    if (large.complexity() < small.complexity()) throw InputError(where + ": complexity must be non-decreasing");
    using K = ClassKind;
    if (small.kind() == K::finite && large.kind() == K::finite) {
        if (small.size() > large.size()) throw InputError(where + ": finite class shrinks");
        for (std::size_t i = 0; i < small.size(); ++i) {
            if (!(small.member_table(i) == large.member_table(i))) {
                throw InputError(where + ": smaller finite class must be a prefix of the larger one");
            }
        }
        return;
    }
    if (small.kind() == K::finite && large.kind() == K::abstraction) {
        if (small.num_states() != large.num_states()) throw InputError(where + " differ in state count");
        for (std::size_t i = 0; i < small.size(); ++i) {
            if (!block_constant(small.member_table(i), large.block_of())) {
                throw InputError(where + ": finite member is not constant on the abstraction's blocks");
            }
        }
        return;
    }
    if (small.kind() == K::abstraction && large.kind() == K::abstraction) {
        if (small.num_states() != large.num_states()) throw InputError(where + " differ in state count");
        const auto& coarse = small.block_of();
        const auto& fine = large.block_of();
        std::vector<std::size_t> parent(large.num_blocks(), coarse.size());
        for (std::size_t x = 0; x < fine.size(); ++x) {
            auto& p = parent[fine[x]];
            if (p == coarse.size()) p = coarse[x];
            if (p != coarse[x]) throw InputError(where + ": partition does not refine its predecessor");
        }
        return;
    }
    if (small.kind() == K::linear && large.kind() == K::linear) {
        if (small.feature_map() != large.feature_map()) throw InputError(where + " use different feature maps");
        if (small.dimension() > large.dimension()) throw InputError(where + ": feature prefix shrinks");
        return;
    }
    throw InputError(where + ": cannot nest a " + to_string(small.kind()) + " class inside a " +
                     to_string(large.kind()) + " class");
}

}  // namespace

NestedSequence::NestedSequence(std::vector<FunctionClass> classes) : classes_(std::move(classes)) {
    if (classes_.empty()) throw InputError("nested sequence needs at least one class");
    num_actions_ = classes_.front().num_actions();
    num_states_ = classes_.front().num_states();
    for (std::size_t k = 0; k < classes_.size(); ++k) {
        classes_[k].set_index(k + 1);
        if (k > 0) check_nested(classes_[k - 1], classes_[k], k);
        num_states_ = std::max(num_states_, classes_[k].num_states());
    }
}

std::shared_ptr<const FeatureMap> NestedSequence::feature_map() const {
    for (const auto& c : classes_) {
        if (c.kind() == ClassKind::linear) return c.feature_map();
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// QSequence helpers

Policy greedy_policy(const QSequence& f, std::size_t num_states) {
    if (f.steps.empty()) throw InputError("greedy policy needs at least one step");
    const std::size_t A = f.steps.front().num_actions();
    std::vector<std::vector<std::size_t>> actions(f.horizon(), std::vector<std::size_t>(num_states));
    for (std::size_t h = 0; h < f.horizon(); ++h) {
        for (std::size_t x = 0; x < num_states; ++x) actions[h][x] = f.steps[h].greedy_action(x);
    }
    return Policy::deterministic(num_states, A, actions);
}

std::vector<StateActionTable> tabulate(const QSequence& f, std::size_t num_states) {
    std::vector<StateActionTable> out;
    out.reserve(f.horizon());
    for (const auto& step : f.steps) out.push_back(tabulate(step, num_states));
    return out;
}

QSequence table_sequence(std::span<const StateActionTable> tables, double value_bound) {
    QSequence seq;
    seq.algorithm = "table";
    for (const auto& t : tables) seq.steps.push_back(QFunction::table(t, value_bound));
    return seq;
}

// ---------------------------------------------------------------------------
// Class description files

NestedSequence read_classes(std::istream& in) {
    text::TokenReader reader(in);
    if (reader.next() != "modbe-classes") throw InputError("expected 'modbe-classes' header", reader.line());
    const auto expect = [&reader](const char* keyword) {
        const std::string tok = reader.next();
        if (tok != keyword) throw InputError(std::string("expected '") + keyword + "', got '" + tok + "'", reader.line());
    };
    expect("states");
    const std::size_t S = reader.next_index();
    expect("actions");
    const std::size_t A = reader.next_index();
    expect("horizon");
    const std::size_t H = reader.next_index();
    if (S == 0 || A == 0 || H == 0) throw InputError("states, actions and horizon must be positive", reader.line());
    const double bound = static_cast<double>(H);

    std::shared_ptr<const FeatureMap> features;
    std::vector<FunctionClass> classes;
    while (!reader.done()) {
        const std::string keyword = reader.next();
        const std::size_t line = reader.line();
        try {
            if (keyword == "features") {
                if (features) throw InputError("duplicate features section", line);
                const std::size_t D = reader.next_index();
                std::vector<double> rows(S * A * D);
                for (auto& v : rows) v = reader.next_double();
                features = std::make_shared<const TableFeatureMap>(S, A, D, std::move(rows));
            } else if (keyword == "class") {
                const std::string kind = reader.next();
                if (kind == "finite") {
                    const std::size_t m = reader.next_index();
                    if (m == 0) throw InputError("finite class needs at least one member", reader.line());
                    std::vector<StateActionTable> members;
                    for (std::size_t i = 0; i < m; ++i) {
                        std::vector<double> values(S * A);
                        for (auto& v : values) v = reader.next_double();
                        members.emplace_back(S, A, std::move(values));
                    }
                    classes.push_back(FunctionClass::finite(std::move(members), bound));
                } else if (kind == "abstraction") {
                    std::vector<std::size_t> block_of(S);
                    for (auto& b : block_of) b = reader.next_index();
                    classes.push_back(FunctionClass::abstraction(std::move(block_of), A, bound));
                } else if (kind == "linear") {
                    if (!features) throw InputError("linear class declared before a features section", reader.line());
                    const std::size_t d = reader.next_index();
                    double ridge = -1.0;
                    if (!reader.done() && reader.peek() == "ridge") {
                        reader.next();
                        ridge = reader.next_double();
                        if (ridge < 0.0) throw InputError("ridge must be non-negative", reader.line());
                    }
                    classes.push_back(FunctionClass::linear(features, d, A, bound, ridge));
                } else {
                    throw InputError("unknown class kind '" + kind + "'", reader.line());
                }
            } else {
                throw InputError("unexpected keyword '" + keyword + "'", line);
            }
        } catch (const InputError& e) {
            if (e.line() != 0) throw;
            throw InputError(e.what(), reader.line());
        }
    }
    try {
        return NestedSequence(std::move(classes));
    } catch (const InputError& e) {
        throw InputError(e.what(), reader.line());
    }
}

void write_classes(std::ostream& out, const NestedSequence& classes) {
    const std::size_t S = classes.num_states();
    const std::size_t A = classes.num_actions();
    out << "modbe-classes\n";
    out << "states " << S << " actions " << A << " horizon " << text::format_double(classes.value_bound()) << '\n';
    const auto row = [&out](std::span<const double> values) {
        for (std::size_t i = 0; i < values.size(); ++i) out << (i ? " " : "") << text::format_double(values[i]);
        out << '\n';
    };
    if (const auto fm = classes.feature_map()) {
        const auto* table = dynamic_cast<const TableFeatureMap*>(fm.get());
        if (!table) throw InputError("only table feature maps can be written");
        out << "features " << table->dimension() << '\n';
        for (std::size_t c = 0; c < S * A; ++c) row(table->rows().subspan(c * table->dimension(), table->dimension()));
    }
    for (const auto& cls : classes) {
        switch (cls.kind()) {
            case ClassKind::finite:
                out << "class finite " << cls.size() << '\n';
                for (std::size_t i = 0; i < cls.size(); ++i) row(cls.member_table(i).values());
                break;
            case ClassKind::abstraction:
                out << "class abstraction";
                for (const auto b : cls.block_of()) out << ' ' << b;
                out << '\n';
                break;
            case ClassKind::linear:
                out << "class linear " << cls.dimension();
                if (cls.ridge_setting() >= 0.0) out << " ridge " << text::format_double(cls.ridge_setting());
                out << '\n';
                break;
        }
    }
}

NestedSequence load_classes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open class file " + path.string());
    return read_classes(in);
}

}  // namespace modbe
