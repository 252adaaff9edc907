#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "modbe/mdp.hpp"

namespace modbe {

/// phi: (x, a) -> R^d. Implementations must be deterministic and must produce
/// the same leading coordinates regardless of how many are requested, so that
/// coordinate prefixes define nested linear classes.
class FeatureMap {
public:
    virtual ~FeatureMap() = default;
    virtual std::size_t dimension() const = 0;
    /// Writes the first out.size() coordinates of phi(x, a).
    virtual void features(std::size_t x, std::size_t a, std::span<double> out) const = 0;
};

/// Explicit feature rows for a finite (state, action) space.
class TableFeatureMap final : public FeatureMap {
public:
    TableFeatureMap(std::size_t num_states, std::size_t num_actions, std::size_t dimension, std::vector<double> rows);

    std::size_t dimension() const override { return dimension_; }
    void features(std::size_t x, std::size_t a, std::span<double> out) const override;

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::span<const double> rows() const noexcept { return rows_; }

private:
    std::size_t num_states_;
    std::size_t num_actions_;
    std::size_t dimension_;
    std::vector<double> rows_;
};

enum class ClassKind { finite, abstraction, linear };

std::string to_string(ClassKind kind);

struct StateAction {
    std::size_t x = 0;
    std::size_t a = 0;
    friend bool operator==(const StateAction&, const StateAction&) = default;
};

struct Sample {
    StateAction input;
    double target = 0.0;
};

class FunctionClass;
class RegressionDesign;

/// An evaluable member of a function class. Values are clipped to
/// [0, value_bound] by `operator()`; `raw` returns the unclipped prediction.
/// A bound of +inf disables clipping entirely.
class QFunction {
public:
    /// The zero function over `num_actions` actions.
    static QFunction zero(std::size_t num_actions, double value_bound);
    static QFunction table(StateActionTable values, double value_bound);

    double operator()(std::size_t x, std::size_t a) const { return clip(raw(x, a)); }
    double raw(std::size_t x, std::size_t a) const;
    /// max_a f(x, a) over clipped values.
    double state_value(std::size_t x) const;
    /// Greedy action, lowest index on ties (over clipped values).
    std::size_t greedy_action(std::size_t x) const;

    double clip(double v) const noexcept {
        if (!(value_bound_ < kInfinity)) return v;
        return v < 0.0 ? 0.0 : (v > value_bound_ ? value_bound_ : v);
    }

    ClassKind kind() const noexcept { return kind_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double value_bound() const noexcept { return value_bound_; }
    /// 1-based position of the originating class in its nested sequence (0 if none).
    std::size_t class_index() const noexcept { return class_index_; }
    /// Index of the member within a finite class; unused for other kinds.
    std::size_t member_index() const noexcept { return member_index_; }
    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const double> block_values() const noexcept { return block_values_; }

private:
    friend class FunctionClass;
    friend class RegressionDesign;
    friend QFunction erm(const FunctionClass&, const RegressionDesign&, std::span<const double>);
    QFunction() = default;

    ClassKind kind_ = ClassKind::finite;
    std::size_t num_actions_ = 0;
    double value_bound_ = kInfinity;
    std::size_t class_index_ = 0;
    std::size_t member_index_ = 0;
    std::shared_ptr<const std::vector<double>> table_;
    std::shared_ptr<const std::vector<std::size_t>> block_of_;
    std::vector<double> block_values_;
    std::shared_ptr<const FeatureMap> feature_map_;
    std::vector<double> weights_;
};

/// Clipped values of f on every (x, a) of a finite state space.
StateActionTable tabulate(const QFunction& f, std::size_t num_states);

/// One member of a nested sequence: a finite list of tables, a state
/// abstraction (all tables constant on blocks), or a linear class over a
/// coordinate prefix of a feature map.
class FunctionClass {
public:
    /// Members are S*A tables with entries in [0, value_bound]; must include the zero table.
    static FunctionClass finite(std::vector<StateActionTable> members, double value_bound);
    /// `block_of[x]` is the block of state x; blocks are numbered 0..B-1.
    static FunctionClass abstraction(std::vector<std::size_t> block_of, std::size_t num_actions, double value_bound);
    /// Ridge regression on phi's first `dimension` coordinates. A negative ridge
    /// selects the default 1e-6 * n.
    static FunctionClass linear(std::shared_ptr<const FeatureMap> features, std::size_t dimension,
                                std::size_t num_actions, double value_bound, double ridge = -1.0);

    ClassKind kind() const noexcept { return kind_; }
    /// log|F| for finite classes; blocks * A * ln(16) for abstractions; d for linear classes.
    double complexity() const noexcept { return complexity_; }
    double value_bound() const noexcept { return value_bound_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    std::size_t index() const noexcept { return index_; }

    std::size_t size() const noexcept { return members_ ? members_->size() : 0; }
    QFunction member(std::size_t i) const;
    const StateActionTable& member_table(std::size_t i) const { return (*members_)[i]; }

    std::size_t num_states() const noexcept;
    std::size_t num_blocks() const noexcept { return num_blocks_; }
    const std::vector<std::size_t>& block_of() const { return *block_of_; }

    const std::shared_ptr<const FeatureMap>& feature_map() const noexcept { return feature_map_; }
    std::size_t dimension() const noexcept { return dimension_; }
    double ridge(std::size_t n) const noexcept { return ridge_ < 0.0 ? 1e-6 * static_cast<double>(n) : ridge_; }
    double ridge_setting() const noexcept { return ridge_; }

    /// Per-block weighted projection helper used by the population solvers:
    /// given weights and values on (x, a), returns the member minimizing the
    /// weighted squared distance (raw block means, clipped unless `clip` is false).
    QFunction project(const StateActionTable& weights, const StateActionTable& values, bool clip = true) const;
    /// Member of a linear class with the given weights on the class's feature prefix.
    QFunction linear_member(std::vector<double> weights) const;

    void set_index(std::size_t index) noexcept { index_ = index; }

private:
    friend QFunction erm(const FunctionClass&, const RegressionDesign&, std::span<const double>);
    FunctionClass() = default;

    ClassKind kind_ = ClassKind::finite;
    double complexity_ = 0.0;
    double value_bound_ = kInfinity;
    std::size_t num_actions_ = 0;
    std::size_t index_ = 0;
    std::shared_ptr<const std::vector<StateActionTable>> members_;
    std::shared_ptr<const std::vector<std::shared_ptr<const std::vector<double>>>> member_values_;
    std::shared_ptr<const std::vector<std::size_t>> block_of_;
    std::size_t num_blocks_ = 0;
    std::shared_ptr<const FeatureMap> feature_map_;
    std::size_t dimension_ = 0;
    double ridge_ = -1.0;
};

/// Regression inputs (x_i, a_i) with sufficient statistics cached so the same
/// slot can be regressed onto many target vectors cheaply: per-cell counts for
/// tabular classes and, when a feature map is given, the feature matrix and its
/// Gram matrix over all of the map's coordinates.
class RegressionDesign {
public:
    /// `num_states` == 0 marks an unbounded state space (no cell statistics).
    RegressionDesign(std::vector<StateAction> inputs, std::size_t num_states, std::size_t num_actions,
                     std::shared_ptr<const FeatureMap> features = nullptr);

    std::size_t size() const noexcept { return inputs_.size(); }
    const std::vector<StateAction>& inputs() const noexcept { return inputs_; }
    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    bool has_features_for(const FunctionClass& cls) const noexcept;
    const Eigen::MatrixXd& feature_matrix() const noexcept { return phi_; }
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }
    const std::vector<double>& cell_counts() const noexcept { return cell_counts_; }

    /// Raw predictions f(x_i, a_i).
    std::vector<double> predict_raw(const QFunction& f) const;

private:
    std::vector<StateAction> inputs_;
    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> cell_counts_;
    std::shared_ptr<const FeatureMap> features_;
    Eigen::MatrixXd phi_;
    Eigen::MatrixXd gram_;
};

/// Empirical squared-loss minimizer over `cls` for targets y_i at the design's
/// inputs. Finite: exhaustive scan, lowest member index on ties. Abstraction:
/// per-block target mean, then clipped. Linear: ridge solution.
QFunction erm(const FunctionClass& cls, const RegressionDesign& design, std::span<const double> targets);
QFunction erm(const FunctionClass& cls, std::span<const Sample> samples);

/// (1/n) sum (f_raw(x_i, a_i) - y_i)^2.
double empirical_sq_loss(const QFunction& f, std::span<const Sample> samples);
double empirical_sq_loss(const QFunction& f, const RegressionDesign& design, std::span<const double> targets);

/// Nested sequence F_1 c ... c F_M, validated on construction.
class NestedSequence {
public:
    explicit NestedSequence(std::vector<FunctionClass> classes);

    std::size_t size() const noexcept { return classes_.size(); }
    /// 0-based access; class k has index() == k + 1.
    const FunctionClass& operator[](std::size_t k) const { return classes_[k]; }
    auto begin() const noexcept { return classes_.begin(); }
    auto end() const noexcept { return classes_.end(); }

    std::size_t num_states() const noexcept { return num_states_; }
    std::size_t num_actions() const noexcept { return num_actions_; }
    double value_bound() const noexcept { return classes_.front().value_bound(); }
    /// Feature map shared by the linear classes, if any.
    std::shared_ptr<const FeatureMap> feature_map() const;

private:
    std::vector<FunctionClass> classes_;
    std::size_t num_states_ = 0;
    std::size_t num_actions_ = 0;
};

/// H value-function approximators f_1..f_H with f_{H+1} == 0.
struct QSequence {
    std::vector<QFunction> steps;
    std::size_t class_index = 0;
    std::string algorithm;

    std::size_t horizon() const noexcept { return steps.size(); }
    const QFunction& operator[](std::size_t h) const { return steps[h]; }
    /// max_a f_{h+1}(x, a), zero past the last step.
    double next_value(std::size_t h, std::size_t x) const {
        return h + 1 < steps.size() ? steps[h + 1].state_value(x) : 0.0;
    }
};

/// Greedy policy over a QSequence on a finite state space; lowest action on ties.
Policy greedy_policy(const QSequence& f, std::size_t num_states);
std::vector<StateActionTable> tabulate(const QSequence& f, std::size_t num_states);
QSequence table_sequence(std::span<const StateActionTable> tables, double value_bound);

/// Nested-sequence description file. Layout:
///   modbe-classes
///   states S actions A horizon H
///   features D            (optional; then S*A rows of D numbers, state-major)
///   class finite m        (then m member tables of S*A numbers each)
///   class abstraction     (then S block ids)
///   class linear d [ridge L]
/// Every class is clipped to [0, H]. `#` starts a comment.
NestedSequence read_classes(std::istream& in);
void write_classes(std::ostream& out, const NestedSequence& classes);
NestedSequence load_classes(const std::filesystem::path& path);

}  // namespace modbe
