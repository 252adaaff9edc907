#pragma once

// Small hand-built instances shared by the unit tests.

#include <cstddef>
#include <vector>

#include "modbe/function_class.hpp"
#include "modbe/mdp.hpp"

namespace fixtures {

/// One state, every action self-loops; rewards per action.
inline modbe::TabularMdp single_state(std::vector<double> rewards, std::size_t H) {
    const std::size_t A = rewards.size();
    return modbe::TabularMdp(1, A, H, {1.0}, std::vector<std::vector<double>>(H, std::vector<double>(A, 1.0)),
                             std::move(rewards));
}

/// Deterministic transitions next[x*A+a] at every step.
inline modbe::TabularMdp deterministic(std::size_t S, std::size_t A, std::size_t H, std::vector<double> rho,
                                       const std::vector<std::size_t>& next, std::vector<double> rewards) {
    std::vector<double> block(S * A * S, 0.0);
    for (std::size_t row = 0; row < S * A; ++row) block[row * S + next[row]] = 1.0;
    return modbe::TabularMdp(S, A, H, std::move(rho), std::vector<std::vector<double>>(H, block), std::move(rewards));
}

inline modbe::StateActionTable table(std::size_t S, std::size_t A, std::vector<double> values) {
    return modbe::StateActionTable(S, A, std::move(values));
}

inline modbe::NestedSequence sequence(std::vector<modbe::FunctionClass> classes) {
    return modbe::NestedSequence(std::move(classes));
}

}  // namespace fixtures
