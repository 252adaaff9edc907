#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "modbe/mdp.hpp"

namespace modbe {

/// One logged transition. `h` is the 0-based step (1-based on disk).
struct Transition {
    std::size_t h = 0;
    std::size_t x = 0;
    std::size_t a = 0;
    double r = 0.0;
    std::size_t x_next = 0;

    friend bool operator==(const Transition&, const Transition&) = default;
};

struct DatasetMetadata {
    std::uint64_t seed = 0;
    std::string generator;
    std::string mu;
    /// C(mu) of the generating distribution when known; +inf is the uncovered sentinel.
    double concentrability = -1.0;

    friend bool operator==(const DatasetMetadata&, const DatasetMetadata&) = default;
};

/// H slots of exactly n transitions each; slot h holds only step-h transitions.
class OfflineDataset {
public:
    OfflineDataset(std::vector<std::vector<Transition>> slots, DatasetMetadata metadata = {});

    std::size_t horizon() const noexcept { return slots_.size(); }
    std::size_t per_step() const noexcept { return slots_.front().size(); }
    std::span<const Transition> slot(std::size_t h) const { return slots_[h]; }
    const DatasetMetadata& metadata() const noexcept { return metadata_; }

    /// Throws InputError unless every transition is inside the MDP's state/action space.
    void check_domain(std::size_t num_states, std::size_t num_actions) const;

    friend bool operator==(const OfflineDataset&, const OfflineDataset&) = default;

private:
    std::vector<std::vector<Transition>> slots_;
    DatasetMetadata metadata_;
};

struct DataSplit {
    OfflineDataset train;
    OfflineDataset valid;
    std::uint64_t seed = 0;
};

/// Sizes from an n-sample slot: ceil(0.8 n) for training, floor(0.2 n) for validation.
constexpr std::size_t train_size(std::size_t n) noexcept { return (4 * n + 4) / 5; }
constexpr std::size_t valid_size(std::size_t n) noexcept { return n / 5; }
inline constexpr std::size_t kMinSplitSamples = 5;

/// n i.i.d. draws per step: (x, a) ~ mu_h, r = r(x, a), x' ~ P_h(.|x, a).
/// Draw i of step h uses the stream keyed by (seed, h, i).
OfflineDataset generate_from_mu(const TabularMdp& mdp, const DataDistribution& mu, std::size_t n,
                                std::uint64_t seed);

struct BehaviorDataset {
    OfflineDataset data;
    DataDistribution mu;
};

/// mu_h = occupancy of the behavior policy, then generate_from_mu.
BehaviorDataset generate_from_behavior(const TabularMdp& mdp, const Policy& behavior, std::size_t n,
                                       std::uint64_t seed);

/// Independent random permutation per step; first ceil(0.8 n) go to training.
DataSplit split(const OfflineDataset& dataset, std::uint64_t seed);

struct FlatSplit {
    std::vector<Transition> train;
    std::vector<Transition> valid;
};

/// 80/20 split of a step-free transition list (discounted and bandit settings).
FlatSplit split_flat(std::span<const Transition> data, std::uint64_t seed);

/// CSV with header `h,x,a,r,x_next`, metadata as `# key=value` lines.
void write_dataset(std::ostream& out, const OfflineDataset& dataset);
/// Rejects malformed rows with line numbers; checks r in [0, 1] and equal slot sizes.
OfflineDataset read_dataset(std::istream& in);
void save_dataset(const std::filesystem::path& path, const OfflineDataset& dataset);
OfflineDataset load_dataset(const std::filesystem::path& path);

}  // namespace modbe
