#include "modbe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>

#include "modbe/error.hpp"
#include "modbe/rng.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

std::size_t sample_index(std::span<const double> cumulative, double u) {
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    // Guard against u landing in the rounding slack above the last cumulative value.
    std::size_t i = std::min(idx, cumulative.size() - 1);
    while (i > 0 && cumulative[i] == cumulative[i - 1]) --i;
    return i;
}

std::vector<double> cumulative_of(std::span<const double> p) {
    std::vector<double> c(p.size());
    std::partial_sum(p.begin(), p.end(), c.begin());
    return c;
}

template <typename T>
void permute(std::vector<T>& items, CounterRng rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace

OfflineDataset::OfflineDataset(std::vector<std::vector<Transition>> slots, DatasetMetadata metadata)
    : slots_(std::move(slots)), metadata_(std::move(metadata)) {
    if (slots_.empty()) throw InputError("dataset needs at least one step");
    const std::size_t n = slots_.front().size();
    for (std::size_t h = 0; h < slots_.size(); ++h) {
        if (slots_[h].size() != n) throw InputError("every step must hold the same number of transitions");
        for (const auto& t : slots_[h]) {
            if (t.h != h) throw InputError("transition stored in the wrong step slot");
        }
    }
}

void OfflineDataset::check_domain(std::size_t num_states, std::size_t num_actions) const {
    for (const auto& slot : slots_) {
        for (const auto& t : slot) {
            if (t.x >= num_states || t.x_next >= num_states || t.a >= num_actions) {
                throw InputError("dataset transition outside the state/action space");
            }
        }
    }
}

OfflineDataset generate_from_mu(const TabularMdp& mdp, const DataDistribution& mu, std::size_t n,
                                std::uint64_t seed) {
    mu.validate(mdp);
    if (n == 0) throw InputError("n must be at least 1");
    const std::size_t A = mdp.num_actions();
    std::vector<std::vector<Transition>> slots(mdp.horizon());
    for (std::size_t h = 0; h < mdp.horizon(); ++h) {
        const auto pair_cdf = cumulative_of(mu.steps[h].values());
        std::vector<std::vector<double>> next_cdf(mdp.num_states() * A);
        for (std::size_t x = 0; x < mdp.num_states(); ++x) {
            for (std::size_t a = 0; a < A; ++a) next_cdf[x * A + a] = cumulative_of(mdp.next_state_dist(h, x, a));
        }
        auto& slot = slots[h];
        slot.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto rng = CounterRng::keyed(seed, h, i);
            const std::size_t cell = sample_index(pair_cdf, rng.uniform() * pair_cdf.back());
            const std::size_t x = cell / A;
            const std::size_t a = cell % A;
            const auto& cdf = next_cdf[cell];
            const std::size_t next = sample_index(cdf, rng.uniform() * cdf.back());
            slot.push_back({h, x, a, mdp.reward(x, a), next});
        }
    }
    DatasetMetadata meta;
    meta.seed = seed;
    meta.generator = "mu";
    return OfflineDataset(std::move(slots), std::move(meta));
}

BehaviorDataset generate_from_behavior(const TabularMdp& mdp, const Policy& behavior, std::size_t n,
                                       std::uint64_t seed) {
    DataDistribution mu{occupancy(mdp, behavior)};
    auto data = generate_from_mu(mdp, mu, n, seed);
    DatasetMetadata meta = data.metadata();
    meta.generator = "behavior";
    meta.concentrability = concentrability(mdp, mu);
    std::vector<std::vector<Transition>> slots;
    for (std::size_t h = 0; h < data.horizon(); ++h) slots.emplace_back(data.slot(h).begin(), data.slot(h).end());
    return {OfflineDataset(std::move(slots), std::move(meta)), std::move(mu)};
}

DataSplit split(const OfflineDataset& dataset, std::uint64_t seed) {
    const std::size_t n = dataset.per_step();
    if (n < kMinSplitSamples) {
        throw InputError("need at least " + std::to_string(kMinSplitSamples) +
                         " samples per step for a non-empty validation set");
    }
    const std::size_t n_train = train_size(n);
    std::vector<std::vector<Transition>> train(dataset.horizon());
    std::vector<std::vector<Transition>> valid(dataset.horizon());
    for (std::size_t h = 0; h < dataset.horizon(); ++h) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        permute(order, CounterRng::keyed(seed, 0x5b117ULL, h));
        const auto slot = dataset.slot(h);
        for (std::size_t i = 0; i < n; ++i) (i < n_train ? train[h] : valid[h]).push_back(slot[order[i]]);
    }
    DatasetMetadata meta = dataset.metadata();
    return {OfflineDataset(std::move(train), meta), OfflineDataset(std::move(valid), meta), seed};
}

FlatSplit split_flat(std::span<const Transition> data, std::uint64_t seed) {
    const std::size_t n = data.size();
    if (n < kMinSplitSamples) {
        throw InputError("need at least " + std::to_string(kMinSplitSamples) +
                         " samples for a non-empty validation set");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    permute(order, CounterRng::keyed(seed, 0x5b117ULL, 0xf1a7ULL));
    FlatSplit out;
    const std::size_t n_train = train_size(n);
    out.train.reserve(n_train);
    out.valid.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i) (i < n_train ? out.train : out.valid).push_back(data[order[i]]);
    return out;
}

void write_dataset(std::ostream& out, const OfflineDataset& dataset) {
    const auto& meta = dataset.metadata();
    out << "# seed=" << meta.seed << '\n';
    if (!meta.generator.empty()) out << "# generator=" << meta.generator << '\n';
    if (!meta.mu.empty()) out << "# mu=" << meta.mu << '\n';
    if (meta.concentrability >= 0.0) out << "# concentrability=" << text::format_double(meta.concentrability) << '\n';
    out << "h,x,a,r,x_next\n";
    for (std::size_t h = 0; h < dataset.horizon(); ++h) {
        for (const auto& t : dataset.slot(h)) {
            out << t.h + 1 << ',' << t.x << ',' << t.a << ',' << text::format_double(t.r) << ',' << t.x_next << '\n';
        }
    }
}

OfflineDataset read_dataset(std::istream& in) {
    DatasetMetadata meta;
    std::vector<std::vector<Transition>> slots;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto view = text::trim(line);
        if (view.empty()) continue;
        if (view.front() == '#') {
            const auto body = text::trim(view.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            const auto key = text::trim(body.substr(0, eq));
            const auto value = text::trim(body.substr(eq + 1));
            if (key == "seed") {
                meta.seed = text::parse_index(value, line_no);
            } else if (key == "generator") {
                meta.generator = std::string(value);
            } else if (key == "mu") {
                meta.mu = std::string(value);
            } else if (key == "concentrability") {
                meta.concentrability = text::parse_double(value, line_no);
            }
            continue;
        }
        if (!header_seen) {
            if (view != "h,x,a,r,x_next") throw InputError("expected header 'h,x,a,r,x_next'", line_no);
            header_seen = true;
            continue;
        }
        const auto fields = text::split(view, ',');
        if (fields.size() != 5) throw InputError("expected 5 comma-separated fields", line_no);
        Transition t;
        const std::size_t step = text::parse_index(fields[0], line_no);
        if (step == 0) throw InputError("step index h is 1-based", line_no);
        t.h = step - 1;
        t.x = text::parse_index(fields[1], line_no);
        t.a = text::parse_index(fields[2], line_no);
        t.r = text::parse_double(fields[3], line_no);
        t.x_next = text::parse_index(fields[4], line_no);
        if (!(t.r >= 0.0 && t.r <= 1.0)) throw InputError("reward must lie in [0, 1]", line_no);
        if (slots.size() <= t.h) slots.resize(t.h + 1);
        slots[t.h].push_back(t);
    }
    if (!header_seen) throw InputError("missing header 'h,x,a,r,x_next'", line_no);
    if (slots.empty()) throw InputError("dataset has no transitions", line_no);
    for (std::size_t h = 0; h < slots.size(); ++h) {
        if (slots[h].size() != slots.front().size()) {
            throw InputError("step " + std::to_string(h + 1) + " has " + std::to_string(slots[h].size()) +
                                 " transitions, step 1 has " + std::to_string(slots.front().size()),
                             line_no);
        }
    }
    return OfflineDataset(std::move(slots), std::move(meta));
}

void save_dataset(const std::filesystem::path& path, const OfflineDataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_dataset(out, dataset);
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset file " + path.string());
    return read_dataset(in);
}

}  // namespace modbe
