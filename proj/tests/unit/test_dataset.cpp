#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "modbe/dataset.hpp"
#include "modbe/error.hpp"
#include "oracle.hpp"

using namespace modbe;

namespace {

std::string to_text(const OfflineDataset& d) {
    std::ostringstream out;
    write_dataset(out, d);
    return out.str();
}

OfflineDataset labelled(std::size_t n, std::size_t H) {
    // Distinct transitions so partitions can be checked by value.
    std::vector<std::vector<Transition>> slots(H);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t i = 0; i < n; ++i) slots[h].push_back({h, i, 0, 0.0, 0});
    }
    return OfflineDataset(std::move(slots));
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("point-mass mu on a deterministic MDP repeats one transition") {
    const auto mdp = fixtures::deterministic(2, 2, 2, {1.0, 0.0}, {1, 0, 0, 1}, {0.25, 0.5, 0.75, 1.0});
    DataDistribution mu;
    for (int h = 0; h < 2; ++h) mu.steps.push_back(fixtures::table(2, 2, {1.0, 0.0, 0.0, 0.0}));
    const auto data = generate_from_mu(mdp, mu, 50, 3);
    for (std::size_t h = 0; h < 2; ++h) {
        for (const auto& t : data.slot(h)) CHECK(t == Transition{h, 0, 0, 0.25, 1});
    }
}

TEST_CASE("empirical pair frequencies approach mu") {
    std::mt19937_64 gen(31);
    const auto mdp = oracle::random_dyadic_mdp(gen, 3, 2, 2);
    const auto mu = oracle::random_dyadic_mu(gen, 3, 2, 2);
    const std::size_t n = 100000;
    const auto data = generate_from_mu(mdp, mu, n, 9);
    for (std::size_t h = 0; h < 2; ++h) {
        std::vector<double> freq(6, 0.0);
        std::vector<std::vector<double>> next(6, std::vector<double>(3, 0.0));
        for (const auto& t : data.slot(h)) {
            CHECK(t.h == h);
            CHECK(t.r == mdp.reward(t.x, t.a));
            freq[t.x * 2 + t.a] += 1.0;
            next[t.x * 2 + t.a][t.x_next] += 1.0;
        }
        double worst = 0.0;
        for (std::size_t c = 0; c < 6; ++c) worst = std::max(worst, std::abs(freq[c] / n - mu.steps[h].values()[c]));
        CHECK(worst < 0.01);
        for (std::size_t c = 0; c < 6; ++c) {
            for (std::size_t y = 0; y < 3; ++y) {
                CHECK(std::abs(next[c][y] / freq[c] - mdp.transition(h, c / 2, c % 2, y)) < 0.03);
            }
        }
    }
}

TEST_CASE("same seed gives byte-identical datasets, other seeds differ") {
    std::mt19937_64 gen(32);
    const auto mdp = oracle::random_dyadic_mdp(gen, 4, 2, 3);
    const auto mu = oracle::random_dyadic_mu(gen, 4, 2, 3);
    CHECK(to_text(generate_from_mu(mdp, mu, 200, 5)) == to_text(generate_from_mu(mdp, mu, 200, 5)));
    CHECK(to_text(generate_from_mu(mdp, mu, 200, 5)) != to_text(generate_from_mu(mdp, mu, 200, 6)));
}

TEST_CASE("adding steps leaves earlier slots unchanged") {
    std::mt19937_64 gen(33);
    const auto long_mdp = oracle::random_dyadic_mdp(gen, 3, 2, 3);
    std::vector<std::vector<double>> blocks;
    for (std::size_t h = 0; h < 2; ++h) {
        std::vector<double> block;
        for (std::size_t c = 0; c < 6; ++c) {
            const auto row = long_mdp.next_state_dist(h, c / 2, c % 2);
            block.insert(block.end(), row.begin(), row.end());
        }
        blocks.push_back(block);
    }
    const TabularMdp short_mdp(3, 2, 2, {long_mdp.initial_dist().begin(), long_mdp.initial_dist().end()}, blocks,
                               {long_mdp.rewards().begin(), long_mdp.rewards().end()});
    const auto mu_long = oracle::random_dyadic_mu(gen, 3, 2, 3);
    DataDistribution mu_short{{mu_long.steps[0], mu_long.steps[1]}};
    const auto a = generate_from_mu(long_mdp, mu_long, 100, 77);
    const auto b = generate_from_mu(short_mdp, mu_short, 100, 77);
    for (std::size_t h = 0; h < 2; ++h) CHECK(std::ranges::equal(a.slot(h), b.slot(h)));
}

TEST_CASE("generation rejects n = 0 and invalid mu") {
    const auto mdp = fixtures::single_state({0.5}, 1);
    CHECK_THROWS_AS(generate_from_mu(mdp, DataDistribution::uniform(mdp), 0, 1), InputError);
    CHECK_THROWS_AS(generate_from_mu(mdp, DataDistribution{{fixtures::table(1, 1, {0.5})}}, 3, 1), InputError);
}

TEST_CASE("behavior data uses the exact occupancy as mu") {
    std::mt19937_64 gen(34);
    const auto mdp = oracle::random_dyadic_mdp(gen, 3, 2, 3);
    const auto pi = epsilon_optimal_policy(mdp, 0.3);
    const auto out = generate_from_behavior(mdp, pi, 100, 8);
    const auto occ = occupancy(mdp, pi);
    REQUIRE(out.mu.steps.size() == occ.size());
    for (std::size_t h = 0; h < occ.size(); ++h) CHECK(out.mu.steps[h] == occ[h]);
    const auto direct = generate_from_mu(mdp, out.mu, 100, 8);
    for (std::size_t h = 0; h < 3; ++h) CHECK(std::ranges::equal(out.data.slot(h), direct.slot(h)));
    CHECK(out.data.metadata().generator == "behavior");
    CHECK(out.data.metadata().concentrability == concentrability(mdp, out.mu));

    // Mixture support: every pair reachable under some policy gets mass.
    const auto reach = max_reach_probability(mdp);
    for (std::size_t h = 0; h < 3; ++h) {
        for (std::size_t x = 0; x < 3; ++x) {
            for (std::size_t a = 0; a < 2; ++a) {
                if (reach[h][x] > 0.0) CHECK(out.mu.steps[h](x, a) > 0.0);
            }
        }
    }
}

TEST_CASE("uniform behavior on one state gives uniform action mass") {
    const auto mdp = fixtures::single_state({0.0, 0.5, 1.0}, 2);
    const auto out = generate_from_behavior(mdp, Policy::uniform(1, 3, 2), 30, 1);
    for (const auto& step : out.mu.steps) {
        for (double v : step.values()) CHECK(v == doctest::Approx(1.0 / 3.0));
    }
}

TEST_CASE("deterministic behavior records the infinite concentrability sentinel") {
    const auto mdp = fixtures::single_state({0.0, 1.0}, 1);
    const auto out = generate_from_behavior(mdp, Policy::deterministic(1, 2, {{0}}), 10, 1);
    CHECK(out.data.metadata().concentrability == kInfinity);
    std::istringstream in(to_text(out.data));
    CHECK(read_dataset(in).metadata().concentrability == kInfinity);
}

TEST_CASE("split sizes at the boundaries") {
    CHECK(train_size(10) == 8);
    CHECK(valid_size(10) == 2);
    CHECK(train_size(5) == 4);
    CHECK(valid_size(5) == 1);
    CHECK(train_size(9) == 8);
    CHECK(valid_size(9) == 1);
    CHECK(train_size(11) == 9);
    CHECK(valid_size(11) == 2);
    for (std::size_t n = 5; n <= 1000000; n = n * 3 + 1) {
        CHECK(train_size(n) == static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n) - 1e-9)));
        CHECK(valid_size(n) == static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n) + 1e-9)));
        CHECK(train_size(n) + valid_size(n) == n);
    }
}

TEST_CASE("split partitions every slot") {
    for (std::size_t n : {5u, 9u, 10u, 11u, 137u}) {
        const auto data = labelled(n, 3);
        const auto s = split(data, 42);
        CHECK(s.train.per_step() == train_size(n));
        CHECK(s.valid.per_step() == valid_size(n));
        for (std::size_t h = 0; h < 3; ++h) {
            std::multiset<std::size_t> seen;
            for (const auto& t : s.train.slot(h)) seen.insert(t.x);
            for (const auto& t : s.valid.slot(h)) seen.insert(t.x);
            CHECK(seen.size() == n);
            CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == n);
        }
    }
}

TEST_CASE("split is deterministic and rejects tiny slots") {
    const auto data = labelled(50, 2);
    const auto a = split(data, 7);
    const auto b = split(data, 7);
    CHECK(a.train == b.train);
    CHECK(a.valid == b.valid);
    CHECK_FALSE(split(data, 8).train == a.train);
    CHECK_THROWS_AS(split(labelled(4, 1), 1), InputError);
    CHECK_THROWS_AS(split_flat(std::vector<Transition>(4), 1), InputError);
    const auto flat = split_flat(labelled(11, 1).slot(0), 3);
    CHECK(flat.train.size() == 9);
    CHECK(flat.valid.size() == 2);
}

TEST_CASE("dataset CSV round-trips") {
    std::mt19937_64 gen(35);
    const auto mdp = oracle::random_dyadic_mdp(gen, 3, 2, 2);
    const auto data = generate_from_mu(mdp, DataDistribution::uniform(mdp), 40, 12);
    const auto text = to_text(data);
    CHECK(text.rfind("# seed=12\n", 0) == 0);
    std::istringstream in(text);
    const auto back = read_dataset(in);
    CHECK(back == data);
}

TEST_CASE("malformed dataset rows are rejected with their line") {
    const auto line_of = [](const std::string& text) -> std::size_t {
        std::istringstream in(text);
        try {
            (void)read_dataset(in);
        } catch (const InputError& e) {
            return e.line();
        }
        return 0;
    };
    CHECK(line_of("h,x,a,r,x_next\n1,0,0,0.5,1\n1,0,0,1.5,1\n") == 3);
    CHECK(line_of("h,x,a,r,x_next\n1,0,0,0.5\n") == 2);
    CHECK(line_of("# seed=1\nh,x,a,r,x_next\n0,0,0,0.5,1\n") == 3);
    CHECK(line_of("h,x,a,r,x_next\n1,0,zero,0.5,1\n") == 2);
    CHECK(line_of("x,y\n") == 1);
    CHECK(line_of("h,x,a,r,x_next\n1,0,0,0.5,1\n2,0,0,0.5,1\n2,0,0,0.5,1\n") > 0);
}

}  // TEST_SUITE
