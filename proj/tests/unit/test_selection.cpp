#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "modbe/error.hpp"
#include "modbe/instances.hpp"
#include "modbe/selection.hpp"
#include "oracle.hpp"

using namespace modbe;

namespace {

NestedSequence finite_prefixes(std::size_t small, std::size_t large) {
    std::vector<StateActionTable> members;
    for (std::size_t i = 0; i < large; ++i) members.emplace_back(1, 1, static_cast<double>(i) / static_cast<double>(large));
    return fixtures::sequence({FunctionClass::finite({members.begin(), members.begin() + static_cast<long>(small)}, 2.0),
                               FunctionClass::finite(members, 2.0)});
}

std::string trace_text(const SelectionTrace& t) {
    std::ostringstream out;
    write_trace(out, t);
    return out.str();
}

/// Structural checks every trace must satisfy.
void check_trace_invariants(const SelectionTrace& t, std::size_t M, std::size_t H) {
    CHECK(t.selected >= 1);
    CHECK(t.selected <= M);
    CHECK(t.base_calls == t.visited.size());
    CHECK(t.base_calls <= M + 1);
    CHECK(t.erm_calls <= H * M * M);
    REQUIRE_FALSE(t.visited.empty());
    for (std::size_t i = 0; i < t.visited.size(); ++i) CHECK(t.visited[i] == i + 1);
    CHECK(t.visited.back() == t.selected);
    std::size_t k = 1;
    for (std::size_t i = 0; i < t.events.size(); ++i) {
        const auto& e = t.events[i];
        CHECK(e.k >= k);
        if (e.k > k) {
            // k moves by exactly one, right after a k' block containing a rejection.
            CHECK(e.k == k + 1);
            CHECK(i > 0);
            const std::size_t kp = t.events[i - 1].k_prime;
            bool rejected = false;
            for (std::size_t j = i; j-- > 0 && t.events[j].k == k && t.events[j].k_prime == kp;) {
                rejected = rejected || t.events[j].outcome == TestOutcome::reject;
            }
            CHECK(rejected);
            k = e.k;
        }
        CHECK(e.k_prime > e.k);
        CHECK(e.h >= 1);
        CHECK(e.h <= H);
    }
}

}  // namespace

TEST_SUITE("modbe") {

TEST_CASE("zeta") {
    CHECK(zeta(2, 2, 0.25, 100) == doctest::Approx(384.0 * std::log(512.0) / 100.0).epsilon(1e-12));
    CHECK(zeta(2, 2, 0.25, 100) == doctest::Approx(23.955).epsilon(1e-4));
    CHECK(zeta(2, 2, 0.25, 200) == zeta(2, 2, 0.25, 100) / 2.0);
    CHECK(zeta(3, 5, 0.1, 50) > zeta(3, 4, 0.1, 50));
    CHECK_THROWS_AS(zeta(2, 2, 0.5, 100), InputError);
    CHECK_THROWS_AS(zeta(2, 2, 0.1, 0), InputError);
}

TEST_CASE("alpha, omega and Tol of the theoretical schedule") {
    const FittedQIteration fqi_base;
    const auto classes = finite_prefixes(4, 16);
    const auto s = ToleranceSchedule::theoretical(classes, fqi_base, 2, 0.25, 800, 100);
    CHECK(s.mode() == ToleranceMode::theoretical);
    CHECK(s.alpha(1) == doctest::Approx(std::log(16384.0)).epsilon(1e-12));
    CHECK(s.alpha(1) == doctest::Approx(9.704).epsilon(1e-4));
    CHECK(s.omega(0) == doctest::Approx(std::log(4096.0)).epsilon(1e-12));
    CHECK(s.zeta() == doctest::Approx(23.955).epsilon(1e-4));
    CHECK(s.tol(0, 1) == doctest::Approx(2.0 * s.alpha(1) + 2.0 * s.zeta() + s.omega(0)).epsilon(1e-15));
    CHECK(s.tol(0, 1) == doctest::Approx(75.6).epsilon(1e-3));
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(s.alpha(k) >= fqi_base.omega(800, 0.25 / 8.0, classes[k], 2));
        CHECK(s.omega(k) == fqi_base.omega(800, 0.25 / 8.0, classes[k], 2));
    }
    CHECK(s.alpha(1) >= s.alpha(0));
}

TEST_CASE("theoretical Tol is positive and non-decreasing in k'") {
    const auto inst = never_overshoot_instance();
    const FittedQIteration fqi_base;
    const auto s = ToleranceSchedule::theoretical(inst.classes, fqi_base, 2, 0.1, 800, 200);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t kp = k + 1; kp < 3; ++kp) {
            CHECK(s.tol(k, kp) > 0.0);
            if (kp + 1 < 3) CHECK(s.tol(k, kp) <= s.tol(k, kp + 1));
        }
    }
}

TEST_CASE("practical and fixed schedules") {
    const auto classes = finite_prefixes(2, 8);
    const auto p = ToleranceSchedule::practical(classes, 400);
    CHECK(p.tol(0, 1) == std::log(8.0) / 400.0);
    CHECK(ToleranceSchedule::fixed(0.3).tol(3, 7) == 0.3);
    CHECK_THROWS_AS(ToleranceSchedule::fixed(-1.0), InputError);
    CHECK(parse_tolerance_mode("practical") == ToleranceMode::practical);
    CHECK(parse_tolerance_mode("theoretical") == ToleranceMode::theoretical);
    CHECK_THROWS_AS(parse_tolerance_mode("loose"), InputError);
}

TEST_CASE("generalization test boundary") {
    CHECK(generalization_test(0.5, 0.9, 0.3) == TestOutcome::reject);
    CHECK(generalization_test(0.5, 0.7, 0.3) == TestOutcome::keep);
    CHECK(generalization_test(0.25, 0.75, 0.5) == TestOutcome::keep);
    CHECK(generalization_test(0.0, 1.0, kInfinity) == TestOutcome::keep);
}

TEST_CASE("regress_to_targets") {
    std::mt19937_64 gen(51);
    const auto mdp = oracle::random_dyadic_mdp(gen, 4, 2, 2);
    const auto seq = fixtures::sequence({FunctionClass::abstraction({0, 0, 1, 1}, 2, 2.0),
                                         FunctionClass::abstraction({0, 1, 2, 3}, 2, 2.0)});
    const auto data = generate_from_mu(mdp, DataDistribution::uniform(mdp), 400, 3);
    const auto split = prepare_split(data, seq, 3);

    SUBCASE("same class and same data reproduces the FQI step") {
        const auto f = fqi(split.train, seq[0]);
        const auto g = regress_to_targets(seq[0], split.train, 0, &f[1]);
        const auto y = split.train.targets(0, &f[1]);
        CHECK(empirical_sq_loss(g, split.train.design(0), y) <= empirical_sq_loss(f[0], split.train.design(0), y));
        CHECK(tabulate(g, 4) == tabulate(f[0], 4));
    }
    SUBCASE("zero continuation with a complete class interpolates the rewards") {
        const auto g = regress_to_targets(seq[1], split.train, 1, nullptr);
        for (std::size_t x = 0; x < 4; ++x) {
            for (std::size_t a = 0; a < 2; ++a) CHECK(g(x, a) == mdp.reward(x, a));
        }
        CHECK(empirical_sq_loss(g, split.train.design(1), split.train.targets(1, nullptr)) == 0.0);
    }
    SUBCASE("larger class fits at least as well") {
        const auto f = fqi(split.train, seq[1]);
        const auto y = split.train.targets(0, &f[1]);
        const double small = empirical_sq_loss(regress_to_targets(seq[0], split.train, 0, &f[1]), split.train.design(0), y);
        const double large = empirical_sq_loss(regress_to_targets(seq[1], split.train, 0, &f[1]), split.train.design(0), y);
        CHECK(large <= small + 1e-9);
    }
}

TEST_CASE("validation loss: exact fit, range, and the double-sampling identity") {
    std::mt19937_64 gen(52);
    const auto mdp = oracle::random_dyadic_mdp(gen, 2, 2, 2);
    const auto mu = DataDistribution::uniform(mdp);
    const auto cls = FunctionClass::abstraction({0, 1}, 2, 2.0);
    const auto seq = fixtures::sequence({cls});

    // Deterministic transitions make the residual zero for f = T* f_next.
    const auto det = fixtures::deterministic(2, 2, 2, {1.0, 0.0}, {1, 0, 0, 1}, {0.25, 0.5, 0.75, 1.0});
    const auto q = optimal_q(det);
    const auto exact = prepare_split(generate_from_mu(det, DataDistribution::uniform(det), 50, 1), seq, 1);
    const auto f1 = QFunction::table(q[0], 2.0);
    const auto f2 = QFunction::table(q[1], 2.0);
    CHECK(validation_loss(f1, &f2, exact.valid, 0) == 0.0);
    CHECK(validation_loss(f2, nullptr, exact.valid, 1) == 0.0);

    const auto f = QFunction::table(fixtures::table(2, 2, {0.5, 1.25, 2.0, 0.0}), 2.0);
    const auto next = QFunction::table(fixtures::table(2, 2, {1.0, 0.0, 0.25, 0.75}), 2.0);
    // ||f - T* next||^2_mu + E_mu Var(max next(x')).
    double expected = 0.0;
    for (std::size_t x = 0; x < 2; ++x) {
        for (std::size_t a = 0; a < 2; ++a) {
            double mean = 0.0, second = 0.0;
            for (std::size_t y = 0; y < 2; ++y) {
                const double v = next.state_value(y);
                mean += mdp.transition(0, x, a, y) * v;
                second += mdp.transition(0, x, a, y) * v * v;
            }
            const double gap = f(x, a) - mdp.reward(x, a) - mean;
            expected += mu.steps[0](x, a) * (gap * gap + second - mean * mean);
        }
    }
    const int reps = 2000;
    double sum = 0.0, sum_sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto split = prepare_split(generate_from_mu(mdp, mu, 50, 1000 + r), seq, r);
        const double loss = validation_loss(f, &next, split.valid, 0);
        CHECK(loss >= 0.0);
        CHECK(loss <= 9.0);
        sum += loss;
        sum_sq += loss * loss;
    }
    const double mean = sum / reps;
    const double se = std::sqrt((sum_sq / reps - mean * mean) / reps);
    CHECK(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("M = 1 runs the base algorithm once with no tests") {
    const auto inst = chain4_instance();
    const auto seq = fixtures::sequence({inst.classes[0]});
    const auto data = generate_from_mu(inst.mdp, inst.mu, 100, 1);
    const auto t = modbe::modbe(data, FittedQIteration{}, seq, {});
    CHECK(t.selected == 1);
    CHECK(t.events.empty());
    CHECK(t.base_calls == 1);
    CHECK(t.erm_calls == 0);
    const auto direct = fqi(prepare_split(data, seq, 0).train, seq[0]);
    CHECK(tabulate(t.final_f, 4) == tabulate(direct, 4));
    REQUIRE(t.policy.has_value());
    CHECK(*t.policy == greedy_policy(direct, 4));
}

TEST_CASE("an infinite tolerance always keeps the first class") {
    const auto inst = chain4_instance();
    const FittedQIteration base;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto split = prepare_split(generate_from_mu(inst.mdp, inst.mu, 200, seed), inst.classes, seed);
        const auto t = modbe::modbe(split, base, inst.classes, ToleranceSchedule::fixed(kInfinity), {});
        CHECK(t.selected == 1);
        CHECK(t.events.size() == 3 * 2);  // H steps against each of the M - 1 larger classes
        check_trace_invariants(t, 3, 3);
    }
}

TEST_CASE("zero tolerance moves past the zero class on positive rewards") {
    std::mt19937_64 gen(53);
    auto mdp = oracle::random_dyadic_mdp(gen, 3, 2, 2);
    std::vector<double> rewards(6);
    for (auto& r : rewards) r = static_cast<double>(1 + oracle::pick(gen, 8)) / 8.0;
    std::vector<std::vector<double>> blocks;
    for (std::size_t h = 0; h < 2; ++h) {
        std::vector<double> block;
        for (std::size_t c = 0; c < 6; ++c) {
            const auto row = mdp.next_state_dist(h, c / 2, c % 2);
            block.insert(block.end(), row.begin(), row.end());
        }
        blocks.push_back(block);
    }
    mdp = TabularMdp(3, 2, 2, {mdp.initial_dist().begin(), mdp.initial_dist().end()}, blocks, rewards);
    const auto seq = fixtures::sequence(
        {FunctionClass::finite({StateActionTable(3, 2)}, 2.0), FunctionClass::abstraction({0, 1, 2}, 2, 2.0)});
    const FittedQIteration base;
    int picked_two = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto split = prepare_split(generate_from_mu(mdp, DataDistribution::uniform(mdp), 10000, seed), seq, seed);
        const auto t = modbe::modbe(split, base, seq, ToleranceSchedule::fixed(0.0), {});
        check_trace_invariants(t, 2, 2);
        picked_two += t.selected == 2;
    }
    CHECK(picked_two >= 18);
}

TEST_CASE("zero rewards never trigger a rejection") {
    const auto inst = chain4_instance();
    const TabularMdp& m = inst.mdp;
    std::vector<std::vector<double>> blocks;
    for (std::size_t h = 0; h < m.horizon(); ++h) {
        std::vector<double> block;
        for (std::size_t c = 0; c < 8; ++c) {
            const auto row = m.next_state_dist(h, c / 2, c % 2);
            block.insert(block.end(), row.begin(), row.end());
        }
        blocks.push_back(block);
    }
    const TabularMdp zero(4, 2, m.horizon(), {m.initial_dist().begin(), m.initial_dist().end()}, blocks,
                          std::vector<double>(8, 0.0));
    int rejections = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        SelectionOptions opt;
        opt.seed = seed;
        const auto t = modbe::modbe(generate_from_mu(zero, inst.mu, 200, seed), FittedQIteration{}, inst.classes, opt);
        rejections += t.selected > 1;
        for (const auto& e : t.events) {
            CHECK(e.loss_f == 0.0);
            CHECK(e.loss_g == 0.0);
        }
    }
    CHECK(rejections <= 5);
}

TEST_CASE("traces replay byte for byte and respect the budgets") {
    const auto inst = chain4_instance();
    for (auto mode : {ToleranceMode::practical, ToleranceMode::theoretical}) {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            SelectionOptions opt;
            opt.seed = seed;
            opt.schedule = mode;
            const auto data = generate_from_mu(inst.mdp, inst.mu, 300, seed);
            const auto a = modbe::modbe(data, FittedQIteration{}, inst.classes, opt);
            const auto b = modbe::modbe(data, FittedQIteration{}, inst.classes, opt);
            CHECK(trace_text(a) == trace_text(b));
            CHECK(a.events == b.events);
            check_trace_invariants(a, 3, 3);
            CHECK(a.mode == mode);
        }
    }
}

TEST_CASE("all comparisons of a rejected class are recorded") {
    const auto inst = chain4_instance();
    const FittedQIteration base;
    const auto split = prepare_split(generate_from_mu(inst.mdp, inst.mu, 2000, 4), inst.classes, 4);
    const auto t = modbe::modbe(split, base, inst.classes, ToleranceSchedule::fixed(0.0), {});
    // Every (k, k') block holds one event per step.
    for (std::size_t i = 0; i < t.events.size(); i += 3) {
        CHECK(t.events[i].h == 1);
        CHECK(t.events[i + 1].h == 2);
        CHECK(t.events[i + 2].h == 3);
        CHECK(t.events[i + 2].k_prime == t.events[i].k_prime);
    }
    CHECK(t.events.size() % 3 == 0);
}

TEST_CASE("selection reaching the last class runs the base algorithm on it") {
    const auto inst = chain4_instance();
    const FittedQIteration base;
    // Tol = 0 against a zero first class: the test rejects and k lands on M.
    const auto seq = fixtures::sequence({FunctionClass::finite({StateActionTable(4, 2)}, 3.0), inst.classes[2]});
    const auto split = prepare_split(generate_from_mu(inst.mdp, inst.mu, 1000, 2), seq, 2);
    const auto t = modbe::modbe(split, base, seq, ToleranceSchedule::fixed(0.0), {});
    CHECK(t.selected == 2);
    CHECK(t.base_calls == 2);
    CHECK(t.visited == std::vector<std::size_t>{1, 2});
    CHECK(tabulate(t.final_f, 4) == tabulate(fqi(split.train, seq[1]), 4));
}

TEST_CASE("trace serialization") {
    SelectionTrace t;
    t.selected = 2;
    t.events.push_back({1, 2, 1, 0.125, 0.5, 0.25, TestOutcome::reject});
    t.visited = {1, 2};
    t.base_calls = 2;
    t.erm_calls = 1;
    t.seed = 9;
    t.delta = 0.1;
    t.n = 10;
    t.n_train = 8;
    t.n_valid = 2;
    t.policy = Policy::deterministic(2, 2, {{1, 0}});
    CHECK(trace_text(t) ==
          "# modbe trace\n"
          "# event k k' h loss_g loss_f tol outcome\n"
          "event 1 2 1 0.125 0.5 0.25 reject\n"
          "summary\n"
          "selected_k 2\n"
          "visited 1 2\n"
          "base_calls 2\n"
          "erm_calls 1\n"
          "events 1\n"
          "seed 9\n"
          "schedule practical\n"
          "delta 0.1\n"
          "n 10 n_train 8 n_valid 2\n"
          "policy h=1 1 0\n");
}

TEST_CASE("discounted variant") {
    SUBCASE("identical classes never reject") {
        const CBInstance cb(CBSpec{.dimension = 40, .active = 10, .actions = 4, .class_dims = {10, 10, 10}});
        const auto rows = cb.sample(300, 1);
        const auto problem = prepare_flat(rows, 0, 4, cb.features(), 1);
        DiscountedOptions opt;
        opt.gamma = 0.0;
        const auto t = modbe_discounted(problem, cb.classes(), ToleranceSchedule::fixed(0.0), opt);
        CHECK(t.selected == 1);
        for (const auto& e : t.events) CHECK(e.loss_g == e.loss_f);
    }
    SUBCASE("gamma = 0 is supervised selection on rewards") {
        std::mt19937_64 gen(54);
        const auto mdp = oracle::random_dyadic_mdp(gen, 4, 2, 1);
        const auto data = generate_from_mu(mdp, DataDistribution::uniform(mdp), 500, 2);
        const auto seq = fixtures::sequence({FunctionClass::abstraction({0, 0, 0, 0}, 2, 1.0),
                                             FunctionClass::abstraction({0, 1, 2, 3}, 2, 1.0)});
        const auto problem = prepare_flat(data.slot(0), 4, 2, nullptr, 2);
        DiscountedOptions opt;
        opt.gamma = 0.0;
        const auto t = modbe_discounted(problem, seq, ToleranceSchedule::fixed(0.0), opt);
        REQUIRE(t.events.size() == 1);
        std::vector<double> y;
        for (const auto& r : problem.valid) y.push_back(r.r);
        std::vector<double> y_train;
        for (const auto& r : problem.train) y_train.push_back(r.r);
        const auto g1 = erm(seq[0], problem.train_design, y_train);
        const auto g2 = erm(seq[1], problem.train_design, y_train);
        CHECK(t.events[0].loss_f == validation_loss_discounted(g1, y, problem.valid_design));
        CHECK(t.events[0].loss_g == validation_loss_discounted(g2, y, problem.valid_design));
        CHECK(t.erm_calls <= 4);
    }
    SUBCASE("bandit with the relevant features only in the second class") {
        CBSpec spec;
        spec.class_dims = {15, 30};
        const CBInstance cb(spec);
        int picked_two = 0;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto problem = prepare_flat(cb.sample(2000, seed), 0, spec.actions, cb.features(), seed);
            DiscountedOptions opt;
            opt.gamma = 0.0;
            opt.selection.seed = seed;
            const auto t = modbe_discounted(problem, cb.classes(), opt);
            picked_two += t.selected == 2;
            check_trace_invariants(t, 2, 1);
        }
        CHECK(picked_two >= 8);
    }
}

}  // TEST_SUITE
