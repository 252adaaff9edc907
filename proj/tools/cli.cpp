#include "cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <optional>
#include <ostream>

#include "modbe/error.hpp"
#include "modbe/eval.hpp"
#include "modbe/experiment.hpp"
#include "modbe/selection.hpp"
#include "modbe/text.hpp"

namespace modbe::cli {
namespace {

/// Re-raises input errors with the flag that named the offending input.
template <typename F>
auto from_flag(const std::string& flag, F&& load) {
    try {
        return load();
    } catch (const InputError& e) {
        throw InputError(flag + ": " + e.what());
    }
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void check_horizon(const OfflineDataset& data, const NestedSequence& classes) {
    if (static_cast<double>(data.horizon()) != classes.value_bound()) {
        throw InputError("--data has horizon " + std::to_string(data.horizon()) +
                         " but --classes declares horizon " + text::format_double(classes.value_bound()));
    }
    data.check_domain(classes.num_states(), classes.num_actions());
}

struct Inputs {
    std::string data;
    std::string classes;
    std::string mdp;
    double delta = 0.1;
    std::uint64_t seed = 0;
};

struct Loaded {
    OfflineDataset data;
    NestedSequence classes;
    std::optional<TabularMdp> mdp;
};

Loaded load_inputs(const Inputs& in) {
    auto data = from_flag("--data", [&] { return load_dataset(in.data); });
    auto classes = from_flag("--classes", [&] { return load_classes(in.classes); });
    from_flag("--data", [&] {
        check_horizon(data, classes);
        return 0;
    });
    std::optional<TabularMdp> mdp;
    if (!in.mdp.empty()) {
        mdp = from_flag("--mdp", [&] { return load_mdp(in.mdp); });
        if (mdp->num_states() != classes.num_states() || mdp->num_actions() != classes.num_actions() ||
            static_cast<double>(mdp->horizon()) != classes.value_bound()) {
            throw InputError("--mdp: dimensions disagree with --classes");
        }
    }
    from_flag("--delta", [&] {
        check_delta(in.delta);
        return 0;
    });
    return {std::move(data), std::move(classes), std::move(mdp)};
}

void add_data_flags(CLI::App* cmd, Inputs& in, bool with_mdp_optional) {
    cmd->add_option("--data", in.data, "Dataset CSV (h,x,a,r,x_next)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--classes", in.classes, "Nested class description file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--delta", in.delta, "Failure probability in (0, 1/e]");
    cmd->add_option("--seed", in.seed, "Seed for the train/validation split");
    if (with_mdp_optional) {
        cmd->add_option("--mdp", in.mdp, "Ground-truth MDP; when given, regret is reported")
            ->check(CLI::ExistingFile);
    }
}

void print_regret(std::ostream& out, const std::optional<TabularMdp>& mdp, const Policy& pi) {
    if (mdp) out << "regret " << text::format_double(regret(*mdp, pi)) << '\n';
}

void write_tables(std::ostream& out, const QSequence& f, std::size_t num_states) {
    const auto tables = tabulate(f, num_states);
    for (std::size_t h = 0; h < tables.size(); ++h) {
        out << "# f h=" << h + 1 << '\n';
        for (std::size_t x = 0; x < num_states; ++x) {
            for (std::size_t a = 0; a < tables[h].num_actions(); ++a) {
                if (a) out << ' ';
                out << text::format_double(tables[h](x, a));
            }
            out << '\n';
        }
    }
}

}  // namespace

Policy parse_policy_spec(const std::string& spec, const TabularMdp& mdp) {
    if (spec == "uniform") return Policy::uniform(mdp.num_states(), mdp.num_actions(), mdp.horizon());
    if (spec.rfind("eps-optimal:", 0) == 0) {
        const double eps = text::parse_double(std::string_view(spec).substr(12), 0);
        return epsilon_optimal_policy(mdp, eps);
    }
    if (spec.rfind("file:", 0) == 0) {
        return load_policy(spec.substr(5), mdp.num_states(), mdp.num_actions(), mdp.horizon());
    }
    throw InputError("unknown policy spec '" + spec + "' (expected uniform, eps-optimal:E or file:PATH)");
}

DataDistribution parse_mu_spec(const std::string& spec, const TabularMdp& mdp) {
    if (spec == "uniform") return DataDistribution::uniform(mdp);
    if (spec.rfind("behavior:", 0) == 0) return {occupancy(mdp, parse_policy_spec(spec.substr(9), mdp))};
    throw InputError("unknown mu spec '" + spec + "' (expected uniform or behavior:<policy>)");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Model selection for offline RL via a one-sided Bellman-error test"};
    app.name("modbe");
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    std::function<void()> action;

    // gen-data
    struct {
        std::string mdp, behavior = "uniform", mu, out;
        std::size_t n = 0;
        std::uint64_t seed = 0;
    } gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Sample an offline dataset from an MDP");
    gen_cmd->add_option("--mdp", gen.mdp, "MDP file")->required()->check(CLI::ExistingFile);
    auto* behavior_opt = gen_cmd->add_option("--behavior", gen.behavior,
                                             "Behavior policy: uniform | eps-optimal:E | file:PATH");
    gen_cmd->add_option("--mu", gen.mu, "Sample (x, a) directly from mu: uniform | behavior:<policy>")
        ->excludes(behavior_opt);
    gen_cmd->add_option("--n", gen.n, "Transitions per step")->required()->check(CLI::PositiveNumber);
    gen_cmd->add_option("--seed", gen.seed, "Random seed");
    gen_cmd->add_option("--out", gen.out, "Output dataset CSV")->required();
    gen_cmd->callback([&] {
        action = [&] {
            const auto mdp = from_flag("--mdp", [&] { return load_mdp(gen.mdp); });
            OfflineDataset data = [&] {
                if (!gen.mu.empty()) {
                    const auto mu = from_flag("--mu", [&] { return parse_mu_spec(gen.mu, mdp); });
                    auto d = generate_from_mu(mdp, mu, gen.n, gen.seed);
                    DatasetMetadata meta = d.metadata();
                    meta.mu = gen.mu;
                    meta.concentrability = concentrability(mdp, mu);
                    std::vector<std::vector<Transition>> slots;
                    for (std::size_t h = 0; h < d.horizon(); ++h) slots.emplace_back(d.slot(h).begin(), d.slot(h).end());
                    return OfflineDataset(std::move(slots), std::move(meta));
                }
                const auto pi = from_flag("--behavior", [&] { return parse_policy_spec(gen.behavior, mdp); });
                auto bd = generate_from_behavior(mdp, pi, gen.n, gen.seed);
                DatasetMetadata meta = bd.data.metadata();
                meta.mu = "behavior:" + gen.behavior;
                std::vector<std::vector<Transition>> slots;
                for (std::size_t h = 0; h < bd.data.horizon(); ++h) {
                    slots.emplace_back(bd.data.slot(h).begin(), bd.data.slot(h).end());
                }
                return OfflineDataset(std::move(slots), std::move(meta));
            }();
            auto file = open_output(gen.out);
            write_dataset(file, data);
            out << "wrote " << data.horizon() << " x " << data.per_step() << " transitions to " << gen.out << '\n';
            out << "concentrability " << text::format_double(data.metadata().concentrability) << '\n';
        };
    });

    // run-fqi
    Inputs fqi_in;
    std::size_t fqi_class = 0;
    std::string fqi_out;
    auto* fqi_cmd = app.add_subcommand("run-fqi", "Fit FQI on one class of the sequence (all data)");
    add_data_flags(fqi_cmd, fqi_in, true);
    fqi_cmd->add_option("--class", fqi_class, "1-based class index; 0 selects the largest");
    fqi_cmd->add_option("--out", fqi_out, "Write the fitted Q tables here");
    fqi_cmd->callback([&] {
        action = [&] {
            const auto in = load_inputs(fqi_in);
            const std::size_t k = fqi_class == 0 ? in.classes.size() : fqi_class;
            if (k > in.classes.size()) throw InputError("--class: index exceeds the number of classes");
            const auto& cls = in.classes[k - 1];
            const auto f = fqi(PreparedDataset(in.data, in.classes.num_states(), in.classes.num_actions(),
                                               in.classes.feature_map()),
                               cls);
            const auto pi = greedy_policy(f, in.classes.num_states());
            out << "class " << k << " (" << to_string(cls.kind()) << ", complexity "
                << text::format_double(cls.complexity()) << ")\n";
            out << "n " << in.data.per_step() << " per step, H " << in.data.horizon() << '\n';
            print_regret(out, in.mdp, pi);
            if (!fqi_out.empty()) {
                auto file = open_output(fqi_out);
                write_tables(file, f, in.classes.num_states());
            }
        };
    });

    // run-modbe
    Inputs mb_in;
    std::string mb_schedule = "practical";
    std::string mb_trace;
    auto* mb_cmd = app.add_subcommand("run-modbe", "Select a class with ModBE and report the trace");
    add_data_flags(mb_cmd, mb_in, true);
    mb_cmd->add_option("--schedule", mb_schedule, "Tolerance schedule")
        ->check(CLI::IsMember({"theoretical", "practical"}));
    mb_cmd->add_option("--trace", mb_trace, "Write the selection trace here");
    mb_cmd->callback([&] {
        action = [&] {
            const auto in = load_inputs(mb_in);
            SelectionOptions options;
            options.delta = mb_in.delta;
            options.schedule = parse_tolerance_mode(mb_schedule);
            options.seed = mb_in.seed;
            const FittedQIteration base;
            const auto trace = modbe(in.data, base, in.classes, options);
            std::size_t rejects = 0;
            for (const auto& e : trace.events) rejects += e.outcome == TestOutcome::reject;
            out << "selected_k " << trace.selected << " of " << in.classes.size() << '\n';
            out << "events " << trace.events.size() << " (" << rejects << " rejections)\n";
            out << "base_calls " << trace.base_calls << " erm_calls " << trace.erm_calls << '\n';
            out << "schedule " << to_string(trace.mode) << " seed " << trace.seed << '\n';
            print_regret(out, in.mdp, *trace.policy);
            if (!mb_trace.empty()) {
                auto file = open_output(mb_trace);
                write_trace(file, trace);
            }
        };
    });

    // run-holdout
    Inputs ho_in;
    auto* ho_cmd = app.add_subcommand("run-holdout", "Select a class by summed validation Bellman loss");
    add_data_flags(ho_cmd, ho_in, true);
    ho_cmd->callback([&] {
        action = [&] {
            const auto in = load_inputs(ho_in);
            const FittedQIteration base;
            const auto r = holdout_select(in.data, base, in.classes, ho_in.seed, ho_in.delta);
            out << "selected_k " << r.selected << " of " << in.classes.size() << '\n';
            out << "scores";
            for (double s : r.scores) out << ' ' << text::format_double(s);
            out << '\n';
            print_regret(out, in.mdp, greedy_policy(r.f, in.classes.num_states()));
        };
    });

    // diagnose
    struct {
        std::string mdp, classes, mu = "uniform", data, schedule = "practical";
        double delta = 0.1;
        std::uint64_t seed = 0;
    } dg;
    auto* dg_cmd = app.add_subcommand("diagnose", "Ground-truth diagnostics: Approx, xi, k*, C(mu), regrets");
    dg_cmd->add_option("--mdp", dg.mdp, "MDP file")->required()->check(CLI::ExistingFile);
    dg_cmd->add_option("--classes", dg.classes, "Nested class description file")->required()->check(CLI::ExistingFile);
    dg_cmd->add_option("--mu", dg.mu, "Data distribution: uniform | behavior:<policy>");
    dg_cmd->add_option("--data", dg.data, "Optional dataset; adds per-method regrets")->check(CLI::ExistingFile);
    dg_cmd->add_option("--delta", dg.delta, "Failure probability in (0, 1/e]");
    dg_cmd->add_option("--seed", dg.seed, "Seed for the train/validation split");
    dg_cmd->add_option("--schedule", dg.schedule, "ModBE tolerance schedule")
        ->check(CLI::IsMember({"theoretical", "practical"}));
    dg_cmd->callback([&] {
        action = [&] {
            const auto mdp = from_flag("--mdp", [&] { return load_mdp(dg.mdp); });
            const auto classes = from_flag("--classes", [&] { return load_classes(dg.classes); });
            const auto mu = from_flag("--mu", [&] { return parse_mu_spec(dg.mu, mdp); });
            auto report = diagnose(mdp, classes, mu);
            if (!dg.data.empty()) {
                const auto in = load_inputs({dg.data, dg.classes, dg.mdp, dg.delta, dg.seed});
                const FittedQIteration base;
                const auto split = prepare_split(in.data, classes, dg.seed);
                const auto fits = fit_all(split, base, classes, dg.delta);
                SelectionOptions options;
                options.delta = dg.delta;
                options.schedule = parse_tolerance_mode(dg.schedule);
                options.seed = dg.seed;
                const auto trace = modbe(split, base, classes, options);
                report.methods.push_back({"modbe", trace.selected, regret(mdp, *trace.policy)});
                const auto ho = holdout_select(split, fits);
                report.methods.push_back(
                    {"holdout", ho.selected, regret(mdp, greedy_policy(ho.f, mdp.num_states()))});
                const auto oracle = oracle_select(fits, mdp);
                report.methods.push_back({"oracle", oracle.selected, oracle.scores[oracle.selected - 1]});
                for (std::size_t k = 0; k < fits.size(); ++k) {
                    report.methods.push_back(
                        {"fixed-" + std::to_string(k + 1), k + 1, oracle.scores[k]});
                }
            }
            write_report(out, report);
        };
    });

    // bench
    struct {
        std::string config, out;
        std::size_t jobs = 1;
    } bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark sweep and write the results CSV");
    bench_cmd->add_option("--config", bench.config, "Sweep config (key = value)")->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--out", bench.out, "Results CSV; overrides the config's output key");
    bench_cmd->add_option("--jobs", bench.jobs, "Parallel (n, seed) cells")->check(CLI::PositiveNumber);
    bench_cmd->callback([&] {
        action = [&] {
            auto config = from_flag("--config", [&] { return load_config(bench.config); });
            if (!bench.out.empty()) config.output = bench.out;
            if (config.output.empty()) throw InputError("--out: no output path (set --out or the output key)");
            const auto rows = from_flag("--config", [&] { return run_experiment(config, bench.jobs); });
            auto file = open_output(config.output.string());
            write_results(file, rows);
            write_summary(out, summarize(rows));
            out << "wrote " << rows.size() << " rows to " << config.output.string() << '\n';
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }
    try {
        action();
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

}  // namespace modbe::cli
