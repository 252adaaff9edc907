#include "modbe/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <thread>

#include "modbe/error.hpp"
#include "modbe/eval.hpp"
#include "modbe/text.hpp"

namespace modbe {
namespace {

class Stopwatch {
public:
    explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        if (!enabled_) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

bool parse_bool(std::string_view v, std::size_t line) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw InputError("expected on or off, got '" + std::string(v) + "'", line);
}

std::vector<std::string_view> list_items(std::string_view value) {
    std::vector<std::string_view> out;
    for (auto item : text::split(value, ',')) {
        item = text::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::size_t fixed_index(std::string_view method) {
    constexpr std::string_view prefix = "fixed-";
    if (method.substr(0, prefix.size()) != prefix || method == "fixed-all") return 0;
    const auto rest = method.substr(prefix.size());
    if (rest.empty() || !std::all_of(rest.begin(), rest.end(), [](char c) { return c >= '0' && c <= '9'; })) return 0;
    return static_cast<std::size_t>(std::stoull(std::string(rest)));
}

bool known_method(std::string_view m) {
    return m == "modbe" || m == "holdout" || m == "oracle" || m == "fixed-all" || fixed_index(m) > 0;
}

/// Runs `count` independent cells on up to `jobs` threads; cell i's rows land in slot i.
template <typename Cell>
std::vector<ResultRow> run_cells(std::size_t count, std::size_t jobs, Cell cell) {
    std::vector<std::vector<ResultRow>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                slots[i] = cell(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<ResultRow> rows;
    for (auto& s : slots) rows.insert(rows.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    return rows;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_list.empty()) throw InputError("n_list is empty");
    for (auto n : n_list) {
        if (n < kMinSplitSamples) throw InputError("every n must be at least " + std::to_string(kMinSplitSamples));
    }
    if (seeds.empty()) throw InputError("seeds is empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw InputError("seeds must be distinct");
    }
    if (methods.empty()) throw InputError("methods is empty");
    for (const auto& m : methods) {
        if (!known_method(m)) throw InputError("unknown method '" + m + "'");
    }
    check_delta(delta);
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("gamma must lie in [0, 1)");
    if (cb_eval_contexts == 0) throw InputError("cb_eval_contexts must be positive");
}

ExperimentConfig read_config(std::istream& in) {
    ExperimentConfig config;
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string_view s = raw;
        if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
        s = text::trim(s);
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string_view::npos) throw InputError("expected key = value", line);
        const auto key = text::trim(s.substr(0, eq));
        const auto value = text::trim(s.substr(eq + 1));
        if (key == "instance") {
            config.instance = std::string(value);
        } else if (key == "n_list") {
            config.n_list.clear();
            for (auto item : list_items(value)) config.n_list.push_back(text::parse_index(item, line));
        } else if (key == "seeds") {
            config.seeds.clear();
            if (const auto dots = value.find(".."); dots != std::string_view::npos) {
                const auto lo = text::parse_index(text::trim(value.substr(0, dots)), line);
                const auto hi = text::parse_index(text::trim(value.substr(dots + 2)), line);
                if (hi < lo) throw InputError("empty seed range", line);
                for (auto s2 = lo; s2 <= hi; ++s2) config.seeds.push_back(s2);
            } else {
                for (auto item : list_items(value)) config.seeds.push_back(text::parse_index(item, line));
            }
        } else if (key == "methods") {
            config.methods.clear();
            for (auto item : list_items(value)) {
                if (!known_method(item)) throw InputError("unknown method '" + std::string(item) + "'", line);
                config.methods.emplace_back(item);
            }
        } else if (key == "schedule") {
            try {
                config.schedule = parse_tolerance_mode(value);
            } catch (const InputError& e) {
                throw InputError(e.what(), line);
            }
        } else if (key == "delta") {
            config.delta = text::parse_double(value, line);
        } else if (key == "gamma") {
            config.gamma = text::parse_double(value, line);
        } else if (key == "output") {
            config.output = std::string(value);
        } else if (key == "timing") {
            config.timing = parse_bool(value, line);
        } else if (key == "cb_noise") {
            config.cb_noise = text::parse_double(value, line);
        } else if (key == "cb_theta_norm") {
            config.cb_theta_norm = text::parse_double(value, line);
        } else if (key == "cb_eval_contexts") {
            config.cb_eval_contexts = text::parse_index(value, line);
        } else if (key == "cb_instance_seed") {
            config.cb_instance_seed = text::parse_index(value, line);
        } else {
            throw InputError("unknown key '" + std::string(key) + "'", line);
        }
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path.string());
    return read_config(in);
}

std::vector<std::string> expand_methods(std::span<const std::string> methods, std::size_t num_classes) {
    std::vector<std::string> out;
    for (const auto& m : methods) {
        if (m == "fixed-all") {
            for (std::size_t k = 1; k <= num_classes; ++k) out.push_back("fixed-" + std::to_string(k));
            continue;
        }
        if (const auto k = fixed_index(m); k > num_classes) {
            throw InputError("method " + m + " exceeds the " + std::to_string(num_classes) + " classes");
        }
        out.push_back(m);
    }
    return out;
}

std::vector<ResultRow> run_rl_experiment(const ExperimentConfig& config, const TabularInstance& instance,
                                         std::size_t jobs) {
    config.validate();
    const auto methods = expand_methods(config.methods, instance.classes.size());
    const FittedQIteration base;
    const std::size_t cells = config.n_list.size() * config.seeds.size();
    return run_cells(cells, jobs, [&](std::size_t cell) {
        const std::size_t n = config.n_list[cell / config.seeds.size()];
        const std::uint64_t seed = config.seeds[cell % config.seeds.size()];
        const auto& mdp = instance.mdp;
        const auto& classes = instance.classes;
        const auto data = generate_from_mu(mdp, instance.mu, n, seed);
        const auto split = prepare_split(data, classes, seed);

        std::vector<QSequence> fits;
        std::vector<double> fit_ms;
        for (const auto& cls : classes) {
            const Stopwatch clock(config.timing);
            fits.push_back(base.fit(split.train, cls, config.delta));
            fit_ms.push_back(clock.elapsed_ms());
        }
        double all_fits_ms = 0.0;
        for (double t : fit_ms) all_fits_ms += t;
        auto policy_regret = [&](const QSequence& f) { return regret(mdp, greedy_policy(f, mdp.num_states())); };

        std::vector<ResultRow> rows;
        for (const auto& m : methods) {
            ResultRow row{n, seed, m, 0, 0.0, 0.0};
            const Stopwatch clock(config.timing);
            if (m == "modbe") {
                SelectionOptions options;
                options.delta = config.delta;
                options.schedule = config.schedule;
                options.seed = seed;
                const auto trace = modbe(split, base, classes, options);
                row.selected_k = trace.selected;
                row.regret = regret(mdp, *trace.policy);
                row.runtime_ms = clock.elapsed_ms();
            } else if (m == "holdout") {
                const auto r = holdout_select(split, fits);
                row.selected_k = r.selected;
                row.regret = policy_regret(r.f);
                row.runtime_ms = all_fits_ms + clock.elapsed_ms();
            } else if (m == "oracle") {
                const auto r = oracle_select(fits, mdp);
                row.selected_k = r.selected;
                row.regret = r.scores[r.selected - 1];
                row.runtime_ms = all_fits_ms + clock.elapsed_ms();
            } else {
                const std::size_t k = fixed_index(m);
                row.selected_k = k;
                row.regret = policy_regret(fits[k - 1]);
                row.runtime_ms = fit_ms[k - 1] + clock.elapsed_ms();
            }
            rows.push_back(std::move(row));
        }
        return rows;
    });
}

CBSpec cb_spec(const ExperimentConfig& config) {
    CBSpec spec;
    spec.noise = config.cb_noise;
    spec.theta_norm = config.cb_theta_norm;
    spec.instance_seed = config.cb_instance_seed;
    return spec;
}

std::vector<ResultRow> run_cb_experiment(const ExperimentConfig& config, const CBInstance& instance,
                                         std::size_t jobs) {
    config.validate();
    const auto classes = instance.classes();
    const auto methods = expand_methods(config.methods, classes.size());
    constexpr std::size_t kIterations = 50;
    const std::size_t cells = config.n_list.size() * config.seeds.size();
    return run_cells(cells, jobs, [&](std::size_t cell) {
        const std::size_t n = config.n_list[cell / config.seeds.size()];
        const std::uint64_t seed = config.seeds[cell % config.seeds.size()];
        const auto data = instance.sample(n, seed);
        const auto problem = prepare_flat(data, 0, instance.spec().actions, instance.features(), seed);

        std::vector<QFunction> fits;
        std::vector<double> fit_ms;
        for (const auto& cls : classes) {
            const Stopwatch clock(config.timing);
            fits.push_back(fitted_q_discounted(problem.train_design, problem.train, cls, config.gamma, kIterations));
            fit_ms.push_back(clock.elapsed_ms());
        }
        const Stopwatch eval_clock(config.timing);
        const auto eval = instance.evaluate(fits, config.cb_eval_contexts, seed);
        const double eval_ms = eval_clock.elapsed_ms() / static_cast<double>(fits.size());
        double all_fits_ms = 0.0;
        for (double t : fit_ms) all_fits_ms += t;

        std::vector<ResultRow> rows;
        for (const auto& m : methods) {
            ResultRow row{n, seed, m, 0, 0.0, 0.0};
            const Stopwatch clock(config.timing);
            if (m == "modbe") {
                DiscountedOptions options;
                options.selection.delta = config.delta;
                options.selection.schedule = config.schedule;
                options.selection.seed = seed;
                options.gamma = config.gamma;
                options.iterations = kIterations;
                // The final fit is the deterministic base run on the selected class, i.e. fits[k - 1].
                row.selected_k = modbe_discounted(problem, classes, options).selected;
                row.runtime_ms = clock.elapsed_ms() + eval_ms;
            } else if (m == "holdout") {
                std::size_t best = 0;
                double best_score = kInfinity;
                for (std::size_t k = 0; k < fits.size(); ++k) {
                    const double score = holdout_score_discounted(fits[k], problem, config.gamma);
                    if (score < best_score) {
                        best_score = score;
                        best = k;
                    }
                }
                row.selected_k = best + 1;
                row.runtime_ms = all_fits_ms + clock.elapsed_ms() + eval_ms;
            } else if (m == "oracle") {
                const auto it = std::min_element(eval.regret.begin(), eval.regret.end());
                row.selected_k = static_cast<std::size_t>(it - eval.regret.begin()) + 1;
                row.runtime_ms = all_fits_ms + eval_ms * static_cast<double>(fits.size());
            } else {
                row.selected_k = fixed_index(m);
                row.runtime_ms = fit_ms[row.selected_k - 1] + eval_ms;
            }
            row.regret = eval.regret[row.selected_k - 1];
            rows.push_back(std::move(row));
        }
        return rows;
    });
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config, std::size_t jobs) {
    if (config.instance == "cb") return run_cb_experiment(config, CBInstance(cb_spec(config)), jobs);
    return run_rl_experiment(config, tabular_instance(config.instance), jobs);
}

void write_results(std::ostream& out, std::span<const ResultRow> rows) {
    out << "n,seed,method,selected_k,regret,runtime_ms\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.seed << ',' << r.method << ',' << r.selected_k << ',' << text::format_double(r.regret)
            << ',' << text::format_double(r.runtime_ms) << '\n';
    }
}

std::vector<SummaryRow> summarize(std::span<const ResultRow> rows) {
    std::vector<SummaryRow> out;
    std::map<std::pair<std::size_t, std::string>, std::size_t> where;
    std::vector<double> sum_sq;
    for (const auto& r : rows) {
        auto [it, fresh] = where.try_emplace({r.n, r.method}, out.size());
        if (fresh) {
            out.push_back({r.n, r.method});
            sum_sq.push_back(0.0);
        }
        auto& s = out[it->second];
        ++s.count;
        s.mean_regret += r.regret;
        s.mean_k += static_cast<double>(r.selected_k);
        sum_sq[it->second] += r.regret * r.regret;
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& s = out[i];
        const double c = static_cast<double>(s.count);
        s.mean_regret /= c;
        s.mean_k /= c;
        const double var = s.count > 1 ? std::max(0.0, (sum_sq[i] - c * s.mean_regret * s.mean_regret) / (c - 1.0)) : 0.0;
        s.stderr_regret = std::sqrt(var / c);
    }
    return out;
}

void write_summary(std::ostream& out, std::span<const SummaryRow> summary) {
    out << std::left << std::setw(8) << "n" << std::setw(12) << "method" << std::setw(8) << "runs" << std::setw(14)
        << "mean_regret" << std::setw(12) << "stderr" << "mean_k\n";
    const auto flags = out.flags();
    for (const auto& s : summary) {
        out << std::setw(8) << s.n << std::setw(12) << s.method << std::setw(8) << s.count << std::fixed
            << std::setprecision(5) << std::setw(14) << s.mean_regret << std::setw(12) << s.stderr_regret
            << std::setprecision(2) << s.mean_k << '\n';
        out.flags(flags);
    }
}

}  // namespace modbe
