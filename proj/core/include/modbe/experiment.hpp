#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "modbe/instances.hpp"
#include "modbe/selection.hpp"

namespace modbe {

/// Benchmark sweep description. Plain-text `key = value` lines, `#` comments:
///   instance   chain4 | never-overshoot | variance-bias | cb
///   n_list     comma-separated sample sizes (per step), each >= 5
///   seeds      comma-separated list, or a range `a..b`; must be distinct
///   methods    modbe, holdout, oracle, fixed-K, fixed-all
///   schedule   practical (default) | theoretical
///   delta      failure probability, default 0.1
///   gamma      discount for the bandit family, default 0
///   output     results CSV path
///   timing     on | off (default off; off writes runtime_ms = 0 so runs are byte-stable)
///   cb_noise, cb_theta_norm, cb_eval_contexts, cb_instance_seed   bandit knobs
struct ExperimentConfig {
    std::string instance = "chain4";
    std::vector<std::size_t> n_list;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> methods{"modbe", "holdout", "oracle", "fixed-all"};
    ToleranceMode schedule = ToleranceMode::practical;
    double delta = 0.1;
    double gamma = 0.0;
    std::filesystem::path output;
    bool timing = false;
    double cb_noise = CBSpec{}.noise;
    double cb_theta_norm = CBSpec{}.theta_norm;
    std::size_t cb_eval_contexts = 10000;
    std::uint64_t cb_instance_seed = CBSpec{}.instance_seed;

    /// Throws InputError on empty sweeps, n < 5, duplicate seeds or unknown methods.
    void validate() const;
};

ExperimentConfig read_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResultRow {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string method;
    std::size_t selected_k = 0;
    double regret = 0.0;
    double runtime_ms = 0.0;
};

/// Methods with `fixed-all` expanded against M classes.
std::vector<std::string> expand_methods(std::span<const std::string> methods, std::size_t num_classes);

/// One row per (n, seed, method); cells run on `jobs` threads and rows come
/// out in (n, seed, method) config order for any job count.
std::vector<ResultRow> run_rl_experiment(const ExperimentConfig& config, const TabularInstance& instance,
                                         std::size_t jobs = 1);
std::vector<ResultRow> run_cb_experiment(const ExperimentConfig& config, const CBInstance& instance,
                                         std::size_t jobs = 1);
/// Dispatches on config.instance.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config, std::size_t jobs = 1);

CBSpec cb_spec(const ExperimentConfig& config);

/// Header `n,seed,method,selected_k,regret,runtime_ms`.
void write_results(std::ostream& out, std::span<const ResultRow> rows);

struct SummaryRow {
    std::size_t n = 0;
    std::string method;
    std::size_t count = 0;
    double mean_regret = 0.0;
    double stderr_regret = 0.0;
    double mean_k = 0.0;
};

/// Per-(n, method) mean and standard error, in first-appearance order.
std::vector<SummaryRow> summarize(std::span<const ResultRow> rows);
void write_summary(std::ostream& out, std::span<const SummaryRow> summary);

}  // namespace modbe
