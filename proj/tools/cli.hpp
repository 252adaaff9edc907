#pragma once

#include <iosfwd>
#include <string>

#include "modbe/mdp.hpp"

namespace modbe::cli {

/// Runs the `modbe` command line. Returns the process exit code:
/// 0 on success, 1 on invalid flags or input files, 2 on runtime failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// `uniform`, `eps-optimal:E` or `file:PATH`.
Policy parse_policy_spec(const std::string& spec, const TabularMdp& mdp);
/// `uniform` (uniform over state-action pairs at every step) or `behavior:<policy spec>`.
DataDistribution parse_mu_spec(const std::string& spec, const TabularMdp& mdp);

}  // namespace modbe::cli
