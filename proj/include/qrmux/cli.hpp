#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace qrmux::cli {

enum ExitCode : int { kOk = 0, kInvalidArguments = 1, kNumericalDegeneracy = 2 };

/// "0,1,2", "0..4" or a mix such as "0..2,4".
std::vector<int> parse_int_list(const std::string& text);
/// "start:stop:step" (inclusive) or a comma list.
std::vector<double> parse_real_range(const std::string& text);
/// "paper" or "w=tau,w=tau,...".
std::map<int, double> parse_tau_table(const std::string& text);

/// Coherence times (time-bins) used for the published key-rate curves.
const std::map<int, double>& paper_tau_table();

/// Entry point shared by the executable and the tests; CSV goes to `out`
/// unless --out is given.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qrmux::cli
