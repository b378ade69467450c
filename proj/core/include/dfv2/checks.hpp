#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dfv2 {

enum class CheckSuite { Priors, Attention, Gradients, All };

CheckSuite parse_check_suite(std::string_view name);

struct CheckOptions {
    std::uint64_t seed = 7;
    /// Replaces every decay rate in the priors suite. Used to confirm the
    /// suite notices an out-of-range rate.
    std::optional<double> inject_beta;
};

/// Outcome of one invariant over all of its generated cases.
struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = true;
    /// Largest error (or violation magnitude) seen, compared against tolerance.
    double worst = 0.0;
    double tolerance = 0.0;
    std::size_t cases = 0;
    /// Seed of the first failing case.
    std::optional<std::uint64_t> counterexample;
    std::string detail;
};

/// Priors: D, S and G are symmetric, nonnegative and zero on the diagonal for
/// every grid up to 6x6 and 500 random larger grids, axial priors are slices of
/// the full prior, and decay matrices lie in (0, 1] with ones on the diagonal.
std::vector<CheckResult> check_priors(const CheckOptions& options);

/// Attention: beta = 1 and G = 0 both reduce to vanilla attention; decay
/// never raises a weight and row sums stay in (0, 1].
std::vector<CheckResult> check_attention(const CheckOptions& options);

/// Gradients: finite-difference agreement for every primitive op, for
/// multi-head geometry attention in both layouts, for one Nano block, and
/// end to end through the Nano model.
std::vector<CheckResult> check_gradients(const CheckOptions& options);

std::vector<CheckResult> run_checks(CheckSuite suite, const CheckOptions& options);

} // namespace dfv2
