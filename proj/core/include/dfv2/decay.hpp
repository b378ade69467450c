#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dfv2 {

/// How per-head decay rates are chosen. Rates are hyperparameters and are
/// never trained.
struct DecayStrategy {
    enum class Kind { Fixed, Linear };

    Kind kind = Kind::Linear;
    double lo = 0.75;  // Fixed: the rate itself
    double hi = 1.0;   // Linear only: exclusive upper end

    static DecayStrategy fixed(double beta) { return {Kind::Fixed, beta, beta}; }
    static DecayStrategy linear(double lo, double hi) { return {Kind::Linear, lo, hi}; }

    /// "fixed:0.5" or "linear:0.75:1.0"
    static DecayStrategy parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const DecayStrategy&) const = default;
};

struct DecaySchedule {
    DecayStrategy strategy;
    std::vector<double> rates;  // one per head

    std::size_t heads() const noexcept { return rates.size(); }
};

/// Fixed: every head gets the same rate in (0, 1].
/// Linear: rate_h = lo + (hi - lo) * h / n for h = 0..n-1, requiring 0 < lo < hi <= 1.
DecaySchedule sample_decay_rates(const DecayStrategy& strategy, std::size_t n_heads);

} // namespace dfv2
