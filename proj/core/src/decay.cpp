#include "dfv2/decay.hpp"

#include <sstream>

#include "dfv2/errors.hpp"

namespace dfv2 {

namespace {

double parse_double(std::string_view s, std::string_view context) {
    try {
        std::size_t used = 0;
        const std::string str(s);
        const double v = std::stod(str, &used);
        if (used != str.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParameterError("invalid number '" + std::string(s) + "' in decay strategy '" + std::string(context) + "'");
    }
}

} // namespace

DecayStrategy DecayStrategy::parse(std::string_view text) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(':', start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (parts[0] == "fixed" && parts.size() == 2) return fixed(parse_double(parts[1], text));
    if (parts[0] == "linear" && parts.size() == 3) return linear(parse_double(parts[1], text), parse_double(parts[2], text));
    throw ParameterError("decay strategy must be 'fixed:<beta>' or 'linear:<lo>:<hi>', got '" + std::string(text) + "'");
}

std::string DecayStrategy::to_string() const {
    std::ostringstream os;
    os.precision(17);
    if (kind == Kind::Fixed) {
        os << "fixed:" << lo;
    } else {
        os << "linear:" << lo << ":" << hi;
    }
    return os.str();
}

DecaySchedule sample_decay_rates(const DecayStrategy& strategy, std::size_t n_heads) {
    if (n_heads == 0) throw ParameterError("sample_decay_rates: need at least one head");
    DecaySchedule sched{strategy, {}};
    sched.rates.reserve(n_heads);
    if (strategy.kind == DecayStrategy::Kind::Fixed) {
        if (!(strategy.lo > 0.0 && strategy.lo <= 1.0)) {
            throw ParameterError("fixed decay rate must lie in (0, 1], got " + std::to_string(strategy.lo));
        }
        sched.rates.assign(n_heads, strategy.lo);
        return sched;
    }
    if (!(strategy.lo > 0.0 && strategy.lo < strategy.hi && strategy.hi <= 1.0)) {
        throw ParameterError("linear decay range must satisfy 0 < lo < hi <= 1, got [" + std::to_string(strategy.lo) +
                             ", " + std::to_string(strategy.hi) + ")");
    }
    const double n = static_cast<double>(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        sched.rates.push_back(strategy.lo + (strategy.hi - strategy.lo) * static_cast<double>(h) / n);
    }
    return sched;
}

} // namespace dfv2
