#include "dfv2/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dfv2 {

namespace {

double evaluate(const ScalarFn& f) {
    Tape<double> tape(false);
    return f(tape).item();
}

GradcheckReport run(const ScalarFn& f, std::vector<TensorD>& inputs,
                    const std::vector<std::vector<std::size_t>>& elements, double eps) {
    std::vector<bool> saved_flags;
    for (auto& t : inputs) {
        saved_flags.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.clear_grad();
    }
    {
        Tape<double> tape;
        auto loss = f(tape);
        tape.backward(loss);
    }

    GradcheckReport report;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        std::vector<double> analytic(t.grad().begin(), t.grad().end());
        auto data = t.mutable_data();
        for (std::size_t e : elements[ti]) {
            const double orig = data[e];
            data[e] = orig + eps;
            const double up = evaluate(f);
            data[e] = orig - eps;
            const double down = evaluate(f);
            data[e] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double err = std::abs(analytic[e] - numeric) / std::max(1.0, std::abs(numeric));
            ++report.checked;
            if (err > report.max_rel_error || !std::isfinite(err)) {
                report.max_rel_error = std::isfinite(err) ? err : INFINITY;
                report.worst_tensor = ti;
                report.worst_element = e;
            }
        }
    }
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        inputs[ti].clear_grad();
        inputs[ti].set_requires_grad(saved_flags[ti]);
    }
    return report;
}

} // namespace

GradcheckReport gradcheck(const ScalarFn& f, std::vector<TensorD> inputs, double eps) {
    std::vector<std::vector<std::size_t>> elements;
    for (const auto& t : inputs) {
        std::vector<std::size_t> all(t.numel());
        std::iota(all.begin(), all.end(), std::size_t{0});
        elements.push_back(std::move(all));
    }
    return run(f, inputs, elements, eps);
}

GradcheckReport gradcheck_sampled(const ScalarFn& f, std::vector<TensorD> inputs, std::size_t per_tensor,
                                  std::uint64_t seed, double eps) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> elements;
    for (const auto& t : inputs) {
        std::vector<std::size_t> all(t.numel());
        std::iota(all.begin(), all.end(), std::size_t{0});
        if (all.size() > per_tensor) {
            std::shuffle(all.begin(), all.end(), rng);
            all.resize(per_tensor);
            std::sort(all.begin(), all.end());
        }
        elements.push_back(std::move(all));
    }
    return run(f, inputs, elements, eps);
}

double gradcheck(const std::function<TensorD(Tape<double>&, const TensorD&)>& f, TensorD x, double eps) {
    ScalarFn wrapped = [&f, x](Tape<double>& tape) { return f(tape, x); };
    return gradcheck(wrapped, {x}, eps).max_rel_error;
}

} // namespace dfv2
