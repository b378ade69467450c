#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dfv2/tape.hpp"

namespace dfv2 {

/// Scalar-valued function of tensors recorded on a tape. The function must
/// read its inputs through the captured/passed handles so that perturbing an
/// input's data changes the result.
using ScalarFn = std::function<TensorD(Tape<double>&)>;

inline constexpr double kGradcheckStep = 1e-5;

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    /// Index into the checked tensor list and flat element of the worst entry.
    std::size_t worst_tensor = 0;
    std::size_t worst_element = 0;
};

/// Compares reverse-mode gradients of `f` against central differences for
/// every element of every tensor in `inputs`. Error per element is
/// |analytic - numeric| / max(1, |numeric|).
GradcheckReport gradcheck(const ScalarFn& f, std::vector<TensorD> inputs, double eps = kGradcheckStep);

/// As above, but only `per_tensor` randomly chosen elements of each tensor are
/// perturbed (all of them when the tensor is smaller). Used for whole models.
GradcheckReport gradcheck_sampled(const ScalarFn& f, std::vector<TensorD> inputs, std::size_t per_tensor,
                                  std::uint64_t seed, double eps = kGradcheckStep);

/// Single-input convenience form.
double gradcheck(const std::function<TensorD(Tape<double>&, const TensorD&)>& f, TensorD x,
                 double eps = kGradcheckStep);

} // namespace dfv2
