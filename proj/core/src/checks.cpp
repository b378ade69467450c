#include "dfv2/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>

#include "dfv2/attention.hpp"
#include "dfv2/gradcheck.hpp"
#include "dfv2/model.hpp"
#include "dfv2/ops.hpp"
#include "dfv2/synth.hpp"

namespace dfv2 {

namespace {

constexpr std::size_t kExhaustiveGridMax = 6;
constexpr std::size_t kRandomGrids = 500;
constexpr std::int64_t kRandomGridMin = 7;
constexpr std::int64_t kRandomGridMax = 20;
constexpr double kSliceTolerance = 1e-12;
constexpr std::size_t kEquivalenceInstances = 100;
constexpr double kEquivalenceTolerance = 1e-12;
constexpr std::size_t kBoundInstances = 1000;
// Softmax rows may exceed 1 by rounding alone.
constexpr double kRowSumSlack = 1e-12;
constexpr double kOpTolerance = 1e-4;
constexpr double kModelTolerance = 1e-3;
constexpr std::size_t kModelSamplesPerTensor = 3;
constexpr std::size_t kModelInputSize = 32;

// Accumulates one invariant across cases and remembers the first failing seed.
class Tracker {
public:
    Tracker(std::string suite, std::string name, double tolerance) {
        r_.suite = std::move(suite);
        r_.name = std::move(name);
        r_.tolerance = tolerance;
    }

    void observe(double error, std::uint64_t seed, std::string detail = {}) {
        ++r_.cases;
        if (std::isnan(error)) error = INFINITY;
        r_.worst = std::max(r_.worst, error);
        if (error > r_.tolerance) fail(seed, std::move(detail));
    }

    void fail(std::uint64_t seed, std::string detail) {
        if (r_.passed) {
            r_.counterexample = seed;
            r_.detail = std::move(detail);
        }
        r_.passed = false;
    }

    void error(std::uint64_t seed, std::string detail) {
        ++r_.cases;
        r_.worst = INFINITY;
        fail(seed, std::move(detail));
    }

    CheckResult result() const { return r_; }

private:
    CheckResult r_;
};

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::uint64_t case_seed(const CheckOptions& o, std::uint64_t salt, std::size_t i) {
    return o.seed * 1'000'003ull + salt * 100'000ull + i;
}

FusionMemory<double> random_memory(Rng& rng, FusionMode mode) {
    auto m = FusionMemory<double>::make(mode, rng.uniform(-2.0, 2.0), rng.uniform(-0.5, 0.5));
    if (mode == FusionMode::Conv) m.bias = TensorD::scalar(rng.uniform(-0.5, 0.5), true);
    return m;
}

struct MatrixFlaws {
    double asymmetry = 0.0;
    double negativity = 0.0;
    double diagonal = 0.0;
};

MatrixFlaws inspect(const TensorD& m) {
    MatrixFlaws f;
    const std::size_t n = m.dim(0);
    for (std::size_t p = 0; p < n; ++p) {
        f.diagonal = std::max(f.diagonal, std::abs(m.at(p, p)));
        for (std::size_t q = 0; q < n; ++q) {
            f.asymmetry = std::max(f.asymmetry, std::abs(m.at(p, q) - m.at(q, p)));
            f.negativity = std::max(f.negativity, -m.at(p, q));
        }
    }
    return f;
}

double slice_error(const GeometryPrior<double>& prior) {
    const std::size_t h = prior.grid.rows, w = prior.grid.cols;
    double err = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t p = i * w + j;
            for (std::size_t jj = 0; jj < w; ++jj) {
                err = std::max(err, std::abs(prior.gx.at(p, jj) - prior.g.at(p, i * w + jj)));
            }
            for (std::size_t ii = 0; ii < h; ++ii) {
                err = std::max(err, std::abs(prior.gy.at(p, ii) - prior.g.at(p, ii * w + j)));
            }
        }
    }
    return err;
}

// 0 when every entry is in (0, 1] and the diagonal is exactly 1.
double decay_violation(const TensorD& m) {
    double worst = 0.0;
    for (std::size_t p = 0; p < m.dim(0); ++p) {
        worst = std::max(worst, std::abs(m.at(p, p) - 1.0));
        for (std::size_t q = 0; q < m.dim(1); ++q) {
            const double v = m.at(p, q);
            if (!(v > 0.0)) return INFINITY;
            worst = std::max(worst, v - 1.0);
        }
    }
    return worst;
}

double max_abs_diff(const TensorD& a, const TensorD& b) {
    if (a.shape() != b.shape()) return INFINITY;
    double err = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
    return err;
}

constexpr std::array<FusionMode, 4> kFusionModes{FusionMode::Memory, FusionMode::Addition, FusionMode::Hadamard,
                                                 FusionMode::Conv};

// Random instance for the attention properties.
struct AttentionCase {
    TensorD q, k, v, g;
    double beta = 1.0;
};

AttentionCase random_attention_case(std::uint64_t seed) {
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(rng.integer(1, 24));
    const auto d = static_cast<std::size_t>(rng.integer(1, 8));
    AttentionCase c;
    c.q = rng.uniform_tensor<double>({n, d}, -2.0, 2.0);
    c.k = rng.uniform_tensor<double>({n, d}, -2.0, 2.0);
    c.v = rng.uniform_tensor<double>({n, d}, -2.0, 2.0);
    c.g = rng.uniform_tensor<double>({n, n}, 0.0, 10.0);
    c.beta = rng.uniform(0.3, 1.0);
    return c;
}

// sum(out * r) for a fixed random r, so every output element carries weight.
TensorD weighted_sum(Tape<double>& tape, const TensorD& out, const TensorD& r) {
    return ops::sum(tape, ops::mul(tape, out, r));
}

TensorD probe_for(const TensorD& out, Rng& rng) {
    return rng.uniform_tensor<double>(out.shape(), -1.0, 1.0);
}

// Tensor with entries bounded away from zero, for ops with a kink at 0.
TensorD away_from_zero(Rng& rng, Shape shape) {
    auto t = rng.uniform_tensor<double>(std::move(shape), 0.2, 1.0);
    for (auto& v : t.mutable_data()) {
        if (rng.bernoulli(0.5)) v = -v;
    }
    return t;
}

struct GradCase {
    std::string name;
    std::vector<TensorD> inputs;
    std::function<TensorD(Tape<double>&, const std::vector<TensorD>&)> fn;
};

std::vector<GradCase> primitive_cases(Rng& rng) {
    auto u = [&rng](Shape s) { return rng.uniform_tensor<double>(std::move(s), -1.0, 1.0); };
    using In = const std::vector<TensorD>&;
    std::vector<GradCase> cases;
    cases.push_back({"matmul", {u({3, 4}), u({4, 2})}, [](Tape<double>& t, In x) { return ops::matmul(t, x[0], x[1]); }});
    cases.push_back({"bmm", {u({2, 3, 4}), u({2, 4, 5})}, [](Tape<double>& t, In x) { return ops::bmm(t, x[0], x[1]); }});
    cases.push_back({"bmm_transposed", {u({2, 3, 4}), u({2, 5, 4})},
                     [](Tape<double>& t, In x) { return ops::bmm(t, x[0], x[1], true); }});
    cases.push_back({"transpose", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::transpose(t, x[0]); }});
    cases.push_back({"swap_leading", {u({2, 3, 4})}, [](Tape<double>& t, In x) { return ops::swap_leading(t, x[0]); }});
    cases.push_back({"reshape", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::reshape(t, x[0], {2, 6}); }});
    cases.push_back({"add", {u({3, 4}), u({3, 4})}, [](Tape<double>& t, In x) { return ops::add(t, x[0], x[1]); }});
    cases.push_back({"sub", {u({3, 4}), u({3, 4})}, [](Tape<double>& t, In x) { return ops::sub(t, x[0], x[1]); }});
    cases.push_back({"mul", {u({3, 4}), u({3, 4})}, [](Tape<double>& t, In x) { return ops::mul(t, x[0], x[1]); }});
    cases.push_back({"scale", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::scale(t, x[0], 0.7); }});
    cases.push_back({"scale_by", {u({1}), u({3, 4})}, [](Tape<double>& t, In x) { return ops::scale_by(t, x[0], x[1]); }});
    cases.push_back({"abs", {away_from_zero(rng, {3, 4})}, [](Tape<double>& t, In x) { return ops::abs(t, x[0]); }});
    cases.push_back({"relu", {away_from_zero(rng, {3, 4})}, [](Tape<double>& t, In x) { return ops::relu(t, x[0]); }});
    cases.push_back({"gelu", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::gelu(t, x[0]); }});
    cases.push_back({"exp_decay", {rng.uniform_tensor<double>({3, 4}, 0.1, 3.0)},
                     [](Tape<double>& t, In x) { return ops::exp_decay(t, x[0], 0.8); }});
    cases.push_back({"add_bias", {u({3, 4}), u({4})}, [](Tape<double>& t, In x) { return ops::add_bias(t, x[0], x[1]); }});
    cases.push_back({"linear", {u({3, 4}), u({4, 5}), u({5})},
                     [](Tape<double>& t, In x) { return ops::linear(t, x[0], x[1], x[2]); }});
    cases.push_back({"softmax_rows", {u({3, 5})}, [](Tape<double>& t, In x) { return ops::softmax_rows(t, x[0]); }});
    cases.push_back({"layer_norm", {u({3, 6}), u({6}), u({6})},
                     [](Tape<double>& t, In x) { return ops::layer_norm(t, x[0], x[1], x[2]); }});
    cases.push_back({"conv2d_s1", {u({2, 5, 5}), u({3, 2, 3, 3}), u({3})},
                     [](Tape<double>& t, In x) { return ops::conv2d(t, x[0], x[1], x[2], 1, 1); }});
    cases.push_back({"conv2d_s2", {u({2, 6, 6}), u({3, 2, 3, 3}), u({3})},
                     [](Tape<double>& t, In x) { return ops::conv2d(t, x[0], x[1], x[2], 2, 1); }});
    cases.push_back({"avg_pool2d", {u({2, 4, 6})}, [](Tape<double>& t, In x) { return ops::avg_pool2d(t, x[0], 2, 2, 2, 2); }});
    cases.push_back({"avg_pool2d_overlap", {u({5, 5})},
                     [](Tape<double>& t, In x) { return ops::avg_pool2d(t, x[0], 3, 3, 1, 1); }});
    cases.push_back({"upsample_bilinear", {u({2, 3, 4})},
                     [](Tape<double>& t, In x) { return ops::upsample_bilinear(t, x[0], 5, 7); }});
    cases.push_back({"slice_cols", {u({3, 6})}, [](Tape<double>& t, In x) { return ops::slice_cols(t, x[0], 2, 3); }});
    cases.push_back({"concat_cols", {u({3, 2}), u({3, 3})},
                     [](Tape<double>& t, In x) { return ops::concat_cols(t, {x[0], x[1]}); }});
    cases.push_back({"concat_rows", {u({2, 3}), u({1, 3})},
                     [](Tape<double>& t, In x) { return ops::concat_rows(t, {x[0], x[1]}); }});
    cases.push_back({"sum", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::sum(t, x[0]); }});
    cases.push_back({"mean", {u({3, 4})}, [](Tape<double>& t, In x) { return ops::mean(t, x[0]); }});
    cases.push_back({"cross_entropy", {u({6, 4})}, [](Tape<double>& t, In x) {
                         static const std::vector<int> labels{0, 3, 255, 1, 2, 1};
                         return ops::cross_entropy(t, x[0], std::span<const int>(labels));
                     }});
    return cases;
}

// Runs a full finite-difference check of sum(fn(inputs) * probe).
GradcheckReport check_case(const GradCase& c, Rng& rng) {
    TensorD probe;
    {
        Tape<double> tape(false);
        probe = probe_for(c.fn(tape, c.inputs), rng);
    }
    const ScalarFn f = [&c, probe](Tape<double>& tape) { return weighted_sum(tape, c.fn(tape, c.inputs), probe); };
    return gradcheck(f, c.inputs);
}

void randomize(const TensorD& t, Rng& rng, double lo, double hi) {
    auto out = TensorD(t);
    for (auto& v : out.mutable_data()) v = rng.uniform(lo, hi);
}

std::vector<TensorD> attention_inputs(const AttentionLayerWeights<double>& w) {
    return {w.wq, w.wk, w.wv, w.wo, w.fusion.w_depth, w.fusion.w_spatial};
}

} // namespace

CheckSuite parse_check_suite(std::string_view name) {
    if (name == "priors") return CheckSuite::Priors;
    if (name == "attention") return CheckSuite::Attention;
    if (name == "gradients") return CheckSuite::Gradients;
    if (name == "all") return CheckSuite::All;
    throw ParameterError("unknown check suite '" + std::string(name) +
                         "' (expected priors, attention, gradients or all)");
}

std::vector<CheckResult> check_priors(const CheckOptions& o) {
    Tracker sym("priors", "symmetric", 0.0);
    Tracker nonneg("priors", "nonnegative", 0.0);
    Tracker diag("priors", "zero_diagonal", 0.0);
    Tracker slices("priors", "axial_slice_consistency", kSliceTolerance);
    Tracker decay("priors", "decay_in_unit_interval", 0.0);

    std::vector<double> rates = sample_decay_rates(DecayStrategy::linear(0.75, 1.0), 4).rates;
    if (o.inject_beta) rates.assign(1, *o.inject_beta);

    std::vector<GridShape> grids;
    for (std::size_t r = 1; r <= kExhaustiveGridMax; ++r)
        for (std::size_t c = 1; c <= kExhaustiveGridMax; ++c) grids.push_back({r, c});
    Rng pick(case_seed(o, 1, 0));
    for (std::size_t i = 0; i < kRandomGrids; ++i) {
        grids.push_back({static_cast<std::size_t>(pick.integer(kRandomGridMin, kRandomGridMax)),
                         static_cast<std::size_t>(pick.integer(kRandomGridMin, kRandomGridMax))});
    }

    const std::size_t exhaustive = kExhaustiveGridMax * kExhaustiveGridMax;
    for (std::size_t i = 0; i < grids.size(); ++i) {
        const std::uint64_t seed = case_seed(o, 2, i);
        Rng rng(seed);
        const GridShape grid = grids[i];
        const DepthGrid<double> depth{grid, rng.uniform_tensor<double>({grid.rows, grid.cols}, 0.0, 1.0)};
        // Small grids run every fusion mode; larger ones rotate through them.
        std::vector<FusionMode> modes(kFusionModes.begin(), kFusionModes.end());
        if (i >= exhaustive) modes = {kFusionModes[i % kFusionModes.size()]};
        for (const auto mode : modes) {
            const auto prior = build_geometry_prior(depth, random_memory(rng, mode), mode);
            const std::string where = std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " " +
                                      std::string(fusion_mode_name(mode));
            for (const auto* m : {&prior.d, &prior.s, &prior.g}) {
                const auto f = inspect(*m);
                sym.observe(f.asymmetry, seed, where);
                nonneg.observe(std::max(0.0, f.negativity), seed, where);
                diag.observe(f.diagonal, seed, where);
            }
            slices.observe(slice_error(prior), seed, where);
            for (const double beta : rates) {
                try {
                    Tape<double> tape(false);
                    decay.observe(decay_violation(decay_tensor(tape, prior.g, beta)), seed,
                                  where + " beta " + fmt_double(beta));
                } catch (const Error& e) {
                    decay.error(seed, where + " beta " + fmt_double(beta) + ": " + e.what());
                }
            }
        }
    }
    return {sym.result(), nonneg.result(), diag.result(), slices.result(), decay.result()};
}

std::vector<CheckResult> check_attention(const CheckOptions& o) {
    Tracker beta_one("attention", "beta_one_is_vanilla", kEquivalenceTolerance);
    Tracker zero_prior("attention", "zero_prior_is_vanilla", kEquivalenceTolerance);
    Tracker bound("attention", "decay_only_attenuates", 0.0);
    Tracker rows("attention", "row_sums_in_unit_interval", kRowSumSlack);
    Tape<double> tape(false);

    for (std::size_t i = 0; i < kEquivalenceInstances; ++i) {
        const auto seed = case_seed(o, 3, i);
        const auto c = random_attention_case(seed);
        const auto ref = vanilla_attention(tape, c.q, c.k, c.v);
        beta_one.observe(max_abs_diff(gsa_full(tape, c.q, c.k, c.v, c.g, 1.0), ref), seed);
        const auto zeros = TensorD::zeros(c.g.shape());
        zero_prior.observe(max_abs_diff(gsa_full(tape, c.q, c.k, c.v, zeros, c.beta), ref), seed);
    }

    for (std::size_t i = 0; i < kBoundInstances; ++i) {
        const auto seed = case_seed(o, 4, i);
        const auto c = random_attention_case(seed);
        const auto plain = geo_attention_weights(tape, c.q, c.k, TensorD{}, c.beta);
        const auto decayed = geo_attention_weights(tape, c.q, c.k, c.g, c.beta);
        const std::size_t n = plain.dim(0), m = plain.dim(1);
        double excess = 0.0, row_violation = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            double s = 0.0;
            for (std::size_t q = 0; q < m; ++q) {
                excess = std::max(excess, decayed.at(p, q) - plain.at(p, q));
                s += decayed.at(p, q);
            }
            if (!(s > 0.0)) row_violation = INFINITY;
            row_violation = std::max(row_violation, s - 1.0);
        }
        bound.observe(excess, seed);
        rows.observe(std::max(0.0, row_violation), seed);
    }
    return {beta_one.result(), zero_prior.result(), bound.result(), rows.result()};
}

std::vector<CheckResult> check_gradients(const CheckOptions& o) {
    std::vector<CheckResult> out;
    auto record = [&out](const std::string& name, const GradcheckReport& rep, double tol, std::uint64_t seed) {
        Tracker t("gradients", name, tol);
        t.observe(rep.max_rel_error, seed,
                  "input " + std::to_string(rep.worst_tensor) + " element " + std::to_string(rep.worst_element));
        auto r = t.result();
        r.cases = rep.checked;
        out.push_back(std::move(r));
    };

    {
        const auto seed = case_seed(o, 5, 0);
        Rng rng(seed);
        for (const auto& c : primitive_cases(rng)) record("op." + c.name, check_case(c, rng), kOpTolerance, seed);
    }

    for (const auto layout : {AttentionLayout::Full, AttentionLayout::Axial}) {
        const auto seed = case_seed(o, 6, layout == AttentionLayout::Full ? 0 : 1);
        Rng rng(seed);
        const GridShape grid{2, 3};
        const DepthGrid<double> depth{grid, rng.uniform_tensor<double>({2, 3}, 0.0, 1.0)};
        const auto stage = StagePrior<double>::build(grid, &depth, {}, FusionMode::Memory, layout);
        auto w = AttentionLayerWeights<double>::make(4, 2, FusionMode::Memory, rng);
        for (const auto& t : {w.wq, w.wk, w.wv, w.wo}) randomize(t, rng, -0.6, 0.6);
        const auto sched = sample_decay_rates(DecayStrategy::linear(0.75, 1.0), 2);
        GradCase c{"", attention_inputs(w), {}};
        c.inputs.insert(c.inputs.begin(), rng.uniform_tensor<double>({6, 4}, -1.0, 1.0));
        c.fn = [stage, w, sched](Tape<double>& tape, const std::vector<TensorD>& x) {
            return multi_head_gsa(tape, x[0], stage, w, sched);
        };
        record(layout == AttentionLayout::Full ? "multi_head_gsa.full" : "multi_head_gsa.axial", check_case(c, rng),
               kOpTolerance, seed);
    }

    {
        const auto seed = case_seed(o, 7, 0);
        Rng rng(seed);
        const auto config = ModelConfig::nano();
        auto model = SegmentationModel<double>::create(config, seed);
        const auto& b = model.stage_blocks(0).front();
        for (const auto& t : {b.attn.wq, b.attn.wk, b.attn.wv, b.attn.wo, b.fc1.w, b.fc2.w}) randomize(t, rng, -0.3, 0.3);
        for (const auto& t : {b.fc1.b, b.fc2.b, b.norm1.shift, b.norm2.shift}) randomize(t, rng, -0.2, 0.2);
        for (const auto& t : {b.norm1.gamma, b.norm2.gamma}) randomize(t, rng, 0.5, 1.5);
        const GridShape grid{2, 3};
        const DepthGrid<double> depth{grid, rng.uniform_tensor<double>({2, 3}, 0.0, 1.0)};
        const auto stage =
            StagePrior<double>::build(grid, &depth, config.priors, config.fusion, config.stage_layout(0));
        GradCase c{"", attention_inputs(b.attn), {}};
        for (const auto& t : {b.norm1.gamma, b.norm1.shift, b.norm2.gamma, b.norm2.shift, b.fc1.w, b.fc1.b, b.fc2.w,
                              b.fc2.b})
            c.inputs.push_back(t);
        c.inputs.insert(c.inputs.begin(), rng.uniform_tensor<double>({6, config.stage_dims[0]}, -1.0, 1.0));
        const auto& sched = model.stage_schedule(0);
        c.fn = [stage, &b, &sched](Tape<double>& tape, const std::vector<TensorD>& x) {
            return gsa_block(tape, x[0], stage, b, sched);
        };
        record("nano_block", check_case(c, rng), kOpTolerance, seed);
    }

    {
        const auto seed = case_seed(o, 8, 0);
        const auto model = SegmentationModel<double>::create(ModelConfig::nano(), seed);
        const auto sample = synth_scene(seed, kModelInputSize, kModelInputSize, model.config().num_classes);
        std::vector<TensorD> inputs;
        for (const auto& p : model.parameters()) inputs.push_back(p.tensor);
        const ScalarFn f = [&model, &sample](Tape<double>& tape) {
            const auto logits = model.forward(tape, sample.rgb, sample.depth);
            const std::size_t k = logits.dim(0);
            const auto per_pixel =
                ops::transpose(tape, ops::reshape(tape, logits, {k, logits.dim(1) * logits.dim(2)}));
            return ops::cross_entropy(tape, per_pixel, std::span<const int>(sample.labels));
        };
        record("nano_model_end_to_end", gradcheck_sampled(f, inputs, kModelSamplesPerTensor, seed), kModelTolerance,
               seed);
    }
    return out;
}

std::vector<CheckResult> run_checks(CheckSuite suite, const CheckOptions& options) {
    std::vector<CheckResult> out;
    auto append = [&out](std::vector<CheckResult> r) { out.insert(out.end(), r.begin(), r.end()); };
    if (suite == CheckSuite::Priors || suite == CheckSuite::All) append(check_priors(options));
    if (suite == CheckSuite::Attention || suite == CheckSuite::All) append(check_attention(options));
    if (suite == CheckSuite::Gradients || suite == CheckSuite::All) append(check_gradients(options));
    return out;
}

} // namespace dfv2
