#include "dfv2/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dfv2/augment.hpp"
#include "dfv2/ops.hpp"
#include "dfv2/optimizer.hpp"
#include "dfv2/synth.hpp"

namespace dfv2 {

namespace {

constexpr std::uint64_t kTrainDataBase = 1'000'000;
constexpr std::uint64_t kValDataBase = 9'000'000;
constexpr std::uint64_t kSeedStride = 100'000;
constexpr std::uint64_t kShuffleSalt = 0x9E3779B97F4A7C15ull;

template <typename T>
Tensor<T> depth_input(const SegmentationModel<T>& model, const RgbdSample& s) {
    return model.config().uses_depth() ? tensor_cast<T>(s.depth) : Tensor<T>{};
}

} // namespace

template <typename T>
double clip_grad_norm(const std::vector<NamedTensor<T>>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params) {
        for (auto g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const auto f = static_cast<T>(max_norm / norm);
        for (const auto& p : params) {
            for (auto& g : p.tensor.mutable_grad()) g *= f;
        }
    }
    return norm;
}

template <typename T>
EvalResult evaluate(const SegmentationModel<T>& model, const std::vector<RgbdSample>& samples) {
    EvalResult r;
    r.confusion = ConfusionMatrix(model.config().num_classes);
    for (const auto& s : samples) {
        s.validate(model.config().num_classes);
        Tape<T> tape(false);
        const auto logits = model.forward(tape, tensor_cast<T>(s.rgb), depth_input(model, s));
        r.confusion.add(s.labels, argmax_classes(logits));
    }
    r.miou = miou(r.confusion);
    return r;
}

template <typename T>
double accumulate_sample_gradient(const SegmentationModel<T>& model, const RgbdSample& s, double weight) {
    Tape<T> tape;
    const auto logits = model.forward(tape, tensor_cast<T>(s.rgb), depth_input(model, s));
    const std::size_t k = logits.dim(0);
    const auto per_pixel = ops::transpose(tape, ops::reshape(tape, logits, {k, logits.dim(1) * logits.dim(2)}));
    const auto loss = ops::cross_entropy(tape, per_pixel, std::span<const int>(s.labels));
    const double value = static_cast<double>(loss.item());
    tape.backward(ops::scale(tape, loss, static_cast<T>(weight)));
    return value;
}

ToySplit make_toy_split(const RunConfig& c, std::uint64_t seed) {
    const std::size_t n = c.train.image_size, k = c.model.num_classes;
    return {synth_dataset(kTrainDataBase + seed * kSeedStride, c.train.train_samples, n, n, k),
            synth_dataset(kValDataBase + seed * kSeedStride, c.train.val_samples, n, n, k)};
}

template <typename T>
TrainResult train_model(SegmentationModel<T>& model, const RunConfig& config, const ToySplit& data,
                        std::uint64_t seed, const TrainLogFn& on_log) {
    config.train.validate();
    if (!(config.model == model.config())) throw UsageError("train_model: config does not describe the model");
    if (data.train.empty()) throw UsageError("train_model: empty training set");
    const auto& tc = config.train;
    AdamWOptions opt;
    opt.weight_decay = tc.weight_decay;
    std::vector<NamedTensor<T>> params = model.parameters();
    AdamW<T> optimizer(params, opt);
    Rng rng(seed ^ kShuffleSalt);

    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = order.size();

    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t step = 0; step < tc.steps; ++step) {
        double lr = poly_lr(tc.lr, step, tc.steps, tc.poly_power);
        if (step < tc.warmup_steps) lr *= static_cast<double>(step + 1) / static_cast<double>(tc.warmup_steps);
        optimizer.zero_grad();
        double batch_loss = 0.0;
        for (std::size_t b = 0; b < tc.batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng.engine());
                cursor = 0;
            }
            const RgbdSample& raw = data.train[order[cursor++]];
            const double loss = tc.augment ? accumulate_sample_gradient(model, augment(raw, rng), 1.0 / tc.batch)
                                           : accumulate_sample_gradient(model, raw, 1.0 / tc.batch);
            batch_loss += loss / static_cast<double>(tc.batch);
        }
        if (!std::isfinite(batch_loss)) {
            throw DivergenceError("training diverged at step " + std::to_string(step) + " (loss is not finite)");
        }
        if (tc.grad_clip > 0.0) clip_grad_norm(params, tc.grad_clip);
        optimizer.step(lr);
        result.final_loss = batch_loss;
        if (step % tc.log_every == 0 || step + 1 == tc.steps) {
            result.log.push_back({step, batch_loss, lr});
            if (on_log) on_log(result.log.back());
        }
    }
    optimizer.zero_grad();
    result.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.validation = evaluate(model, data.val);
    return result;
}

template double clip_grad_norm(const std::vector<NamedTensor<float>>&, double);
template double clip_grad_norm(const std::vector<NamedTensor<double>>&, double);
template EvalResult evaluate(const SegmentationModel<float>&, const std::vector<RgbdSample>&);
template EvalResult evaluate(const SegmentationModel<double>&, const std::vector<RgbdSample>&);
template double accumulate_sample_gradient(const SegmentationModel<float>&, const RgbdSample&, double);
template double accumulate_sample_gradient(const SegmentationModel<double>&, const RgbdSample&, double);
template TrainResult train_model(SegmentationModel<float>&, const RunConfig&, const ToySplit&, std::uint64_t,
                                 const TrainLogFn&);
template TrainResult train_model(SegmentationModel<double>&, const RunConfig&, const ToySplit&, std::uint64_t,
                                 const TrainLogFn&);

} // namespace dfv2
