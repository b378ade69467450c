#include <gtest/gtest.h>

#include "dfv2/gradcheck.hpp"
#include "dfv2/ops.hpp"

namespace dfv2 {
namespace {

TEST(Tape, GradientOfSharedInputAccumulates) {
    Tape<double> tape;
    auto x = TensorD::from({2}, {3.0, -2.0}, true);
    // f = sum(x * x + x) -> df/dx = 2x + 1
    auto y = ops::sum(tape, ops::add(tape, ops::mul(tape, x, x), x));
    tape.backward(y);
    EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], -3.0);
}

TEST(Tape, NonRecordingTapeBuildsNoGraph) {
    Tape<double> tape(false);
    auto x = TensorD::from({2}, {1.0, 2.0}, true);
    ops::sum(tape, ops::mul(tape, x, x));
    EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, ConstantsAreNotRecorded) {
    Tape<double> tape;
    ops::add(tape, TensorD::zeros({3}), TensorD::zeros({3}));
    EXPECT_EQ(tape.size(), 0u);
}

TEST(Tape, IsSingleUse) {
    Tape<double> tape;
    auto x = TensorD::from({1}, {2.0}, true);
    auto y = ops::sum(tape, ops::mul(tape, x, x));
    tape.backward(y);
    EXPECT_THROW(tape.backward(y), UsageError);
}

TEST(Tape, RequiresScalarLoss) {
    Tape<double> tape;
    auto x = TensorD::from({2}, {1.0, 2.0}, true);
    auto y = ops::mul(tape, x, x);
    EXPECT_THROW(tape.backward(y), UsageError);
}

TEST(Gradcheck, DetectsAWrongGradient) {
    // A function whose tape omits part of its dependence must be flagged.
    auto x = TensorD::from({3}, {0.5, -1.0, 2.0});
    ScalarFn wrong = [x](Tape<double>& tape) {
        const auto detached = x.detach();  // hides one path from the tape
        return ops::sum(tape, ops::mul(tape, x, detached));
    };
    EXPECT_GT(gradcheck(wrong, {x}).max_rel_error, 0.1);
    ScalarFn right = [x](Tape<double>& tape) { return ops::sum(tape, ops::mul(tape, x, x)); };
    EXPECT_LT(gradcheck(right, {x}).max_rel_error, 1e-8);
}

TEST(Gradcheck, RestoresInputsAndFlags) {
    auto x = TensorD::from({2}, {1.0, 2.0});
    ScalarFn f = [x](Tape<double>& tape) { return ops::sum(tape, ops::mul(tape, x, x)); };
    gradcheck(f, {x});
    EXPECT_EQ(x[0], 1.0);
    EXPECT_EQ(x[1], 2.0);
    EXPECT_FALSE(x.requires_grad());
    EXPECT_FALSE(x.has_grad());
}

} // namespace
} // namespace dfv2
