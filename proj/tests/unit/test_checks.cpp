#include <gtest/gtest.h>

#include "dfv2/checks.hpp"
#include "dfv2/errors.hpp"

namespace dfv2 {
namespace {

TEST(Checks, AttentionSuitePasses) {
    for (const auto& r : run_checks(CheckSuite::Attention, {})) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Checks, InjectedBadRateIsCaughtWithSeed) {
    CheckOptions opt;
    opt.inject_beta = 1.5;
    const auto results = check_priors(opt);
    bool caught = false;
    for (const auto& r : results) {
        if (!r.passed) {
            caught = true;
            EXPECT_TRUE(r.counterexample.has_value()) << r.name;
        }
    }
    EXPECT_TRUE(caught);
}

TEST(Checks, SuiteNamesParse) {
    EXPECT_EQ(parse_check_suite("priors"), CheckSuite::Priors);
    EXPECT_EQ(parse_check_suite("attention"), CheckSuite::Attention);
    EXPECT_EQ(parse_check_suite("gradients"), CheckSuite::Gradients);
    EXPECT_EQ(parse_check_suite("all"), CheckSuite::All);
    EXPECT_ANY_THROW(parse_check_suite("everything"));
}

} // namespace
} // namespace dfv2
