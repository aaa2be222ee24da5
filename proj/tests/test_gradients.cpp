#include <gtest/gtest.h>

#include "support/gradient_cases.hpp"

using namespace graphmore;

class Gradients : public ::testing::TestWithParam<gradient_cases::Group> {};

TEST_P(Gradients, MatchFiniteDifferences) {
  const auto results = gradient_cases::run(GetParam().second);
  ASSERT_FALSE(results.empty());
  for (const auto& r : results)
    EXPECT_LE(r.report.max_rel_error, gradient_cases::kTol)
        << r.name << ": worst " << r.report.worst_param << "[" << r.report.worst_index << "] analytic "
        << r.report.analytic << " numeric " << r.report.numeric;
}

TEST(GradientsTotal, AtLeastOneHundredInstances) {
  std::size_t n = 0;
  for (const auto& g : gradient_cases::groups()) n += gradient_cases::run(g.second).size();
  EXPECT_GE(n, 100u);
}

INSTANTIATE_TEST_SUITE_P(All, Gradients, ::testing::ValuesIn(gradient_cases::groups()),
                         [](const auto& info) { return std::string(info.param.first); });
