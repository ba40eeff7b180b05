#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "divctl/sampler.hpp"

using namespace divctl;

namespace {

AttributeSpec attr(std::string name, std::vector<std::string> labels, std::vector<double> w) {
  return AttributeSpec(name, make_labels(labels), Distribution(std::move(w)));
}

AttributeSpec fig4_color() { return attr("color", {"red", "green", "blue"}, {0.4, 0.5, 0.1}); }

std::vector<std::size_t> count_labels(const std::vector<Assignment>& as, const AttributeSpec& a) {
  std::vector<std::size_t> counts(a.size(), 0);
  for (const auto& x : as) ++counts[x.choices.at(a.name())];
  return counts;
}

// Exact largest remainder over integer weights (quota = seats * w_i / W).
std::vector<std::size_t> exact_largest_remainder(const std::vector<long long>& w, long long seats) {
  long long total = 0;
  for (auto x : w) total += x;
  std::vector<std::size_t> counts(w.size());
  std::vector<long long> rem(w.size());
  long long assigned = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    counts[i] = static_cast<std::size_t>(seats * w[i] / total);
    rem[i] = seats * w[i] % total;
    assigned += static_cast<long long>(counts[i]);
  }
  while (assigned < seats) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
      if (rem[i] > rem[best]) best = i;
    ++counts[best];
    rem[best] = -1;
    ++assigned;
  }
  return counts;
}

}  // namespace

TEST(LargestRemainder, MatchesExactOracleOnFixtures) {
  EXPECT_EQ(largest_remainder(Distribution({0.4, 0.5, 0.1}).weights(), 10),
            exact_largest_remainder({4, 5, 1}, 10));
  EXPECT_EQ(largest_remainder(Distribution({0.4, 0.5, 0.1}).weights(), 10),
            (std::vector<std::size_t>{4, 5, 1}));
  // 20 images at 1/3 each: remainders tie, lower index wins.
  EXPECT_EQ(largest_remainder(Distribution::uniform(3).weights(), 20),
            (std::vector<std::size_t>{7, 7, 6}));
  EXPECT_EQ(largest_remainder(Distribution({0.75, 0.25}).weights(), 20),
            exact_largest_remainder({3, 1}, 20));
  EXPECT_EQ(largest_remainder(normalize({40, 10, 10, 10, 10, 10, 10}).weights(), 20),
            exact_largest_remainder({40, 10, 10, 10, 10, 10, 10}, 20));
  EXPECT_EQ(largest_remainder(normalize({7, 3}).weights(), 7),
            exact_largest_remainder({7, 3}, 7));
}

TEST(SampleAssignments, QuotaFig4Counts) {
  PromptPlan plan{"a car", 10, {fig4_color()}, 42, SamplingMode::Quota};
  auto as = sample_assignments(plan);
  ASSERT_EQ(as.size(), 10u);
  EXPECT_EQ(count_labels(as, fig4_color()), (std::vector<std::size_t>{4, 5, 1}));
}

TEST(SampleAssignments, PointMass) {
  auto a = attr("A", {"only"}, {1.0});
  auto as = sample_assignments({"ctx", 7, {a}, 3, SamplingMode::Quota});
  EXPECT_EQ(count_labels(as, a), (std::vector<std::size_t>{7}));
}

TEST(SampleAssignments, ZeroAttributesGiveEmptyAssignments) {
  auto as = sample_assignments({"ctx", 4, {}, 3, SamplingMode::Quota});
  ASSERT_EQ(as.size(), 4u);
  for (const auto& a : as) EXPECT_TRUE(a.choices.empty());
}

TEST(SampleAssignments, IidHalfHalfConcentration) {
  auto a = attr("A", {"x", "y"}, {0.5, 0.5});
  for (std::uint64_t seed : {1ull, 2ull, 77ull}) {
    auto as = sample_assignments({"ctx", 10000, {a}, seed, SamplingMode::IID});
    std::size_t xs = 0;
    for (const auto& s : as) xs += s.choices.at("A") == 0 ? 1 : 0;
    EXPECT_NEAR(static_cast<double>(xs) / 10000.0, 0.5, 0.02) << seed;
  }
}

TEST(SampleAssignments, IidNeverPicksZeroWeight) {
  auto a = attr("A", {"x", "y", "z"}, {0.5, 0.0, 0.5});
  auto as = sample_assignments({"ctx", 2000, {a}, 5, SamplingMode::IID});
  EXPECT_EQ(count_labels(as, a)[1], 0u);
}

TEST(SampleAssignments, RejectsDuplicateAttributes) {
  PromptPlan plan{"ctx", 2, {fig4_color(), fig4_color()}, 0, SamplingMode::Quota};
  EXPECT_THROW(sample_assignments(plan), Error);
  PromptPlan zero{"ctx", 0, {}, 0, SamplingMode::Quota};
  EXPECT_THROW(sample_assignments(zero), Error);
}

TEST(BuildPrompt, Fig4Template) {
  auto landscape = attr("landscape", {"urban", "rural", "coastal", "desert"},
                        {0.25, 0.25, 0.25, 0.25});
  std::vector<AttributeSpec> attrs{fig4_color(), landscape};
  Assignment a;
  a.choices["color"] = 0;
  a.choices["landscape"] = 0;
  const std::string ctx =
      "a photorealistic car in an intricate landscape for an advertisement poster";
  EXPECT_EQ(build_prompt(ctx, attrs, a), ctx + ", color red, landscape urban");
}

TEST(BuildPrompt, NoAttributesIsIdentity) {
  EXPECT_EQ(build_prompt("a car", std::vector<AttributeSpec>{}, Assignment{}), "a car");
}

TEST(BuildPrompt, DoctorExample) {
  std::vector<AttributeSpec> attrs{
      AttributeSpec::uniform("Ethnicity", make_labels(std::vector<std::string>{"Caucasian",
                                                                               "Asian"})),
      AttributeSpec::uniform("Gender", make_labels(std::vector<std::string>{"man", "woman"}))};
  Assignment a;
  a.choices["Ethnicity"] = 1;
  a.choices["Gender"] = 1;
  EXPECT_EQ(build_prompt("a doctor", attrs, a), "a doctor, Ethnicity Asian, Gender woman");
}

TEST(BuildPrompt, MissingAssignment) {
  std::vector<AttributeSpec> attrs{fig4_color()};
  try {
    build_prompt("a car", attrs, Assignment{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingAssignment);
  }
}

TEST(PlanIteration, PureDuplicationWithoutAttributes) {
  auto out = plan_iteration({"a car", 2, {}, 9, SamplingMode::Quota});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].prompt, "a car");
  EXPECT_EQ(out[1].prompt, "a car");
}

TEST(PlanIteration, Fig4QuotaCountsAndDeterminism) {
  auto landscape = attr("landscape", {"urban", "rural", "coastal", "desert"},
                        {0.25, 0.25, 0.25, 0.25});
  PromptPlan plan{"a photorealistic car in an intricate landscape for an advertisement poster",
                  10,
                  {fig4_color(), landscape},
                  1234,
                  SamplingMode::Quota};
  auto first = plan_iteration(plan);
  auto second = plan_iteration(plan);
  ASSERT_EQ(first.size(), 10u);
  for (std::size_t i = 0; i < first.size(); ++i) {
    EXPECT_EQ(first[i].prompt, second[i].prompt);
    EXPECT_EQ(first[i].assignment, second[i].assignment);
  }
  // Count labels straight from the prompt text.
  std::map<std::string, int> seen;
  for (const auto& p : first) {
    EXPECT_EQ(p.prompt.rfind(plan.context, 0), 0u);
    for (std::string c : {"red", "green", "blue"})
      if (p.prompt.find("color " + c + ",") != std::string::npos) ++seen[c];
  }
  EXPECT_EQ(seen["red"], 4);
  EXPECT_EQ(seen["green"], 5);
  EXPECT_EQ(seen["blue"], 1);
  auto land = largest_remainder(landscape.target().weights(), 10);
  std::vector<std::size_t> got(4, 0);
  for (const auto& p : first) ++got[p.assignment.choices.at("landscape")];
  EXPECT_EQ(got, land);
}

TEST(SamplerProperties, QuotaAccuracyAndMarginalIndependence) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + gen() % 200;
    std::vector<AttributeSpec> attrs;
    std::size_t m = 1 + gen() % 4;
    for (std::size_t a = 0; a < m; ++a) {
      std::size_t k = 1 + gen() % 10;
      std::vector<double> raw(k);
      for (auto& w : raw) w = unit(gen);
      std::vector<std::string> names;
      for (std::size_t i = 0; i < k; ++i) names.push_back("v" + std::to_string(i));
      attrs.push_back(AttributeSpec("a" + std::to_string(a), make_labels(names), normalize(raw)));
    }
    PromptPlan plan{"ctx", n, attrs, gen(), SamplingMode::Quota};
    auto as = sample_assignments(plan);
    for (const auto& a : attrs) {
      auto counts = count_labels(as, a);
      for (std::size_t i = 0; i < counts.size(); ++i)
        EXPECT_LT(std::abs(static_cast<double>(counts[i]) - n * a.target()[i]), 1.0);
    }
    // Reversing attribute order leaves per-attribute counts alone.
    auto reversed = plan;
    std::reverse(reversed.attributes.begin(), reversed.attributes.end());
    auto rs = sample_assignments(reversed);
    for (const auto& a : attrs) EXPECT_EQ(count_labels(as, a), count_labels(rs, a));
  }
}
