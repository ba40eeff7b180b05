#include <gtest/gtest.h>

#include <random>
#include <set>

#include "divctl/gateway.hpp"
#include "divctl/sampler.hpp"
#include "divctl/verify.hpp"

using namespace divctl;

namespace {

MeasureOptions with_space(const LabelSpace& space) {
  MeasureOptions o;
  o.label_space = &space;
  return o;
}

EmbeddingVector basis(std::size_t d, std::size_t i) {
  std::vector<double> v(d, 0.0);
  v[i] = 1.0;
  return EmbeddingVector(v);
}

// Brute-force oracle: normalize in long double, then pick the first index
// whose similarity no other label exceeds.
std::size_t oracle_argmax(const EmbeddingVector& img, const std::vector<EmbeddingVector>& labels) {
  auto unit = [](const EmbeddingVector& v) {
    long double n = 0;
    for (double x : v.values) n += static_cast<long double>(x) * x;
    n = std::sqrt(n);
    std::vector<long double> u;
    for (double x : v.values) u.push_back(n == 0 ? 0 : x / n);
    return u;
  };
  auto ui = unit(img);
  std::vector<long double> sims;
  for (const auto& l : labels) {
    auto ul = unit(l);
    long double s = 0;
    for (std::size_t i = 0; i < ui.size(); ++i) s += ui[i] * ul[i];
    sims.push_back(s);
  }
  for (std::size_t j = 0; j < sims.size(); ++j) {
    bool is_max = true;
    for (std::size_t l = 0; l < sims.size(); ++l) is_max = is_max && sims[l] <= sims[j];
    if (is_max) return j;
  }
  return sims.size();
}

struct Fixture {
  std::vector<ImagePayload> payloads;
  std::vector<ImageView> views() const {
    std::vector<ImageView> v;
    for (const auto& p : payloads) v.push_back({p.image_id, p.content});
    return v;
  }
};

Fixture generate(const std::vector<std::string>& prompts) {
  MockImageGenerator gen;
  Fixture f;
  for (std::size_t i = 0; i < prompts.size(); ++i)
    f.payloads.push_back(gen.generate(prompts[i], i));
  return f;
}

AttributeSpec color() {
  return AttributeSpec("color", make_labels(std::vector<std::string>{"red", "green", "blue"}),
                       Distribution({0.4, 0.5, 0.1}));
}

}  // namespace

TEST(Classify, Examples) {
  std::vector<EmbeddingVector> labels{basis(3, 0), basis(3, 1), basis(3, 2)};
  auto p = classify(basis(3, 0), labels);
  EXPECT_EQ(p.label_index, 0u);
  EXPECT_DOUBLE_EQ(p.score, 1.0);

  std::vector<EmbeddingVector> two{basis(2, 0), basis(2, 1)};
  EXPECT_EQ(classify(EmbeddingVector({1.0, 1.0}), two).label_index, 0u);
}

TEST(Classify, Errors) {
  std::vector<EmbeddingVector> none;
  EXPECT_THROW(classify(basis(2, 0), none), Error);
  std::vector<EmbeddingVector> wrong{basis(3, 0)};
  try {
    classify(basis(2, 0), wrong);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
}

TEST(Classify, AgreesWithBruteForceAndIsScaleInvariant) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> normal;
  const std::size_t d = 16;
  auto random_vec = [&] {
    std::vector<double> v(d);
    for (auto& x : v) x = normal(gen);
    return EmbeddingVector(v);
  };
  std::vector<EmbeddingVector> labels;
  for (int j = 0; j < 5; ++j) labels.push_back(random_vec());
  for (int i = 0; i < 200; ++i) {
    auto img = random_vec();
    auto p = classify(img, labels);
    EXPECT_EQ(p.label_index, oracle_argmax(img, labels));
    auto scaled = img;
    for (auto& x : scaled.values) x *= 3.5;
    auto scaled_labels = labels;
    for (auto& l : scaled_labels)
      for (auto& x : l.values) x *= 0.25;
    EXPECT_EQ(classify(scaled, scaled_labels).label_index, p.label_index);
  }
}

TEST(Measure, PerfectMockAllRed) {
  MockEmbedder embedder(1.0, 0.0);
  auto spec = color();
  auto space = LabelSpace::from(std::vector<AttributeSpec>{spec});
  auto fx = generate(std::vector<std::string>(10, "a car, color red"));
  auto views = fx.views();
  auto m = measure(views, spec, embedder, with_space(space));
  EXPECT_EQ(m.counts, (std::vector<std::size_t>{10, 0, 0}));
  EXPECT_EQ(m.total(), 10u);
}

TEST(Measure, QuotaRoundTripAndHighlight) {
  MockEmbedder embedder(1.0, 0.0);
  auto spec = color();
  PromptPlan plan{"a car", 10, {spec}, 17, SamplingMode::Quota};
  auto planned = plan_iteration(plan);
  std::vector<std::string> prompts;
  for (const auto& p : planned) prompts.push_back(p.prompt);
  auto fx = generate(prompts);
  auto views = fx.views();
  auto space = LabelSpace::from(plan.attributes);
  auto m = measure(views, spec, embedder, with_space(space));
  EXPECT_EQ(m.counts, (std::vector<std::size_t>{4, 5, 1}));

  auto blue = m.images_with_label(2);
  ASSERT_EQ(blue.size(), 1u);
  for (std::size_t i = 0; i < planned.size(); ++i)
    if (planned[i].assignment.choices.at("color") == 2) {
      EXPECT_EQ(blue[0], fx.payloads[i].image_id);
    }

  // Partition: every id lands in exactly one bin, bins match counts.
  std::set<std::string> all;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    auto ids = m.images_with_label(j);
    EXPECT_EQ(ids.size(), m.counts[j]);
    for (const auto& id : ids) EXPECT_TRUE(all.insert(id).second);
  }
  EXPECT_EQ(all.size(), 10u);
  EXPECT_THROW(m.images_with_label(3), Error);
}

TEST(Measure, ZeroCountBinIsEmpty) {
  MockEmbedder embedder(1.0, 0.0);
  auto spec = color();
  auto space = LabelSpace::from(std::vector<AttributeSpec>{spec});
  auto fx = generate(std::vector<std::string>(4, "a car, color green"));
  auto views = fx.views();
  auto m = measure(views, spec, embedder, with_space(space));
  EXPECT_TRUE(m.images_with_label(0).empty());
}

TEST(Measure, SkewedSetShowsDominantBin) {
  auto eth = AttributeSpec::uniform(
      "Ethnicity", make_labels(std::vector<std::string>{"Caucasian", "Black", "Asian", "Hispanic",
                                                        "Middle-Eastern"}));
  std::vector<std::string> prompts(9, "a doctor, Ethnicity Caucasian");
  prompts.push_back("a doctor, Ethnicity Hispanic");
  auto fx = generate(prompts);
  auto views = fx.views();
  MockEmbedder embedder(1.0, 0.0);
  auto space = LabelSpace::from(std::vector<AttributeSpec>{eth});
  auto m = measure(views, eth, embedder, with_space(space));
  EXPECT_GT(m.empirical()[0], 0.8);
}

TEST(Measure, EmbedderFailureAbortsWholeMeasurement) {
  struct Flaky : Embedder {
    int calls = 0;
    EmbeddingVector embed(const EmbedRequest& r) override {
      if (r.kind == EmbedKind::Image && ++calls == 3) fail(Errc::BackendUnavailable, "down");
      return EmbeddingVector({1.0, 0.0});
    }
  } flaky;
  auto spec = color();
  auto fx = generate(std::vector<std::string>(5, "x"));
  auto views = fx.views();
  EXPECT_THROW(measure(views, spec, flaky, {}), Error);
  std::vector<ImageView> empty;
  EXPECT_THROW(measure(empty, spec, flaky, {}), Error);
}

TEST(Measure, ParallelEqualsSequential) {
  MockEmbedder embedder(0.7, 0.1, 3);
  auto spec = color();
  PromptPlan plan{"a car", 60, {spec}, 2, SamplingMode::Quota};
  std::vector<std::string> prompts;
  for (const auto& p : plan_iteration(plan)) prompts.push_back(p.prompt);
  auto fx = generate(prompts);
  auto views = fx.views();
  auto space = LabelSpace::from(plan.attributes);
  MeasureOptions seq = with_space(space);
  MeasureOptions par = with_space(space);
  par.concurrency = 8;
  EXPECT_EQ(measure(views, spec, embedder, seq), measure(views, spec, embedder, par));
}
