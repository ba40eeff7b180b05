#include <gtest/gtest.h>

#include <random>

#include "divctl/distribution.hpp"

using namespace divctl;

namespace {

AttributeSpec spec(std::vector<std::string> labels, std::vector<double> weights) {
  return AttributeSpec("attr", make_labels(labels), Distribution(std::move(weights)));
}

void expect_weights(const Distribution& d, std::vector<double> expected, double tol = 1e-12) {
  ASSERT_EQ(d.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(d[i], expected[i], tol) << i;
}

double sum(const Distribution& d) {
  double s = 0;
  for (double w : d.weights()) s += w;
  return s;
}

void expect_valid(const Distribution& d) {
  EXPECT_NEAR(sum(d), 1.0, kSumTolerance);
  for (double w : d.weights()) {
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::InvalidArgument;
}

}  // namespace

TEST(Label, TrimsAndRejectsEmpty) {
  EXPECT_EQ(Label("  red ").text(), "red");
  EXPECT_EQ(code_of([] { Label("   "); }), Errc::EmptyLabel);
  EXPECT_TRUE(Label("Red").same_as(Label("rED")));
}

TEST(AttributeSpec, RejectsCaseInsensitiveDuplicates) {
  EXPECT_EQ(code_of([] { spec({"Red", "red"}, {0.5, 0.5}); }), Errc::DuplicateLabel);
  EXPECT_EQ(code_of([] { spec({"a", "b"}, {1.0}); }), Errc::LengthMismatch);
}

TEST(Normalize, Examples) {
  expect_weights(normalize({2, 2}), {0.5, 0.5});
  expect_weights(normalize({1, 0, 0}), {1, 0, 0});
  expect_weights(normalize({4, 5, 1}), {0.4, 0.5, 0.1});
}

TEST(Normalize, Errors) {
  EXPECT_EQ(code_of([] { normalize({0, 0}); }), Errc::AllZero);
  EXPECT_EQ(code_of([] { normalize({1, -1}); }), Errc::NegativeWeight);
  EXPECT_EQ(code_of([] { normalize({1, std::nan("")}); }), Errc::NegativeWeight);
  EXPECT_EQ(code_of([] { normalize({1, INFINITY}); }), Errc::NegativeWeight);
}

TEST(Balance, Examples) {
  auto five = balance(spec({"a", "b", "c", "d", "e"}, {1, 0, 0, 0, 0}));
  expect_weights(five.target(), {0.2, 0.2, 0.2, 0.2, 0.2});
  expect_weights(balance(spec({"a"}, {1})).target(), {1.0});
  expect_weights(balance(spec({"a", "b", "c"}, {0.7, 0.2, 0.1})).target(),
                 {1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST(SetWeight, Examples) {
  expect_weights(set_weight(spec({"a", "b"}, {0.5, 0.5}), 0, 1.0).target(), {1.0, 0.0});
  // Others keep their 0.4 : 0.5 ratio inside the remaining 0.6.
  auto edited = set_weight(spec({"r", "g", "b"}, {0.4, 0.5, 0.1}), 2, 0.4);
  expect_weights(edited.target(), {0.4 * 0.6 / 0.9, 0.5 * 0.6 / 0.9, 0.4});
  EXPECT_NEAR(edited.target()[0], 0.2667, 1e-4);
  EXPECT_NEAR(edited.target()[1], 0.3333, 1e-4);
  expect_weights(set_weight(spec({"a", "b"}, {1.0, 0.0}), 0, 0.6).target(), {0.6, 0.4});
}

TEST(SetWeight, UniformSplitWhenOthersZero) {
  auto s = set_weight(spec({"a", "b", "c"}, {1, 0, 0}), 0, 0.4);
  expect_weights(s.target(), {0.4, 0.3, 0.3});
}

TEST(SetWeight, Errors) {
  auto s = spec({"a", "b"}, {0.5, 0.5});
  EXPECT_EQ(code_of([&] { set_weight(s, 2, 0.5); }), Errc::IndexOutOfRange);
  EXPECT_EQ(code_of([&] { set_weight(s, 0, 1.5); }), Errc::WeightOutOfRange);
  EXPECT_EQ(code_of([&] { set_weight(s, 0, -0.1); }), Errc::WeightOutOfRange);
  EXPECT_EQ(code_of([] { set_weight(spec({"a"}, {1}), 0, 0.5); }), Errc::WeightOutOfRange);
}

TEST(AddLabel, Examples) {
  auto s = add_label(spec({"A"}, {1.0}), Label("B"), 0.5);
  expect_weights(s.target(), {0.5, 0.5});
  auto z = add_label(spec({"A", "B"}, {0.4, 0.6}), Label("C"), 0.0);
  expect_weights(z.target(), {0.4, 0.6, 0.0});
  EXPECT_EQ(z.labels().back().text(), "C");
}

TEST(AddLabel, NativeAmericanThenBalance) {
  auto eth = AttributeSpec::uniform(
      "Ethnicity", make_labels(std::vector<std::string>{"Caucasian", "Black", "Asian", "Hispanic",
                                                        "Middle-Eastern"}));
  auto six = balance(add_label(eth, Label("Native American"), 0.0));
  ASSERT_EQ(six.size(), 6u);
  for (double w : six.target().weights()) EXPECT_NEAR(w, 1.0 / 6, 1e-15);
}

TEST(AddLabel, Errors) {
  auto s = spec({"A", "B"}, {0.4, 0.6});
  EXPECT_EQ(code_of([&] { add_label(s, Label("a"), 0.1); }), Errc::DuplicateLabel);
  EXPECT_EQ(code_of([&] { add_label(s, Label("C"), 1.0); }), Errc::WeightOutOfRange);
}

TEST(RemoveLabel, Examples) {
  expect_weights(remove_label(spec({"A", "B"}, {0.5, 0.5}), 1).target(), {1.0});
  expect_weights(remove_label(spec({"A", "B", "C"}, {0.4, 0.5, 0.1}), 2).target(),
                 {4.0 / 9, 5.0 / 9});
  auto b = remove_label(spec({"A", "B"}, {1.0, 0.0}), 0);
  expect_weights(b.target(), {1.0});
  EXPECT_EQ(b.labels()[0].text(), "B");
}

TEST(RemoveLabel, Errors) {
  EXPECT_EQ(code_of([] { remove_label(spec({"A"}, {1}), 0); }), Errc::LastLabel);
  EXPECT_EQ(code_of([] { remove_label(spec({"A", "B"}, {0.5, 0.5}), 5); }),
            Errc::IndexOutOfRange);
}

// Randomized edit sequences: every operation preserves the distribution
// invariants and the per-operation properties.
TEST(DistributionProperties, RandomEditSequences) {
  std::mt19937_64 gen(20241019);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t k = 1 + gen() % 8;
    std::vector<double> raw(k);
    for (auto& w : raw) w = unit(gen) < 0.2 ? 0.0 : unit(gen);
    raw[gen() % k] += 0.01;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) names.push_back("l" + std::to_string(i));
    auto s = AttributeSpec("attr", make_labels(names), normalize(raw));
    int next_label = static_cast<int>(k);

    for (int step = 0; step < 25; ++step) {
      switch (gen() % 5) {
        case 0: {
          auto b = balance(s);
          EXPECT_EQ(balance(b), b);
          s = b;
          break;
        }
        case 1: {
          auto i = gen() % s.size();
          double w = s.size() == 1 ? 1.0 : unit(gen);
          s = set_weight(s, i, w);
          EXPECT_EQ(s.target()[i], w);
          break;
        }
        case 2: {
          auto before = s;
          double w = unit(gen) * 0.99;
          auto added = add_label(s, Label("n" + std::to_string(next_label++)), w);
          auto restored = remove_label(added, added.size() - 1);
          for (std::size_t i = 0; i < s.size(); ++i)
            EXPECT_NEAR(restored.target()[i], before.target()[i], 1e-9);
          s = added;
          break;
        }
        case 3:
          if (s.size() >= 2) s = remove_label(s, gen() % s.size());
          break;
        case 4: {
          std::vector<double> w(s.target().weights().begin(), s.target().weights().end());
          double c = 0.1 + 10.0 * unit(gen);
          std::vector<double> scaled = w;
          for (double& x : scaled) x *= c;
          auto a = normalize(w), b = normalize(scaled);
          for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
          break;
        }
      }
      expect_valid(s.target());
    }
  }
}
