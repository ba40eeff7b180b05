#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/error.hpp"
#include "divctl/rng.hpp"

namespace divctl {

enum class SamplingMode {
  Quota,  ///< largest-remainder counts, seeded shuffle of slots
  IID,    ///< independent categorical draws
};

/// Chosen label index per attribute name.
struct Assignment {
  std::map<std::string, std::size_t, std::less<>> choices;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct PromptPlan {
  std::string context;
  std::size_t count = 1;
  std::vector<AttributeSpec> attributes;
  std::uint64_t seed = 0;
  SamplingMode mode = SamplingMode::Quota;

  void validate() const {
    if (trim(context).empty()) fail(Errc::InvalidPlan, "context prompt is empty");
    if (count < 1) fail(Errc::InvalidCount, "image count must be at least 1");
    for (std::size_t i = 0; i < attributes.size(); ++i)
      for (std::size_t j = i + 1; j < attributes.size(); ++j)
        if (iequals(attributes[i].name(), attributes[j].name()))
          fail(Errc::DuplicateAttribute, "attribute '" + attributes[j].name() + "' repeated");
  }
};

struct PlannedPrompt {
  Assignment assignment;
  std::string prompt;
};

/// Largest-remainder apportionment of `seats` over `weights`.
/// Ties in the remainder go to the lower index.
inline std::vector<std::size_t> largest_remainder(std::span<const double> weights,
                                                  std::size_t seats) {
  const auto k = weights.size();
  std::vector<std::size_t> counts(k, 0);
  std::vector<double> remainders(k, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    double quota = static_cast<double>(seats) * weights[i];
    double whole = std::floor(quota);
    counts[i] = static_cast<std::size_t>(whole);
    remainders[i] = quota - whole;
    assigned += counts[i];
  }
  // Floating error may push the floor total one seat over; take it back from
  // the smallest remainder.
  while (assigned > seats) {
    std::size_t victim = k;
    for (std::size_t i = 0; i < k; ++i)
      if (counts[i] > 0 && (victim == k || remainders[i] < remainders[victim])) victim = i;
    --counts[victim];
    remainders[victim] += 1.0;
    --assigned;
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  for (std::size_t r = 0; assigned < seats; r = (r + 1) % k) {
    ++counts[order[r]];
    ++assigned;
  }
  return counts;
}

/// Index of the first label whose cumulative weight exceeds `u`, skipping
/// zero-weight labels.
inline std::size_t categorical_pick(std::span<const double> weights, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (weights[j] <= 0.0) continue;
    cumulative += weights[j];
    last_positive = j;
    if (u < cumulative) return j;
  }
  return last_positive;
}

inline std::vector<Assignment> sample_assignments(const PromptPlan& plan) {
  plan.validate();
  std::vector<Assignment> out(plan.count);
  for (std::size_t a = 0; a < plan.attributes.size(); ++a) {
    const auto& attr = plan.attributes[a];
    const auto weights = attr.target().weights();
    auto rng = SplitMix64::stream(plan.seed, a);
    if (plan.mode == SamplingMode::Quota) {
      auto counts = largest_remainder(weights, plan.count);
      std::vector<std::size_t> slots;
      slots.reserve(plan.count);
      for (std::size_t j = 0; j < counts.size(); ++j) slots.insert(slots.end(), counts[j], j);
      seeded_shuffle(slots, rng);
      for (std::size_t i = 0; i < plan.count; ++i) out[i].choices[attr.name()] = slots[i];
    } else {
      for (std::size_t i = 0; i < plan.count; ++i)
        out[i].choices[attr.name()] = categorical_pick(weights, rng.uniform01());
    }
  }
  return out;
}

/// `{context}, {name1} {label1}, {name2} {label2}, ...` in attribute order.
inline std::string build_prompt(std::string_view context, std::span<const AttributeSpec> attributes,
                                const Assignment& assignment) {
  std::string prompt(context);
  for (const auto& attr : attributes) {
    auto it = assignment.choices.find(attr.name());
    if (it == assignment.choices.end())
      fail(Errc::MissingAssignment, "no label chosen for attribute '" + attr.name() + "'");
    if (it->second >= attr.size())
      fail(Errc::IndexOutOfRange, "label index out of range for '" + attr.name() + "'");
    prompt += ", ";
    prompt += attr.name();
    prompt += ' ';
    prompt += attr.labels()[it->second].text();
  }
  return prompt;
}

/// The n extended prompts of one iteration, in image-index order.
inline std::vector<PlannedPrompt> plan_iteration(const PromptPlan& plan) {
  auto assignments = sample_assignments(plan);
  std::vector<PlannedPrompt> out;
  out.reserve(assignments.size());
  for (auto& a : assignments) {
    auto prompt = build_prompt(plan.context, plan.attributes, a);
    out.push_back({std::move(a), std::move(prompt)});
  }
  return out;
}

}  // namespace divctl
