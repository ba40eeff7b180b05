#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divctl/error.hpp"

namespace divctl {

/// Absolute tolerance on the sum of a Distribution.
inline constexpr double kSumTolerance = 1e-9;

inline std::string trim(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto first = std::find_if_not(text.begin(), text.end(), is_space);
  auto last = std::find_if_not(text.rbegin(), text.rend(), is_space).base();
  if (first >= last) return {};
  return std::string(first, last);
}

inline std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](unsigned char x, unsigned char y) {
           return std::tolower(x) == std::tolower(y);
         });
}

/// A label phrase. Always trimmed and non-empty.
class Label {
 public:
  explicit Label(std::string_view text) : text_(trim(text)) {
    if (text_.empty()) fail(Errc::EmptyLabel, "label text is empty");
  }

  const std::string& text() const noexcept { return text_; }

  /// Case-insensitive identity used for duplicate detection.
  bool same_as(const Label& other) const noexcept { return iequals(text_, other.text_); }

  friend bool operator==(const Label&, const Label&) = default;

 private:
  std::string text_;
};

inline std::vector<Label> make_labels(std::span<const std::string> texts) {
  std::vector<Label> labels;
  labels.reserve(texts.size());
  for (const auto& t : texts) labels.emplace_back(t);
  return labels;
}

/// Probability vector over an attribute's labels.
class Distribution {
 public:
  /// Validates: length >= 1, each weight finite and in [0, 1], sum 1 +- 1e-9.
  explicit Distribution(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) fail(Errc::InvalidDistribution, "distribution has no weights");
    double sum = 0.0;
    for (double w : weights_) {
      if (!std::isfinite(w) || w < 0.0 || w > 1.0)
        fail(Errc::InvalidDistribution, "weight outside [0,1]: " + std::to_string(w));
      sum += w;
    }
    if (std::abs(sum - 1.0) > kSumTolerance)
      fail(Errc::InvalidDistribution, "weights sum to " + std::to_string(sum));
  }

  static Distribution uniform(std::size_t k) {
    if (k == 0) fail(Errc::InvalidDistribution, "uniform distribution over zero labels");
    return Distribution(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  static Distribution point_mass(std::size_t k, std::size_t index) {
    std::vector<double> w(k, 0.0);
    w.at(index) = 1.0;
    return Distribution(std::move(w));
  }

  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> weights_;
};

/// Proportional rescaling of non-negative weights to a Distribution.
inline Distribution normalize(std::span<const double> raw_weights) {
  if (raw_weights.empty()) fail(Errc::AllZero, "no weights given");
  double sum = 0.0;
  for (double w : raw_weights) {
    if (!std::isfinite(w) || w < 0.0)
      fail(Errc::NegativeWeight, "weight is negative or non-finite");
    sum += w;
  }
  if (!(sum > 0.0)) fail(Errc::AllZero, "every weight is zero");
  if (!std::isfinite(sum)) fail(Errc::NegativeWeight, "weights overflow");
  std::vector<double> out(raw_weights.begin(), raw_weights.end());
  for (double& w : out) w /= sum;
  return Distribution(std::move(out));
}

inline Distribution normalize(std::initializer_list<double> raw_weights) {
  return normalize(std::span<const double>(raw_weights.begin(), raw_weights.size()));
}

/// A named attribute with its ordered labels and target distribution.
class AttributeSpec {
 public:
  AttributeSpec(std::string_view name, std::vector<Label> labels, Distribution target)
      : name_(trim(name)), labels_(std::move(labels)), target_(std::move(target)) {
    if (name_.empty()) fail(Errc::InvalidAttribute, "attribute name is empty");
    if (labels_.empty()) fail(Errc::EmptyLabelSet, "attribute '" + name_ + "' has no labels");
    if (target_.size() != labels_.size())
      fail(Errc::LengthMismatch, "attribute '" + name_ + "': target length differs from labels");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        if (labels_[i].same_as(labels_[j]))
          fail(Errc::DuplicateLabel, "attribute '" + name_ + "': duplicate label '" +
                                         labels_[j].text() + "'");
  }

  /// Attribute with a uniform target.
  static AttributeSpec uniform(std::string_view name, std::vector<Label> labels) {
    auto k = labels.size();
    if (k == 0) fail(Errc::EmptyLabelSet, "attribute has no labels");
    return AttributeSpec(name, std::move(labels), Distribution::uniform(k));
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Label>& labels() const noexcept { return labels_; }
  const Distribution& target() const noexcept { return target_; }
  std::size_t size() const noexcept { return labels_.size(); }

  std::optional<std::size_t> find_label(std::string_view text) const {
    auto key = trim(text);
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (iequals(labels_[i].text(), key)) return i;
    return std::nullopt;
  }

  AttributeSpec with_target(Distribution target) const {
    return AttributeSpec(name_, labels_, std::move(target));
  }

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;

 private:
  std::string name_;
  std::vector<Label> labels_;
  Distribution target_;
};

/// Uniform target over the attribute's labels (the Balance button).
inline AttributeSpec balance(const AttributeSpec& spec) {
  return spec.with_target(Distribution::uniform(spec.size()));
}

/// Pins one slider to `new_weight` and rescales the others proportionally so
/// the total stays 1. If every other weight is zero, the remainder is split
/// uniformly among them.
inline AttributeSpec set_weight(const AttributeSpec& spec, std::size_t label_index,
                                double new_weight) {
  const auto k = spec.size();
  if (label_index >= k) fail(Errc::IndexOutOfRange, "label index " + std::to_string(label_index));
  if (!std::isfinite(new_weight) || new_weight < 0.0 || new_weight > 1.0)
    fail(Errc::WeightOutOfRange, "weight " + std::to_string(new_weight));
  if (k == 1) {
    if (new_weight != 1.0)
      fail(Errc::WeightOutOfRange, "a single-label attribute must keep weight 1");
    return spec;
  }

  const auto old = spec.target().weights();
  double rest = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    if (i != label_index) rest += old[i];

  const double remainder = 1.0 - new_weight;
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) {
    if (i == label_index) {
      w[i] = new_weight;
    } else if (rest > 0.0) {
      w[i] = old[i] * (remainder / rest);
    } else {
      w[i] = remainder / static_cast<double>(k - 1);
    }
  }
  return spec.with_target(Distribution(std::move(w)));
}

/// Appends a label at `initial_weight`, scaling existing weights by (1 - w).
inline AttributeSpec add_label(const AttributeSpec& spec, const Label& label,
                               double initial_weight) {
  if (!std::isfinite(initial_weight) || initial_weight < 0.0 || initial_weight >= 1.0)
    fail(Errc::WeightOutOfRange, "initial weight must lie in [0,1)");
  if (spec.find_label(label.text()))
    fail(Errc::DuplicateLabel, "label '" + label.text() + "' already present");

  auto labels = spec.labels();
  labels.push_back(label);
  std::vector<double> w(spec.target().weights().begin(), spec.target().weights().end());
  for (double& x : w) x *= (1.0 - initial_weight);
  w.push_back(initial_weight);
  return AttributeSpec(spec.name(), std::move(labels), Distribution(std::move(w)));
}

/// Removes a label and renormalizes the rest; uniform if the removed label
/// held all the mass.
inline AttributeSpec remove_label(const AttributeSpec& spec, std::size_t label_index) {
  const auto k = spec.size();
  if (label_index >= k) fail(Errc::IndexOutOfRange, "label index " + std::to_string(label_index));
  if (k < 2) fail(Errc::LastLabel, "cannot remove the last label of '" + spec.name() + "'");

  std::vector<Label> labels;
  std::vector<double> w;
  labels.reserve(k - 1);
  w.reserve(k - 1);
  double rest = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (i == label_index) continue;
    labels.push_back(spec.labels()[i]);
    w.push_back(spec.target()[i]);
    rest += spec.target()[i];
  }
  if (rest > 0.0) {
    for (double& x : w) x /= rest;
  } else {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(k - 1));
  }
  return AttributeSpec(spec.name(), std::move(labels), Distribution(std::move(w)));
}

}  // namespace divctl
