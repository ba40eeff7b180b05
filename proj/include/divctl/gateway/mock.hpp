#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/gateway/types.hpp"
#include "divctl/rng.hpp"

namespace divctl {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// True when `phrase` occurs in `text` with non-alphanumeric characters (or
/// the string ends) on both sides. Case-insensitive.
inline bool contains_phrase(std::string_view text, std::string_view phrase) {
  if (phrase.empty() || phrase.size() > text.size()) return false;
  auto lower_text = to_lower(text);
  auto lower_phrase = to_lower(phrase);
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (auto pos = lower_text.find(lower_phrase); pos != std::string::npos;
       pos = lower_text.find(lower_phrase, pos + 1)) {
    bool left_ok = pos == 0 || !is_word(lower_text[pos - 1]) || !is_word(lower_phrase.front());
    auto after = pos + lower_phrase.size();
    bool right_ok =
        after == lower_text.size() || !is_word(lower_text[after]) || !is_word(lower_phrase.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

/// Prompt-echo image generator. Content is the prompt itself; ids are a hash
/// of (prompt, seed) plus an occurrence counter so repeated calls stay distinct.
class MockImageGenerator final : public ImageGenerator {
 public:
  ImagePayload generate(const std::string& prompt, std::uint64_t seed) override {
    auto key = combine64(fnv1a64(prompt), seed);
    std::uint64_t occurrence;
    {
      std::lock_guard lock(mutex_);
      occurrence = seen_[key]++;
    }
    return ImagePayload{"mock-" + hex64(key) + "-" + std::to_string(occurrence), prompt, prompt,
                        seed};
  }

 private:
  std::mutex mutex_;
  std::map<std::uint64_t, std::uint64_t> seen_;
};

/// Table-driven language model. Answers with a numbered transcript so the
/// real parsing path is exercised.
class MockLanguageModel final : public LanguageModel {
 public:
  std::string complete(const CompletionRequest& request) override {
    std::vector<std::string> items;
    std::string header;
    if (request.task == CompletionTask::SuggestLabels) {
      items = labels_for(request.context, request.attribute);
      while (items.size() < request.count)
        items.push_back(request.attribute + " variant " + std::to_string(items.size() + 1));
      items.resize(request.count);
      header = "Here are " + std::to_string(request.count) + " possible labels of attribute " +
               request.attribute + " in the context of " + request.context + ":";
    } else {
      items = attributes_for(request.context);
      header = "Here are 3 possible attributes in the context of " + request.context + ":";
    }
    std::string text = header;
    for (std::size_t i = 0; i < items.size(); ++i)
      text += "\n" + std::to_string(i + 1) + ". " + items[i];
    return text;
  }

  /// Fixture lookup; the context matches when it contains the key as a phrase.
  static std::vector<std::string> labels_for(std::string_view context, std::string_view attribute) {
    struct Row {
      std::string_view attribute;
      std::string_view context;  // empty: any context
      std::vector<std::string> labels;
    };
    static const std::vector<Row> kTable = {
        {"age", "doctor", {"30s", "40s", "50s", "60s", "70s"}},
        {"age", "bridge", {"Newly built", "Recent", "Old", "Ancient", "Historic"}},
        {"age", "car", {"New", "Used", "Old", "Classic", "Vintage"}},
        {"age", "person", {"Child", "Adolescent", "Young Adult", "Middle-Aged", "Elderly"}},
        {"age", "", {"Child", "Adolescent", "Young Adult", "Middle-Aged", "Elderly"}},
        {"ethnicity", "", {"Caucasian", "Black", "Asian", "Hispanic", "Middle-Eastern"}},
        {"gender", "", {"woman", "man", "non-binary"}},
        {"color", "", {"red", "green", "blue", "yellow", "purple"}},
        {"environment", "", {"city", "countryside", "forest", "desert", "coast"}},
        {"weather", "", {"sunny", "cloudy", "rainy", "snowy", "foggy"}},
        {"style", "", {"photorealistic", "cartoon", "watercolor", "pixel art", "sketch"}},
    };
    for (const auto& row : kTable) {
      if (!iequals(row.attribute, trim(attribute))) continue;
      if (row.context.empty() || contains_phrase(context, row.context)) return row.labels;
    }
    return {};
  }

  static std::vector<std::string> attributes_for(std::string_view context) {
    if (contains_phrase(context, "car")) return {"color", "environment", "weather"};
    return {"style", "color", "background"};
  }
};

/// Label-aware embedder. Basis: one dimension per distinct label text in the
/// request's label space, followed by kHashDims noise dimensions.
///
/// Images embed to the sum of the basis vectors of labels found in the
/// prompt. Each match survives with probability q; otherwise it is swapped
/// for a different label of the same attribute drawn uniformly. Noise of
/// norm sigma lives in the hash dimensions, orthogonal to every label.
class MockEmbedder final : public Embedder {
 public:
  static constexpr std::size_t kHashDims = 8;

  MockEmbedder(double q, double sigma, std::uint64_t seed = 0) : q_(q), sigma_(sigma), seed_(seed) {}

  EmbeddingVector embed(const EmbedRequest& request) override {
    if (request.labels == nullptr)
      fail(Errc::UnknownLabelSpace, "mock embedder called without a registered label space");
    if (request.payload.empty()) fail(Errc::InvalidArgument, "nothing to embed");

    const Basis basis(*request.labels);
    std::vector<double> v(basis.size() + kHashDims, 0.0);

    if (request.kind == EmbedKind::Text) {
      if (auto idx = basis.index_of(request.payload)) {
        v[*idx] = 1.0;
        return EmbeddingVector(std::move(v));
      }
      bool matched = false;
      for (const auto& g : request.labels->groups)
        for (const auto& l : g.labels)
          if (contains_phrase(request.payload, l)) {
            v[*basis.index_of(l)] += 1.0;
            matched = true;
          }
      if (!matched) add_hash_direction(v, basis.size(), fnv1a64(request.payload), 1.0);
      return EmbeddingVector(std::move(v));
    }

    const auto key_hash = combine64(fnv1a64(request.key), seed_);
    for (const auto& g : request.labels->groups) {
      for (std::size_t j = 0; j < g.labels.size(); ++j) {
        if (!contains_phrase(request.payload, g.labels[j])) continue;
        std::size_t chosen = j;
        auto rng = SplitMix64(combine64(key_hash, fnv1a64(g.attribute + '\x1f' + g.labels[j])));
        if (rng.uniform01() >= q_ && g.labels.size() > 1) {
          auto r = static_cast<std::size_t>(rng.below(g.labels.size() - 1));
          chosen = r < j ? r : r + 1;
        }
        v[*basis.index_of(g.labels[chosen])] += 1.0;
      }
    }
    if (sigma_ > 0.0) add_hash_direction(v, basis.size(), combine64(key_hash, 0x6E6F697365ULL), sigma_);
    return EmbeddingVector(std::move(v));
  }

 private:
  /// Distinct label texts (case-insensitive) in first-seen order.
  class Basis {
   public:
    explicit Basis(const LabelSpace& space) {
      for (const auto& g : space.groups)
        for (const auto& l : g.labels)
          if (!index_of(l)) texts_.push_back(to_lower(trim(l)));
    }
    std::size_t size() const noexcept { return texts_.size(); }
    std::optional<std::size_t> index_of(std::string_view text) const {
      auto key = to_lower(trim(text));
      for (std::size_t i = 0; i < texts_.size(); ++i)
        if (texts_[i] == key) return i;
      return std::nullopt;
    }

   private:
    std::vector<std::string> texts_;
  };

  static void add_hash_direction(std::vector<double>& v, std::size_t offset, std::uint64_t seed,
                                 double magnitude) {
    auto rng = SplitMix64(seed);
    double dir[kHashDims];
    double norm = 0.0;
    for (auto& d : dir) {
      d = 2.0 * rng.uniform01() - 1.0;
      norm += d * d;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      dir[0] = 1.0;
      norm = 1.0;
    }
    for (std::size_t i = 0; i < kHashDims; ++i) v[offset + i] += magnitude * dir[i] / norm;
  }

  double q_;
  double sigma_;
  std::uint64_t seed_;
};

}  // namespace divctl
