#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "divctl/distribution.hpp"
#include "divctl/error.hpp"
#include "divctl/gateway.hpp"
#include "divctl/json_io.hpp"
#include "divctl/metrics.hpp"
#include "divctl/rng.hpp"
#include "divctl/sampler.hpp"
#include "divctl/session.hpp"
#include "divctl/store.hpp"
#include "divctl/verify.hpp"

namespace divctl {

/// UTC wall-clock time as `YYYY-MM-DDTHH:MM:SSZ`.
inline std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct EngineConfig {
  std::size_t max_n = 200;
  std::size_t suggested_labels = 5;
  SamplingMode mode = SamplingMode::Quota;
  AlignmentForm alignment_form = AlignmentForm::InverseOnePlus;
  std::function<std::string()> clock = utc_now;
};

/// Operations on a Session value. Each one either completes and appends its
/// log record, or throws and leaves the session as it was.
namespace ops {

inline std::string image_id_for(const std::string& session_id, std::size_t k, std::size_t i) {
  return session_id + "-" + std::to_string(k) + "-" + std::to_string(i);
}

inline std::size_t attribute_index(const Session& s, std::string_view name) {
  for (std::size_t i = 0; i < s.attributes.size(); ++i)
    if (iequals(s.attributes[i].name(), trim(name))) return i;
  fail(Errc::UnknownAttribute, "no attribute named '" + std::string(trim(name)) + "'");
}

inline MeasureOptions measure_options(const Gateway& gw, const Session& s, const LabelSpace& space) {
  MeasureOptions o;
  o.label_space = &space;
  o.concurrency = gw.config.concurrency;
  o.classify_against_prompt = gw.config.classify_against_prompt;
  o.context = s.context;
  return o;
}

inline std::vector<ImageView> head_views(const Session& s) {
  std::vector<ImageView> views;
  for (const auto& img : s.head_snapshot().images)
    views.push_back({img.image_id, s.image_content.at(img.image_id)});
  return views;
}

/// Plans, generates, embeds and measures one iteration from the working
/// specs, then appends it as a child of the current head.
inline void run_iteration(Session& s, const Gateway& gw, const EngineConfig& cfg, std::uint64_t seed) {
  const std::size_t k = s.iterations.size();
  PromptPlan plan{s.context, s.n, s.attributes, seed, cfg.mode};
  auto planned = plan_iteration(plan);

  std::vector<ImagePayload> payloads(planned.size());
  parallel_for(planned.size(), gw.config.concurrency, [&](std::size_t i) {
    payloads[i] = generate_image(*gw.images, planned[i].prompt, combine64(combine64(seed, k), i));
  });

  std::vector<std::string> ids;
  std::vector<ImageView> views;
  for (std::size_t i = 0; i < planned.size(); ++i) ids.push_back(image_id_for(s.id, k, i));
  for (std::size_t i = 0; i < planned.size(); ++i) views.push_back({ids[i], payloads[i].content});

  auto space = LabelSpace::from(s.attributes);
  auto options = measure_options(gw, s, space);
  auto embeddings = embed_images(*gw.embedder, views, options);
  std::map<std::string, MeasuredDistribution> measured;
  for (const auto& spec : s.attributes)
    measured[spec.name()] = tally(views, embeddings, spec, embed_labels(*gw.embedder, spec, options));

  IterationSnapshot snap;
  snap.index = k;
  if (k > 0) snap.parent = s.head;
  snap.attributes = s.attributes;
  snap.seed = seed;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    ImageRecord r;
    r.image_id = ids[i];
    r.index = i;
    r.prompt = planned[i].prompt;
    r.assignment = planned[i].assignment;
    r.payload_ref = "images/" + ids[i];
    r.seed = combine64(combine64(seed, k), i);
    r.embedding = embeddings[i];
    r.predicted.image_id = ids[i];
    for (const auto& [name, m] : measured) r.predicted.per_attribute[name] = m.predictions[i];
    snap.images.push_back(std::move(r));
  }
  snap.measured = measured;

  for (std::size_t i = 0; i < planned.size(); ++i) s.image_content[ids[i]] = std::move(payloads[i].content);
  s.iterations.push_back(std::move(snap));
  s.head = k;
  s.live = std::move(measured);
}

inline Session create(const Gateway& gw, const EngineConfig& cfg, const std::string& id,
                      const std::string& context, std::size_t n, std::uint64_t seed) {
  if (trim(context).empty()) fail(Errc::InvalidArgument, "context prompt is empty");
  if (n < 1 || n > cfg.max_n)
    fail(Errc::InvalidCount, "image count must be in [1, " + std::to_string(cfg.max_n) + "]");
  Session s;
  s.id = id;
  s.context = trim(context);
  s.n = n;
  s.seed = seed;
  run_iteration(s, gw, cfg, seed);
  s.log.push_back(json{{"op", "create"}, {"id", id}, {"context", s.context}, {"n", n}, {"seed", seed}}.dump());
  return s;
}

inline void add_attribute(Session& s, const Gateway& gw, const EngineConfig& cfg, const std::string& name,
                          const std::optional<std::vector<std::string>>& labels) {
  auto trimmed = trim(name);
  if (trimmed.empty()) fail(Errc::InvalidAttribute, "attribute name is empty");
  if (s.find_attribute(trimmed)) fail(Errc::DuplicateAttribute, "attribute '" + trimmed + "' already exists");
  std::vector<Label> resolved =
      labels ? make_labels(*labels) : suggest_labels(*gw.llm, s.context, trimmed, cfg.suggested_labels);
  auto spec = AttributeSpec::uniform(trimmed, resolved);

  auto specs = s.attributes;
  specs.push_back(spec);
  auto space = LabelSpace::from(specs);
  auto views = head_views(s);
  auto m = measure(views, spec, *gw.embedder, measure_options(gw, s, space));

  std::vector<std::string> texts;
  for (const auto& l : spec.labels()) texts.push_back(l.text());
  s.attributes.push_back(spec);
  s.live[spec.name()] = std::move(m);
  s.log.push_back(json{{"op", "add_attribute"}, {"name", spec.name()}, {"labels", texts}}.dump());
}

inline void set_distribution(Session& s, const std::string& name, std::span<const double> weights) {
  auto i = attribute_index(s, name);
  if (weights.size() != s.attributes[i].size())
    fail(Errc::LengthMismatch, "expected " + std::to_string(s.attributes[i].size()) + " weights");
  auto updated = s.attributes[i].with_target(normalize(weights));
  s.log.push_back(json{{"op", "set_distribution"}, {"name", updated.name()}, {"weights", updated.target()}}.dump());
  s.attributes[i] = std::move(updated);
}

inline void set_weight(Session& s, const std::string& name, std::size_t index, double weight) {
  auto i = attribute_index(s, name);
  auto updated = divctl::set_weight(s.attributes[i], index, weight);
  s.log.push_back(
      json{{"op", "set_weight"}, {"name", updated.name()}, {"index", index}, {"weight", weight}}.dump());
  s.attributes[i] = std::move(updated);
}

inline void balance(Session& s, const std::string& name) {
  auto i = attribute_index(s, name);
  auto updated = divctl::balance(s.attributes[i]);
  s.log.push_back(json{{"op", "balance"}, {"name", updated.name()}}.dump());
  s.attributes[i] = std::move(updated);
}

inline void add_label(Session& s, const std::string& name, const std::string& label, double weight) {
  auto i = attribute_index(s, name);
  auto updated = divctl::add_label(s.attributes[i], Label(label), weight);
  s.log.push_back(json{{"op", "add_label"},
                       {"name", updated.name()},
                       {"label", updated.labels().back().text()},
                       {"weight", weight}}
                      .dump());
  s.live.erase(updated.name());
  s.attributes[i] = std::move(updated);
}

inline void remove_label(Session& s, const std::string& name, std::size_t index) {
  auto i = attribute_index(s, name);
  auto updated = divctl::remove_label(s.attributes[i], index);
  s.log.push_back(json{{"op", "remove_label"}, {"name", updated.name()}, {"index", index}}.dump());
  s.live.erase(updated.name());
  s.attributes[i] = std::move(updated);
}

inline void regenerate(Session& s, const Gateway& gw, const EngineConfig& cfg, std::uint64_t seed) {
  run_iteration(s, gw, cfg, seed);
  s.log.push_back(json{{"op", "regenerate"}, {"seed", seed}}.dump());
}

inline void branch(Session& s, std::size_t k) {
  if (k >= s.iterations.size())
    fail(Errc::UnknownIteration, "no iteration " + std::to_string(k));
  s.attributes = s.iterations[k].attributes;
  s.live = s.iterations[k].measured;
  s.head = k;
  s.log.push_back(json{{"op", "branch"}, {"iteration", k}}.dump());
}

/// Applies one log record. `s` must be empty for a create record.
inline void apply(Session& s, const Gateway& gw, const EngineConfig& cfg, const std::string& record) {
  auto j = json::parse(record, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("op"))
    fail(Errc::CorruptStore, "unreadable log record");
  const auto op = j.at("op").get<std::string>();
  if (op == "create") {
    if (!s.iterations.empty()) fail(Errc::CorruptStore, "create record inside a session");
    s = create(gw, cfg, j.at("id"), j.at("context"), j.at("n"), j.at("seed"));
  } else if (s.iterations.empty()) {
    fail(Errc::CorruptStore, "log does not start with create");
  } else if (op == "add_attribute") {
    add_attribute(s, gw, cfg, j.at("name"), j.at("labels").get<std::vector<std::string>>());
  } else if (op == "set_distribution") {
    set_distribution(s, j.at("name"), j.at("weights").get<std::vector<double>>());
  } else if (op == "set_weight") {
    set_weight(s, j.at("name"), j.at("index"), j.at("weight"));
  } else if (op == "balance") {
    balance(s, j.at("name"));
  } else if (op == "add_label") {
    add_label(s, j.at("name"), j.at("label"), j.at("weight"));
  } else if (op == "remove_label") {
    remove_label(s, j.at("name"), j.at("index"));
  } else if (op == "regenerate") {
    regenerate(s, gw, cfg, j.at("seed"));
  } else if (op == "branch") {
    branch(s, j.at("iteration"));
  } else {
    fail(Errc::CorruptStore, "unknown log operation '" + op + "'");
  }
}

/// Rebuilds a session by re-running its log against `gw`.
inline Session replay(std::span<const std::string> log, const Gateway& gw, const EngineConfig& cfg) {
  Session s;
  for (const auto& record : log) apply(s, gw, cfg, record);
  if (s.iterations.empty()) fail(Errc::CorruptStore, "empty log");
  return s;
}

inline std::vector<std::string> images_with_label(const Session& s, const std::string& name,
                                                  std::size_t label_index) {
  auto i = attribute_index(s, name);
  auto it = s.live.find(s.attributes[i].name());
  if (it == s.live.end())
    fail(Errc::NotYetMeasured, "attribute '" + s.attributes[i].name() + "' has not been measured");
  if (label_index >= it->second.labels.size())
    fail(Errc::IndexOutOfRange, "label index " + std::to_string(label_index) + " out of range");
  return it->second.images_with_label(label_index);
}

/// Span of the head images and alignment of every measured attribute.
inline DiversityReport metrics(const Session& s, const EngineConfig& cfg) {
  DiversityReport r;
  const auto& snap = s.head_snapshot();
  std::vector<EmbeddingVector> embeddings;
  for (const auto& img : snap.images) embeddings.push_back(img.embedding);
  r.span = span(embeddings);
  r.image_count = snap.images.size();
  for (const auto& spec : s.attributes) {
    auto it = s.live.find(spec.name());
    if (it == s.live.end() || it->second.total() == 0) continue;
    r.alignment[spec.name()] = alignment(it->second.empirical(), spec.target(), cfg.alignment_form);
  }
  r.generated_at = cfg.clock ? cfg.clock() : std::string();
  return r;
}

}  // namespace ops

/// Thread-safe owner of sessions. Writes to one session are serialized;
/// each write runs on a copy that replaces the stored session only after it
/// succeeds and, when a store is configured, has been persisted.
class Engine {
 public:
  explicit Engine(Gateway gateway, EngineConfig config = {},
                  std::optional<std::filesystem::path> store_root = std::nullopt)
      : gw_(std::move(gateway)), cfg_(std::move(config)) {
    if (store_root) store_.emplace(*store_root);
  }

  const EngineConfig& config() const noexcept { return cfg_; }
  const Gateway& gateway() const noexcept { return gw_; }

  std::string create_session(const std::string& context, std::size_t n, std::uint64_t seed) {
    auto id = next_id();
    auto s = ops::create(gw_, cfg_, id, context, n, seed);
    if (store_) store_->save(nullptr, s);
    auto slot = std::make_shared<Slot>();
    slot->session = std::move(s);
    std::lock_guard lock(map_mutex_);
    slots_[id] = std::move(slot);
    return id;
  }

  /// Calls `fn(const Session&)` while holding the session's lock.
  template <typename Fn>
  decltype(auto) read(const std::string& id, Fn&& fn) const {
    auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    return std::forward<Fn>(fn)(static_cast<const Session&>(slot->session));
  }

  Session session(const std::string& id) const {
    return read(id, [](const Session& s) { return s; });
  }

  void add_attribute(const std::string& id, const std::string& name,
                     const std::optional<std::vector<std::string>>& labels = std::nullopt) {
    mutate(id, [&](Session& s) { ops::add_attribute(s, gw_, cfg_, name, labels); });
  }
  void set_distribution(const std::string& id, const std::string& name, std::span<const double> weights) {
    mutate(id, [&](Session& s) { ops::set_distribution(s, name, weights); });
  }
  void set_weight(const std::string& id, const std::string& name, std::size_t index, double weight) {
    mutate(id, [&](Session& s) { ops::set_weight(s, name, index, weight); });
  }
  void balance(const std::string& id, const std::string& name) {
    mutate(id, [&](Session& s) { ops::balance(s, name); });
  }
  void add_label(const std::string& id, const std::string& name, const std::string& label, double weight) {
    mutate(id, [&](Session& s) { ops::add_label(s, name, label, weight); });
  }
  void remove_label(const std::string& id, const std::string& name, std::size_t index) {
    mutate(id, [&](Session& s) { ops::remove_label(s, name, index); });
  }
  /// Returns the index of the new iteration.
  std::size_t regenerate(const std::string& id, std::uint64_t seed) {
    std::size_t k = 0;
    mutate(id, [&](Session& s) {
      ops::regenerate(s, gw_, cfg_, seed);
      k = s.head;
    });
    return k;
  }
  void branch(const std::string& id, std::size_t k) {
    mutate(id, [&](Session& s) { ops::branch(s, k); });
  }

  std::vector<std::string> images_with_label(const std::string& id, const std::string& name,
                                             std::size_t label_index) const {
    return read(id, [&](const Session& s) { return ops::images_with_label(s, name, label_index); });
  }

  DiversityReport metrics(const std::string& id) const {
    return read(id, [&](const Session& s) { return ops::metrics(s, cfg_); });
  }

  std::vector<std::string> suggest_attributes(const std::string& id) const {
    auto context = read(id, [](const Session& s) { return s.context; });
    return divctl::suggest_attributes(*gw_.llm, context);
  }

  /// Payload bytes of an image id of the form `{session}-{k}-{i}`.
  std::string image_content(const std::string& image_id) const {
    auto dash = image_id.find('-');
    if (dash == std::string::npos || !SessionStore::valid_id(image_id.substr(0, dash)))
      fail(Errc::UnknownImage, "no image '" + image_id + "'");
    std::shared_ptr<Slot> slot;
    try {
      slot = find(image_id.substr(0, dash));
    } catch (const Error& e) {
      if (e.code() == Errc::UnknownSession) fail(Errc::UnknownImage, "no image '" + image_id + "'");
      throw;
    }
    std::lock_guard lock(slot->mutex);
    auto it = slot->session.image_content.find(image_id);
    if (it == slot->session.image_content.end()) fail(Errc::UnknownImage, "no image '" + image_id + "'");
    return it->second;
  }

 private:
  struct Slot {
    mutable std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard lock(map_mutex_);
    auto it = slots_.find(id);
    if (it != slots_.end()) return it->second;
    if (!store_ || !store_->exists(id)) fail(Errc::UnknownSession, "no session '" + id + "'");
    auto slot = std::make_shared<Slot>();
    slot->session = store_->load(id);
    slots_[id] = slot;
    return slot;
  }

  template <typename Op>
  void mutate(const std::string& id, Op&& op) {
    auto slot = find(id);
    std::lock_guard lock(slot->mutex);
    Session next = slot->session;
    op(next);
    if (store_) store_->save(&slot->session, next);
    slot->session = std::move(next);
  }

  std::string next_id() {
    std::lock_guard lock(map_mutex_);
    for (;;) {
      char buf[24];
      std::snprintf(buf, sizeof buf, "s%04zu", ++counter_);
      std::string id = buf;
      if (!slots_.count(id) && !(store_ && store_->exists(id))) return id;
    }
  }

  Gateway gw_;
  EngineConfig cfg_;
  std::optional<SessionStore> store_;
  mutable std::mutex map_mutex_;
  mutable std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::size_t counter_ = 0;
};

}  // namespace divctl
