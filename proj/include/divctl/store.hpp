#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>

#include "divctl/error.hpp"
#include "divctl/json_io.hpp"
#include "divctl/gateway/mock.hpp"
#include "divctl/session.hpp"

namespace divctl {

/// Per-session directory layout under `root`:
///
///   {id}/log              header line, then one operation per line (append-only)
///   {id}/state            working specs, head and live measurements
///   {id}/snapshots/{k}    one IterationSnapshot per file
///   {id}/images/{image}   payload bytes
///
/// Every JSON record starts with a schema_version field. The log is written
/// last, so a session whose state claims more operations than its log holds
/// is reported as corrupt instead of being half-loaded.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  bool exists(const std::string& id) const {
    return valid_id(id) && std::filesystem::exists(root_ / id / "log");
  }

  /// Writes what changed between `before` and `after`. `before` may be null
  /// for a new session.
  void save(const Session* before, const Session& after) const {
    namespace fs = std::filesystem;
    if (!valid_id(after.id)) fail(Errc::InvalidArgument, "bad session id");
    const auto dir = root_ / after.id;
    fs::create_directories(dir / "snapshots");
    fs::create_directories(dir / "images");

    for (const auto& [image_id, bytes] : after.image_content)
      if (!before || !before->image_content.count(image_id))
        write_atomic(dir / "images" / image_id, bytes);

    const std::size_t first_new = before ? before->iterations.size() : 0;
    for (std::size_t k = first_new; k < after.iterations.size(); ++k) {
      json j = after.iterations[k];
      j["schema_version"] = kSchemaVersion;
      write_atomic(dir / "snapshots" / std::to_string(k), j.dump() + "\n");
    }

    write_atomic(dir / "state", state_json(after).dump() + "\n");

    std::string appended;
    const std::size_t first_line = before ? before->log.size() : 0;
    if (!before) appended = json{{"schema_version", kSchemaVersion}, {"session_id", after.id}}.dump() + "\n";
    for (std::size_t i = first_line; i < after.log.size(); ++i) appended += after.log[i] + "\n";
    std::ofstream log(dir / "log", std::ios::binary | std::ios::app);
    log << appended;
    log.flush();
    if (!log) fail(Errc::CorruptStore, "could not append to the session log");
  }

  Session load(const std::string& id) const {
    namespace fs = std::filesystem;
    if (!exists(id)) fail(Errc::UnknownSession, "no stored session '" + id + "'");
    const auto dir = root_ / id;
    try {
      Session s;
      auto log_lines = read_lines(dir / "log");
      if (log_lines.empty()) corrupt("empty log");
      auto header = parse(log_lines.front());
      check_version(header);
      if (header.at("session_id").get<std::string>() != id) corrupt("log header names another session");
      for (std::size_t i = 1; i < log_lines.size(); ++i) {
        parse(log_lines[i]);
        s.log.push_back(log_lines[i]);
      }

      auto state = parse(read_file(dir / "state"));
      check_version(state);
      s.id = state.at("id").get<std::string>();
      if (s.id != id) corrupt("state names another session");
      s.context = state.at("context").get<std::string>();
      s.n = state.at("n").get<std::size_t>();
      s.seed = state.at("seed").get<std::uint64_t>();
      s.attributes = state.at("attributes").get<std::vector<AttributeSpec>>();
      s.head = state.at("head").get<std::size_t>();
      for (const auto& [name, m] : state.at("live").items())
        s.live[name] = m.get<MeasuredDistribution>();
      if (state.at("log_length").get<std::size_t>() != s.log.size())
        corrupt("log length does not match state");

      const auto count = state.at("iteration_count").get<std::size_t>();
      for (std::size_t k = 0; k < count; ++k) {
        auto j = parse(read_file(dir / "snapshots" / std::to_string(k)));
        check_version(j);
        auto snap = j.get<IterationSnapshot>();
        if (snap.index != k) corrupt("snapshot index mismatch");
        if (snap.images.size() != s.n) corrupt("snapshot image count mismatch");
        if (snap.parent && *snap.parent >= k) corrupt("snapshot parent is not older");
        s.iterations.push_back(std::move(snap));
      }
      if (s.iterations.empty() || s.head >= s.iterations.size()) corrupt("head out of range");

      for (const auto& [image_id, digest] : state.at("payloads").items()) {
        auto bytes = read_file(dir / "images" / image_id);
        if (bytes.size() != digest.at("bytes").get<std::size_t>() ||
            hex64(fnv1a64(bytes)) != digest.at("fnv1a").get<std::string>())
          corrupt("payload " + image_id + " does not match its digest");
        s.image_content.emplace(image_id, std::move(bytes));
      }
      for (const auto& snap : s.iterations)
        for (const auto& img : snap.images)
          if (!s.image_content.count(img.image_id)) corrupt("missing payload " + img.image_id);
      return s;
    } catch (const Error& e) {
      if (e.code() == Errc::CorruptStore) throw;
      fail(Errc::CorruptStore, std::string("session '") + id + "': " + e.what());
    } catch (const std::exception& e) {
      fail(Errc::CorruptStore, std::string("session '") + id + "': " + e.what());
    }
  }

  static bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
  }

 private:
  [[noreturn]] static void corrupt(const std::string& why) { fail(Errc::CorruptStore, why); }

  static void check_version(const json& j) {
    if (!j.is_object() || j.value("schema_version", -1) != kSchemaVersion)
      corrupt("unsupported schema version");
  }

  static json parse(const std::string& text) {
    auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) corrupt("unparseable record");
    return j;
  }

  static std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) corrupt("missing file " + p.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  /// Lines of a newline-terminated file; a missing final newline means the
  /// last append was cut short.
  static std::vector<std::string> read_lines(const std::filesystem::path& p) {
    auto text = read_file(p);
    if (!text.empty() && text.back() != '\n') corrupt("log ends mid-record");
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) lines.push_back(line);
    return lines;
  }

  static void write_atomic(const std::filesystem::path& p, const std::string& bytes) {
    auto tmp = p;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << bytes;
      out.flush();
      if (!out) fail(Errc::CorruptStore, "could not write " + p.filename().string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, p, ec);
    if (ec) fail(Errc::CorruptStore, "could not move " + p.filename().string() + " into place");
  }

  static json state_json(const Session& s) {
    json live = json::object();
    for (const auto& [name, m] : s.live) live[name] = m;
    json payloads = json::object();
    for (const auto& [image_id, bytes] : s.image_content)
      payloads[image_id] = json{{"bytes", bytes.size()}, {"fnv1a", hex64(fnv1a64(bytes))}};
    return json{{"schema_version", kSchemaVersion},
                {"id", s.id},
                {"context", s.context},
                {"n", s.n},
                {"seed", s.seed},
                {"attributes", s.attributes},
                {"head", s.head},
                {"live", live},
                {"iteration_count", s.iterations.size()},
                {"log_length", s.log.size()},
                {"payloads", payloads}};
  }

  std::filesystem::path root_;
};

}  // namespace divctl
