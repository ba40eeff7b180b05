#pragma once

#include <httplib.h>

#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "divctl/base64.hpp"
#include "divctl/engine.hpp"
#include "divctl/error.hpp"
#include "divctl/json_io.hpp"

namespace divctl::api {

enum class ApiCode { BadRequest, NotFound, Conflict, UpstreamUnavailable, Internal };

inline const char* to_string(ApiCode c) {
  switch (c) {
    case ApiCode::BadRequest: return "BadRequest";
    case ApiCode::NotFound: return "NotFound";
    case ApiCode::Conflict: return "Conflict";
    case ApiCode::UpstreamUnavailable: return "UpstreamUnavailable";
    case ApiCode::Internal: return "Internal";
  }
  return "Internal";
}

inline int http_status(ApiCode c) {
  switch (c) {
    case ApiCode::BadRequest: return 400;
    case ApiCode::NotFound: return 404;
    case ApiCode::Conflict: return 409;
    case ApiCode::UpstreamUnavailable: return 502;
    case ApiCode::Internal: return 500;
  }
  return 500;
}

inline ApiCode api_code(Errc e) {
  switch (e) {
    case Errc::UnknownSession:
    case Errc::UnknownImage:
    case Errc::UnknownAttribute:
    case Errc::UnknownIteration:
      return ApiCode::NotFound;
    case Errc::DuplicateAttribute:
    case Errc::DuplicateLabel:
    case Errc::NotYetMeasured:
      return ApiCode::Conflict;
    case Errc::BackendUnavailable:
    case Errc::Timeout:
    case Errc::MalformedResponse:
    case Errc::ParseFailure:
      return ApiCode::UpstreamUnavailable;
    case Errc::CorruptStore:
    case Errc::UnknownLabelSpace:
    case Errc::DimensionMismatch:
    case Errc::BindFailure:
    case Errc::RefusesHttpBackend:
    case Errc::MismatchedScenarios:
      return ApiCode::Internal;
    default:
      return ApiCode::BadRequest;
  }
}

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct Request {
  std::string method;
  std::string path;  ///< percent-encoded, without the query string
  std::map<std::string, std::string> query;
  std::string body;
};

inline Response json_response(int status, json body) {
  body["schema_version"] = kSchemaVersion;
  return {status, "application/json", body.dump()};
}

inline Response error_response(ApiCode code, const std::string& message, json detail = nullptr) {
  json err{{"code", to_string(code)}, {"message", message}};
  if (!detail.is_null()) err["detail"] = std::move(detail);
  return json_response(http_status(code), json{{"error", err}});
}

inline Response error_response(const Error& e) {
  std::string message = e.what();
  auto colon = message.find(": ");
  if (colon != std::string::npos) message = message.substr(colon + 2);
  return error_response(api_code(e.code()), message, json{{"reason", std::string(divctl::to_string(e.code()))}});
}

/// Histogram payload: labels, target weights and the live measured counts.
inline json histogram(const Session& s, const AttributeSpec& spec) {
  json labels = json::array();
  for (const auto& l : spec.labels()) labels.push_back(l.text());
  json h{{"name", spec.name()}, {"labels", labels}, {"target", spec.target()}};
  auto it = s.live.find(spec.name());
  h["measured"] = it == s.live.end() ? json(nullptr) : json(it->second.counts);
  return h;
}

inline json iteration_summary(const IterationSnapshot& snap) {
  json names = json::array();
  for (const auto& a : snap.attributes) names.push_back(a.name());
  return json{{"index", snap.index},
              {"parent", snap.parent ? json(*snap.parent) : json(nullptr)},
              {"seed", snap.seed},
              {"image_count", snap.images.size()},
              {"attributes", names}};
}

inline json image_summary(const ImageRecord& r) {
  json predicted = json::object();
  for (const auto& [name, p] : r.predicted.per_attribute) predicted[name] = p;
  return json{{"image_id", r.image_id}, {"index", r.index}, {"prompt", r.prompt},
              {"assignment", r.assignment}, {"predicted", predicted}};
}

inline json session_body(const Session& s) {
  json attrs = json::array();
  for (const auto& a : s.attributes) attrs.push_back(histogram(s, a));
  json iters = json::array();
  for (const auto& snap : s.iterations) iters.push_back(iteration_summary(snap));
  json images = json::array();
  for (const auto& r : s.head_snapshot().images) images.push_back(image_summary(r));
  return json{{"id", s.id},       {"context", s.context},  {"n", s.n},         {"seed", s.seed},
              {"head", s.head},   {"attributes", attrs},   {"iterations", iters}, {"images", images}};
}

inline std::string content_type_of(std::string_view bytes) {
  if (bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view("\x89PNG\r\n\x1a\n", 8)) return "image/png";
  if (bytes.size() >= 3 && bytes.substr(0, 3) == std::string_view("\xff\xd8\xff", 3)) return "image/jpeg";
  if (bytes.size() >= 12 && bytes.substr(0, 4) == "RIFF" && bytes.substr(8, 4) == "WEBP") return "image/webp";
  return "text/plain";
}

struct ServiceOptions {
  std::uint64_t default_seed = 0;
  std::string backend_name = "mock";
};

/// Maps requests onto engine calls. Holds no per-request state.
class Router {
 public:
  Router(Engine& engine, ServiceOptions options = {}) : engine_(engine), options_(std::move(options)) {}

  Response handle(const Request& req) const {
    try {
      return dispatch(req);
    } catch (const Error& e) {
      return error_response(e);
    } catch (const json::exception&) {
      return error_response(ApiCode::BadRequest, "request body has the wrong shape");
    } catch (const std::exception&) {
      return error_response(ApiCode::Internal, "internal error");
    }
  }

 private:
  static std::vector<std::string> segments(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i <= path.size()) {
      auto j = path.find('/', i);
      if (j == std::string::npos) j = path.size();
      if (j > i) out.push_back(httplib::detail::decode_url(path.substr(i, j - i), false));
      i = j + 1;
    }
    return out;
  }

  static json parse_body(const std::string& body) {
    if (trim(body).empty()) return json::object();
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) fail(Errc::InvalidArgument, "request body is not a JSON object");
    return j;
  }

  static std::size_t parse_index(const std::string& s, const char* what) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      fail(Errc::InvalidArgument, std::string(what) + " must be a non-negative integer");
    return v;
  }

  static Response not_found() { return error_response(ApiCode::NotFound, "no such endpoint"); }
  static Response bad_method() { return error_response(ApiCode::BadRequest, "method not supported here"); }

  Response attribute_echo(const std::string& id, const std::string& name) const {
    return engine_.read(id, [&](const Session& s) {
      return json_response(200, json{{"attribute", histogram(s, s.attributes[ops::attribute_index(s, name)])}});
    });
  }

  Response session_response(const std::string& id, int status = 200) const {
    return engine_.read(id, [&](const Session& s) { return json_response(status, json{{"session", session_body(s)}}); });
  }

  Response dispatch(const Request& req) const {
    const auto seg = segments(req.path);
    const auto& m = req.method;
    if (seg.size() == 1 && seg[0] == "capabilities") {
      if (m != "GET") return bad_method();
      const auto& c = engine_.config();
      return json_response(200, json{{"backend", options_.backend_name},
                                     {"max_n", c.max_n},
                                     {"suggested_labels", c.suggested_labels},
                                     {"sampling_mode", divctl::to_string(c.mode)},
                                     {"alignment", c.alignment_form == AlignmentForm::NegExp ? "exp(-kl)" : "1/(1+kl)"}});
    }
    if (seg.size() == 2 && seg[0] == "images") {
      if (m != "GET") return bad_method();
      auto bytes = engine_.image_content(seg[1]);
      return json_response(200, json{{"image_id", seg[1]},
                                     {"content_type", content_type_of(bytes)},
                                     {"content_base64", base64::encode(bytes)}});
    }
    if (seg.empty() || seg[0] != "sessions") return not_found();
    if (seg.size() == 1) {
      if (m != "POST") return bad_method();
      auto body = parse_body(req.body);
      auto id = engine_.create_session(body.at("context").get<std::string>(), body.at("n").get<std::size_t>(),
                                       body.value("seed", options_.default_seed));
      return session_response(id, 201);
    }
    const std::string& id = seg[1];
    if (seg.size() == 2) {
      if (m != "GET") return bad_method();
      return session_response(id);
    }
    const std::string& part = seg[2];
    if (part == "generate" && seg.size() == 3) {
      if (m != "POST") return bad_method();
      auto body = parse_body(req.body);
      std::uint64_t seed = body.contains("seed")
                               ? body.at("seed").get<std::uint64_t>()
                               : engine_.read(id, [](const Session& s) { return combine64(s.seed, s.iterations.size()); });
      auto k = engine_.regenerate(id, seed);
      return engine_.read(id, [&](const Session& s) {
        return json_response(200, json{{"iteration", iteration_summary(s.iterations[k])}, {"session", session_body(s)}});
      });
    }
    if (part == "branch" && seg.size() == 3) {
      if (m != "POST") return bad_method();
      engine_.branch(id, parse_body(req.body).at("iteration").get<std::size_t>());
      return session_response(id);
    }
    if (part == "metrics" && seg.size() == 3) {
      if (m != "GET") return bad_method();
      return json_response(200, json{{"metrics", engine_.metrics(id)}});
    }
    if (part == "iterations") {
      if (m != "GET") return bad_method();
      if (seg.size() == 3)
        return engine_.read(id, [&](const Session& s) {
          json list = json::array();
          for (const auto& snap : s.iterations) list.push_back(iteration_summary(snap));
          return json_response(200, json{{"head", s.head}, {"iterations", list}});
        });
      if (seg.size() == 4) {
        auto k = parse_index(seg[3], "iteration");
        return engine_.read(id, [&](const Session& s) {
          if (k >= s.iterations.size()) fail(Errc::UnknownIteration, "no iteration " + seg[3]);
          return json_response(200, json{{"iteration", s.iterations[k]}});
        });
      }
      return not_found();
    }
    if (part != "attributes") return not_found();
    if (seg.size() == 3) {
      if (m != "POST") return bad_method();
      auto body = parse_body(req.body);
      std::optional<std::vector<std::string>> labels;
      if (body.contains("labels") && !body.at("labels").is_null())
        labels = body.at("labels").get<std::vector<std::string>>();
      auto name = body.at("name").get<std::string>();
      engine_.add_attribute(id, name, labels);
      auto echo = attribute_echo(id, name);
      echo.status = 201;
      return echo;
    }
    if (seg.size() == 4 && seg[3] == "suggest") {
      if (m != "POST") return bad_method();
      auto body = parse_body(req.body);
      if (body.contains("attribute")) {
        auto context = engine_.read(id, [](const Session& s) { return s.context; });
        auto labels = suggest_labels(*engine_.gateway().llm, context, body.at("attribute").get<std::string>(),
                                     body.value("count", engine_.config().suggested_labels));
        json texts = json::array();
        for (const auto& l : labels) texts.push_back(l.text());
        return json_response(200, json{{"labels", texts}});
      }
      return json_response(200, json{{"attributes", engine_.suggest_attributes(id)}});
    }
    const std::string& name = seg[3];
    if (seg.size() == 5 && seg[4] == "distribution") {
      if (m != "PUT") return bad_method();
      auto body = parse_body(req.body);
      if (body.contains("weights")) {
        engine_.set_distribution(id, name, body.at("weights").get<std::vector<double>>());
      } else if (body.contains("index")) {
        engine_.set_weight(id, name, body.at("index").get<std::size_t>(), body.at("weight").get<double>());
      } else {
        fail(Errc::InvalidArgument, "expected 'weights' or 'index' and 'weight'");
      }
      return attribute_echo(id, name);
    }
    if (seg.size() == 5 && seg[4] == "balance") {
      if (m != "POST") return bad_method();
      engine_.balance(id, name);
      return attribute_echo(id, name);
    }
    if (seg.size() == 5 && seg[4] == "labels") {
      if (m != "POST") return bad_method();
      auto body = parse_body(req.body);
      double weight = body.contains("weight") ? body.at("weight").get<double>()
                                              : engine_.read(id, [&](const Session& s) {
                                                  return 1.0 / static_cast<double>(
                                                                   s.attributes[ops::attribute_index(s, name)].size() + 1);
                                                });
      engine_.add_label(id, name, body.at("label").get<std::string>(), weight);
      return attribute_echo(id, name);
    }
    if (seg.size() == 6 && seg[4] == "labels") {
      if (m != "DELETE") return bad_method();
      auto index = engine_.read(id, [&](const Session& s) {
        const auto& spec = s.attributes[ops::attribute_index(s, name)];
        auto i = spec.find_label(seg[5]);
        if (!i) fail(Errc::IndexOutOfRange, "attribute '" + spec.name() + "' has no label '" + seg[5] + "'");
        return *i;
      });
      engine_.remove_label(id, name, index);
      return attribute_echo(id, name);
    }
    if (seg.size() == 5 && seg[4] == "images") {
      if (m != "GET") return bad_method();
      auto q = req.query.find("label");
      if (q == req.query.end()) fail(Errc::InvalidArgument, "missing 'label' query parameter");
      auto index = parse_index(q->second, "label");
      auto ids = engine_.images_with_label(id, name, index);
      return engine_.read(id, [&](const Session& s) {
        const auto& spec = s.attributes[ops::attribute_index(s, name)];
        return json_response(200, json{{"attribute", spec.name()},
                                       {"label_index", index},
                                       {"label", spec.labels()[index].text()},
                                       {"image_ids", ids}});
      });
    }
    return not_found();
  }

  Engine& engine_;
  ServiceOptions options_;
};

/// HTTP server around a Router. `start` binds and serves on a background
/// thread; `stop` waits for in-flight requests to finish.
class Server {
 public:
  explicit Server(Router router) : router_(std::move(router)) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      Request r;
      r.method = req.method;
      auto q = req.target.find('?');
      r.path = q == std::string::npos ? req.target : req.target.substr(0, q);
      for (const auto& [k, v] : req.params) r.query.emplace(k, v);
      r.body = req.body;
      auto out = router_.handle(r);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    server_.Get(".*", handler);
    server_.Post(".*", handler);
    server_.Put(".*", handler);
    server_.Delete(".*", handler);
  }

  ~Server() { stop(); }

  /// Returns the bound port; `port` 0 picks a free one.
  int start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
      bound = server_.bind_to_any_port(host);
      if (bound < 0) fail(Errc::BindFailure, "could not bind " + host);
    } else if (!server_.bind_to_port(host, port)) {
      fail(Errc::BindFailure, "could not bind " + host + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stop() is called elsewhere.
  void run(const std::string& host, int port) {
    if (!server_.bind_to_port(host, port))
      fail(Errc::BindFailure, "could not bind " + host + ":" + std::to_string(port));
    server_.listen_after_bind();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  Router router_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace divctl::api
