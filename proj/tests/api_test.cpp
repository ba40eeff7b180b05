#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "divctl/api.hpp"
#include "support/api_golden.hpp"

using namespace divctl;
using namespace divctl::testing;
using divctl::api::Request;
using divctl::api::Response;

namespace {

EngineConfig fixed_clock() {
  EngineConfig c;
  c.clock = [] { return std::string("2024-01-01T00:00:00Z"); };
  return c;
}

Gateway mock_gateway(double sigma = 0.0) {
  GatewayConfig c;
  c.mock_sigma = sigma;
  return make_gateway(c);
}

Response call(const api::Router& r, std::string method, std::string path, std::string body = "",
              std::map<std::string, std::string> query = {}) {
  return r.handle(Request{std::move(method), std::move(path), std::move(query), std::move(body)});
}

json body_of(const Response& r) { return json::parse(r.body); }

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ApiGolden, EveryEndpointMatchesFixture) {
  const auto steps = golden_steps();

  const std::filesystem::path dir = DIVCTL_GOLDEN_DIR "/api";
  const bool update = std::getenv("UPDATE_GOLDEN") != nullptr;
  for (int run = 0; run < 2; ++run) {
    Engine engine(mock_gateway(0.2), fixed_clock());
    api::Router router(engine);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const auto& s = steps[i];
      auto text = render(s, call(router, s.method, s.path, s.body, s.query));
      char prefix[8];
      std::snprintf(prefix, sizeof prefix, "%02zu_", i);
      auto file = dir / (prefix + s.name + ".txt");
      if (update && run == 0) {
        std::filesystem::create_directories(dir);
        std::ofstream(file, std::ios::binary) << text;
      }
      ASSERT_TRUE(std::filesystem::exists(file)) << file.filename() << " missing; rerun with UPDATE_GOLDEN=1";
      EXPECT_EQ(text, read_file(file)) << s.name;
    }
  }
}

TEST(Api, CreateReturns201WithSession) {
  Engine engine(mock_gateway());
  api::Router router(engine);
  auto r = call(router, "POST", "/sessions", R"({"context":"a car","n":10,"seed":1})");
  EXPECT_EQ(r.status, 201);
  auto j = body_of(r);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["session"]["images"].size(), 10u);
  auto it = body_of(call(router, "GET", "/sessions/s0001/iterations/0"));
  EXPECT_EQ(it["iteration"]["images"].size(), 10u);
}

TEST(Api, DuplicateAttributeIsConflict) {
  Engine engine(mock_gateway());
  api::Router router(engine);
  call(router, "POST", "/sessions", R"({"context":"an image of a kind doctor during a consultation","n":10})");
  EXPECT_EQ(call(router, "POST", "/sessions/s0001/attributes", R"({"name":"Ethnicity"})").status, 201);
  auto second = call(router, "POST", "/sessions/s0001/attributes", R"({"name":"Ethnicity"})");
  EXPECT_EQ(second.status, 409);
  EXPECT_EQ(body_of(second)["error"]["code"], "Conflict");
}

TEST(Api, PutDistributionEchoesNormalizedTarget) {
  Engine engine(mock_gateway());
  api::Router router(engine);
  call(router, "POST", "/sessions", R"({"context":"a frog","n":10})");
  call(router, "POST", "/sessions/s0001/attributes", R"({"name":"color","labels":["red","green","blue"]})");
  auto r = call(router, "PUT", "/sessions/s0001/attributes/color/distribution", R"({"weights":[4,5,1]})");
  EXPECT_EQ(r.status, 200);
  auto target = body_of(r)["attribute"]["target"].get<std::vector<double>>();
  ASSERT_EQ(target.size(), 3u);
  EXPECT_NEAR(target[0], 0.4, 1e-12);
  EXPECT_NEAR(target[1], 0.5, 1e-12);
  EXPECT_NEAR(target[2], 0.1, 1e-12);
}

TEST(Api, GenerateBalancedFiveLabels) {
  Engine engine(mock_gateway());
  api::Router router(engine);
  call(router, "POST", "/sessions", R"({"context":"an image of a kind doctor during a consultation","n":10})");
  call(router, "POST", "/sessions/s0001/attributes", R"({"name":"Ethnicity"})");
  call(router, "PUT", "/sessions/s0001/attributes/Ethnicity/distribution", R"({"weights":[5,1,1,1,1]})");
  call(router, "POST", "/sessions/s0001/attributes/Ethnicity/balance");
  auto r = call(router, "POST", "/sessions/s0001/generate");
  ASSERT_EQ(r.status, 200);
  auto attr = body_of(r)["session"]["attributes"][0];
  EXPECT_EQ(attr["measured"].get<std::vector<int>>(), (std::vector<int>{2, 2, 2, 2, 2}));
}

TEST(Api, MetricsShapeAfterTwoIterations) {
  Engine engine(mock_gateway(0.3));
  api::Router router(engine);
  call(router, "POST", "/sessions", R"({"context":"a car","n":10})");
  call(router, "POST", "/sessions/s0001/attributes", R"({"name":"color"})");
  call(router, "POST", "/sessions/s0001/generate");
  auto m = body_of(call(router, "GET", "/sessions/s0001/metrics"))["metrics"];
  EXPECT_GE(m["span"].get<double>(), 0.0);
  EXPECT_EQ(m["image_count"], 10);
  ASSERT_TRUE(m["generated_at"].is_string());
  for (const auto& [name, a] : m["alignment"].items()) {
    EXPECT_GT(a.get<double>(), 0.0);
    EXPECT_LE(a.get<double>(), 1.0);
  }
  EXPECT_EQ(m["alignment"].size(), 1u);
}

TEST(Api, EveryErrorCodeMapsToOneStatus) {
  for (int e = 0; e <= static_cast<int>(Errc::BindFailure); ++e) {
    auto code = api::api_code(static_cast<Errc>(e));
    auto status = api::http_status(code);
    EXPECT_TRUE(status == 400 || status == 404 || status == 409 || status == 502 || status == 500);
  }
  EXPECT_EQ(api::api_code(Errc::Timeout), api::ApiCode::UpstreamUnavailable);
  EXPECT_EQ(api::api_code(Errc::UnknownSession), api::ApiCode::NotFound);
  EXPECT_EQ(api::api_code(Errc::AllZero), api::ApiCode::BadRequest);
  EXPECT_EQ(api::api_code(Errc::CorruptStore), api::ApiCode::Internal);
}

namespace {
class DownEmbedder final : public Embedder {
 public:
  bool down = false;
  EmbeddingVector embed(const EmbedRequest& req) override {
    if (down) fail(Errc::BackendUnavailable, "connection refused by 10.0.0.9:8080");
    return inner.embed(req);
  }
  MockEmbedder inner{1.0, 0.0, 0};
};
}  // namespace

TEST(Api, UpstreamFailureIs502AndAtomic) {
  auto gw = mock_gateway();
  auto embedder = std::make_shared<DownEmbedder>();
  gw.embedder = embedder;
  Engine engine(gw);
  api::Router router(engine);
  call(router, "POST", "/sessions", R"({"context":"a car","n":5})");
  auto before = call(router, "GET", "/sessions/s0001").body;
  embedder->down = true;
  auto r = call(router, "POST", "/sessions/s0001/generate");
  EXPECT_EQ(r.status, 502);
  EXPECT_EQ(body_of(r)["error"]["code"], "UpstreamUnavailable");
  EXPECT_EQ(call(router, "GET", "/sessions/s0001").body, before);
}

TEST(Api, CorruptStoreDoesNotLeakPaths) {
  auto root = std::filesystem::temp_directory_path() / ("divctl_api_leak_" + std::to_string(::getpid()));
  std::filesystem::remove_all(root);
  {
    Engine engine(mock_gateway(), {}, root);
    engine.create_session("a car", 3, 1);
  }
  std::ofstream(root / "s0001" / "state", std::ios::trunc) << "{";
  Engine engine(mock_gateway(), {}, root);
  api::Router router(engine);
  auto r = call(router, "GET", "/sessions/s0001");
  EXPECT_EQ(r.status, 500);
  EXPECT_EQ(r.body.find(root.string()), std::string::npos);
  EXPECT_EQ(r.body.find("/tmp"), std::string::npos);
  std::filesystem::remove_all(root);
}

TEST(ApiSocket, ServesOverHttpAndSerializesWrites) {
  Engine engine(mock_gateway());
  api::Server server(api::Router(engine, {}));
  int port = server.start("127.0.0.1", 0);
  httplib::Client client("127.0.0.1", port);

  auto created = client.Post("/sessions", R"({"context":"a car","n":6,"seed":3})", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  auto added = client.Post("/sessions/s0001/attributes", R"({"name":"color","labels":["red","green","blue","yellow"]})",
                           "application/json");
  ASSERT_TRUE(added);
  EXPECT_EQ(added->status, 201);

  std::vector<std::jthread> writers;
  for (int t = 0; t < 4; ++t)
    writers.emplace_back([port, t] {
      httplib::Client c("127.0.0.1", port);
      for (int i = 0; i < 10; ++i) {
        auto body = json{{"index", (t + i) % 4}, {"weight", 0.1 * ((t + i) % 7)}}.dump();
        auto r = c.Put("/sessions/s0001/attributes/color/distribution", body, "application/json");
        ASSERT_TRUE(r);
        EXPECT_EQ(r->status, 200);
        auto target = json::parse(r->body)["attribute"]["target"].get<std::vector<double>>();
        double sum = 0;
        for (double w : target) sum += w;
        EXPECT_NEAR(sum, 1.0, 1e-9);
      }
    });
  writers.clear();

  auto hl = client.Get("/sessions/s0001/attributes/color/images?label=0");
  ASSERT_TRUE(hl);
  EXPECT_EQ(hl->status, 200);
  auto img = client.Get("/images/s0001-0-0");
  ASSERT_TRUE(img);
  EXPECT_EQ(base64::decode(json::parse(img->body)["content_base64"].get<std::string>()), "a car");
  auto missing = client.Get("/sessions/zzz");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(engine.session("s0001").log.size(), 2u + 40u);
  server.stop();
}

TEST(ApiSocket, BindFailure) {
  Engine engine(mock_gateway());
  api::Server first(api::Router(engine, {}));
  int port = first.start("127.0.0.1", 0);
  api::Server second(api::Router(engine, {}));
  try {
    second.start("127.0.0.1", port);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BindFailure);
  }
}
