#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <future>
#include <mutex>
#include <thread>

#include "support/fixtures.hpp"
#include "tracedom/remote_judge.hpp"

using namespace tracedom;

namespace {

/// In-process judge endpoint. The handler sees every request; responses
/// are scripted per attempt.
class StubServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit StubServer(Handler h) : handler_(std::move(h)) {
    server_.Post("/judge", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/judge"; }
  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> hits_{0};
};

JudgeConfig config_for(const StubServer& s) {
  JudgeConfig cfg;
  cfg.mode = JudgeMode::Remote;
  cfg.endpoint = s.endpoint();
  cfg.timeout_seconds = 5;
  cfg.max_retries = 2;
  cfg.backoff_base_seconds = 0.01;
  cfg.token_env = "TRACEDOM_TEST_JUDGE_TOKEN";
  return cfg;
}

}  // namespace

TEST(RemoteJudge, SendsMultipartAndParsesResponse) {
  const auto a = fixture::state("results#fontA", 1);
  const auto b = fixture::state("results#fontB", 2);
  std::mutex mu;
  httplib::Request captured;
  StubServer server([&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mu);
    captured = req;
    res.set_content(R"({"equivalent": true, "explanation": "font rendering", "confidence": "medium"})",
                    "application/json");
  });
  ::setenv("TRACEDOM_TEST_JUDGE_TOKEN", "s3cret", 1);
  RemoteJudge judge(config_for(server));
  const auto r = judge.judge(a, b);
  ::unsetenv("TRACEDOM_TEST_JUDGE_TOKEN");

  EXPECT_TRUE(r.equivalent);
  EXPECT_EQ(r.explanation, "font rendering");
  EXPECT_EQ(r.confidence, Confidence::Medium);

  std::lock_guard lock(mu);
  ASSERT_TRUE(captured.has_file("prompt"));
  ASSERT_TRUE(captured.has_file("image_a"));
  ASSERT_TRUE(captured.has_file("image_b"));
  EXPECT_EQ(captured.get_file_value("prompt").content,
            fixture::read_text(fs::path(TRACEDOM_GOLDEN_DIR) / "equivalence_prompt.txt"));
  EXPECT_EQ(captured.get_file_value("image_a").content, std::string(a.png->begin(), a.png->end()));
  EXPECT_EQ(captured.get_file_value("image_b").content, std::string(b.png->begin(), b.png->end()));
  EXPECT_EQ(captured.get_file_value("image_a").content_type, "image/png");
  EXPECT_EQ(captured.get_header_value("Authorization"), "Bearer s3cret");
}

TEST(RemoteJudge, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> calls{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls.fetch_add(1) < 2) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"equivalent": false, "explanation": "x", "confidence": "high"})", "application/json");
  });
  RemoteJudge judge(config_for(server));
  EXPECT_FALSE(judge.judge(fixture::state("a"), fixture::state("b")).equivalent);
  EXPECT_EQ(server.hits(), 3);
}

TEST(RemoteJudge, GivesUpAfterMaxRetries) {
  StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  RemoteJudge judge(config_for(server));
  try {
    judge.judge(fixture::state("a"), fixture::state("b"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::JudgeTransport);
  }
  EXPECT_EQ(server.hits(), 3);
}

TEST(RemoteJudge, SchemaErrorsAreNotRetried) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"equivalent": true, "explanation": "x"})", "application/json");
  });
  RemoteJudge judge(config_for(server));
  try {
    judge.judge(fixture::state("a"), fixture::state("b"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::JudgeProtocol);
  }
  EXPECT_EQ(server.hits(), 1);
}

TEST(RemoteJudge, ClientErrorsAreNotRetried) {
  StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
  RemoteJudge judge(config_for(server));
  EXPECT_THROW(judge.judge(fixture::state("a"), fixture::state("b")), Error);
  EXPECT_EQ(server.hits(), 1);
}

TEST(RemoteJudge, UnreachableEndpointIsATransportError) {
  JudgeConfig cfg;
  cfg.mode = JudgeMode::Remote;
  cfg.endpoint = "http://127.0.0.1:1/judge";
  cfg.max_retries = 1;
  cfg.backoff_base_seconds = 0.0;
  cfg.timeout_seconds = 1;
  RemoteJudge judge(cfg);
  try {
    judge.judge(fixture::state("a"), fixture::state("b"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::JudgeTransport);
  }
}

TEST(RemoteJudge, ConcurrencyCapIsHonoured) {
  std::atomic<int> in_flight{0}, peak{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(R"({"equivalent": true, "explanation": "x", "confidence": "high"})", "application/json");
  });
  auto cfg = config_for(server);
  cfg.max_in_flight = 2;
  RemoteJudge judge(cfg);
  const auto a = fixture::state("a"), b = fixture::state("b");
  std::vector<std::future<SemanticJudgment>> futures;
  for (int i = 0; i < 6; ++i) futures.push_back(std::async(std::launch::async, [&] { return judge.judge(a, b); }));
  for (auto& f : futures) EXPECT_TRUE(f.get().equivalent);
  EXPECT_LE(peak.load(), 2);
}

TEST(RemoteJudge, DrivesTheClassifierTier2) {
  StubServer server([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"equivalent": true, "explanation": "decoration", "confidence": "high"})", "application/json");
  });
  EquivalenceClassifier cls({}, std::make_shared<RemoteJudge>(config_for(server)), ClassifierMode::Learning);
  EXPECT_TRUE(cls.states_equivalent(fixture::state("main_window#decorA", 1), fixture::state("main_window#decorB", 2)));
  EXPECT_EQ(server.hits(), 1);
}

TEST(Endpoint, SplitsHostAndPath) {
  const auto u = split_endpoint("https://judge.example:8443/v1/compare");
  EXPECT_EQ(u.scheme_host_port, "https://judge.example:8443");
  EXPECT_EQ(u.path, "/v1/compare");
  EXPECT_EQ(split_endpoint("http://h").path, "/");
  EXPECT_THROW(split_endpoint("judge.example/x"), Error);
}
