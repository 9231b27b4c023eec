#pragma once

#include <atomic>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "forge/error.hpp"

namespace forge {

/// Canned chat-completion server for exercising the enhancer offline.
class MockEndpoint {
 public:
  enum class Mode {
    Valid,        // well-formed answer, counts match the request
    ThreeVisual,  // one visual variation too many
    Forbidden,    // every item mentions the guide markup
    ServerError,  // always HTTP 500
    FailFirst,    // HTTP 503 for the first `fail_count` requests, then Valid
    BadJson,      // assistant content is not JSON
  };

  static Mode parse_mode(const std::string& s) {
    if (s == "valid") return Mode::Valid;
    if (s == "three-visual") return Mode::ThreeVisual;
    if (s == "forbidden") return Mode::Forbidden;
    if (s == "server-error") return Mode::ServerError;
    if (s == "fail-first") return Mode::FailFirst;
    if (s == "bad-json") return Mode::BadJson;
    throw ConfigError("unknown mock mode '" + s + "'");
  }

  explicit MockEndpoint(Mode mode = Mode::Valid, int fail_count = 0)
      : mode_(mode), fail_count_(fail_count) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(req, res);
    });
  }

  ~MockEndpoint() { stop(); }

  MockEndpoint(const MockEndpoint&) = delete;
  MockEndpoint& operator=(const MockEndpoint&) = delete;

  /// Binds to `port` (0 picks a free one) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error("mock endpoint: cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    host_ = host;
    return port_;
  }

  /// Blocks serving requests on the calling thread.
  void serve(const std::string& host, int port) {
    host_ = host;
    port_ = port;
    if (!server_.listen(host, port)) throw Error("mock endpoint: cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const {
    return "http://" + host_ + ":" + std::to_string(port_) + "/v1/chat/completions";
  }

  std::size_t requests() const { return requests_.load(); }
  void set_mode(Mode m) { mode_.store(m); }

 private:
  struct Parsed {
    std::string category;
    std::vector<std::string> expressions;
  };

  static Parsed parse_user_text(const std::string& text) {
    Parsed p;
    std::istringstream in(text);
    std::string line;
    bool listing = false;
    while (std::getline(in, line)) {
      if (line.rfind("Category: ", 0) == 0) p.category = line.substr(10);
      if (line == "Expressions:") {
        listing = true;
        continue;
      }
      if (!listing) continue;
      const auto dot = line.find(". ");
      if (dot != std::string::npos) p.expressions.push_back(line.substr(dot + 2));
    }
    return p;
  }

  static std::string completion(const std::string& content) {
    const nlohmann::json j = {
        {"id", "mock"},
        {"object", "chat.completion"},
        {"choices",
         {{{"index", 0},
           {"message", {{"role", "assistant"}, {"content", content}}},
           {"finish_reason", "stop"}}}},
        {"usage", {{"prompt_tokens", 0}, {"completion_tokens", 0}}}};
    return j.dump();
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::size_t n = ++requests_;
    Mode mode = mode_.load();
    if (mode == Mode::ServerError) {
      res.status = 500;
      res.set_content(R"({"error":"mock failure"})", "application/json");
      return;
    }
    if (mode == Mode::FailFirst) {
      if (n <= static_cast<std::size_t>(fail_count_)) {
        res.status = 503;
        res.set_content(R"({"error":"mock overload"})", "application/json");
        return;
      }
      mode = Mode::Valid;
    }
    Parsed p;
    try {
      const auto body = nlohmann::json::parse(req.body);
      for (const auto& part : body.at("messages").at(1).at("content")) {
        if (part.at("type") == "text") p = parse_user_text(part.at("text").get<std::string>());
      }
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"error":"bad request"})", "application/json");
      return;
    }
    if (mode == Mode::BadJson) {
      res.set_content(completion("Sure! Here are the variations you asked for."), "application/json");
      return;
    }
    nlohmann::json answer = {{"language_variations", nlohmann::json::array()},
                             {"visual_variations", nlohmann::json::array()}};
    const std::string lead = p.expressions.empty() ? "the " + p.category : p.expressions.front();
    for (const auto& e : p.expressions) {
      answer["language_variations"].push_back(mode == Mode::Forbidden ? e + " inside the red box"
                                                                      : "seen from above, " + e);
    }
    if (mode == Mode::Forbidden) {
      answer["visual_variations"] = {"the highlighted " + p.category, lead + " in the bounding box"};
    } else {
      answer["visual_variations"] = {lead + " beside a paved surface", lead + " with a sharp shadow"};
      if (mode == Mode::ThreeVisual) answer["visual_variations"].push_back(lead + " near some trees");
    }
    res.set_content(completion(answer.dump()), "application/json");
  }

  httplib::Server server_;
  std::thread thread_;
  std::atomic<Mode> mode_;
  int fail_count_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::string host_ = "127.0.0.1";
  int port_ = -1;
};

}  // namespace forge
