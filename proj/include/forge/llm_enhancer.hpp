#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "forge/dataset_io.hpp"
#include "forge/default_assets.hpp"
#include "forge/digest.hpp"
#include "forge/error.hpp"
#include "forge/expression_engine.hpp"
#include "forge/image.hpp"
#include "forge/png_io.hpp"
#include "forge/rng.hpp"
#include "forge/target_graph.hpp"

namespace forge {

// ---------------------------------------------------------------------------
// Guide images

enum class GuideStyle {
  BoxAndCrop,     // full tile with a red box + close-up crop
  OverlayAndClean  // red-tinted mask overlay + untouched tile
};

struct GuideImages {
  GuideStyle style = GuideStyle::BoxAndCrop;
  Image8 first;
  Image8 second;
  BBox crop;  // window of `second` within the tile (BoxAndCrop only)
};

struct GuideOptions {
  int outline_px = 3;
  double crop_scale = 1.5;
  double overlay_alpha = 0.4;
};

/// Window of `box` scaled about its center, clamped to a `w`x`h` image.
inline BBox expanded_crop(const BBox& box, double scale, int w, int h) {
  const double cw = std::round(box.width() * scale);
  const double ch = std::round(box.height() * scale);
  const double cx = (box.x0 + box.x1 + 1) / 2.0;
  const double cy = (box.y0 + box.y1 + 1) / 2.0;
  BBox c;
  c.x0 = static_cast<int>(std::round(cx - cw / 2.0));
  c.y0 = static_cast<int>(std::round(cy - ch / 2.0));
  c.x1 = c.x0 + static_cast<int>(cw) - 1;
  c.y1 = c.y0 + static_cast<int>(ch) - 1;
  c.x0 = std::max(c.x0, 0);
  c.y0 = std::max(c.y0, 0);
  c.x1 = std::min(c.x1, w - 1);
  c.y1 = std::min(c.y1, h - 1);
  return c;
}

inline Image8 crop_image(const Image8& img, const BBox& c) {
  Image8 out(c.width(), c.height(), img.channels());
  for (int y = 0; y < c.height(); ++y)
    for (int x = 0; x < c.width(); ++x)
      for (int k = 0; k < img.channels(); ++k) out.at(x, y, k) = img.at(c.x0 + x, c.y0 + y, k);
  return out;
}

/// Draws a pure-red ring of `thickness` pixels just outside `box`.
inline void draw_box_outline(Image8& img, const BBox& box, int thickness) {
  for (int y = box.y0 - thickness; y <= box.y1 + thickness; ++y) {
    for (int x = box.x0 - thickness; x <= box.x1 + thickness; ++x) {
      if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
      if (x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1) continue;
      img.at(x, y, 0) = 255;
      img.at(x, y, 1) = 0;
      img.at(x, y, 2) = 0;
    }
  }
}

inline Image8 tint_mask(const Image8& img, const Mask& mask, double alpha) {
  Image8 out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.get(x, y)) continue;
      out.at(x, y, 0) = static_cast<std::uint8_t>(std::lround((1 - alpha) * img.at(x, y, 0) + alpha * 255));
      out.at(x, y, 1) = static_cast<std::uint8_t>(std::lround((1 - alpha) * img.at(x, y, 1)));
      out.at(x, y, 2) = static_cast<std::uint8_t>(std::lround((1 - alpha) * img.at(x, y, 2)));
    }
  }
  return out;
}

/// Instances and clusters get a boxed tile plus a close-up crop; class groups
/// and semantic regions, which have no single compact box, get a tinted
/// overlay plus the clean tile.
inline GuideImages render_guides(const Image8& tile, const Target& target,
                                 const GuideOptions& opt = {}) {
  if (target.mask.none()) throw InputError("render_guides: target '" + target.id + "' has an empty mask");
  GuideImages g;
  if (target.kind == TargetKind::Instance || target.kind == TargetKind::Cluster) {
    g.style = GuideStyle::BoxAndCrop;
    g.first = tile;
    draw_box_outline(g.first, target.bbox, opt.outline_px);
    g.crop = expanded_crop(target.bbox, opt.crop_scale, tile.width(), tile.height());
    g.second = crop_image(tile, g.crop);
  } else {
    g.style = GuideStyle::OverlayAndClean;
    g.first = tint_mask(tile, target.mask, opt.overlay_alpha);
    g.second = tile;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Prompt payloads

struct PromptPayload {
  std::string target_id;
  std::string image_id;
  TargetKind kind = TargetKind::Instance;
  std::string category;
  std::vector<std::string> task1_inputs;  // rule expression texts
  std::vector<std::string> task1_ids;     // their expression ids, aligned
  GuideImages guides;
};

inline std::string png_data_url(const Image8& img) {
  const auto bytes = png::encode(img);
  return "data:image/png;base64," + base64_encode(bytes);
}

inline std::string prompt_user_text(const PromptPayload& p) {
  std::ostringstream o;
  o << "Target id: " << p.target_id << "\n";
  o << "Target type: " << to_string(p.kind) << "\n";
  o << "Category: " << p.category << "\n";
  o << "Images: "
    << (p.guides.style == GuideStyle::BoxAndCrop ? "boxed tile, close-up crop"
                                                  : "tinted overlay, clean tile")
    << "\n";
  o << "Expressions:\n";
  for (std::size_t i = 0; i < p.task1_inputs.size(); ++i) {
    o << (i + 1) << ". " << p.task1_inputs[i] << "\n";
  }
  return o.str();
}

/// The chat messages of a request (system instructions + user turn with both
/// guide images).
inline nlohmann::json prompt_messages(const PromptPayload& p) {
  nlohmann::json user_content = nlohmann::json::array();
  user_content.push_back({{"type", "text"}, {"text", prompt_user_text(p)}});
  for (const Image8* img : {&p.guides.first, &p.guides.second}) {
    user_content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", png_data_url(*img)}}}});
  }
  return nlohmann::json::array(
      {{{"role", "system"}, {"content", std::string(assets::kInstructions)}},
       {{"role", "user"}, {"content", user_content}}});
}

inline nlohmann::json build_request(const PromptPayload& p, const std::string& model) {
  return {{"model", model},
          {"messages", prompt_messages(p)},
          {"response_format", {{"type", "json_object"}}}};
}

// ---------------------------------------------------------------------------
// Responses

enum class EnhanceStatus { Ok, SchemaInvalid, Failed };

inline std::string_view to_string(EnhanceStatus s) {
  switch (s) {
    case EnhanceStatus::Ok: return "ok";
    case EnhanceStatus::SchemaInvalid: return "schema_invalid";
    case EnhanceStatus::Failed: return "failed";
  }
  return "failed";
}

struct EnhancementResult {
  std::string target_id;
  EnhanceStatus status = EnhanceStatus::Failed;
  std::vector<std::string> language_variations;
  std::vector<std::string> visual_variations;
  std::string raw;    // assistant message content (or error text)
  std::string error;
  bool from_cache = false;
  int attempts = 0;
};

namespace detail {

/// Strips a Markdown code fence some servers wrap JSON answers in.
inline std::string strip_code_fence(std::string s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return s;
  s = s.substr(first);
  if (s.rfind("```", 0) != 0) return s;
  const auto nl = s.find('\n');
  const auto end = s.rfind("```");
  if (nl == std::string::npos || end == std::string::npos || end <= nl) return s;
  return s.substr(nl + 1, end - nl - 1);
}

}  // namespace detail

/// Parses an assistant message into a result. Counts must match the request:
/// one language variation per input expression and exactly two visual ones.
inline EnhancementResult parse_enhancement(const std::string& target_id, const std::string& content,
                                           std::size_t n_inputs) {
  EnhancementResult r;
  r.target_id = target_id;
  r.raw = content;
  r.status = EnhanceStatus::SchemaInvalid;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::strip_code_fence(content));
  } catch (const nlohmann::json::exception& e) {
    r.error = std::string("response is not JSON: ") + e.what();
    return r;
  }
  auto strings = [&](const char* key, std::vector<std::string>& out) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_array()) {
      r.error = std::string("missing array '") + key + "'";
      return false;
    }
    for (const auto& v : j.at(key)) {
      if (!v.is_string()) {
        r.error = std::string("non-string item in '") + key + "'";
        return false;
      }
      out.push_back(v.get<std::string>());
    }
    return true;
  };
  if (!strings("language_variations", r.language_variations)) return r;
  if (!strings("visual_variations", r.visual_variations)) return r;
  if (r.language_variations.size() != n_inputs) {
    r.error = "expected " + std::to_string(n_inputs) + " language variations, got " +
              std::to_string(r.language_variations.size());
    return r;
  }
  if (r.visual_variations.size() != 2) {
    r.error = "expected 2 visual variations, got " + std::to_string(r.visual_variations.size());
    return r;
  }
  r.status = EnhanceStatus::Ok;
  return r;
}

inline std::string content_from_chat_completion(const std::string& body) {
  const auto j = nlohmann::json::parse(body);
  return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

// ---------------------------------------------------------------------------
// Validation

enum class Rejection { None, Empty, Duplicate, MentionsGuide };

inline std::string_view to_string(Rejection r) {
  switch (r) {
    case Rejection::None: return "ok";
    case Rejection::Empty: return "empty";
    case Rejection::Duplicate: return "duplicate";
    case Rejection::MentionsGuide: return "mentions_guide";
  }
  return "ok";
}

inline const std::vector<std::string>& guide_phrases() {
  static const std::vector<std::string> kPhrases{"bounding box", "red box", "highlighted", "marked"};
  return kPhrases;
}

/// Lower-cased, trimmed, single-spaced form used for duplicate checks.
inline std::string normalize_text(const std::string& s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

struct ValidityFlags {
  std::vector<Rejection> language;
  std::vector<Rejection> visual;

  std::size_t accepted() const {
    auto ok = [](Rejection r) { return r == Rejection::None; };
    return static_cast<std::size_t>(std::count_if(language.begin(), language.end(), ok) +
                                    std::count_if(visual.begin(), visual.end(), ok));
  }
};

inline Rejection check_item(const std::string& text, const std::set<std::string>& taken) {
  const std::string norm = normalize_text(text);
  if (norm.empty()) return Rejection::Empty;
  for (const auto& p : guide_phrases())
    if (norm.find(p) != std::string::npos) return Rejection::MentionsGuide;
  if (taken.contains(norm)) return Rejection::Duplicate;
  return Rejection::None;
}

/// Flags every item of `r`. `image_texts` holds the normalized texts already
/// used in the image; accepted items are added to it so later items (and later
/// targets) cannot repeat them.
inline ValidityFlags validate_enhancement(const EnhancementResult& r,
                                          std::set<std::string>& image_texts) {
  ValidityFlags f;
  for (const auto& t : r.language_variations) {
    const Rejection why = check_item(t, image_texts);
    f.language.push_back(why);
    if (why == Rejection::None) image_texts.insert(normalize_text(t));
  }
  for (const auto& t : r.visual_variations) {
    const Rejection why = check_item(t, image_texts);
    f.visual.push_back(why);
    if (why == Rejection::None) image_texts.insert(normalize_text(t));
  }
  return f;
}

// ---------------------------------------------------------------------------
// Endpoint plumbing

struct EndpointConfig {
  std::string url;  // full chat-completions URL
  std::string model = "gpt-4o-mini";
  std::string api_key;
  int max_tries = 5;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  std::chrono::seconds timeout{120};
  int concurrency = 4;
  double requests_per_second = 0.0;  // 0 disables rate limiting

  /// Fills url/model/key from ENHANCER_URL, ENHANCER_MODEL, ENHANCER_KEY where set.
  void apply_environment() {
    if (const char* v = std::getenv("ENHANCER_URL")) url = v;
    if (const char* v = std::getenv("ENHANCER_MODEL")) model = v;
    if (const char* v = std::getenv("ENHANCER_KEY")) api_key = v;
  }
};

struct HttpReply {
  int status = 0;  // 0: transport error
  std::string body;
  std::string error;
};

/// Posts a JSON body and returns the reply; swappable for tests.
using Transport = std::function<HttpReply(const std::string& body)>;

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: '" + url + "'");
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline Transport http_transport(const EndpointConfig& cfg) {
  const ParsedUrl u = split_url(cfg.url);
  return [u, cfg](const std::string& body) {
    httplib::Client cli(u.origin);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count());
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout).count());
    httplib::Headers headers;
    if (!cfg.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg.api_key);
    auto res = cli.Post(u.path, headers, body, "application/json");
    if (!res) return HttpReply{0, {}, httplib::to_string(res.error())};
    return HttpReply{res->status, res->body, {}};
  };
}

inline bool is_transient(int status) {
  return status == 0 || status == 408 || status == 429 || status >= 500;
}

/// Token bucket; `acquire` blocks until a token is available.
class TokenBucket {
 public:
  TokenBucket(double rate_per_sec, double burst)
      : rate_(rate_per_sec), burst_(std::max(1.0, burst)), tokens_(burst_),
        last_(std::chrono::steady_clock::now()) {}

  void acquire() {
    if (rate_ <= 0) return;
    std::unique_lock lock(mu_);
    for (;;) {
      const auto now = std::chrono::steady_clock::now();
      tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
      last_ = now;
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
      lock.unlock();
      std::this_thread::sleep_for(wait);
      lock.lock();
    }
  }

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

/// One JSON file per key under `dir`. Writes go through a temp file and a
/// rename, serialized by a mutex.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::optional<std::string> get(const std::string& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
      const auto j = nlohmann::json::parse(in);
      return j.at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }

  void put(const std::string& key, const std::string& content, const std::string& model) {
    const nlohmann::json j = {{"key", key}, {"model", model},
                              {"instruction_version", assets::kInstructionVersion},
                              {"content", content}};
    std::lock_guard lock(mu_);
    write_file_atomic(path_for(key), j.dump() + "\n");
  }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

 private:
  std::filesystem::path dir_;
  std::mutex mu_;
};

/// Content hash of everything that determines a response.
inline std::string cache_key(const nlohmann::json& request, const std::string& model) {
  return sha256_hex(request.dump() + "\n" + std::string(assets::kInstructionVersion) + "\n" +
                    sha256_hex(assets::kInstructions) + "\n" + model);
}

struct EnhanceCounters {
  std::atomic<std::size_t> network_requests{0};
  std::atomic<std::size_t> cache_hits{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<std::size_t> schema_invalid{0};
};

/// Sends one payload, consulting and filling the cache. Transient failures are
/// retried with exponential backoff; anything else fails the request.
inline EnhancementResult enhance(const PromptPayload& p, const EndpointConfig& cfg,
                                 const Transport& transport, ResponseCache* cache,
                                 EnhanceCounters* counters = nullptr,
                                 TokenBucket* bucket = nullptr) {
  const nlohmann::json request = build_request(p, cfg.model);
  const std::string key = cache_key(request, cfg.model);
  auto finish = [&](EnhancementResult r) {
    if (counters) {
      if (r.status == EnhanceStatus::Failed) ++counters->failed;
      if (r.status == EnhanceStatus::SchemaInvalid) ++counters->schema_invalid;
    }
    return r;
  };
  if (cache) {
    if (auto hit = cache->get(key)) {
      if (counters) ++counters->cache_hits;
      auto r = parse_enhancement(p.target_id, *hit, p.task1_inputs.size());
      r.from_cache = true;
      return finish(std::move(r));
    }
  }
  const std::string body = request.dump();
  EnhancementResult r;
  r.target_id = p.target_id;
  auto delay = cfg.backoff_base;
  for (int attempt = 1; attempt <= cfg.max_tries; ++attempt) {
    if (bucket) bucket->acquire();
    if (counters) ++counters->network_requests;
    HttpReply reply;
    try {
      reply = transport(body);
    } catch (const std::exception& e) {
      reply = {0, {}, e.what()};
    }
    r.attempts = attempt;
    if (reply.status == 200) {
      std::string content;
      try {
        content = content_from_chat_completion(reply.body);
      } catch (const std::exception& e) {
        r.status = EnhanceStatus::SchemaInvalid;
        r.raw = reply.body;
        r.error = std::string("malformed chat completion: ") + e.what();
        return finish(std::move(r));
      }
      if (cache) cache->put(key, content, cfg.model);
      auto parsed = parse_enhancement(p.target_id, content, p.task1_inputs.size());
      parsed.attempts = attempt;
      return finish(std::move(parsed));
    }
    r.error = reply.status == 0 ? "transport error: " + reply.error
                                : "HTTP " + std::to_string(reply.status);
    if (!is_transient(reply.status)) break;
    if (attempt < cfg.max_tries) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(
          static_cast<long long>(std::llround(delay.count() * cfg.backoff_factor)));
    }
  }
  r.status = EnhanceStatus::Failed;
  return finish(std::move(r));
}

/// Fans payloads out over `cfg.concurrency` workers. Results are aligned with
/// `payloads`, so completion order never shows up in the output.
inline std::vector<EnhancementResult> enhance_batch(const std::vector<PromptPayload>& payloads,
                                                    const EndpointConfig& cfg,
                                                    const Transport& transport,
                                                    ResponseCache* cache,
                                                    EnhanceCounters* counters = nullptr) {
  std::vector<EnhancementResult> results(payloads.size());
  TokenBucket bucket(cfg.requests_per_second, std::max(1, cfg.concurrency));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < payloads.size(); i = next++) {
      results[i] = enhance(payloads[i], cfg, transport, cache, counters, &bucket);
    }
  };
  const int n = std::max(1, std::min<int>(cfg.concurrency, static_cast<int>(payloads.size())));
  {
    std::vector<std::jthread> pool;
    for (int k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
  }
  return results;
}

// ---------------------------------------------------------------------------
// Merging into a manifest

struct MergeSummary {
  std::size_t language_added = 0;
  std::size_t visual_added = 0;
  std::map<Rejection, std::size_t> rejected;
  std::size_t failed = 0;
  std::size_t schema_invalid = 0;
};

/// Appends accepted variations to the manifest's expression list. Results are
/// applied in target-id order; rule expressions are never touched.
inline MergeSummary merge_enhancements(DatasetManifest& m,
                                       const std::vector<PromptPayload>& payloads,
                                       const std::vector<EnhancementResult>& results) {
  if (payloads.size() != results.size()) throw InputError("payload/result count mismatch");
  MergeSummary sum;
  std::map<std::string, std::string> image_of;
  for (const auto& t : m.targets) image_of[t.id] = t.image_id;
  std::map<std::string, std::set<std::string>> texts;  // per image
  for (const auto& e : m.expressions) texts[image_of.at(e.target_id)].insert(normalize_text(e.text));

  std::vector<std::size_t> order(payloads.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return payloads[a].target_id < payloads[b].target_id;
  });
  for (std::size_t i : order) {
    const auto& p = payloads[i];
    const auto& r = results[i];
    if (r.status == EnhanceStatus::Failed) {
      ++sum.failed;
      continue;
    }
    if (r.status == EnhanceStatus::SchemaInvalid) {
      ++sum.schema_invalid;
      continue;
    }
    auto it = image_of.find(p.target_id);
    if (it == image_of.end()) throw IntegrityError("enhanced target '" + p.target_id + "' is not in the manifest");
    const ValidityFlags flags = validate_enhancement(r, texts[it->second]);
    for (std::size_t k = 0; k < r.language_variations.size(); ++k) {
      if (flags.language[k] != Rejection::None) {
        ++sum.rejected[flags.language[k]];
        continue;
      }
      m.expressions.push_back({p.target_id + "_l" + std::to_string(k), r.language_variations[k],
                               p.target_id, ExpressionSource::LlmLanguage, p.task1_ids[k]});
      ++sum.language_added;
    }
    for (std::size_t k = 0; k < r.visual_variations.size(); ++k) {
      if (flags.visual[k] != Rejection::None) {
        ++sum.rejected[flags.visual[k]];
        continue;
      }
      m.expressions.push_back({p.target_id + "_v" + std::to_string(k), r.visual_variations[k],
                               p.target_id, ExpressionSource::LlmVisual, std::nullopt});
      ++sum.visual_added;
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Distillation pairs

struct TeacherRecord {
  std::string target_id;
  nlohmann::json messages;  // system + user turns of the request
  std::string response;     // assistant content
};

/// Writes `k` seeded-random (prompt, response) pairs as chat-format JSON lines.
inline void export_distillation_pairs(std::vector<TeacherRecord> records, std::size_t k,
                                      std::uint64_t seed, const std::filesystem::path& out) {
  if (records.size() < k) {
    throw InputError("distillation export needs " + std::to_string(k) +
                     " valid teacher results but only " + std::to_string(records.size()) +
                     " are available (short by " + std::to_string(k - records.size()) + ")");
  }
  std::sort(records.begin(), records.end(),
            [](const TeacherRecord& a, const TeacherRecord& b) { return a.target_id < b.target_id; });
  Rng rng(seed);
  rng.shuffle(records);
  std::string text;
  for (std::size_t i = 0; i < k; ++i) {
    nlohmann::json messages = records[i].messages;
    messages.push_back({{"role", "assistant"}, {"content", records[i].response}});
    text += nlohmann::json{{"messages", messages}}.dump() + "\n";
  }
  write_file_atomic(out, text);
}

// ---------------------------------------------------------------------------
// Cost

struct CostModel {
  double input_price_per_million = 0.0;
  double output_price_per_million = 0.0;
  double avg_input_tokens = 0.0;
  double avg_output_tokens = 0.0;

  static CostModel openai_o3() { return {2.00, 8.00, 1670.8, 2173.3}; }
  static CostModel distilled_gemma3() { return {0.035, 0.141, 1330.0, 284.7}; }
};

inline double cost_per_request(const CostModel& m) {
  if (m.input_price_per_million < 0 || m.output_price_per_million < 0 || m.avg_input_tokens < 0 ||
      m.avg_output_tokens < 0) {
    throw ConfigError("cost model values must be non-negative");
  }
  return (m.avg_input_tokens * m.input_price_per_million +
          m.avg_output_tokens * m.output_price_per_million) / 1e6;
}

inline double estimate_cost(std::uint64_t n_requests, const CostModel& m) {
  return static_cast<double>(n_requests) * cost_per_request(m);
}

}  // namespace forge
