#include "critics/llm/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include "critics/text_util.hpp"

namespace critics::llm {

MockEntry MockEntry::always(MockResponse r, int repeat) {
  return {{}, "always", std::move(r), repeat};
}

MockEntry MockEntry::contains(std::string needle, MockResponse r, int repeat) {
  std::string desc = "contains '" + needle + "'";
  return {[needle = std::move(needle)](const std::string& t) { return t.find(needle) != std::string::npos; },
          std::move(desc), std::move(r), repeat};
}

namespace {

// Splits a judge prompt into its A and B candidate sections. Headers sit at
// line starts; the B header ends section A.
bool judge_sections(const std::string& t, std::string_view& a, std::string_view& b) {
  auto header = [&](char side) -> std::size_t {
    std::size_t best = std::string::npos;
    for (std::string h : {"Storyline ", "Story plan "}) {
      h += side;
      h += ':';
      auto pos = t.rfind("\n" + h);
      if (pos != std::string::npos && (best == std::string::npos || pos > best)) best = pos;
    }
    return best;
  };
  auto pa = header('A');
  auto pb = header('B');
  if (pa == std::string::npos || pb == std::string::npos || pa > pb) return false;
  std::string_view all(t);
  a = all.substr(pa, pb - pa);
  b = all.substr(pb);
  return true;
}

std::string uniform_verdict(char x) {
  std::string out;
  for (int i = 1; i <= 4; ++i) {
    if (i > 1) out += ", ";
    out += std::to_string(i) + ":[[" + x + "]]";
  }
  return out;
}

// Largest N over occurrences of `prefix` immediately followed by digits; -1 if none.
long max_tag(std::string_view s, const std::string& prefix) {
  long best = -1;
  for (auto pos = s.find(prefix); pos != std::string_view::npos; pos = s.find(prefix, pos + 1)) {
    auto i = pos + prefix.size();
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) continue;
    long v = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])) && v < 100000000) v = v * 10 + (s[i++] - '0');
    best = std::max(best, v);
  }
  return best;
}

}  // namespace

std::string prefer_marker_reply(const std::string& transcript, const std::string& marker) {
  std::string_view a, b;
  char x = 'C';
  if (judge_sections(transcript, a, b)) {
    bool in_a = a.find(marker) != std::string_view::npos;
    bool in_b = b.find(marker) != std::string_view::npos;
    if (in_a != in_b) x = in_a ? 'A' : 'B';
  }
  return uniform_verdict(x);
}

std::string prefer_highest_reply(const std::string& transcript, const std::string& prefix) {
  std::string_view a, b;
  char x = 'C';
  if (judge_sections(transcript, a, b)) {
    auto ta = max_tag(a, prefix);
    auto tb = max_tag(b, prefix);
    if (ta != tb) x = ta > tb ? 'A' : 'B';
  }
  return uniform_verdict(x);
}

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

ErrorCode fail_code(const std::string& name) {
  if (name == "unreachable" || name == "server_error") return ErrorCode::ProviderUnreachable;
  if (name == "rate_limited") return ErrorCode::RateLimited;
  if (name == "timeout") return ErrorCode::Timeout;
  if (name == "malformed") return ErrorCode::MalformedProviderResponse;
  throw Error(ErrorCode::InvalidConfig, "unknown mock failure kind '" + name + "'");
}

MockEntry parse_entry(const nlohmann::json& e, const std::filesystem::path& base, std::size_t index) {
  if (!e.is_object()) throw Error(ErrorCode::InvalidConfig, "mock entry " + std::to_string(index) + " is not an object");
  MockEntry out;
  if (e.contains("contains")) {
    auto needle = e.at("contains").get<std::string>();
    out = MockEntry::contains(needle, {});
  } else if (e.contains("regex")) {
    auto pattern = e.at("regex").get<std::string>();
    std::regex re(pattern);
    out.matcher = [re](const std::string& t) { return std::regex_search(t, re); };
    out.description = "regex /" + pattern + "/";
  } else if (e.contains("all")) {
    auto needles = e.at("all").get<std::vector<std::string>>();
    out.matcher = [needles](const std::string& t) {
      for (const auto& n : needles)
        if (t.find(n) == std::string::npos) return false;
      return true;
    };
    out.description = "all [" + text::join(needles, ", ") + "]";
  } else {
    out.description = "always";
  }

  if (e.contains("fail")) {
    out.response = MockResponse::failure(fail_code(e.at("fail").get<std::string>()));
  } else if (e.contains("prefer")) {
    auto marker = e.at("prefer").get<std::string>();
    out.response = MockResponse::dynamic(
        [marker](const ChatRequest& r) { return prefer_marker_reply(r.transcript(), marker); });
  } else if (e.contains("prefer_highest")) {
    auto prefix = e.at("prefer_highest").get<std::string>();
    out.response = MockResponse::dynamic(
        [prefix](const ChatRequest& r) { return prefer_highest_reply(r.transcript(), prefix); });
  } else if (e.contains("response_file")) {
    out.response = MockResponse::reply(read_file(base / e.at("response_file").get<std::string>()));
  } else if (e.contains("response")) {
    out.response = MockResponse::reply(e.at("response").get<std::string>());
  } else {
    throw Error(ErrorCode::InvalidConfig, "mock entry " + std::to_string(index) + " has no response");
  }

  if (e.contains("repeat")) {
    const auto& r = e.at("repeat");
    if (r.is_string() && r.get<std::string>() == "always") {
      out.repeat = -1;
    } else if (r.is_number_integer() && r.get<int>() >= 1) {
      out.repeat = r.get<int>();
    } else {
      throw Error(ErrorCode::InvalidConfig, "mock entry " + std::to_string(index) + ": bad repeat");
    }
  }
  return out;
}

}  // namespace

std::vector<MockEntry> MockBackend::parse_script(const nlohmann::json& doc,
                                                 const std::filesystem::path& base_dir) {
  const nlohmann::json* entries = &doc;
  if (doc.is_object()) {
    if (!doc.contains("entries")) throw Error(ErrorCode::InvalidConfig, "mock script needs \"entries\"");
    entries = &doc.at("entries");
  }
  if (!entries->is_array() || entries->empty())
    throw Error(ErrorCode::InvalidConfig, "mock script must be a non-empty array of entries");
  std::vector<MockEntry> out;
  try {
    for (std::size_t i = 0; i < entries->size(); ++i) out.push_back(parse_entry((*entries)[i], base_dir, i));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("mock script: ") + e.what());
  } catch (const std::regex_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("mock script regex: ") + e.what());
  }
  return out;
}

std::vector<MockEntry> MockBackend::load_script(const std::filesystem::path& file) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "mock script " + file.string() + ": " + e.what());
  }
  return parse_script(doc, file.parent_path());
}

MockBackend::MockBackend(std::vector<MockEntry> script, std::string id)
    : script_(std::move(script)), used_(script_.size(), 0), id_(std::move(id)) {
  if (script_.empty()) throw Error(ErrorCode::InvalidConfig, "mock script is empty");
}

Completion MockBackend::send(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  auto transcript = request.transcript();
  bool any_left = false;
  for (std::size_t i = 0; i < script_.size(); ++i) {
    auto& entry = script_[i];
    if (entry.repeat >= 0 && used_[i] >= entry.repeat) continue;
    any_left = true;
    if (entry.matcher && !entry.matcher(transcript)) continue;
    ++used_[i];
    calls_.push_back({transcript, request.model, request.temperature, static_cast<int>(i)});
    const auto& r = entry.response;
    if (r.fail) throw Error(*r.fail, "mock failure from entry " + std::to_string(i), entry.description);
    Completion c;
    c.content = r.responder ? r.responder(request) : r.text;
    c.provider_id = id_;
    return c;
  }
  calls_.push_back({transcript, request.model, request.temperature, -1});
  misses_.push_back(transcript);
  if (!any_left) throw Error(ErrorCode::ScriptExhausted, "mock script exhausted");
  auto head = transcript.substr(0, 120);
  throw Error(ErrorCode::NoMatcherAccepts, "no mock entry accepts the prompt", head);
}

std::vector<MockCall> MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<std::string> MockBackend::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (std::size_t i = 0; i < script_.size(); ++i)
    if (script_[i].repeat < 0 || used_[i] < script_[i].repeat) ++n;
  return n;
}

}  // namespace critics::llm
