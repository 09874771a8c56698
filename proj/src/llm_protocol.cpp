#include "cogstat/llm_protocol.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include "cogstat/errors.hpp"
#include "cogstat/io.hpp"
#include "cogstat/text_ingest.hpp"

namespace cogstat::protocol {

std::array<std::string, 4> MeasurementSpec::phrases() const {
  return {options[0].phrase, options[1].phrase, options[2].phrase, options[3].phrase};
}

std::vector<MeasurementSpec> default_measurements() {
  const std::string question = "What is a good example of The Animal Acts?";
  auto spec = [&](Block id, const char* a1, const char* a2, const char* b1, const char* b2) {
    const std::string first = a1, second = a2, sound1 = b1, sound2 = b2;
    return MeasurementSpec{id,
                           question,
                           {{{"The " + first + " " + sound1, +1, +1},
                             {"The " + second + " " + sound2, -1, -1},
                             {"The " + first + " " + sound2, +1, -1},
                             {"The " + second + " " + sound1, -1, +1}}}};
  };
  return {spec(Block::AB, "Horse", "Bear", "Growls", "Whinnies"),
          spec(Block::ABp, "Horse", "Bear", "Snorts", "Meows"),
          spec(Block::ApB, "Tiger", "Cat", "Growls", "Whinnies"),
          spec(Block::ApBp, "Tiger", "Cat", "Snorts", "Meows")};
}

namespace {

struct Token {
  std::string text;
  bool quoted = false;
};

bool is_double_quote(char32_t cp) {
  return cp == U'"' || cp == 0x201C || cp == 0x201D || cp == 0x201E || cp == 0x00AB || cp == 0x00BB;
}

// Lower-cased alphanumeric runs with their quote state. Apostrophes inside a
// word are dropped ("I'd" -> "id"); LaTeX-style `` and '' count as quotes.
std::vector<Token> scan(std::string_view text) {
  std::string s(text);
  for (std::size_t pos; (pos = s.find("``")) != std::string::npos;) s.replace(pos, 2, "\"");
  for (std::size_t pos; (pos = s.find("''")) != std::string::npos;) s.replace(pos, 2, "\"");

  std::vector<Token> tokens;
  bool in_quotes = false;
  std::string cur;
  bool cur_quoted = false;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back({std::move(cur), cur_quoted});
    cur.clear();
  };
  for (std::size_t i = 0; i < s.size();) {
    const auto b = static_cast<unsigned char>(s[i]);
    char32_t cp = b;
    std::size_t len = 1;
    if (b >= 0xF0) {
      len = 4;
    } else if (b >= 0xE0) {
      len = 3;
    } else if (b >= 0xC0) {
      len = 2;
    }
    if (len > 1 && i + len <= s.size()) {
      cp = b & (0xFF >> (len + 1));
      for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    } else {
      len = 1;
    }
    if (cp < 0x80 && std::isalnum(static_cast<int>(cp))) {
      if (cur.empty()) cur_quoted = in_quotes;
      cur.push_back(static_cast<char>(std::tolower(static_cast<int>(cp))));
    } else if ((cp == U'\'' || cp == 0x2019) && !cur.empty() && i + len < s.size() &&
               std::isalnum(static_cast<unsigned char>(s[i + len]))) {
      // intra-word apostrophe: skip it, keep the word together
    } else {
      flush();
      if (is_double_quote(cp)) in_quotes = !in_quotes;
    }
    i += len;
  }
  flush();
  return tokens;
}

const std::set<std::string>& choice_cues() {
  static const std::set<std::string> cues{"choose", "chose", "choosing", "pick", "picked", "select",
                                          "selected", "choice", "answer", "prefer"};
  return cues;
}

constexpr std::size_t kCueWindow = 3;

}  // namespace

std::optional<int> parse_choice(std::string_view response, std::span<const std::string> options) {
  const auto tokens = scan(response);
  struct Hit {
    int option;
    bool cued;
    bool quoted;
  };
  std::vector<Hit> hits;
  for (std::size_t o = 0; o < options.size(); ++o) {
    std::vector<std::string> needle;
    for (auto& t : scan(options[o])) needle.push_back(std::move(t.text));
    if (needle.empty() || needle.size() > tokens.size()) continue;
    for (std::size_t start = 0; start + needle.size() <= tokens.size(); ++start) {
      bool match = true;
      bool quoted = true;
      for (std::size_t k = 0; k < needle.size() && match; ++k) {
        match = tokens[start + k].text == needle[k];
        quoted = quoted && tokens[start + k].quoted;
      }
      if (!match) continue;
      bool cued = false;
      for (std::size_t back = 1; back <= kCueWindow && back <= start; ++back) {
        if (choice_cues().contains(tokens[start - back].text)) cued = true;
      }
      hits.push_back({static_cast<int>(o) + 1, cued, quoted});
    }
  }

  auto decide = [&](auto&& keep) -> std::optional<std::optional<int>> {
    std::set<int> distinct;
    for (const auto& h : hits) {
      if (keep(h)) distinct.insert(h.option);
    }
    if (distinct.empty()) return std::nullopt;  // tier empty, fall through
    if (distinct.size() == 1) return std::optional<int>(*distinct.begin());
    return std::optional<int>();  // ambiguous: unparsed
  };
  if (auto r = decide([](const Hit& h) { return h.cued; })) return *r;
  if (auto r = decide([](const Hit& h) { return h.quoted; })) return *r;
  if (auto r = decide([](const Hit&) { return true; })) return *r;
  return std::nullopt;
}

void SessionConfig::validate() const {
  if (trials < 1) throw ConfigError("trials must be at least 1, got " + std::to_string(trials));
  if (retry_limit < 0) throw ConfigError("retry_limit must be non-negative");
  if (!(timeout_seconds > 0.0)) throw ConfigError("timeout_seconds must be positive");
  if (model.empty()) throw ConfigError("model name is empty");
  if (temperature && !std::isfinite(*temperature)) throw ConfigError("temperature must be finite");
}

std::vector<SessionConfig> configs_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "expected an object");
  SessionConfig base;
  auto get_string = [&](const char* key, std::string& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_string()) throw SchemaError(std::string("/") + key, "expected a string");
    dst = j[key].get<std::string>();
  };
  auto get_int = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw SchemaError(std::string("/") + key, "expected an integer");
    dst = j[key].get<int>();
  };
  get_string("endpoint", base.endpoint);
  get_string("auth_env", base.auth_env);
  get_int("trials", base.trials);
  get_int("retry_limit", base.retry_limit);
  if (j.contains("timeout_seconds")) {
    if (!j["timeout_seconds"].is_number()) throw SchemaError("/timeout_seconds", "expected a number");
    base.timeout_seconds = j["timeout_seconds"].get<double>();
  }
  if (j.contains("temperature") && !j["temperature"].is_null()) {
    if (!j["temperature"].is_number()) throw SchemaError("/temperature", "expected a number or null");
    base.temperature = j["temperature"].get<double>();
  }
  if (j.contains("mode")) {
    const auto& m = j["mode"];
    if (m == "independent") {
      base.mode = ConversationMode::Independent;
    } else if (m == "single_conversation") {
      base.mode = ConversationMode::SingleConversation;
    } else {
      throw SchemaError("/mode", "expected \"independent\" or \"single_conversation\"");
    }
  }
  if (j.contains("follow_up")) {
    if (!j["follow_up"].is_boolean()) throw SchemaError("/follow_up", "expected a boolean");
    base.follow_up = j["follow_up"].get<bool>();
  }

  std::vector<std::string> models;
  if (j.contains("models")) {
    if (!j["models"].is_array()) throw SchemaError("/models", "expected an array of strings");
    for (std::size_t i = 0; i < j["models"].size(); ++i) {
      if (!j["models"][i].is_string()) throw SchemaError("/models/" + std::to_string(i), "expected a string");
      models.push_back(j["models"][i].get<std::string>());
    }
  }
  if (j.contains("model")) {
    std::string m;
    get_string("model", m);
    models.insert(models.begin(), m);
  }
  if (models.empty()) throw ConfigError("config names no model (use \"model\" or \"models\")");

  std::vector<SessionConfig> out;
  for (auto& m : models) {
    SessionConfig c = base;
    c.model = std::move(m);
    c.validate();
    out.push_back(std::move(c));
  }
  return out;
}

nlohmann::json request_body(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body{{"model", request.model}, {"messages", std::move(messages)}};
  if (request.temperature) body["temperature"] = *request.temperature;
  return body;
}

std::string response_content(const nlohmann::json& body) {
  try {
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError("response has no choices[0].message.content");
  }
}

MockTransport::MockTransport(std::string model, std::map<Block, std::vector<std::string>> responses)
    : model_(std::move(model)), responses_(std::move(responses)) {}

MockTransport MockTransport::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("", "mock fixture must be an object");
  std::string model = "mock";
  if (j.contains("model")) {
    if (!j["model"].is_string()) throw SchemaError("/model", "expected a string");
    model = j["model"].get<std::string>();
  }
  if (!j.contains("responses") || !j["responses"].is_object()) {
    throw SchemaError("/responses", "expected an object keyed by measurement");
  }
  std::map<Block, std::vector<std::string>> responses;
  for (const auto& [key, list] : j["responses"].items()) {
    const auto block = block_from_string(key);
    if (!block) throw SchemaError("/responses/" + key, "unknown measurement");
    if (!list.is_array() || list.empty()) throw SchemaError("/responses/" + key, "expected a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_string()) throw SchemaError("/responses/" + key + "/" + std::to_string(i), "expected a string");
      responses[*block].push_back(list[i].get<std::string>());
    }
  }
  return MockTransport(std::move(model), std::move(responses));
}

MockTransport MockTransport::from_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

std::string MockTransport::complete(const ChatRequest& request) {
  const auto it = responses_.find(request.measurement);
  if (it == responses_.end()) {
    throw TransportError("mock has no responses for " + to_string(request.measurement));
  }
  std::size_t& k = served_[request.measurement];
  return it->second[k++ % it->second.size()];
}

nlohmann::json to_json(const TranscriptRecord& r) {
  nlohmann::json j{{"measurement", to_string(r.measurement)},
                   {"trial", r.trial},
                   {"model", r.model},
                   {"prompt", r.prompt},
                   {"response", r.response},
                   {"choice", r.choice ? nlohmann::json(*r.choice) : nlohmann::json(nullptr)},
                   {"parsed", r.parsed()},
                   {"retries", r.retries},
                   {"follow_up_used", r.follow_up_used},
                   {"error", r.error},
                   {"timestamp", r.timestamp}};
  return j;
}

TranscriptRecord record_from_json(const nlohmann::json& j) {
  TranscriptRecord r;
  try {
    const auto block = block_from_string(j.at("measurement").get<std::string>());
    if (!block) throw SchemaError("/measurement", "unknown measurement");
    r.measurement = *block;
    r.trial = j.at("trial").get<int>();
    r.model = j.at("model").get<std::string>();
    r.prompt = j.value("prompt", "");
    r.response = j.value("response", "");
    if (j.contains("choice") && !j["choice"].is_null()) {
      const int c = j["choice"].get<int>();
      if (c < 1 || c > 4) throw SchemaError("/choice", "must be 1..4");
      r.choice = c;
    }
    r.retries = j.value("retries", 0);
    r.follow_up_used = j.value("follow_up_used", false);
    r.error = j.value("error", "");
    r.timestamp = j.value("timestamp", "");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("transcript record", e.what());
  }
  return r;
}

std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> out;
  if (!std::filesystem::exists(path)) return out;
  const auto lines = io::split_lines(read_text_file(path));
  std::map<std::tuple<std::string, int, int>, std::size_t> index;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      // A torn final line from a crash is dropped; anything earlier is corruption.
      if (i + 1 == lines.size() || (i + 2 == lines.size() && lines.back().empty())) break;
      throw SchemaError(path.string() + ":" + std::to_string(i + 1), "invalid JSON line");
    }
    auto rec = record_from_json(j);
    const auto key = std::tuple{rec.model, static_cast<int>(rec.measurement), rec.trial};
    if (auto it = index.find(key); it != index.end()) {
      out[it->second] = std::move(rec);
    } else {
      index.emplace(key, out.size());
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string build_prompt(const MeasurementSpec& spec) {
  std::ostringstream out;
  out << "A short question about word combinations. The two concepts are \"Animal\" and \"Acts\"; "
         "an act here is the sound an animal makes.\n\n"
      << spec.question << "\n";
  for (std::size_t i = 0; i < spec.options.size(); ++i) out << (i + 1) << ". " << spec.options[i].phrase << "\n";
  out << "\nChoose one of the four, using any criterion you like, and give the reason for your choice.";
  return out.str();
}

namespace {

constexpr const char* kFollowUp = "Please name exactly one of the four options.";

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Attempt {
  std::optional<std::string> reply;
  int retries = 0;
  std::string error;
};

Attempt send_with_retries(Transport& transport, const ChatRequest& request, int retry_limit) {
  Attempt a;
  for (int attempt = 0; attempt <= retry_limit; ++attempt) {
    try {
      a.reply = transport.complete(request);
      a.retries = attempt;
      return a;
    } catch (const TransportError& e) {
      a.error = e.what();
      a.retries = attempt;
    }
  }
  return a;
}

}  // namespace

SessionResult run_session(const SessionConfig& config, std::span<const MeasurementSpec> measurements,
                          Transport& transport, const SessionHooks& hooks) {
  config.validate();
  if (measurements.empty()) throw ConfigError("no measurements to run");
  auto clock = hooks.clock ? hooks.clock : std::function<std::string()>(utc_now);

  std::map<std::pair<int, int>, TranscriptRecord> done;
  if (hooks.transcript_path) {
    for (auto& r : load_transcript(*hooks.transcript_path)) {
      if (r.model == config.model && r.error.empty()) {
        done.emplace(std::pair{r.trial, static_cast<int>(r.measurement)}, std::move(r));
      }
    }
  }

  SessionResult result;
  for (int trial = 1; trial <= config.trials; ++trial) {
    std::vector<ChatMessage> conversation;
    for (const auto& spec : measurements) {
      const auto key = std::pair{trial, static_cast<int>(spec.id)};
      if (auto it = done.find(key); it != done.end()) {
        if (config.mode == ConversationMode::SingleConversation) {
          conversation.push_back({"user", it->second.prompt});
          conversation.push_back({"assistant", it->second.response});
        }
        result.records.push_back(it->second);
        ++result.resumed;
        continue;
      }

      TranscriptRecord rec;
      rec.measurement = spec.id;
      rec.trial = trial;
      rec.model = config.model;
      rec.prompt = build_prompt(spec);

      ChatRequest request;
      request.model = config.model;
      request.temperature = config.temperature;
      request.measurement = spec.id;
      request.timeout_seconds = config.timeout_seconds;
      if (config.mode == ConversationMode::SingleConversation) request.messages = conversation;
      request.messages.push_back({"user", rec.prompt});

      Attempt a = send_with_retries(transport, request, config.retry_limit);
      rec.retries = a.retries;
      if (a.reply) {
        rec.response = *a.reply;
        const auto phrases = spec.phrases();
        rec.choice = parse_choice(rec.response, phrases);
        request.messages.push_back({"assistant", rec.response});
        if (!rec.choice && config.follow_up) {
          request.messages.push_back({"user", kFollowUp});
          Attempt again = send_with_retries(transport, request, config.retry_limit);
          rec.retries += again.retries;
          if (again.reply) {
            rec.follow_up_used = true;
            rec.response += "\n\n[follow-up] " + *again.reply;
            rec.choice = parse_choice(*again.reply, phrases);
            request.messages.push_back({"user", kFollowUp});
            request.messages.push_back({"assistant", *again.reply});
          }
        }
      } else {
        rec.error = a.error;
        ++result.transport_errors;
      }
      rec.timestamp = clock();
      if (config.mode == ConversationMode::SingleConversation) {
        // the exchange becomes context for the next measurement; a failed prompt is dropped
        conversation.assign(request.messages.begin(), request.messages.end());
        if (!a.reply) conversation.pop_back();
      }
      if (hooks.transcript_path) io::append_line_durable(*hooks.transcript_path, to_json(rec).dump());
      result.records.push_back(std::move(rec));
    }
  }
  return result;
}

CoincidenceTable aggregate(std::span<const TranscriptRecord> records) {
  std::map<Block, std::array<std::int64_t, 4>> counts;
  for (const auto& r : records) {
    if (!r.choice) continue;
    counts[r.measurement][static_cast<std::size_t>(*r.choice - 1)] += 1;
  }
  CoincidenceTable table;
  for (Block b : kAllBlocks) {
    const auto it = counts.find(b);
    std::int64_t total = 0;
    if (it != counts.end()) {
      for (auto c : it->second) total += c;
    }
    if (total == 0) throw InsufficientData("no parsed responses for measurement " + to_string(b));
    const auto& c = it->second;
    const double n = static_cast<double>(total);
    OutcomeProbabilities p{static_cast<double>(c[0]) / n, static_cast<double>(c[1]) / n,
                           static_cast<double>(c[2]) / n, static_cast<double>(c[3]) / n};
    // Rounded quotients can miss 1 by an ulp. The last non-zero entry (in
    // p11, p22, p12, p21 order) takes 1 minus the preceding ones instead, which
    // moves it by at most a couple of ulps and makes the sum exactly 1.
    std::array<double*, 4> order{&p.p11, &p.p22, &p.p12, &p.p21};
    std::size_t last = 3;
    while (*order[last] == 0.0) --last;
    double prefix = 0.0;
    for (std::size_t k = 0; k < last; ++k) prefix += *order[k];
    *order[last] = 1.0 - prefix;
    table[b] = p;
  }
  return table;
}

CoincidenceTable average_tables(std::span<const CoincidenceTable> tables) {
  if (tables.empty()) throw InsufficientData("no subject tables to average");
  CoincidenceTable avg;
  const double n = static_cast<double>(tables.size());
  for (Block b : kAllBlocks) {
    OutcomeProbabilities sum;
    for (const auto& t : tables) {
      sum.p11 += t[b].p11;
      sum.p22 += t[b].p22;
      sum.p12 += t[b].p12;
      sum.p21 += t[b].p21;
    }
    avg[b] = {sum.p11 / n, sum.p22 / n, sum.p12 / n, sum.p21 / n};
  }
  return avg;
}

CoincidenceTable aggregate_by_model(std::span<const TranscriptRecord> records) {
  std::map<std::string, std::vector<TranscriptRecord>> by_model;
  for (const auto& r : records) by_model[r.model].push_back(r);
  std::vector<CoincidenceTable> tables;
  for (const auto& [model, recs] : by_model) {
    try {
      tables.push_back(aggregate(recs));
    } catch (const InsufficientData& e) {
      throw InsufficientData("model " + model + ": " + e.what());
    }
  }
  return average_tables(tables);
}

}  // namespace cogstat::protocol
