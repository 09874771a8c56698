#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cogstat/chsh.hpp"
#include "json.hpp"

namespace cogstat::protocol {

/// One answer option of a coincidence measurement with its outcome signs
/// for the animal (first) and the sound (second) concept.
struct Option {
  std::string phrase;
  int sign_first = 1;
  int sign_second = 1;
};

/// Options are ordered by outcome: (+1,+1), (-1,-1), (+1,-1), (-1,+1), which
/// is also the p11, p22, p12, p21 order of OutcomeProbabilities.
struct MeasurementSpec {
  Block id = Block::AB;
  std::string question;
  std::array<Option, 4> options;

  std::array<std::string, 4> phrases() const;
};

/// The four "The Animal Acts" coincidence measurements.
std::vector<MeasurementSpec> default_measurements();

/// Returns the 1-based index of the option the response picks, or nullopt.
///
/// Matching is case-insensitive and ignores punctuation. When several options
/// are mentioned, occurrences right after a choice verb ("choose", "pick",
/// ...) win, then occurrences inside double quotes, then any occurrence. The
/// first non-empty tier decides; it must name a single option.
std::optional<int> parse_choice(std::string_view response, std::span<const std::string> options);

enum class ConversationMode {
  Independent,         ///< fresh conversation for every (trial, measurement)
  SingleConversation,  ///< one conversation per trial covering all measurements
};

struct SessionConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model;
  int trials = 1;
  double timeout_seconds = 60.0;
  int retry_limit = 2;
  std::optional<double> temperature;
  std::string auth_env = "OPENAI_API_KEY";
  ConversationMode mode = ConversationMode::Independent;
  bool follow_up = false;  ///< ask once more when a response is unparsed

  /// Throws ConfigError when trials < 1, retry_limit < 0, timeout <= 0 or the
  /// model name is empty.
  void validate() const;
};

/// A config file holds one SessionConfig per subject model: either a single
/// "model" or a "models" array sharing the remaining settings.
std::vector<SessionConfig> configs_from_json(const nlohmann::json& j);

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;
  Block measurement = Block::AB;  ///< routing hint for mocks; never sent on the wire
  double timeout_seconds = 60.0;
};

/// Request body {model, messages[, temperature]} of the chat endpoint.
nlohmann::json request_body(const ChatRequest& request);

/// Pulls choices[0].message.content out of a chat-completions response.
std::string response_content(const nlohmann::json& body);

class Transport {
 public:
  virtual ~Transport() = default;
  /// Returns the assistant's reply text or throws TransportError.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// HTTP POST of the request body to a chat-completions style endpoint.
/// The bearer token is read from the environment variable `auth_env` (no
/// Authorization header when it is unset or empty).
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string endpoint, std::string auth_env);
  std::string complete(const ChatRequest& request) override;

 private:
  std::string endpoint_;
  std::string auth_env_;
};

/// Replays canned responses. Fixture layout:
///   {"model": "name", "responses": {"AB": ["..."], "ABp": [...], "ApB": [...], "ApBp": [...]}}
/// The k-th request for a measurement gets responses[k % size].
class MockTransport : public Transport {
 public:
  MockTransport(std::string model, std::map<Block, std::vector<std::string>> responses);
  static MockTransport from_json(const nlohmann::json& j);
  static MockTransport from_file(const std::filesystem::path& path);

  const std::string& model() const noexcept { return model_; }
  std::string complete(const ChatRequest& request) override;

 private:
  std::string model_;
  std::map<Block, std::vector<std::string>> responses_;
  std::map<Block, std::size_t> served_;
};

/// Wraps a callable; handy for fault injection.
class CallbackTransport : public Transport {
 public:
  explicit CallbackTransport(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override { return fn_(request); }

 private:
  std::function<std::string(const ChatRequest&)> fn_;
};

struct TranscriptRecord {
  Block measurement = Block::AB;
  int trial = 0;
  std::string model;
  std::string prompt;
  std::string response;
  std::optional<int> choice;  ///< 1..4 when parsed
  int retries = 0;
  bool follow_up_used = false;
  std::string error;  ///< last transport error when every attempt failed
  std::string timestamp;

  bool parsed() const noexcept { return choice.has_value(); }
};

nlohmann::json to_json(const TranscriptRecord& r);
TranscriptRecord record_from_json(const nlohmann::json& j);

/// Reads a JSON-lines transcript. A missing file yields no records. When a
/// (model, measurement, trial) key repeats, the later line wins.
std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path);

/// Prompt for one measurement: a short context sentence, the question and the
/// four options as a numbered list.
std::string build_prompt(const MeasurementSpec& spec);

struct SessionHooks {
  /// Each finished record is appended here before the next request goes out.
  std::optional<std::filesystem::path> transcript_path;
  /// Timestamp source; defaults to the current UTC time in ISO 8601.
  std::function<std::string()> clock;
};

struct SessionResult {
  std::vector<TranscriptRecord> records;  ///< trial-major, measurement order within a trial
  int transport_errors = 0;               ///< records whose every attempt failed
  int resumed = 0;                        ///< records taken over from an existing transcript
};

/// Runs `config.trials` trials of every measurement, sequentially. Records
/// already present (and not failed) in the transcript file are reused, so an
/// interrupted session can be resumed by running it again.
SessionResult run_session(const SessionConfig& config, std::span<const MeasurementSpec> measurements,
                          Transport& transport, const SessionHooks& hooks = {});

/// Outcome frequencies over parsed records, per measurement. Unparsed records
/// are left out of the denominators, and each block's p11 + p22 + p12 + p21
/// evaluates to exactly 1.0. Throws InsufficientData naming the first
/// measurement with no parsed record.
CoincidenceTable aggregate(std::span<const TranscriptRecord> records);

/// Equal-weight average of per-subject tables.
CoincidenceTable average_tables(std::span<const CoincidenceTable> tables);

/// Aggregates each model's records separately and averages the results.
CoincidenceTable aggregate_by_model(std::span<const TranscriptRecord> records);

}  // namespace cogstat::protocol
