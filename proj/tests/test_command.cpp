#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <functional>
#include <random>
#include <thread>


#include "sdm/command_parser.hpp"

namespace {

using nlohmann::json;

const std::string kCorpus = std::string(SDM_FIXTURE_DIR) + "/command_corpus.jsonl";

json move_cmd(const std::string& type, const std::string& axis, const std::string& sign, double d) {
  return {{"feature", {{"type", type}}},
          {"operation", {{"type", "move"}, {"parameters", {{"axis", axis}, {"sign", sign}, {"distance_mm", d}}}}}};
}

bool has_violation(const sdm::SchemaCheck& c, const std::string& needle) {
  for (const auto& v : c.violations)
    if (v.find(needle) != std::string::npos) return true;
  return false;
}

// ---------------------------------------------------------------- schema

TEST(Schema, MoveWithoutDistance) {
  json c{{"commands", {{{"feature", {{"type", "slot"}}},
                        {"operation", {{"type", "move"}, {"parameters", {{"axis", "X"}, {"sign", "+"}}}}}}}},
         {"verified", true}};
  auto r = sdm::validate_schema(c);
  EXPECT_FALSE(r.ok());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_TRUE(has_violation(r, "move requires distance_mm"));
}

TEST(Schema, ValidTwoOpCommandNormalizes) {
  json c{{"commands",
          {move_cmd("Slot", "x", "+", 3),
           {{"feature", {{"type", "Rectangular Pocket"}, {"hint", "left"}}},
            {"operation", {{"type", "rotate"}, {"parameters", {{"axis", "z"}, {"angle_deg", 45}}}}}}}},
         {"verified", true}};
  auto r = sdm::validate_schema(c);
  ASSERT_TRUE(r.ok()) << r.violations.front();
  ASSERT_EQ(r.command->commands.size(), 2u);
  EXPECT_EQ(r.command->commands[0].feature.type, "slot");
  EXPECT_EQ(r.command->commands[0].operation.parameters.at("axis"), "X");
  EXPECT_TRUE(r.command->commands[0].operation.parameters.at("distance_mm").is_number_float());
  EXPECT_EQ(r.command->commands[1].feature.type, "rect_pocket");
  EXPECT_EQ(r.command->commands[1].feature.hint, "left");
  EXPECT_EQ(r.command->commands[1].operation.parameters.at("angle_deg").get<double>(), 45.0);
  // Normalized output validates to itself.
  EXPECT_EQ(*sdm::validate_schema(r.command->to_json()).command, *r.command);
}

TEST(Schema, NegativeDistanceRejected) {
  json c{{"commands", {move_cmd("slot", "X", "+", -3)}}, {"verified", true}};
  auto r = sdm::validate_schema(c);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_violation(r, "distance_mm must be > 0"));
}

TEST(Schema, AllViolationsEnumerated) {
  json c{{"commands",
          {{{"feature", {{"type", "gear"}}}, {"operation", {{"type", "chamfer"}}}},
           {{"feature", {{"type", "hole"}}},
            {"operation", {{"type", "rotate"}, {"parameters", {{"axis", "W"}, {"angle_deg", 360}}}}}},
           {{"feature", {{"type", "step"}}}, {"operation", {{"type", "delete"}, {"parameters", {{"axis", "X"}}}}}},
           {{"feature", {{"type", "step"}}}, {"operation", {{"type", "resize"}, {"parameters", {{"factor", 0}}}}}}}},
         {"verified", "yes"}};
  auto r = sdm::validate_schema(c);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_violation(r, "verified must be a boolean"));
  EXPECT_TRUE(has_violation(r, "unknown feature type 'gear'"));
  EXPECT_TRUE(has_violation(r, "unsupported operation 'chamfer' (supported: move, rotate, delete, resize)"));
  EXPECT_TRUE(has_violation(r, "commands[1]: axis must be one of X, Y, Z"));
  EXPECT_TRUE(has_violation(r, "commands[1]: angle_deg must lie in (-360, 360)"));
  EXPECT_TRUE(has_violation(r, "delete does not take parameter 'axis'"));
  EXPECT_TRUE(has_violation(r, "factor must be > 0"));
  EXPECT_GE(r.violations.size(), 7u);
}

TEST(Schema, StructuralErrors) {
  EXPECT_FALSE(sdm::validate_schema(json::array()).ok());
  EXPECT_TRUE(has_violation(sdm::validate_schema(json{{"commands", json::array()}, {"verified", true}}), "at least one"));
  EXPECT_TRUE(has_violation(sdm::validate_schema(json{{"verified", true}}), "commands must be an array"));
  json zero_angle{{"commands", {{{"feature", {{"type", "step"}}},
                                 {"operation", {{"type", "rotate"}, {"parameters", {{"axis", "X"}, {"angle_deg", 0}}}}}}}},
                  {"verified", true}};
  EXPECT_FALSE(sdm::validate_schema(zero_angle).ok());
  json string_number{{"commands", {move_cmd("slot", "X", "+", 3)}}, {"verified", true}};
  string_number["commands"][0]["operation"]["parameters"]["distance_mm"] = "3";
  EXPECT_TRUE(has_violation(sdm::validate_schema(string_number), "distance_mm must be a number"));
}

// ---------------------------------------------------------------- prompt

TEST(Prompt, StepMarkersOnceAndInOrder) {
  const std::string p = sdm::build_cot_prompt("move the slot 3 mm along X and delete the hole");
  std::size_t last = p.find("Glossary");
  ASSERT_NE(last, std::string::npos);
  for (int k = 1; k <= 5; ++k) {
    const std::string marker = "[STEP " + std::to_string(k) + "]";
    const auto pos = p.find(marker);
    ASSERT_NE(pos, std::string::npos) << marker;
    EXPECT_EQ(p.find(marker, pos + 1), std::string::npos) << marker << " repeated";
    EXPECT_GT(pos, last);
    last = pos;
  }
  const auto examples = p.find("Examples");
  const auto command = p.rfind("Instruction: move the slot 3 mm along X and delete the hole");
  EXPECT_GT(examples, last);
  EXPECT_GT(command, examples);
  EXPECT_EQ(command + std::string("Instruction: move the slot 3 mm along X and delete the hole\n").size(), p.size());
  EXPECT_NE(p.find("Verification"), std::string::npos);
}

TEST(Prompt, FewShotsAreMultiOpAndSchemaValid) {
  const std::string p = sdm::build_cot_prompt("remove the step");
  const std::string section = p.substr(p.find("Examples"), p.find("Output schema") - p.find("Examples"));
  int multi = 0;
  for (std::size_t pos = section.find("Output: "); pos != std::string::npos; pos = section.find("Output: ", pos + 1)) {
    const auto eol = section.find('\n', pos);
    auto check = sdm::validate_schema(json::parse(section.substr(pos + 8, eol - pos - 8)));
    ASSERT_TRUE(check.ok());
    multi += check.command->commands.size() >= 2;
  }
  EXPECT_GE(multi, 3);
}

TEST(Prompt, DeterministicAndValidatesInput) {
  EXPECT_EQ(sdm::build_cot_prompt("rotate the pocket 10 degrees"), sdm::build_cot_prompt("rotate the pocket 10 degrees"));
  EXPECT_NE(sdm::build_cot_prompt("a"), sdm::build_cot_prompt("b"));
  EXPECT_THROW(sdm::build_cot_prompt("x", "cot-v0"), sdm::InvalidArgument);
  EXPECT_THROW(sdm::build_cot_prompt("   "), sdm::InvalidArgument);
}

// ---------------------------------------------------------------- extraction

TEST(Extract, ProseAroundJson) {
  const std::string reply =
      "Sure! Step 1: the feature is a slot.\n```json\n{\"commands\": [{\"feature\": {\"type\": \"Slot\"}, \"operation\": "
      "{\"type\": \"move\", \"parameters\": {\"axis\": \"X\", \"sign\": \"+\", \"distance_mm\": 3}}}], \"verified\": true}\n```\n"
      "Let me know if {anything} else is needed.";
  auto j = sdm::extract_first_json_object(reply);
  ASSERT_TRUE(j);
  auto check = sdm::validate_schema(json::parse(*j));
  ASSERT_TRUE(check.ok());
  EXPECT_EQ(check.command->commands[0].feature.type, "slot");
}

TEST(Extract, BracesInsideStringsAndBrokenPrefix) {
  EXPECT_EQ(sdm::extract_first_json_object(R"(x {"a": "}{\"", "b": {"c": 1}} y)"), R"({"a": "}{\"", "b": {"c": 1}})");
  EXPECT_EQ(sdm::extract_first_json_object(R"({not json} then {"ok": true})"), R"({"ok": true})");
  EXPECT_FALSE(sdm::extract_first_json_object("no json here"));
  EXPECT_FALSE(sdm::extract_first_json_object("{\"open\": 1"));
}

// ---------------------------------------------------------------- grammar

sdm::StructuredCommand gold(const std::vector<json>& commands) {
  auto check = sdm::validate_schema(json{{"commands", commands}, {"verified", true}});
  if (!check.ok()) throw std::logic_error("bad gold in test: " + check.violations.front());
  return *check.command;
}

TEST(Grammar, DeleteCircularThroughHole) {
  auto r = sdm::parse_with_grammar("delete the circular through hole");
  ASSERT_TRUE(r.ok()) << r.failure->reason;
  EXPECT_EQ(r.source, sdm::ParseSource::kGrammar);
  EXPECT_EQ(*r.structured, gold({json{{"feature", {{"type", "circular_through_hole"}}},
                                       {"operation", {{"type", "delete"}, {"parameters", json::object()}}}}}));
}

TEST(Grammar, RotateThenMoveIt) {
  auto r = sdm::parse_with_grammar("rotate the pocket 45 degrees about Z and move it 2 mm along Y");
  ASSERT_TRUE(r.ok()) << r.failure->reason;
  ASSERT_EQ(r.structured->commands.size(), 2u);
  EXPECT_EQ(r.structured->commands[0].operation.type, "rotate");
  EXPECT_EQ(r.structured->commands[0].operation.parameters, (json{{"axis", "Z"}, {"angle_deg", 45.0}}));
  EXPECT_EQ(r.structured->commands[1].feature.type, "rect_pocket");
  EXPECT_EQ(r.structured->commands[1].operation.parameters, (json{{"axis", "Y"}, {"sign", "+"}, {"distance_mm", 2.0}}));
}

TEST(Grammar, ExplicitAxisWinsOverDirectionWord) {
  auto r = sdm::parse_with_grammar("move the slot 3mm forward along with the X-axis");
  ASSERT_TRUE(r.ok()) << r.failure->reason;
  EXPECT_EQ(r.structured->commands[0].operation.parameters, (json{{"axis", "X"}, {"sign", "+"}, {"distance_mm", 3.0}}));
  auto back = sdm::parse_with_grammar("move the slot 3mm back along X");
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back.structured->commands[0].operation.parameters.at("sign"), "-");
  auto plain = sdm::parse_with_grammar("move the slot 3mm forward");
  ASSERT_TRUE(plain.ok());
  EXPECT_EQ(plain.structured->commands[0].operation.parameters.at("axis"), "Y");
}

TEST(Grammar, AxisTable) {
  const std::vector<std::tuple<std::string, std::string, std::string>> table{
      {"right", "X", "+"}, {"left", "X", "-"}, {"forward", "Y", "+"}, {"back", "Y", "-"}, {"up", "Z", "+"}, {"down", "Z", "-"}};
  for (const auto& [word, axis, sign] : table) {
    auto r = sdm::parse_with_grammar("move the step 1 mm " + word);
    ASSERT_TRUE(r.ok()) << word;
    EXPECT_EQ(r.structured->commands[0].operation.parameters.at("axis"), axis) << word;
    EXPECT_EQ(r.structured->commands[0].operation.parameters.at("sign"), sign) << word;
  }
}

TEST(Grammar, MakeItNicerFailsAtClauseOne) {
  auto r = sdm::parse_with_grammar("make it nicer");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure->clause, 1);
  EXPECT_EQ(r.failure->offset, 0);
  EXPECT_NE(r.failure->reason.find("no operation verb"), std::string::npos);
}

TEST(Grammar, FailuresAreLocated) {
  auto r = sdm::parse_with_grammar("delete the step and move the slot 3 mm sideways");
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure->clause, 2);
  EXPECT_EQ(r.failure->offset, static_cast<int>(std::string("delete the step and move the slot 3 mm ").size()));
  EXPECT_NE(r.failure->reason.find("sideways"), std::string::npos);

  auto pronoun = sdm::parse_with_grammar("move it 3 mm up");
  ASSERT_FALSE(pronoun.ok());
  EXPECT_EQ(pronoun.failure->offset, 5);

  auto zero = sdm::parse_with_grammar("move the slot 0 mm along x");
  ASSERT_FALSE(zero.ok());
  EXPECT_EQ(zero.failure->offset, 14);

  EXPECT_FALSE(sdm::parse_with_grammar("move the gear 3 mm along x").ok());
  EXPECT_FALSE(sdm::parse_with_grammar("rotate the step 360 degrees").ok());
  EXPECT_FALSE(sdm::parse_with_grammar("delete the step 3 mm").ok());
  EXPECT_FALSE(sdm::parse_with_grammar("").ok());
}

TEST(Grammar, ClockwiseNegativeAndPercentages) {
  auto r = sdm::parse_with_grammar("turn the step 30\xC2\xB0 clockwise about x, enlarge it by 20% and shrink it to 50%");
  ASSERT_TRUE(r.ok()) << r.failure->reason;
  EXPECT_EQ(r.structured->commands[0].operation.parameters.at("angle_deg").get<double>(), -30.0);
  EXPECT_EQ(r.structured->commands[1].operation.parameters.at("factor").get<double>(), 1.2);
  EXPECT_EQ(r.structured->commands[2].operation.parameters.at("factor").get<double>(), 0.5);
  auto f = sdm::parse_with_grammar("shrink the pocket by a factor of 4");
  ASSERT_TRUE(f.ok());
  EXPECT_EQ(f.structured->commands[0].operation.parameters.at("factor").get<double>(), 0.25);
}

TEST(Grammar, CorpusExactMatch) {
  const auto corpus = sdm::load_corpus(kCorpus);
  ASSERT_EQ(corpus.size(), 40u);
  int simple = 0, unsupported = 0;
  for (const auto& e : corpus) {
    simple += e.tier == "simple";
    unsupported += !e.grammar_supported;
  }
  EXPECT_EQ(simple, 10);
  EXPECT_LE(unsupported, 2);
  const auto report = sdm::score_corpus(corpus, [](const std::string& t) { return sdm::parse_with_grammar(t); });
  for (const auto& o : report.outcomes) {
    if (o.entry.grammar_supported) {
      EXPECT_TRUE(o.match) << o.entry.text << "\n"
                           << (o.result.failure ? o.result.failure->reason : o.result.structured->to_json().dump());
    } else if (!o.match) {
      ASSERT_TRUE(o.result.failure);
      EXPECT_GT(o.result.failure->clause, 0);
      EXPECT_GE(o.result.failure->offset, 0);
    }
  }
  EXPECT_EQ(report.supported_matched, report.supported_total);
  EXPECT_GE(report.matched, 38);
}

TEST(Grammar, TotalAndDeterministicOnRandomInput) {
  const std::vector<std::string> vocab{"move", "rotate", "delete", "scale", "shrink", "the", "slot", "it", "hole",
                                       "pocket", "3", "-2.5", "mm", "degrees", "%", "along", "x", "-y", "+z", "and",
                                       "then", ",", "up", "left", "clockwise", "by", "to", "0", "400", "\xE2\x88\x92", "°",
                                       "through", "v-slot", "factor", "of", "."};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(0, 14);
  std::uniform_int_distribution<int> byte(0, 255);
  int ok = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    std::string text;
    const auto n = len(rng);
    for (std::size_t k = 0; k < n; ++k) text += vocab[pick(rng)] + (k % 3 ? " " : "");
    if (trial % 10 == 0) text.push_back(static_cast<char>(byte(rng)));
    sdm::ParseResult a, b;
    ASSERT_NO_THROW(a = sdm::parse_with_grammar(text)) << text;
    b = sdm::parse_with_grammar(text);
    EXPECT_EQ(a.to_json(), b.to_json());
    EXPECT_NE(a.ok(), a.failure.has_value());
    if (a.ok()) {
      ++ok;
      EXPECT_TRUE(sdm::validate_schema(a.structured->to_json()).ok()) << text;
    }
  }
  EXPECT_GT(ok, 0);
}

// ---------------------------------------------------------------- LLM client

class MockLlm {
 public:
  using Handler = std::function<std::string(const json& request, int call)>;

  explicit MockLlm(Handler h) : handler_(std::move(h)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++inflight_;
      int seen = max_inflight_.load();
      while (now > seen && !max_inflight_.compare_exchange_weak(seen, now)) {
      }
      const int call = ++calls_;
      const std::string content = handler_(json::parse(req.body), call);
      --inflight_;
      res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockLlm() {
    server_.stop();
    thread_.join();
  }

  sdm::LlmConfig config(double timeout = 5.0, int inflight = 4) const {
    sdm::LlmConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_);
    c.model = "mock";
    c.timeout_s = timeout;
    c.max_inflight = inflight;
    return c;
  }
  int calls() const { return calls_; }
  int max_inflight() const { return max_inflight_; }

 private:
  Handler handler_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0}, inflight_{0}, max_inflight_{0};
};

const std::string kSlotReply =
    "Feature: slot. Operation: move.\n{\"commands\":[{\"feature\":{\"type\":\"Slot\"},\"operation\":{\"type\":\"move\","
    "\"parameters\":{\"axis\":\"X\",\"sign\":\"+\",\"distance_mm\":3}}}],\"verified\":true}\nDone.";

TEST(Llm, ProseAndJsonReplyValidated) {
  json last_request;
  MockLlm mock([&](const json& req, int) {
    last_request = req;
    return kSlotReply;
  });
  sdm::LlmClient client(mock.config());
  auto r = sdm::parse_with_llm("move the slot 3mm forward along with the X-axis", client);
  ASSERT_TRUE(r.ok()) << r.failure->reason;
  EXPECT_EQ(r.source, sdm::ParseSource::kLlm);
  EXPECT_EQ(r.attempts, 1);
  EXPECT_EQ(r.raw, kSlotReply);
  EXPECT_EQ(*r.structured, gold({move_cmd("slot", "X", "+", 3.0)}));
  EXPECT_EQ(last_request.at("model"), "mock");
  EXPECT_EQ(last_request.at("messages")[0].at("content"),
            sdm::build_cot_prompt("move the slot 3mm forward along with the X-axis"));
}

TEST(Llm, RepairRoundAfterInvalidReply) {
  json second;
  MockLlm mock([&](const json& req, int call) -> std::string {
    if (call == 1) return R"({"commands":[{"feature":{"type":"slot"},"operation":{"type":"move","parameters":{"axis":"X","sign":"+"}}}],"verified":true})";
    second = req;
    return kSlotReply;
  });
  sdm::LlmClient client(mock.config());
  auto r = sdm::parse_with_llm("move the slot 3 mm along x", client);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.attempts, 2);
  ASSERT_EQ(second.at("messages").size(), 3u);
  EXPECT_EQ(second.at("messages")[1].at("role"), "assistant");
  EXPECT_NE(second.at("messages")[2].at("content").get<std::string>().find("move requires distance_mm"), std::string::npos);
}

TEST(Llm, FailsAfterTwoBadReplies) {
  MockLlm mock([](const json&, int) { return std::string("I cannot help with that."); });
  sdm::LlmClient client(mock.config());
  auto r = sdm::parse_with_llm("move the slot", client);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure->kind, "schema");
  EXPECT_EQ(r.attempts, 2);
  EXPECT_EQ(mock.calls(), 2);
}

TEST(Llm, UnreachableEndpointIsTransportFailure) {
  sdm::LlmConfig c;
  c.endpoint = "http://127.0.0.1:1";
  c.timeout_s = 2.0;
  sdm::LlmClient client(c);
  auto r = sdm::parse_with_llm("delete the step", client);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure->kind, "transport");
  EXPECT_THROW(sdm::LlmClient(sdm::LlmConfig{}), sdm::InvalidArgument);
}

TEST(Llm, SlowEndpointTimesOut) {
  MockLlm mock([](const json&, int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    return kSlotReply;
  });
  sdm::LlmClient client(mock.config(0.3));
  auto r = sdm::parse_with_llm("delete the step", client);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.failure->kind, "timeout");
}

TEST(Llm, InFlightLimitHonoured) {
  MockLlm mock([](const json&, int) {
    std::this_thread::sleep_for(std::chrono::milliseconds(60));
    return kSlotReply;
  });
  sdm::LlmClient client(mock.config(5.0, 2));
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int k = 0; k < 8; ++k)
    threads.emplace_back([&] { ok += sdm::parse_with_llm("move the slot 3 mm along x", client).ok(); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(ok, 8);
  EXPECT_LE(mock.max_inflight(), 2);
  EXPECT_GE(mock.max_inflight(), 1);
}

TEST(Llm, CorpusThroughReplayedTranscripts) {
  // Replies are the gold JSON wrapped in prose: checks prompt -> extract ->
  // validate on every corpus entry, not the model's accuracy.
  const auto corpus = sdm::load_corpus(kCorpus);
  MockLlm mock([&](const json& req, int) {
    const std::string prompt = req.at("messages")[0].at("content");
    for (const auto& e : corpus)
      if (prompt.size() >= e.text.size() + 1 && prompt.compare(prompt.size() - e.text.size() - 1, e.text.size(), e.text) == 0)
        return "Reasoning...\n" + e.gold.to_json().dump(2) + "\n";
    return std::string("{}");
  });
  sdm::LlmClient client(mock.config());
  const auto report = sdm::score_corpus(corpus, [&](const std::string& t) { return sdm::parse_with_llm(t, client); });
  EXPECT_EQ(report.matched, 40);
}

}  // namespace
