#include "doctest.h"
#include "helpers.hpp"

#include "topoxpert/agent.hpp"
#include "topoxpert/error.hpp"

using namespace topoxpert;
using namespace txtest;

namespace {

BenchmarkTask ota_task() {
  BenchmarkTask task;
  task.id = "task1-test";
  task.requirement = ota_requirement();
  task.category = category_of(task.requirement);
  return task;
}

std::string wrap_response(const std::string& netlist) {
  return "Step 1.\nSelected blocks: DIFF_PAIR_N, CURRENT_SOURCE_N, MIRROR_LOAD_P\n"
         "Step 2.\n```\n" + netlist + "```\n";
}

}  // namespace

TEST_CASE("requirement similarity weights the structural features") {
  StructureRequirement a = ota_requirement();
  CHECK(requirement_similarity(a, a) == doctest::Approx(9.0));

  StructureRequirement stages = a;
  stages.stages = 2;
  stages.input_blocks = {"DIFF_PAIR_N", "CS_AMP_N"};
  StructureRequirement signal = a;
  signal.input_signal = InputSignal::SingleEnded;
  // losing the stage match costs more than losing the signal match
  CHECK(requirement_similarity(a, stages) < requirement_similarity(a, signal));

  StructureRequirement given = a;
  given.given_blocks = {"CAP"};
  CHECK(requirement_similarity(a, given) == doctest::Approx(7.0));  // empty vs {CAP}: jaccard 0
}

TEST_CASE("select_example takes the most similar case, ties to lowest id") {
  Library lib = builtin_library();
  auto pool = builtin_golden_cases(lib);
  const GoldenCase& best = select_example(ota_requirement(), pool);
  CHECK(best.task.requirement.stages == 1);
  CHECK(best.task.requirement.input_signal == InputSignal::Differential);

  // two identical candidates: the lower id wins
  std::vector<GoldenCase> tied = {pool[0], pool[0]};
  tied[0].task.id = "z-case";
  tied[1].task.id = "a-case";
  CHECK(select_example(tied[0].task.requirement, tied).task.id == "a-case");

  CHECK_THROWS_AS(select_example(ota_requirement(), {}), Error);
}

TEST_CASE("initial prompt carries the grammar, example, and two-step instructions") {
  Library lib = builtin_library();
  auto pool = builtin_golden_cases(lib);
  PromptBundle p = build_initial_prompt(ota_requirement(), lib, pool[0]);
  CHECK(p.system.find(".ports") != std::string::npos);
  CHECK(p.system.find("DIFF_PAIR_N") != std::string::npos);
  CHECK(p.system.find(".end") != std::string::npos);
  REQUIRE(p.messages.size() == 1);
  CHECK(p.messages[0].role == "user");
  CHECK(p.messages[0].content.find("Step 1") != std::string::npos);
  CHECK(p.messages[0].content.find("Step 2") != std::string::npos);
  CHECK(p.messages[0].content.find("Selected blocks:") != std::string::npos);
  CHECK(p.messages[0].content.find(serialize(pool[0].golden)) != std::string::npos);

  CHECK_THROWS_AS(build_initial_prompt(ota_requirement(), lib, pool[0], 10), Error);
}

TEST_CASE("refinement prompt replays history and drops oldest middle rounds") {
  Library lib = builtin_library();
  auto pool = builtin_golden_cases(lib);
  PromptBundle initial = build_initial_prompt(ota_requirement(), lib, pool[0]);

  std::vector<Round> history;
  for (int i = 1; i <= 4; ++i) {
    Round r;
    r.index = i;
    r.prompt = i == 1 ? initial : PromptBundle{initial.system,
                                               {{"user", "revision " + std::to_string(i - 1)}}};
    r.response = "response " + std::to_string(i) + std::string(600, '.');
    history.push_back(r);
  }
  RevisionMessage rev{"latest revision", 5};

  PromptBundle full = build_refinement_prompt(history, rev, 1u << 20);
  // 4 user/assistant pairs plus the new revision
  CHECK(full.messages.size() == 9);
  CHECK(full.messages.back().role == "user");
  CHECK(full.messages.back().content == "latest revision");

  // squeeze the budget: middle rounds drop, round 1 and the latest stay
  size_t tight = initial.total_chars() + 2 * 700 + rev.text.size() + 200;
  PromptBundle trimmed = build_refinement_prompt(history, rev, tight);
  CHECK(trimmed.messages.size() < full.messages.size());
  CHECK(trimmed.messages[0].content == initial.messages[0].content);
  bool has_latest = false;
  for (const auto& m : trimmed.messages) has_latest |= m.content == history.back().response;
  CHECK(has_latest);
  bool has_round2 = false;
  for (const auto& m : trimmed.messages) has_round2 |= m.content == history[1].response;
  CHECK_FALSE(has_round2);

  CHECK_THROWS_AS(build_refinement_prompt(history, rev, 10), Error);
}

TEST_CASE("parse_response takes the last fenced block and the selection line") {
  Library lib = builtin_library();
  std::string text =
      "Selected blocks: DIFF_PAIR_N, MIRROR_LOAD_P\n"
      "First attempt:\n```\ngarbage that is not a netlist\n```\n"
      "Corrected:\n```spice\n" + std::string(kOtaNetlist) + "```\ndone\n";
  ParsedResponse r = parse_response(text, lib);
  CHECK(r.found_netlist);
  REQUIRE(r.parse.ok());
  CHECK(r.parse.topology->blocks.size() == 3);
  CHECK(r.selection == std::vector<std::string>{"DIFF_PAIR_N", "MIRROR_LOAD_P"});

  ParsedResponse none = parse_response("no code here", lib);
  CHECK_FALSE(none.found_netlist);
  CHECK_FALSE(none.parse.ok());
}

TEST_CASE("run_episode passes on a correct first answer") {
  Library lib = builtin_library();
  ScriptedClient client({wrap_response(kOtaNetlist)});
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.outcome == Outcome::Pass);
  CHECK(ep.rounds_used == 1);
  CHECK(ep.final_report_passed());
  REQUIRE(ep.final_topology() != nullptr);
  CHECK(ep.final_topology()->blocks.size() == 3);
}

TEST_CASE("run_episode feeds revisions and recovers from violations") {
  Library lib = builtin_library();
  std::string floating =
      ".ports INP=inp INN=inn OUT=out VDD=vdd VSS=vss\n"
      "XDP inp inn n1 out ntail DIFF_PAIR_N\n"
      "XCS other CURRENT_SOURCE_N\n"
      "XML n1 out out MIRROR_LOAD_P\n"
      ".end\n";
  ScriptedClient client({wrap_response(floating), wrap_response(kOtaNetlist)});
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.outcome == Outcome::Pass);
  CHECK(ep.rounds_used == 2);
  REQUIRE(ep.rounds[0].revision.has_value());
  CHECK(ep.rounds[0].revision->text.find("CONN-01") != std::string::npos);
  // the revision became the last user turn of round 2
  CHECK(ep.rounds[1].prompt.messages.back().content == ep.rounds[0].revision->text);
}

TEST_CASE("unparseable responses consume a round") {
  Library lib = builtin_library();
  ScriptedClient client({"I refuse to answer with a netlist.", wrap_response(kOtaNetlist)});
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.outcome == Outcome::Pass);
  CHECK(ep.rounds_used == 2);
  CHECK_FALSE(ep.rounds[0].parsed.ok());
  CHECK_FALSE(ep.rounds[0].report.has_value());
  REQUIRE(ep.rounds[0].revision.has_value());
  CHECK(ep.rounds[0].revision->text.find("fenced code block") != std::string::npos);
}

TEST_CASE("max rounds caps the loop") {
  Library lib = builtin_library();
  std::vector<std::string> bad(3, "still no netlist");
  ScriptedClient client(bad);
  AgentConfig config;
  config.max_rounds = 3;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.outcome == Outcome::FailMaxRounds);
  CHECK(ep.rounds_used == 3);
  CHECK_FALSE(ep.aborted);
}

TEST_CASE("script exhaustion ends the episode without an abort") {
  Library lib = builtin_library();
  ScriptedClient client({"not a netlist"});
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.outcome == Outcome::FailUnparseable);
  CHECK(ep.rounds_used == 1);
  CHECK_FALSE(ep.aborted);
}

TEST_CASE("transport errors abort with a partial transcript") {
  struct FailingClient : ChatClient {
    CompletionResult complete(const CompletionRequest&) override {
      return make_client_error(ClientErrorKind::Transport, "connection reset");
    }
  } client;
  Library lib = builtin_library();
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);
  CHECK(ep.aborted);
  CHECK(ep.abort_reason == "connection reset");
  CHECK(ep.rounds_used == 0);
}

TEST_CASE("episode json round trips") {
  Library lib = builtin_library();
  ScriptedClient client({"nonsense", wrap_response(kOtaNetlist)});
  AgentConfig config;
  config.example_pool = builtin_golden_cases(lib);
  Episode ep = run_episode(ota_task(), client, config, lib);

  std::string json = episode_to_json(ep);
  Episode back = episode_from_json(json, lib);
  CHECK(back.task.id == ep.task.id);
  CHECK(back.task.requirement == ep.task.requirement);
  CHECK(back.outcome == ep.outcome);
  CHECK(back.rounds_used == ep.rounds_used);
  REQUIRE(back.rounds.size() == ep.rounds.size());
  CHECK(back.rounds[0].parsed.ok() == ep.rounds[0].parsed.ok());
  CHECK(back.rounds[1].report->passed == ep.rounds[1].report->passed);
  CHECK(serialize(*back.final_topology()) == serialize(*ep.final_topology()));
  CHECK(back.rounds[0].revision->text == ep.rounds[0].revision->text);

  CHECK_THROWS_AS(episode_from_json("not json", lib), Error);
  CHECK_THROWS_AS(episode_from_json("{}", lib), Error);
}
