#pragma once

#include <optional>
#include <string>
#include <vector>

#include "topoxpert/benchgen.hpp"
#include "topoxpert/checker.hpp"
#include "topoxpert/library.hpp"
#include "topoxpert/llm.hpp"

namespace topoxpert {

struct PromptBundle {
  std::string system;
  std::vector<ChatMessage> messages;  // user/assistant turns, first is user

  size_t total_chars() const;
};

struct Round {
  int index = 1;  // 1-based
  PromptBundle prompt;
  std::string response;
  ParseResult parsed;
  std::optional<CheckReport> report;      // present iff parsed succeeded
  std::optional<RevisionMessage> revision;  // message generated after this round
};

enum class Outcome { Pass, FailMaxRounds, FailUnparseable };
const char* outcome_name(Outcome o);

struct Episode {
  BenchmarkTask task;
  std::vector<Round> rounds;
  Outcome outcome = Outcome::FailMaxRounds;
  int rounds_used = 0;
  bool aborted = false;          // transport-level abort, transcript is partial
  std::string abort_reason;

  const Topology* final_topology() const;  // last successfully parsed round
  bool final_report_passed() const;
};

struct AgentConfig {
  int max_rounds = 10;
  std::vector<GoldenCase> example_pool;
  size_t prompt_budget = 16000;  // characters
  std::string model = "gpt-4o";
  std::optional<uint64_t> seed;
};

// Weighted requirement similarity: stages 3, input signal 2, given-block
// Jaccard 2, circuit type 1, block-budget closeness 1.
double requirement_similarity(const StructureRequirement& a, const StructureRequirement& b);

// Argmax of similarity; ties broken by lowest case id. Throws EmptyPool.
const GoldenCase& select_example(const StructureRequirement& req,
                                 const std::vector<GoldenCase>& pool);

// System text carries the library table and the output grammar; the user turn
// carries the requirement, the in-context example, and the two-step
// instructions. Throws BudgetExceeded.
PromptBundle build_initial_prompt(const StructureRequirement& req, const Library& library,
                                  const GoldenCase& example, size_t prompt_budget = 16000);

// Replays prior user/assistant turns, then the revision as the new user turn.
// On budget pressure drops the oldest middle rounds first, never the initial
// requirement or the latest response.
PromptBundle build_refinement_prompt(const std::vector<Round>& history,
                                     const RevisionMessage& revision,
                                     size_t prompt_budget = 16000);

struct ParsedResponse {
  bool found_netlist = false;
  std::vector<std::string> selection;  // from the "Selected blocks:" line
  ParseResult parse;
};

// Last fenced code region is the netlist; earlier fences are ignored.
ParsedResponse parse_response(const std::string& text, const Library& library);

// Generate -> parse -> annotate -> check -> revise loop, capped at
// config.max_rounds. Unparseable responses consume a round.
Episode run_episode(const BenchmarkTask& task, ChatClient& client, const AgentConfig& config,
                    const Library& library);

std::string episode_to_json(const Episode& episode);
Episode episode_from_json(const std::string& text, const Library& library);

extern const char* const kPromptTemplateVersion;

}  // namespace topoxpert
