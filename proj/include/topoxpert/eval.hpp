#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "topoxpert/agent.hpp"
#include "topoxpert/benchgen.hpp"
#include "topoxpert/library.hpp"
#include "topoxpert/netlist.hpp"

namespace topoxpert {

struct MatchResult {
  bool equivalent = false;
  // Present iff equivalent: block id -> block id and net -> net from a to b.
  std::optional<std::map<std::string, std::string>> block_witness;
  std::optional<std::map<std::string, std::string>> net_witness;
};

// Kind- and port-role-preserving bijection test via canonical-form equality.
MatchResult topologies_equivalent(const Topology& a, const Topology& b, const Library& library);

struct Tally {
  int passed = 0;
  int total = 0;
};

struct EvalReport {
  std::map<TaskCategory, Tally> per_category;
  Tally overall;
  std::optional<Tally> real;
};

// Pass = episode outcome Pass; aggregates per category and overall.
EvalReport grade_synthetic(const std::vector<Episode>& episodes);

// Pass = final parsed topology equivalent to the golden netlist AND the final
// check passed. Throws MissingEpisode when a golden case has no episode.
EvalReport grade_real(const std::vector<GoldenCase>& golden_cases,
                      const std::vector<Episode>& episodes, const Library& library);

// "16/20(80%)" — floor-rounded percent.
std::string format_ratio(int passed, int total);

enum class ReportFormat { Text, Json };
std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace topoxpert
