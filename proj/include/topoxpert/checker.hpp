#pragma once

#include <set>
#include <string>
#include <vector>

#include "topoxpert/library.hpp"
#include "topoxpert/requirement.hpp"

namespace topoxpert {

// Closed rule catalog.
//   SEL-01 stage-count mismatch        SEL-02 required given block absent
//   SEL-03 block budget exceeded       SEL-04 input block arity mismatch
//   SEL-05 cascode polarity mismatch
//   CONN-01 floating current terminal  CONN-02 current-direction conflict
//   CONN-03 stage-input shorting       CONN-04 signal-path discontinuity
//   CONN-05 differential symmetry break CONN-06 voltage/current role clash
struct RuleInfo {
  const char* code;
  const char* statement;
  const char* suggestion;
};

const RuleInfo* rule_info(const std::string& code);
const std::vector<RuleInfo>& rule_catalog();

struct Violation {
  std::string rule;
  std::vector<std::string> subjects;  // block ids and/or net names
  std::string detail;
  Severity severity = Severity::Error;
};

struct CheckReport {
  std::vector<Violation> violations;
  bool passed = true;  // true iff no Error-severity violations
};

struct RevisionMessage {
  std::string text;
  int round = 1;
};

struct CheckOptions {
  std::set<std::string> disabled_rules;
};

std::vector<Violation> check_selection(const AnnotatedTopology& annotated,
                                       const StructureRequirement& req,
                                       const Library& library,
                                       const CheckOptions& options = {});

std::vector<Violation> check_connection(const AnnotatedTopology& annotated,
                                        const Library& library,
                                        const CheckOptions& options = {});

// Selection violations first, then connection violations, catalog order.
CheckReport check(const AnnotatedTopology& annotated, const StructureRequirement& req,
                  const Library& library, const CheckOptions& options = {});

// Connection rules only; used when no requirement is supplied.
CheckReport check_connection_only(const AnnotatedTopology& annotated, const Library& library,
                                  const CheckOptions& options = {});

// Throws EmptyReport when called on a passing report. Lists at most 5
// violations per round; flags rule+subject combinations already present in
// the history as repeated mistakes.
RevisionMessage render_revision(const CheckReport& report,
                                const std::vector<RevisionMessage>& history, int round);

std::string report_to_json(const CheckReport& report);

}  // namespace topoxpert
