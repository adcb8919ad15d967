#include "topoxpert/eval.hpp"

#include <sstream>

#include "topoxpert/error.hpp"
#include "json.hpp"

namespace topoxpert {

MatchResult topologies_equivalent(const Topology& a, const Topology& b, const Library&) {
  MatchResult out;
  CanonicalForm ca = canonicalize(a);
  CanonicalForm cb = canonicalize(b);
  if (!(ca == cb)) return out;

  out.equivalent = true;
  // Compose a's map with the inverse of b's.
  std::unordered_map<std::string, std::string> inv_blocks, inv_nets;
  for (const auto& [orig, canon] : cb.block_map) inv_blocks[canon] = orig;
  for (const auto& [orig, canon] : cb.net_map) inv_nets[canon] = orig;
  out.block_witness.emplace();
  out.net_witness.emplace();
  for (const auto& [orig, canon] : ca.block_map) (*out.block_witness)[orig] = inv_blocks.at(canon);
  for (const auto& [orig, canon] : ca.net_map) {
    auto it = inv_nets.find(canon);
    if (it != inv_nets.end()) (*out.net_witness)[orig] = it->second;
  }
  return out;
}

EvalReport grade_synthetic(const std::vector<Episode>& episodes) {
  EvalReport report;
  for (const auto& ep : episodes) {
    Tally& t = report.per_category[ep.task.category];
    ++t.total;
    ++report.overall.total;
    if (ep.outcome == Outcome::Pass) {
      ++t.passed;
      ++report.overall.passed;
    }
  }
  return report;
}

EvalReport grade_real(const std::vector<GoldenCase>& golden_cases,
                      const std::vector<Episode>& episodes, const Library& library) {
  EvalReport report;
  report.real.emplace();
  for (const auto& gc : golden_cases) {
    const Episode* ep = nullptr;
    for (const auto& e : episodes) {
      if (e.task.id == gc.task.id) {
        ep = &e;
        break;
      }
    }
    if (!ep) throw Error("MissingEpisode", "no episode for golden case " + gc.task.id);
    ++report.real->total;
    const Topology* topo = ep->final_topology();
    bool pass = topo && ep->final_report_passed() &&
                topologies_equivalent(*topo, gc.golden, library).equivalent;
    if (pass) ++report.real->passed;
  }
  return report;
}

std::string format_ratio(int passed, int total) {
  int pct = total > 0 ? (passed * 100) / total : 0;
  std::ostringstream out;
  out << passed << "/" << total << "(" << pct << "%)";
  return out.str();
}

std::string render_report(const EvalReport& report, ReportFormat format) {
  if (format == ReportFormat::Json) {
    nlohmann::json j;
    j["per_category"] = nlohmann::json::object();
    for (const auto& [cat, t] : report.per_category) {
      j["per_category"][task_category_name(cat)] = {{"passed", t.passed}, {"total", t.total}};
    }
    j["overall"] = {{"passed", report.overall.passed}, {"total", report.overall.total}};
    if (report.real) {
      j["real"] = {{"passed", report.real->passed}, {"total", report.real->total}};
    }
    return j.dump(2) + "\n";
  }

  std::ostringstream out;
  out << "Category  Passed/Total\n";
  for (const auto& [cat, t] : report.per_category) {
    out << task_category_name(cat) << "     " << format_ratio(t.passed, t.total) << "\n";
  }
  out << "Average   " << format_ratio(report.overall.passed, report.overall.total) << "\n";
  if (report.real) {
    out << "Real      " << format_ratio(report.real->passed, report.real->total) << "\n";
  }
  return out.str();
}

}  // namespace topoxpert
