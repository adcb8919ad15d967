#include "topoxpert/agent.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "topoxpert/error.hpp"
#include "json.hpp"

namespace topoxpert {

namespace {

using nlohmann::json;

std::string substitute(std::string tmpl,
                       const std::vector<std::pair<std::string, std::string>>& vars) {
  for (const auto& [name, value] : vars) {
    std::string token = "{{" + name + "}}";
    size_t pos;
    while ((pos = tmpl.find(token)) != std::string::npos) {
      tmpl.replace(pos, token.size(), value);
    }
  }
  return tmpl;
}

const char* const kSystemTemplate =
    "You are an analog circuit topology designer. You design subcircuit-level "
    "SPICE netlists built from a fixed library of subcircuit blocks.\n"
    "\n"
    "Subcircuit library (name | polarity | terminals name:type, where I_IN is a "
    "current input, I_OUT a current output, V a voltage terminal):\n"
    "{{library_table}}\n"
    "Output netlist grammar (follow it exactly):\n"
    "  file      := title? portline blockline* \".end\"\n"
    "  title     := \"*\" free text\n"
    "  portline  := \".ports\" (ROLE \"=\" IDENT)+   ; ROLE is INP, INN, OUT, VDD, VSS or BIAS\n"
    "  blockline := XIDENT IDENT+ KINDNAME          ; nets first, kind last, SPICE order\n"
    "Declare VDD and VSS ports in every netlist. Block ids start with 'X'.\n";

const char* const kInitialUserTemplate =
    "Design an analog circuit topology for this requirement:\n"
    "{{requirement}}\n"
    "Here is the most similar solved design task as an example:\n"
    "{{example}}\n"
    "Work in two steps.\n"
    "Step 1: Block Selection. Choose the subcircuit blocks from the library that the "
    "requirement needs. Write them on one line starting with \"Selected blocks:\".\n"
    "Step 2: Block Connection. Connect the selected blocks and write the complete "
    "netlist in a fenced code block (```).\n";

std::string library_table(const Library& library) {
  std::ostringstream out;
  for (const auto& d : library.defs()) {
    out << "  " << d.name << " | ";
    switch (d.polarity) {
      case Polarity::N: out << "N"; break;
      case Polarity::P: out << "P"; break;
      case Polarity::None: out << "-"; break;
    }
    out << " |";
    for (const auto& t : d.terminals) {
      out << " " << t.name << ":" << terminal_role_name(t.role);
    }
    out << "\n";
  }
  return out.str();
}

std::string example_text(const GoldenCase& example) {
  std::ostringstream out;
  out << "Example requirement:\n"
      << requirement_to_text(example.task.requirement) << "Example netlist:\n```\n"
      << serialize(example.golden) << "```\n";
  return out.str();
}

}  // namespace

const char* const kPromptTemplateVersion = "prompt-v1";

size_t PromptBundle::total_chars() const {
  size_t n = system.size();
  for (const auto& m : messages) n += m.content.size();
  return n;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Pass: return "pass";
    case Outcome::FailMaxRounds: return "fail_max_rounds";
    case Outcome::FailUnparseable: return "fail_unparseable";
  }
  return "?";
}

const Topology* Episode::final_topology() const {
  for (auto it = rounds.rbegin(); it != rounds.rend(); ++it) {
    if (it->parsed.ok()) return &*it->parsed.topology;
  }
  return nullptr;
}

bool Episode::final_report_passed() const {
  return !rounds.empty() && rounds.back().report && rounds.back().report->passed;
}

double requirement_similarity(const StructureRequirement& a, const StructureRequirement& b) {
  double score = 0.0;
  if (a.stages == b.stages) score += 3.0;
  if (a.input_signal == b.input_signal) score += 2.0;
  std::set<std::string> ga(a.given_blocks.begin(), a.given_blocks.end());
  std::set<std::string> gb(b.given_blocks.begin(), b.given_blocks.end());
  if (ga.empty() && gb.empty()) {
    score += 2.0;
  } else {
    std::vector<std::string> inter, uni;
    std::set_intersection(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(inter));
    std::set_union(ga.begin(), ga.end(), gb.begin(), gb.end(), std::back_inserter(uni));
    score += 2.0 * static_cast<double>(inter.size()) / static_cast<double>(uni.size());
  }
  if (a.circuit_type == b.circuit_type) score += 1.0;
  score += 1.0 - std::abs(a.max_blocks - b.max_blocks) / 13.0;
  return score;
}

const GoldenCase& select_example(const StructureRequirement& req,
                                 const std::vector<GoldenCase>& pool) {
  if (pool.empty()) throw Error("EmptyPool", "no in-context examples available");
  const GoldenCase* best = &pool[0];
  double best_score = requirement_similarity(req, pool[0].task.requirement);
  for (size_t i = 1; i < pool.size(); ++i) {
    double s = requirement_similarity(req, pool[i].task.requirement);
    if (s > best_score || (s == best_score && pool[i].task.id < best->task.id)) {
      best = &pool[i];
      best_score = s;
    }
  }
  return *best;
}

PromptBundle build_initial_prompt(const StructureRequirement& req, const Library& library,
                                  const GoldenCase& example, size_t prompt_budget) {
  PromptBundle bundle;
  bundle.system = substitute(kSystemTemplate, {{"library_table", library_table(library)}});
  bundle.messages.push_back(
      {"user", substitute(kInitialUserTemplate, {{"requirement", requirement_to_text(req)},
                                                 {"example", example_text(example)}})});
  if (bundle.total_chars() > prompt_budget) {
    throw Error("BudgetExceeded", "initial prompt exceeds the character budget");
  }
  return bundle;
}

PromptBundle build_refinement_prompt(const std::vector<Round>& history,
                                     const RevisionMessage& revision, size_t prompt_budget) {
  if (history.empty()) throw Error("BudgetExceeded", "refinement prompt needs history");
  if (revision.text.empty()) throw Error("EmptyReport", "revision message is empty");

  PromptBundle bundle;
  bundle.system = history.front().prompt.system;

  // Each round contributes its newest user turn plus the model's response.
  struct Pair {
    ChatMessage user;
    ChatMessage assistant;
  };
  std::vector<Pair> pairs;
  for (const Round& r : history) {
    pairs.push_back({r.prompt.messages.back(), {"assistant", r.response}});
  }

  // Drop the oldest middle rounds first when over budget; keep the initial
  // requirement and the latest response.
  std::vector<bool> kept(pairs.size(), true);
  auto current_size = [&]() {
    size_t n = bundle.system.size() + revision.text.size();
    for (size_t i = 0; i < pairs.size(); ++i) {
      if (kept[i]) n += pairs[i].user.content.size() + pairs[i].assistant.content.size();
    }
    return n;
  };
  for (size_t i = 1; i + 1 < pairs.size() && current_size() > prompt_budget; ++i) {
    kept[i] = false;
  }
  if (current_size() > prompt_budget) {
    throw Error("BudgetExceeded", "even the minimal refinement frame exceeds the budget");
  }
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (!kept[i]) continue;
    bundle.messages.push_back(pairs[i].user);
    bundle.messages.push_back(pairs[i].assistant);
  }
  bundle.messages.push_back({"user", revision.text});
  return bundle;
}

ParsedResponse parse_response(const std::string& text, const Library& library) {
  ParsedResponse out;

  // "Selected blocks:" line.
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    size_t pos = line.find("Selected blocks:");
    if (pos == std::string::npos) continue;
    std::string rest = line.substr(pos + std::string("Selected blocks:").size());
    std::string token;
    out.selection.clear();
    for (char c : rest) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') {
        token.push_back(c);
      } else if (!token.empty()) {
        out.selection.push_back(token);
        token.clear();
      }
    }
    if (!token.empty()) out.selection.push_back(token);
  }

  // Last complete fenced region wins.
  std::vector<std::string> fences;
  {
    std::istringstream in2(text);
    std::string cur;
    bool open = false;
    while (std::getline(in2, line)) {
      std::string t = line;
      while (!t.empty() && (t.back() == '\r' || t.back() == ' ')) t.pop_back();
      size_t first = t.find_first_not_of(" \t");
      bool fence = first != std::string::npos && t.compare(first, 3, "```") == 0;
      if (fence) {
        if (open) {
          fences.push_back(cur);
          cur.clear();
        }
        open = !open;
        continue;
      }
      if (open) cur += line + "\n";
    }
  }

  if (fences.empty()) {
    out.found_netlist = false;
    out.parse.diagnostics.push_back(
        {1, 1, "no fenced netlist found in the response", Severity::Error});
    return out;
  }
  out.found_netlist = true;
  out.parse = parse_netlist(fences.back(), library);
  return out;
}

Episode run_episode(const BenchmarkTask& task, ChatClient& client, const AgentConfig& config,
                    const Library& library) {
  if (config.max_rounds < 1) throw Error("BudgetExceeded", "max_rounds must be >= 1");

  Episode ep;
  ep.task = task;
  std::vector<RevisionMessage> revisions;

  const GoldenCase& example = select_example(task.requirement, config.example_pool);
  PromptBundle prompt = build_initial_prompt(task.requirement, library, example,
                                             config.prompt_budget);

  for (int round_idx = 1; round_idx <= config.max_rounds; ++round_idx) {
    CompletionRequest request;
    request.model = config.model;
    request.seed = config.seed;
    request.messages.push_back({"system", prompt.system});
    for (const auto& m : prompt.messages) request.messages.push_back(m);

    CompletionResult result = client.complete(request);
    if (std::holds_alternative<ClientError>(result)) {
      const ClientError& err = std::get<ClientError>(result);
      ep.outcome = Outcome::FailUnparseable;
      if (err.kind != ClientErrorKind::ScriptExhausted) {
        ep.aborted = true;
        ep.abort_reason = err.detail;
      }
      break;
    }

    Round round;
    round.index = round_idx;
    round.prompt = prompt;
    round.response = std::get<std::string>(result);

    ParsedResponse parsed = parse_response(round.response, library);
    round.parsed = parsed.parse;

    RevisionMessage revision;
    if (parsed.parse.ok()) {
      AnnotatedTopology annotated = annotate(*parsed.parse.topology, library);
      round.report = check(annotated, task.requirement, library);
      if (round.report->passed) {
        ep.rounds.push_back(std::move(round));
        ep.outcome = Outcome::Pass;
        break;
      }
      revision = render_revision(*round.report, revisions, round_idx);
    } else {
      std::ostringstream msg;
      msg << "Your last response could not be parsed as a netlist";
      if (!parsed.found_netlist) {
        msg << " (no fenced code block was found)";
      } else {
        msg << ":";
        for (const auto& d : parsed.parse.diagnostics) {
          msg << "\n  line " << d.line << ": " << d.message;
        }
      }
      msg << "\nReply again with Step 1 (\"Selected blocks:\") and Step 2 (the complete "
             "netlist in a fenced code block, using the .ports / block / .end grammar).";
      revision = {msg.str(), round_idx};
    }

    round.revision = revision;
    revisions.push_back(revision);
    ep.rounds.push_back(std::move(round));

    if (round_idx == config.max_rounds) {
      ep.outcome = Outcome::FailMaxRounds;
      break;
    }
    prompt = build_refinement_prompt(ep.rounds, revision, config.prompt_budget);
  }

  ep.rounds_used = static_cast<int>(ep.rounds.size());
  return ep;
}

// ---------------------------------------------------------------------------
// Episode serialization (full transcript for audit).

namespace {

json report_to_json_obj(const CheckReport& r) {
  json j;
  j["passed"] = r.passed;
  j["violations"] = json::array();
  for (const auto& v : r.violations) {
    j["violations"].push_back({{"rule", v.rule},
                               {"subjects", v.subjects},
                               {"detail", v.detail},
                               {"severity", v.severity == Severity::Error ? "error" : "warning"}});
  }
  return j;
}

CheckReport report_from_json_obj(const json& j) {
  CheckReport r;
  r.passed = j.at("passed").get<bool>();
  for (const auto& vj : j.at("violations")) {
    Violation v;
    v.rule = vj.at("rule").get<std::string>();
    v.subjects = vj.at("subjects").get<std::vector<std::string>>();
    v.detail = vj.at("detail").get<std::string>();
    v.severity =
        vj.at("severity").get<std::string>() == "warning" ? Severity::Warning : Severity::Error;
    r.violations.push_back(std::move(v));
  }
  return r;
}

}  // namespace

std::string episode_to_json(const Episode& episode) {
  json j;
  j["task"] = {{"id", episode.task.id},
               {"category", task_category_name(episode.task.category)}};
  to_json(j["task"]["requirement"], episode.task.requirement);
  j["outcome"] = outcome_name(episode.outcome);
  j["rounds_used"] = episode.rounds_used;
  j["aborted"] = episode.aborted;
  if (episode.aborted) j["abort_reason"] = episode.abort_reason;
  j["prompt_template_version"] = kPromptTemplateVersion;
  j["rounds"] = json::array();
  for (const auto& r : episode.rounds) {
    json rj;
    rj["index"] = r.index;
    rj["prompt"]["system"] = r.prompt.system;
    rj["prompt"]["messages"] = json::array();
    for (const auto& m : r.prompt.messages) {
      rj["prompt"]["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    rj["response"] = r.response;
    rj["parsed_ok"] = r.parsed.ok();
    if (r.parsed.ok()) rj["parsed_netlist"] = serialize(*r.parsed.topology);
    rj["diagnostics"] = json::array();
    for (const auto& d : r.parsed.diagnostics) {
      rj["diagnostics"].push_back({{"line", d.line},
                                   {"column", d.column},
                                   {"message", d.message},
                                   {"severity", d.severity == Severity::Error ? "error" : "warning"}});
    }
    if (r.report) rj["report"] = report_to_json_obj(*r.report);
    if (r.revision) rj["revision"] = {{"text", r.revision->text}, {"round", r.revision->round}};
    j["rounds"].push_back(std::move(rj));
  }
  return j.dump(2);
}

Episode episode_from_json(const std::string& text, const Library& library) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error("SchemaError", std::string("bad episode JSON: ") + e.what());
  }
  Episode ep;
  try {
    ep.task.id = j.at("task").at("id").get<std::string>();
    auto cat = task_category_from(j.at("task").at("category").get<std::string>());
    if (!cat) throw Error("SchemaError", "bad category in episode");
    ep.task.category = *cat;
    from_json(j.at("task").at("requirement"), ep.task.requirement);
    std::string oc = j.at("outcome").get<std::string>();
    if (oc == "pass") {
      ep.outcome = Outcome::Pass;
    } else if (oc == "fail_unparseable") {
      ep.outcome = Outcome::FailUnparseable;
    } else {
      ep.outcome = Outcome::FailMaxRounds;
    }
    ep.rounds_used = j.at("rounds_used").get<int>();
    ep.aborted = j.value("aborted", false);
    ep.abort_reason = j.value("abort_reason", "");
    for (const auto& rj : j.at("rounds")) {
      Round r;
      r.index = rj.at("index").get<int>();
      r.prompt.system = rj.at("prompt").at("system").get<std::string>();
      for (const auto& mj : rj.at("prompt").at("messages")) {
        r.prompt.messages.push_back(
            {mj.at("role").get<std::string>(), mj.at("content").get<std::string>()});
      }
      r.response = rj.at("response").get<std::string>();
      if (rj.value("parsed_ok", false)) {
        r.parsed = parse_netlist(rj.at("parsed_netlist").get<std::string>(), library);
      } else {
        for (const auto& dj : rj.at("diagnostics")) {
          r.parsed.diagnostics.push_back(
              {dj.at("line").get<int>(), dj.at("column").get<int>(),
               dj.at("message").get<std::string>(),
               dj.at("severity").get<std::string>() == "warning" ? Severity::Warning
                                                                 : Severity::Error});
        }
      }
      if (rj.contains("report")) r.report = report_from_json_obj(rj.at("report"));
      if (rj.contains("revision")) {
        r.revision = RevisionMessage{rj.at("revision").at("text").get<std::string>(),
                                     rj.at("revision").at("round").get<int>()};
      }
      ep.rounds.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error("SchemaError", std::string("bad episode JSON: ") + e.what());
  }
  return ep;
}

}  // namespace topoxpert
