#include "topoxpert/checker.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>

#include "topoxpert/error.hpp"
#include "json.hpp"

namespace topoxpert {

namespace {

const std::vector<RuleInfo> kCatalog = {
    {"SEL-01", "The number of amplifying stages does not match the required stage count.",
     "Add or remove transconductor blocks so the stage count matches the requirement."},
    {"SEL-02", "A required given block kind is missing from the design.",
     "Instantiate the required kind and wire it into the circuit."},
    {"SEL-03", "The design uses more blocks than the allowed maximum.",
     "Remove blocks until the total is within the budget."},
    {"SEL-04", "The first-stage input block does not match the required input signal type.",
     "Use a differential pair for differential inputs and a single-ended "
     "transconductor for single-ended inputs."},
    {"SEL-05", "A cascode block's polarity does not match the transconductor it stacks on.",
     "Replace the cascode with the same polarity as the driving transconductor."},
    {"CONN-01", "A current terminal is floating: its net has no opposite-direction "
     "current terminal.",
     "Connect the terminal to a matching current input/output (e.g. a load or a source)."},
    {"CONN-02", "A net carries conflicting current directions without a mirror load "
     "to merge them.",
     "Split the net or merge the currents through a mirror load."},
    {"CONN-03", "A later stage's input is shorted to the primary input.",
     "Drive the later stage from the previous stage's output net instead."},
    {"CONN-04", "There is no continuous signal path from the input port to the output port.",
     "Chain each stage's output into the next stage's input and end at the output port."},
    {"CONN-05", "A two-signal-path block binds both differential halves to the same net.",
     "Bind the p and n halves to distinct nets."},
    {"CONN-06", "A voltage-only terminal is placed on a current net without a "
     "transconductor boundary.",
     "Move the passive to a voltage node (a port or a stage input)."},
};

struct TermRef {
  const BlockInstance* block;
  int term;
  TerminalRole role;
  int cls;
  Polarity pol;
};

struct NetView {
  // Terminals per net, in block order; net iteration is name-sorted.
  std::map<std::string, std::vector<TermRef>> net_terms;
  std::vector<std::pair<const BlockInstance*, const SubcircuitDef*>> blocks;
};

NetView build_view(const AnnotatedTopology& a, const Library& lib) {
  NetView v;
  for (const auto& b : a.topology.blocks) {
    const SubcircuitDef* d = lib.find(b.kind);
    v.blocks.emplace_back(&b, d);
    if (!d) continue;
    for (int t = 0; t < d->arity(); ++t) {
      v.net_terms[b.bindings[t]].push_back(
          {&b, t, d->terminals[t].role, a.class_of(b.id), d->polarity});
    }
  }
  return v;
}

bool is_transconductor_class(int cls) { return cls == 1 || cls == 4; }
bool is_cascode_class(int cls) { return cls == 2 || cls == 5; }

std::vector<std::string> primary_input_nets(const Topology& t) {
  std::vector<std::string> nets;
  if (auto n = t.port_net(PortRole::SignalInPos)) nets.push_back(*n);
  if (auto n = t.port_net(PortRole::SignalInNeg)) nets.push_back(*n);
  return nets;
}

// Transconductor blocks with a voltage input bound to a primary input net.
std::vector<const BlockInstance*> input_stage_blocks(const AnnotatedTopology& a,
                                                     const NetView& v) {
  std::vector<std::string> inputs = primary_input_nets(a.topology);
  std::vector<const BlockInstance*> out;
  for (const auto& [block, def] : v.blocks) {
    if (!def || !is_transconductor_class(a.class_of(block->id))) continue;
    bool on_input = false;
    for (int t = 0; t < def->arity(); ++t) {
      if (def->terminals[t].role != TerminalRole::Voltage) continue;
      if (std::find(inputs.begin(), inputs.end(), block->bindings[t]) != inputs.end()) {
        on_input = true;
      }
    }
    if (on_input) out.push_back(block);
  }
  return out;
}

void add(std::vector<Violation>& out, const CheckOptions& opt, const std::string& rule,
         std::vector<std::string> subjects, std::string detail) {
  if (opt.disabled_rules.count(rule)) return;
  out.push_back({rule, std::move(subjects), std::move(detail), Severity::Error});
}

}  // namespace

const std::vector<RuleInfo>& rule_catalog() { return kCatalog; }

const RuleInfo* rule_info(const std::string& code) {
  for (const auto& r : kCatalog) {
    if (code == r.code) return &r;
  }
  return nullptr;
}

std::vector<Violation> check_selection(const AnnotatedTopology& annotated,
                                       const StructureRequirement& req,
                                       const Library& library, const CheckOptions& options) {
  std::vector<Violation> out;
  NetView view = build_view(annotated, library);
  const Topology& topo = annotated.topology;

  // SEL-01: transconductor blocks are the stages.
  {
    std::vector<std::string> stage_blocks;
    for (const auto& b : topo.blocks) {
      if (is_transconductor_class(annotated.class_of(b.id))) stage_blocks.push_back(b.id);
    }
    if (static_cast<int>(stage_blocks.size()) != req.stages) {
      add(out, options, "SEL-01", stage_blocks,
          "found " + std::to_string(stage_blocks.size()) + " stage(s), required " +
              std::to_string(req.stages));
    }
  }

  // SEL-02: every input and given kind must be present with its multiplicity.
  {
    std::map<std::string, int> required;
    for (const auto& k : req.input_blocks) required[k]++;
    for (const auto& k : req.given_blocks) required[k]++;
    if (req.feedback == Feedback::Miller) {
      // Miller compensation needs a capacitor; folded into the presence rule.
      bool has_cap = false;
      for (const auto& b : topo.blocks) has_cap |= annotated.class_of(b.id) == 10;
      if (!has_cap && !required.count("CAP")) required["CAP"] = 1;
    }
    std::map<std::string, int> have;
    for (const auto& b : topo.blocks) have[b.kind]++;
    for (const auto& [kind, count] : required) {
      if (have[kind] < count) {
        add(out, options, "SEL-02", {kind},
            "requirement asks for " + std::to_string(count) + " x " + kind + ", found " +
                std::to_string(have[kind]));
      }
    }
  }

  // SEL-03: block budget.
  if (static_cast<int>(topo.blocks.size()) > req.max_blocks) {
    add(out, options, "SEL-03", {},
        "design uses " + std::to_string(topo.blocks.size()) + " blocks, maximum is " +
            std::to_string(req.max_blocks));
  }

  // SEL-04: first-stage transconductor arity vs. required input signal.
  for (const BlockInstance* b : input_stage_blocks(annotated, view)) {
    int cls = annotated.class_of(b->id);
    if (req.input_signal == InputSignal::Differential && cls == 4) {
      add(out, options, "SEL-04", {b->id},
          b->id + " (" + b->kind + ") is single-ended but the input signal is differential");
    }
    if (req.input_signal == InputSignal::SingleEnded && cls == 1) {
      add(out, options, "SEL-04", {b->id},
          b->id + " (" + b->kind + ") is differential but the input signal is single-ended");
    }
  }

  // SEL-05: cascode polarity vs. the transconductor it stacks on.
  for (const auto& [block, def] : view.blocks) {
    if (!def || !is_cascode_class(annotated.class_of(block->id))) continue;
    for (int t = 0; t < def->arity(); ++t) {
      if (def->terminals[t].role != TerminalRole::CurrentIn) continue;
      for (const TermRef& other : view.net_terms.at(block->bindings[t])) {
        if (other.block == block) continue;
        if (!is_transconductor_class(other.cls)) continue;
        if (other.role != TerminalRole::CurrentOut) continue;
        if (other.pol != def->polarity) {
          add(out, options, "SEL-05", {block->id, other.block->id},
              block->id + " (" + block->kind + ") stacks on " + other.block->id + " (" +
                  other.block->kind + ") of opposite polarity");
        }
      }
    }
  }

  return out;
}

std::vector<Violation> check_connection(const AnnotatedTopology& annotated,
                                        const Library& library, const CheckOptions& options) {
  std::vector<Violation> out;
  NetView view = build_view(annotated, library);
  const Topology& topo = annotated.topology;

  // CONN-01: current terminals need an opposite-direction partner on the net.
  for (const auto& [net, terms] : view.net_terms) {
    int n_in = 0, n_out = 0;
    for (const TermRef& t : terms) {
      n_in += t.role == TerminalRole::CurrentIn;
      n_out += t.role == TerminalRole::CurrentOut;
    }
    if (n_out > 0 && n_in == 0) {
      std::vector<std::string> subjects = {net};
      for (const TermRef& t : terms) {
        if (t.role == TerminalRole::CurrentOut) subjects.push_back(t.block->id);
      }
      add(out, options, "CONN-01", subjects,
          "net " + net + " has current output(s) but no current input");
    }
    if (n_in > 0 && n_out == 0) {
      std::vector<std::string> subjects = {net};
      for (const TermRef& t : terms) {
        if (t.role == TerminalRole::CurrentIn) subjects.push_back(t.block->id);
      }
      add(out, options, "CONN-01", subjects,
          "net " + net + " has current input(s) but no current output");
    }
  }

  // CONN-02: several same-direction current terminals with no opposite side,
  // unless a mirror load (class 3) sits on the net to merge currents.
  for (const auto& [net, terms] : view.net_terms) {
    int n_in = 0, n_out = 0;
    bool mirror_adjacent = false;
    for (const TermRef& t : terms) {
      n_in += t.role == TerminalRole::CurrentIn;
      n_out += t.role == TerminalRole::CurrentOut;
      mirror_adjacent |= t.cls == 3;
    }
    if (mirror_adjacent) continue;
    if ((n_out >= 2 && n_in == 0) || (n_in >= 2 && n_out == 0)) {
      std::vector<std::string> subjects = {net};
      for (const TermRef& t : terms) {
        if (t.role != TerminalRole::Voltage) subjects.push_back(t.block->id);
      }
      add(out, options, "CONN-02", subjects,
          "net " + net + " merges " + std::to_string(std::max(n_in, n_out)) +
              " same-direction current terminals without a mirror load");
    }
  }

  // CONN-03: at most one transconductor may read the primary input.
  {
    std::vector<const BlockInstance*> on_input = input_stage_blocks(annotated, view);
    if (on_input.size() > 1) {
      std::vector<std::string> subjects;
      for (const auto* b : on_input) subjects.push_back(b->id);
      std::sort(subjects.begin(), subjects.end());
      for (const auto& n : primary_input_nets(topo)) subjects.push_back(n);
      add(out, options, "CONN-03", subjects,
          "multiple stages read the primary input directly; later stages must be "
          "driven by the previous stage output");
    }
  }

  // CONN-04: reachability from the input port to the output port over the
  // role-oriented signal graph.
  {
    auto inp = topo.port_net(PortRole::SignalInPos);
    if (!inp) inp = topo.port_net(PortRole::SignalInNeg);
    auto outp = topo.port_net(PortRole::SignalOut);
    if (inp && outp) {
      std::map<std::string, std::vector<std::string>> next;
      for (const auto& [block, def] : view.blocks) {
        if (!def) continue;
        int cls = annotated.class_of(block->id);
        std::vector<std::string> ins, outs;
        for (int t = 0; t < def->arity(); ++t) {
          TerminalRole r = def->terminals[t].role;
          const std::string& net = block->bindings[t];
          switch (cls) {
            case 1: case 4:  // transconductor: V in, I out
              if (r == TerminalRole::Voltage) ins.push_back(net);
              if (r == TerminalRole::CurrentOut) outs.push_back(net);
              break;
            case 2: case 5:  // cascode: I in, I out
              if (r == TerminalRole::CurrentIn) ins.push_back(net);
              if (r == TerminalRole::CurrentOut) outs.push_back(net);
              break;
            case 3:  // mirror load: current inputs drive the mirrored node
              if (r == TerminalRole::CurrentIn) ins.push_back(net);
              if (r == TerminalRole::Voltage) outs.push_back(net);
              break;
            case 8:  // follower: V in, V out
              if (t == 0) ins.push_back(net);
              if (t == 1) outs.push_back(net);
              break;
            case 9:  // resistor passes signal both ways
              ins.push_back(net);
              outs.push_back(net);
              break;
            default:
              break;  // loads, sources, caps add no directed edge
          }
        }
        for (const auto& i : ins) {
          for (const auto& o : outs) {
            if (i != o) next[i].push_back(o);
          }
        }
      }
      std::set<std::string> seen;
      std::queue<std::string> q;
      q.push(*inp);
      seen.insert(*inp);
      while (!q.empty()) {
        std::string cur = q.front();
        q.pop();
        for (const auto& n : next[cur]) {
          if (seen.insert(n).second) q.push(n);
        }
      }
      if (!seen.count(*outp)) {
        add(out, options, "CONN-04", {*inp, *outp},
            "no signal path from input net " + *inp + " to output net " + *outp);
      }
    }
  }

  // CONN-05: p/n halves of a two-signal-path block must use distinct nets.
  for (const auto& [block, def] : view.blocks) {
    if (!def || def->arity_class != PathArity::TwoSignalPath) continue;
    for (int i = 0; i < def->arity(); ++i) {
      const std::string& ni = def->terminals[i].name;
      if (ni.empty() || ni.back() != 'p') continue;
      std::string counterpart = ni.substr(0, ni.size() - 1) + "n";
      for (int j = 0; j < def->arity(); ++j) {
        if (def->terminals[j].name != counterpart) continue;
        if (block->bindings[i] == block->bindings[j]) {
          add(out, options, "CONN-05", {block->id, block->bindings[i]},
              block->id + " binds " + ni + " and " + counterpart + " to the same net " +
                  block->bindings[i]);
        }
      }
    }
  }

  // CONN-06: passive voltage terminals do not belong on internal current nets
  // unless a transconductor/follower input or a mirror load bounds the net.
  {
    std::set<std::string> port_nets;
    for (const auto& p : topo.ports) port_nets.insert(p.net);
    for (const auto& [net, terms] : view.net_terms) {
      bool has_current = false, has_boundary = false, mirror_adjacent = false;
      for (const TermRef& t : terms) {
        has_current |= t.role != TerminalRole::Voltage;
        mirror_adjacent |= t.cls == 3;
        if (t.role == TerminalRole::Voltage &&
            (is_transconductor_class(t.cls) || t.cls == 8)) {
          has_boundary = true;
        }
      }
      if (!has_current || has_boundary || mirror_adjacent || port_nets.count(net)) continue;
      for (const TermRef& t : terms) {
        if (t.role == TerminalRole::Voltage && (t.cls == 9 || t.cls == 10)) {
          add(out, options, "CONN-06", {net, t.block->id},
              t.block->id + " (" + t.block->kind + ") places a voltage terminal on "
              "current net " + net);
        }
      }
    }
  }

  return out;
}

CheckReport check(const AnnotatedTopology& annotated, const StructureRequirement& req,
                  const Library& library, const CheckOptions& options) {
  CheckReport report;
  report.violations = check_selection(annotated, req, library, options);
  auto conn = check_connection(annotated, library, options);
  report.violations.insert(report.violations.end(), conn.begin(), conn.end());
  report.passed = std::none_of(report.violations.begin(), report.violations.end(),
                               [](const Violation& v) { return v.severity == Severity::Error; });
  return report;
}

CheckReport check_connection_only(const AnnotatedTopology& annotated, const Library& library,
                                  const CheckOptions& options) {
  CheckReport report;
  report.violations = check_connection(annotated, library, options);
  report.passed = std::none_of(report.violations.begin(), report.violations.end(),
                               [](const Violation& v) { return v.severity == Severity::Error; });
  return report;
}

RevisionMessage render_revision(const CheckReport& report,
                                const std::vector<RevisionMessage>& history, int round) {
  if (report.passed) {
    throw Error("EmptyReport", "render_revision called on a passing report");
  }
  constexpr size_t kMaxListed = 5;
  std::ostringstream out;
  out << "The proofreading checker found " << report.violations.size()
      << " issue(s) in your design:\n";
  size_t listed = 0;
  for (const Violation& v : report.violations) {
    if (listed == kMaxListed) {
      out << "(" << report.violations.size() - kMaxListed << " more issue(s) not shown)\n";
      break;
    }
    const RuleInfo* info = rule_info(v.rule);
    std::string subjects;
    for (const auto& s : v.subjects) {
      if (!subjects.empty()) subjects += ", ";
      subjects += s;
    }
    std::string key = v.rule + " [" + subjects + "]";
    out << (listed + 1) << ". " << key << " — "
        << (info ? info->statement : "(unknown rule)") << " " << v.detail << ". Fix: "
        << (info ? info->suggestion : "") ;
    bool repeated = false;
    for (const auto& prior : history) {
      if (prior.text.find(key) != std::string::npos) repeated = true;
    }
    if (repeated) out << " (repeated mistake: you made this exact error in an earlier round)";
    out << "\n";
    ++listed;
  }
  out << "Revise the topology to fix these issues. Reply with Step 1 (a line starting "
         "\"Selected blocks:\") and Step 2 (the full corrected netlist in a fenced code "
         "block).\n";
  return {out.str(), round};
}

std::string report_to_json(const CheckReport& report) {
  nlohmann::json j;
  j["passed"] = report.passed;
  j["violations"] = nlohmann::json::array();
  for (const Violation& v : report.violations) {
    j["violations"].push_back({
        {"rule", v.rule},
        {"subjects", v.subjects},
        {"detail", v.detail},
        {"severity", v.severity == Severity::Error ? "error" : "warning"},
    });
  }
  return j.dump(2);
}

}  // namespace topoxpert
