#include "topoxpert/netlist.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <sstream>

#include "topoxpert/library.hpp"

namespace topoxpert {

namespace {

constexpr std::array<PortRole, 6> kRoleOrder = {
    PortRole::SignalInPos, PortRole::SignalInNeg, PortRole::SignalOut,
    PortRole::Vdd,         PortRole::Vss,         PortRole::Bias,
};

struct Token {
  std::string text;
  int column;  // 1-based
};

std::vector<Token> tokenize(const std::string& line) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view source) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : source) {
    if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      lines.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) {
    if (cur.back() == '\r') cur.pop_back();
    lines.push_back(cur);
  }
  return lines;
}

}  // namespace

const char* port_role_name(PortRole role) {
  switch (role) {
    case PortRole::SignalInPos: return "INP";
    case PortRole::SignalInNeg: return "INN";
    case PortRole::SignalOut: return "OUT";
    case PortRole::Vdd: return "VDD";
    case PortRole::Vss: return "VSS";
    case PortRole::Bias: return "BIAS";
  }
  return "?";
}

std::optional<PortRole> port_role_from(std::string_view token) {
  for (PortRole r : kRoleOrder) {
    if (token == port_role_name(r)) return r;
  }
  return std::nullopt;
}

bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

std::optional<std::string> Topology::port_net(PortRole role) const {
  for (const auto& p : ports) {
    if (p.role == role) return p.net;
  }
  return std::nullopt;
}

std::vector<std::string> Topology::bias_nets() const {
  std::vector<std::string> out;
  for (const auto& p : ports) {
    if (p.role == PortRole::Bias) out.push_back(p.net);
  }
  return out;
}

std::set<std::string> Topology::nets() const {
  std::set<std::string> out;
  for (const auto& b : blocks) {
    for (const auto& n : b.bindings) out.insert(n);
  }
  for (const auto& p : ports) out.insert(p.net);
  return out;
}

const BlockInstance* Topology::find_block(const std::string& id) const {
  for (const auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

ParseResult parse_netlist(std::string_view source, const Library& library) {
  ParseResult result;
  auto& diags = result.diagnostics;
  auto error = [&](int line, int col, const std::string& msg) {
    diags.push_back({line, col, msg, Severity::Error});
  };

  Topology topo;
  std::vector<std::string> lines = split_lines(source);

  bool seen_ports = false;
  bool seen_end = false;
  int ports_line = 0;
  std::set<std::string> block_ids;
  std::map<PortRole, int> role_counts;
  bool first_content_line = true;

  for (size_t li = 0; li < lines.size(); ++li) {
    const int lineno = static_cast<int>(li) + 1;
    const std::string& line = lines[li];
    std::string trimmed = line;
    while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
      trimmed.pop_back();
    if (trimmed.empty()) continue;

    if (trimmed[0] == '*') {
      // Title if it is the first content line, otherwise a plain comment.
      if (first_content_line) {
        std::string t = trimmed.substr(1);
        size_t pos = t.find_first_not_of(" \t");
        topo.title = (pos == std::string::npos) ? "" : t.substr(pos);
        first_content_line = false;
      }
      continue;
    }
    first_content_line = false;

    if (seen_end) {
      error(lineno, 1, "content after .end");
      continue;
    }

    std::vector<Token> toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string& head = toks[0].text;

    if (head == ".end") {
      if (toks.size() > 1) error(lineno, toks[1].column, "unexpected token after .end");
      seen_end = true;
      continue;
    }

    if (head == ".ports") {
      if (seen_ports) {
        error(lineno, toks[0].column, "duplicate .ports line");
        continue;
      }
      seen_ports = true;
      ports_line = lineno;
      if (toks.size() == 1) {
        error(lineno, toks[0].column, "empty .ports line");
        continue;
      }
      size_t i = 1;
      while (i < toks.size()) {
        std::string role_text;
        std::string net_text;
        int col = toks[i].column;
        size_t eq = toks[i].text.find('=');
        if (eq != std::string::npos) {
          role_text = toks[i].text.substr(0, eq);
          net_text = toks[i].text.substr(eq + 1);
          ++i;
        } else if (i + 1 < toks.size() && toks[i + 1].text.find('=') == std::string::npos) {
          role_text = toks[i].text;
          net_text = toks[i + 1].text;
          i += 2;
        } else {
          error(lineno, col, "malformed port declaration '" + toks[i].text + "'");
          ++i;
          continue;
        }
        auto role = port_role_from(role_text);
        if (!role) {
          error(lineno, col, "unknown port role '" + role_text + "'");
          continue;
        }
        if (!is_identifier(net_text)) {
          error(lineno, col, "invalid net identifier '" + net_text + "'");
          continue;
        }
        if (*role != PortRole::Bias && role_counts[*role] > 0) {
          error(lineno, col, std::string("duplicate port role ") + port_role_name(*role));
          continue;
        }
        role_counts[*role]++;
        topo.ports.push_back({*role, net_text});
      }
      continue;
    }

    if (head[0] == '.') {
      error(lineno, toks[0].column, "unknown directive '" + head + "'");
      continue;
    }

    // Block line: XIDENT IDENT+ KINDNAME.
    if (!seen_ports) {
      error(lineno, toks[0].column, "block line before .ports");
      // fall through and still try to parse it, so later errors are reported
    }
    if (head[0] != 'X' || !is_identifier(head)) {
      error(lineno, toks[0].column,
            "block id must be an identifier starting with 'X', got '" + head + "'");
      continue;
    }
    if (toks.size() < 3) {
      error(lineno, toks[0].column, "block line needs at least one net and a kind name");
      continue;
    }
    BlockInstance block;
    block.id = head;
    block.kind = toks.back().text;
    bool bad_net = false;
    for (size_t i = 1; i + 1 < toks.size(); ++i) {
      if (!is_identifier(toks[i].text)) {
        error(lineno, toks[i].column, "invalid net identifier '" + toks[i].text + "'");
        bad_net = true;
        continue;
      }
      block.bindings.push_back(toks[i].text);
    }
    if (bad_net) continue;

    if (block_ids.count(block.id)) {
      error(lineno, toks[0].column, "duplicate block id '" + block.id + "'");
      continue;
    }
    const SubcircuitDef* def = library.find(block.kind);
    if (!def) {
      error(lineno, toks.back().column, "unknown kind '" + block.kind + "'");
      continue;
    }
    if (static_cast<int>(block.bindings.size()) != def->arity()) {
      error(lineno, toks[0].column,
            "kind '" + block.kind + "' takes " + std::to_string(def->arity()) +
                " nets, got " + std::to_string(block.bindings.size()));
      continue;
    }
    block_ids.insert(block.id);
    topo.blocks.push_back(std::move(block));
  }

  if (!seen_ports) {
    error(1, 1, "missing .ports line");
  } else if (!role_counts.count(PortRole::Vdd) || !role_counts.count(PortRole::Vss)) {
    error(ports_line, 1, "missing required VDD/VSS port declarations");
  }
  if (!seen_end) {
    error(std::max<int>(1, static_cast<int>(lines.size())), 1, "missing .end");
  }

  bool has_error = std::any_of(diags.begin(), diags.end(), [](const ParseDiagnostic& d) {
    return d.severity == Severity::Error;
  });
  if (!has_error) result.topology = std::move(topo);
  return result;
}

std::string serialize(const Topology& topology) {
  std::ostringstream out;
  if (!topology.title.empty()) out << "* " << topology.title << "\n";
  out << ".ports";
  for (PortRole role : kRoleOrder) {
    std::vector<std::string> nets;
    for (const auto& p : topology.ports) {
      if (p.role == role) nets.push_back(p.net);
    }
    std::sort(nets.begin(), nets.end());
    for (const auto& n : nets) out << " " << port_role_name(role) << "=" << n;
  }
  out << "\n";

  std::vector<const BlockInstance*> blocks;
  blocks.reserve(topology.blocks.size());
  for (const auto& b : topology.blocks) blocks.push_back(&b);
  std::sort(blocks.begin(), blocks.end(),
            [](const BlockInstance* a, const BlockInstance* b) { return a->id < b->id; });
  for (const auto* b : blocks) {
    out << b->id;
    for (const auto& n : b->bindings) out << " " << n;
    out << " " << b->kind << "\n";
  }
  out << ".end\n";
  return out.str();
}

ConnectivityGraph connectivity_graph(const Topology& topology) {
  ConnectivityGraph g;
  auto net_id = [&](const std::string& name) {
    auto it = g.net_index.find(name);
    if (it != g.net_index.end()) return it->second;
    int id = static_cast<int>(g.nets.size());
    g.nets.push_back(name);
    g.net_index.emplace(name, id);
    return id;
  };
  for (size_t bi = 0; bi < topology.blocks.size(); ++bi) {
    const auto& b = topology.blocks[bi];
    for (size_t ti = 0; ti < b.bindings.size(); ++ti) {
      int tid = static_cast<int>(g.terminals.size());
      g.terminals.push_back({static_cast<int>(bi), static_cast<int>(ti)});
      g.edges.emplace_back(tid, net_id(b.bindings[ti]));
    }
  }
  return g;
}

int ConnectivityGraph::net_degree(const std::string& net) const {
  auto it = net_index.find(net);
  if (it == net_index.end()) return 0;
  int deg = 0;
  for (const auto& e : edges) {
    if (e.second == it->second) ++deg;
  }
  return deg;
}

// ---------------------------------------------------------------------------
// Canonicalization: iterative refinement coloring over blocks and nets,
// followed by individualization search taking the lexicographically minimal
// relabeled serialization. Instances are tiny, so the search is cheap.

namespace {

struct CanonState {
  const Topology* topo;
  std::vector<std::string> nets;                      // net index -> name
  std::map<std::string, int> net_idx;                 // name -> index
  std::vector<std::vector<std::pair<int, int>>> inc;  // net -> (block, term)
  std::vector<std::string> net_portsig;               // sorted role names

  std::string best_text;
  std::vector<int> best_block_order;  // block indices in canonical order
  bool have_best = false;
};

// Re-rank arbitrary signature strings into dense integer colors.
void assign_ranks(const std::vector<std::string>& sigs, std::vector<int>& colors) {
  std::vector<std::string> sorted = sigs;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::map<std::string, int> rank;
  for (size_t i = 0; i < sorted.size(); ++i) rank[sorted[i]] = static_cast<int>(i);
  for (size_t i = 0; i < sigs.size(); ++i) colors[i] = rank[sigs[i]];
}

void refine(const CanonState& st, std::vector<int>& bcol, std::vector<int>& ncol) {
  const auto& blocks = st.topo->blocks;
  size_t total = 0;
  while (true) {
    std::vector<std::string> bsig(blocks.size());
    for (size_t i = 0; i < blocks.size(); ++i) {
      std::string s = std::to_string(bcol[i]) + "|" + blocks[i].kind;
      for (const auto& net : blocks[i].bindings) {
        s += "," + std::to_string(ncol[st.net_idx.at(net)]);
      }
      bsig[i] = s;
    }
    std::vector<std::string> nsig(st.nets.size());
    for (size_t i = 0; i < st.nets.size(); ++i) {
      std::vector<std::string> parts;
      for (const auto& [b, t] : st.inc[i]) {
        parts.push_back(std::to_string(bcol[b]) + ":" + std::to_string(t));
      }
      std::sort(parts.begin(), parts.end());
      std::string s = std::to_string(ncol[i]) + "|" + st.net_portsig[i];
      for (const auto& p : parts) s += ";" + p;
      nsig[i] = s;
    }
    assign_ranks(bsig, bcol);
    assign_ranks(nsig, ncol);
    std::set<int> distinct_b(bcol.begin(), bcol.end());
    std::set<int> distinct_n(ncol.begin(), ncol.end());
    size_t now = distinct_b.size() + distinct_n.size();
    if (now == total) break;
    total = now;
  }
}

// Emit the canonical serialization for a fully discrete block coloring.
std::string emit(const CanonState& st, const std::vector<int>& bcol,
                 const std::vector<int>& ncol, std::vector<int>* order_out) {
  const auto& blocks = st.topo->blocks;
  std::vector<int> order(blocks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return bcol[a] < bcol[b]; });

  // Canonical net names. Port nets are named by their role signature; internal
  // nets by first appearance in the canonical block scan.
  std::map<std::string, std::string> net_name;
  std::map<std::string, int> portsig_counter;
  std::vector<int> appearance(st.nets.size(), -1);
  int pos = 0;
  for (int b : order) {
    for (const auto& net : blocks[b].bindings) {
      int ni = st.net_idx.at(net);
      if (appearance[ni] < 0) appearance[ni] = pos++;
    }
  }
  // Deterministic order over all nets: bound nets by appearance, unbound port
  // nets after, ordered by color (automorphic ties resolved by original name,
  // which cannot affect the emitted text).
  std::vector<int> net_order(st.nets.size());
  for (size_t i = 0; i < net_order.size(); ++i) net_order[i] = static_cast<int>(i);
  std::sort(net_order.begin(), net_order.end(), [&](int a, int b) {
    bool ba = appearance[a] >= 0, bb = appearance[b] >= 0;
    if (ba != bb) return ba;
    if (ba) return appearance[a] < appearance[b];
    if (ncol[a] != ncol[b]) return ncol[a] < ncol[b];
    return st.nets[a] < st.nets[b];
  });
  int internal_counter = 0;
  for (int ni : net_order) {
    if (st.net_portsig[ni].empty()) {
      net_name[st.nets[ni]] = "n" + std::to_string(internal_counter++);
    } else {
      std::string base = "p";
      for (char c : st.net_portsig[ni]) {
        base += (c == ',') ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      int k = portsig_counter[base]++;
      net_name[st.nets[ni]] = k == 0 ? base : base + std::to_string(k);
    }
  }

  int width = 1;
  for (size_t n = blocks.size(); n >= 10; n /= 10) ++width;

  Topology relabeled;
  for (size_t i = 0; i < order.size(); ++i) {
    const auto& src = blocks[order[i]];
    BlockInstance b;
    std::string idx = std::to_string(i);
    b.id = "XB" + std::string(width - idx.size(), '0') + idx;
    b.kind = src.kind;
    for (const auto& net : src.bindings) b.bindings.push_back(net_name.at(net));
    relabeled.blocks.push_back(std::move(b));
  }
  for (const auto& p : st.topo->ports) {
    relabeled.ports.push_back({p.role, net_name.at(p.net)});
  }
  if (order_out) *order_out = order;
  return serialize(relabeled);
}

void search(CanonState& st, std::vector<int> bcol, std::vector<int> ncol) {
  refine(st, bcol, ncol);

  // Find the first tied block cell (smallest color with >1 member).
  int target_color = -1;
  std::vector<int> cell;
  std::map<int, std::vector<int>> by_color;
  for (size_t i = 0; i < bcol.size(); ++i) by_color[bcol[i]].push_back(static_cast<int>(i));
  for (const auto& [c, members] : by_color) {
    if (members.size() > 1) {
      target_color = c;
      cell = members;
      break;
    }
  }

  if (target_color < 0) {
    std::vector<int> order;
    std::string text = emit(st, bcol, ncol, &order);
    if (!st.have_best || text < st.best_text) {
      st.best_text = std::move(text);
      st.best_block_order = std::move(order);
      st.have_best = true;
    }
    return;
  }

  int fresh = static_cast<int>(bcol.size() + ncol.size()) + 1;
  for (int member : cell) {
    std::vector<int> b2 = bcol;
    b2[member] = fresh;  // individualize, then refine again
    search(st, std::move(b2), ncol);
  }
}

}  // namespace

CanonicalForm canonicalize(const Topology& topology) {
  CanonState st;
  st.topo = &topology;
  for (const auto& name : topology.nets()) {
    st.net_idx[name] = static_cast<int>(st.nets.size());
    st.nets.push_back(name);
  }
  st.inc.resize(st.nets.size());
  for (size_t bi = 0; bi < topology.blocks.size(); ++bi) {
    const auto& b = topology.blocks[bi];
    for (size_t ti = 0; ti < b.bindings.size(); ++ti) {
      st.inc[st.net_idx.at(b.bindings[ti])].emplace_back(static_cast<int>(bi),
                                                         static_cast<int>(ti));
    }
  }
  st.net_portsig.resize(st.nets.size());
  {
    std::vector<std::vector<std::string>> roles(st.nets.size());
    for (const auto& p : topology.ports) {
      roles[st.net_idx.at(p.net)].push_back(port_role_name(p.role));
    }
    for (size_t i = 0; i < roles.size(); ++i) {
      std::sort(roles[i].begin(), roles[i].end());
      std::string sig;
      for (const auto& r : roles[i]) {
        if (!sig.empty()) sig += ',';
        sig += r;
      }
      st.net_portsig[i] = sig;
    }
  }

  std::vector<int> bcol(topology.blocks.size(), 0);
  std::vector<int> ncol(st.nets.size(), 0);
  {
    std::vector<std::string> bsig;
    for (const auto& b : topology.blocks) bsig.push_back("B|" + b.kind);
    if (!bsig.empty()) assign_ranks(bsig, bcol);
    std::vector<std::string> nsig;
    for (const auto& sig : st.net_portsig) nsig.push_back("N|" + sig);
    if (!nsig.empty()) assign_ranks(nsig, ncol);
  }

  search(st, bcol, ncol);

  CanonicalForm form;
  if (!st.have_best) {
    // No blocks at all: emit directly.
    std::vector<int> bempty, nempty(st.nets.size(), 0);
    form.text = emit(st, bempty, nempty, nullptr);
  } else {
    form.text = st.best_text;
  }

  // Recover the winning relabeling maps by replaying the winning order.
  {
    std::vector<int> order = st.best_block_order;
    std::map<std::string, std::string> net_name;
    // Rebuild the same naming the winning emit produced by reparsing the text:
    // simpler and exact — map by position.
    int width = 1;
    for (size_t n = topology.blocks.size(); n >= 10; n /= 10) ++width;
    for (size_t i = 0; i < order.size(); ++i) {
      std::string idx = std::to_string(i);
      form.block_map[topology.blocks[order[i]].id] =
          "XB" + std::string(width - idx.size(), '0') + idx;
    }
    // Net map: align original bindings/ports with canonical text bindings.
    std::istringstream in(form.text);
    std::string line;
    std::vector<std::vector<std::string>> canon_bindings;
    std::vector<std::string> canon_port_nets;
    while (std::getline(in, line)) {
      if (line.rfind(".ports", 0) == 0) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        while (ls >> tok) {
          size_t eq = tok.find('=');
          canon_port_nets.push_back(tok.substr(eq + 1));
        }
      } else if (!line.empty() && line[0] == 'X') {
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> toks;
        while (ls >> tok) toks.push_back(tok);
        canon_bindings.push_back(
            std::vector<std::string>(toks.begin() + 1, toks.end() - 1));
      }
    }
    for (size_t i = 0; i < order.size(); ++i) {
      const auto& src = topology.blocks[order[i]].bindings;
      for (size_t t = 0; t < src.size(); ++t) {
        form.net_map[src[t]] = canon_bindings[i][t];
      }
    }
    // Ports cover unbound nets; serialize() sorts within role so align by
    // sorted original net order per role.
    for (PortRole role : kRoleOrder) {
      std::vector<std::string> orig;
      for (const auto& p : topology.ports) {
        if (p.role == role) orig.push_back(p.net);
      }
      if (orig.empty()) continue;
      // Canonical nets for this role, in emitted (sorted) order:
      std::vector<std::string> canon;
      {
        std::istringstream in2(form.text);
        std::string l2;
        std::getline(in2, l2);
        if (l2.rfind(".ports", 0) != 0) std::getline(in2, l2);
        std::istringstream ls(l2);
        std::string tok;
        ls >> tok;
        while (ls >> tok) {
          size_t eq = tok.find('=');
          if (tok.substr(0, eq) == port_role_name(role)) canon.push_back(tok.substr(eq + 1));
        }
      }
      // Bound nets already have a mapping; assign the remaining canonical
      // names to unbound originals in sorted order.
      std::vector<std::string> unmapped_orig;
      std::set<std::string> used_canon;
      for (const auto& n : orig) {
        auto it = form.net_map.find(n);
        if (it != form.net_map.end())
          used_canon.insert(it->second);
        else
          unmapped_orig.push_back(n);
      }
      std::sort(unmapped_orig.begin(), unmapped_orig.end());
      std::vector<std::string> free_canon;
      for (const auto& c : canon) {
        if (!used_canon.count(c)) free_canon.push_back(c);
      }
      std::sort(free_canon.begin(), free_canon.end());
      for (size_t i = 0; i < unmapped_orig.size() && i < free_canon.size(); ++i) {
        form.net_map[unmapped_orig[i]] = free_canon[i];
      }
    }
  }
  return form;
}

}  // namespace topoxpert
