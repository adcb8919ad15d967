#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace topoxpert {

class Library;

// Declared port roles of a topology. At most one net per role except Bias.
enum class PortRole { SignalInPos, SignalInNeg, SignalOut, Vdd, Vss, Bias };

// Role keyword as it appears in the `.ports` line (INP, INN, OUT, VDD, VSS, BIAS).
const char* port_role_name(PortRole role);
std::optional<PortRole> port_role_from(std::string_view token);

struct PortDecl {
  PortRole role;
  std::string net;
};

// One subcircuit call line: instance id (starts with 'X'), library kind,
// and one net per declared terminal of the kind, in declaration order.
struct BlockInstance {
  std::string id;
  std::string kind;
  std::vector<std::string> bindings;
};

struct Topology {
  std::vector<BlockInstance> blocks;
  std::vector<PortDecl> ports;
  std::string title;  // empty means no title comment

  std::optional<std::string> port_net(PortRole role) const;
  std::vector<std::string> bias_nets() const;
  std::set<std::string> nets() const;  // every net seen in bindings or ports
  const BlockInstance* find_block(const std::string& id) const;
};

enum class Severity { Error, Warning };

struct ParseDiagnostic {
  int line;    // 1-based
  int column;  // 1-based
  std::string message;
  Severity severity;
};

struct ParseResult {
  std::optional<Topology> topology;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return topology.has_value(); }
};

bool is_identifier(std::string_view s);

// Parses the subcircuit-level netlist dialect:
//   file      := title? portline blockline* ".end"
//   title     := "*" <free text>
//   portline  := ".ports" (ROLE "=" IDENT)+
//   blockline := XIDENT IDENT+ KINDNAME
// Lines starting '*' are comments. Never throws; failures come back as
// positioned Error diagnostics and an empty topology slot.
ParseResult parse_netlist(std::string_view source, const Library& library);

// Canonical text: title comment, `.ports` with roles in declaration-role
// order, blocks sorted by id, `.end`. LF line endings.
std::string serialize(const Topology& topology);

// Deterministic relabeling such that two topologies that are isomorphic up
// to block-id / internal-net renaming produce identical canonical text.
// Port nets keep their role identity; the title is not part of the form.
struct CanonicalForm {
  std::string text;
  std::unordered_map<std::string, std::string> block_map;  // original -> canonical
  std::unordered_map<std::string, std::string> net_map;

  friend bool operator==(const CanonicalForm& a, const CanonicalForm& b) {
    return a.text == b.text;
  }
};

CanonicalForm canonicalize(const Topology& topology);

// Bipartite block-terminal / net graph. One terminal node and one edge per
// binding, one node per distinct net.
struct ConnectivityGraph {
  struct Terminal {
    int block;  // index into topology.blocks
    int term;   // terminal index within the block
  };

  std::vector<std::string> nets;
  std::unordered_map<std::string, int> net_index;
  std::vector<Terminal> terminals;
  std::vector<std::pair<int, int>> edges;  // (terminal index, net index)

  int net_degree(const std::string& net) const;
};

ConnectivityGraph connectivity_graph(const Topology& topology);

}  // namespace topoxpert
