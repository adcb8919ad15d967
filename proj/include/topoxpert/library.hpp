#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "topoxpert/netlist.hpp"

namespace topoxpert {

// Terminal annotation used by the proofreading checker: current input (I/I),
// current output (I/O), or voltage (V).
enum class TerminalRole { CurrentIn, CurrentOut, Voltage };
enum class Polarity { N, P, None };
enum class PathArity { OneSignalPath, TwoSignalPath, Passive };
enum class FunctionalTag {
  Transconductor,
  Cascode,
  Load,
  CurrentSource,
  Follower,
  PassiveR,
  PassiveC,
};

const char* terminal_role_name(TerminalRole role);  // "I_IN", "I_OUT", "V"

struct TerminalDef {
  std::string name;
  TerminalRole role;
};

struct SubcircuitDef {
  std::string name;
  std::vector<TerminalDef> terminals;
  Polarity polarity = Polarity::None;
  PathArity arity_class = PathArity::OneSignalPath;
  FunctionalTag functional_tag = FunctionalTag::Load;

  int arity() const { return static_cast<int>(terminals.size()); }
};

class Library {
 public:
  // Throws DuplicateKind on name collision.
  void add(SubcircuitDef def);

  const SubcircuitDef* find(const std::string& name) const;
  const std::vector<SubcircuitDef>& defs() const { return defs_; }
  size_t size() const { return defs_.size(); }

  std::string version = "builtin-1";

 private:
  std::vector<SubcircuitDef> defs_;
  std::map<std::string, size_t> index_;
};

// The 18 built-in kinds. Supplies are implicit in the kind, not terminals.
Library builtin_library();

// Built-ins merged with user kinds from a JSON file; a user kind may not
// shadow a built-in. Throws SchemaError / DuplicateKind / ShadowsBuiltin.
Library load_library(const std::filesystem::path& file);
Library parse_library_json(const std::string& json_text);

// Signature class 1..10 collapsing polarity and p/n symmetry:
//   1 diff V->I transconductor   2 diff I->I cascode   3 diff I-sink mirror load
//   4 single V->I transconductor 5 single I->I cascode 6 single I-sink diode load
//   7 single I-source            8 V->V buffer         9 resistor  10 capacitor
int signature_class(const SubcircuitDef& def);

struct AnnotatedTopology {
  Topology topology;
  // (block id, terminal index) -> role, copied from the kind's declaration.
  std::map<std::pair<std::string, int>, TerminalRole> roles;
  std::map<std::string, int> classes;  // block id -> signature class

  TerminalRole role_of(const std::string& block_id, int term) const;
  int class_of(const std::string& block_id) const;
};

// Throws UnknownKind when a block's kind is not in the library.
AnnotatedTopology annotate(const Topology& topology, const Library& library);

}  // namespace topoxpert
