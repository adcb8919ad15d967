#include "topoxpert/library.hpp"

#include <fstream>
#include <sstream>

#include "topoxpert/error.hpp"
#include "json.hpp"

namespace topoxpert {

namespace {

using nlohmann::json;

SubcircuitDef def(std::string name, Polarity pol, PathArity arity, FunctionalTag tag,
                  std::vector<TerminalDef> terms) {
  SubcircuitDef d;
  d.name = std::move(name);
  d.polarity = pol;
  d.arity_class = arity;
  d.functional_tag = tag;
  d.terminals = std::move(terms);
  return d;
}

Polarity polarity_from(const std::string& s, const std::string& ctx) {
  if (s == "N") return Polarity::N;
  if (s == "P") return Polarity::P;
  if (s == "NONE") return Polarity::None;
  throw Error("SchemaError", ctx + ": bad polarity '" + s + "'");
}

PathArity arity_from(const std::string& s, const std::string& ctx) {
  if (s == "ONE") return PathArity::OneSignalPath;
  if (s == "TWO") return PathArity::TwoSignalPath;
  if (s == "PASSIVE") return PathArity::Passive;
  throw Error("SchemaError", ctx + ": bad arity_class '" + s + "'");
}

FunctionalTag tag_from(const std::string& s, const std::string& ctx) {
  if (s == "Transconductor") return FunctionalTag::Transconductor;
  if (s == "Cascode") return FunctionalTag::Cascode;
  if (s == "Load") return FunctionalTag::Load;
  if (s == "CurrentSource") return FunctionalTag::CurrentSource;
  if (s == "Follower") return FunctionalTag::Follower;
  if (s == "PassiveR") return FunctionalTag::PassiveR;
  if (s == "PassiveC") return FunctionalTag::PassiveC;
  throw Error("SchemaError", ctx + ": bad functional_tag '" + s + "'");
}

TerminalRole role_from(const std::string& s, const std::string& ctx) {
  if (s == "I_IN") return TerminalRole::CurrentIn;
  if (s == "I_OUT") return TerminalRole::CurrentOut;
  if (s == "V") return TerminalRole::Voltage;
  throw Error("SchemaError", ctx + ": bad terminal role '" + s + "'");
}

void validate_def(const SubcircuitDef& d) {
  if (d.terminals.size() < 2 && d.functional_tag != FunctionalTag::CurrentSource &&
      d.functional_tag != FunctionalTag::Load) {
    throw Error("SchemaError", "kind '" + d.name + "' must declare at least 2 terminals");
  }
  std::set<std::string> names;
  for (const auto& t : d.terminals) {
    if (!names.insert(t.name).second) {
      throw Error("SchemaError",
                  "kind '" + d.name + "' has duplicate terminal '" + t.name + "'");
    }
  }
  if (d.functional_tag == FunctionalTag::Transconductor) {
    bool has_vin = false, has_iout = false;
    for (const auto& t : d.terminals) {
      has_vin |= t.role == TerminalRole::Voltage;
      has_iout |= t.role == TerminalRole::CurrentOut;
    }
    if (!has_vin || !has_iout) {
      throw Error("SchemaError", "transconductor kind '" + d.name +
                                     "' needs a voltage input and a current output");
    }
  }
}

}  // namespace

const char* terminal_role_name(TerminalRole role) {
  switch (role) {
    case TerminalRole::CurrentIn: return "I_IN";
    case TerminalRole::CurrentOut: return "I_OUT";
    case TerminalRole::Voltage: return "V";
  }
  return "?";
}

void Library::add(SubcircuitDef def) {
  if (index_.count(def.name)) {
    throw Error("DuplicateKind", "kind '" + def.name + "' already defined");
  }
  index_[def.name] = defs_.size();
  defs_.push_back(std::move(def));
}

const SubcircuitDef* Library::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &defs_[it->second];
}

Library builtin_library() {
  using TR = TerminalRole;
  Library lib;
  auto pair5 = [](TR a, TR b, TR c, TR d, TR e) {
    return std::vector<TerminalDef>{{"inp", a}, {"inn", b}, {"outp", c}, {"outn", d}, {"tail", e}};
  };

  // Two-signal-path blocks.
  lib.add(def("DIFF_PAIR_N", Polarity::N, PathArity::TwoSignalPath, FunctionalTag::Transconductor,
              pair5(TR::Voltage, TR::Voltage, TR::CurrentOut, TR::CurrentOut, TR::CurrentIn)));
  lib.add(def("DIFF_PAIR_P", Polarity::P, PathArity::TwoSignalPath, FunctionalTag::Transconductor,
              pair5(TR::Voltage, TR::Voltage, TR::CurrentOut, TR::CurrentOut, TR::CurrentIn)));
  lib.add(def("CASCODE_PAIR_N", Polarity::N, PathArity::TwoSignalPath, FunctionalTag::Cascode,
              {{"inp", TR::CurrentIn}, {"inn", TR::CurrentIn},
               {"outp", TR::CurrentOut}, {"outn", TR::CurrentOut}}));
  lib.add(def("CASCODE_PAIR_P", Polarity::P, PathArity::TwoSignalPath, FunctionalTag::Cascode,
              {{"inp", TR::CurrentIn}, {"inn", TR::CurrentIn},
               {"outp", TR::CurrentOut}, {"outn", TR::CurrentOut}}));
  lib.add(def("MIRROR_LOAD_N", Polarity::N, PathArity::TwoSignalPath, FunctionalTag::Load,
              {{"inp", TR::CurrentIn}, {"inn", TR::CurrentIn}, {"out", TR::Voltage}}));
  lib.add(def("MIRROR_LOAD_P", Polarity::P, PathArity::TwoSignalPath, FunctionalTag::Load,
              {{"inp", TR::CurrentIn}, {"inn", TR::CurrentIn}, {"out", TR::Voltage}}));

  // One-signal-path blocks.
  lib.add(def("CS_AMP_N", Polarity::N, PathArity::OneSignalPath, FunctionalTag::Transconductor,
              {{"in", TR::Voltage}, {"out", TR::CurrentOut}}));
  lib.add(def("CS_AMP_P", Polarity::P, PathArity::OneSignalPath, FunctionalTag::Transconductor,
              {{"in", TR::Voltage}, {"out", TR::CurrentOut}}));
  lib.add(def("CASCODE_N", Polarity::N, PathArity::OneSignalPath, FunctionalTag::Cascode,
              {{"in", TR::CurrentIn}, {"out", TR::CurrentOut}}));
  lib.add(def("CASCODE_P", Polarity::P, PathArity::OneSignalPath, FunctionalTag::Cascode,
              {{"in", TR::CurrentIn}, {"out", TR::CurrentOut}}));
  lib.add(def("SRC_FOLLOWER_N", Polarity::N, PathArity::OneSignalPath, FunctionalTag::Follower,
              {{"in", TR::Voltage}, {"out", TR::Voltage}}));
  lib.add(def("SRC_FOLLOWER_P", Polarity::P, PathArity::OneSignalPath, FunctionalTag::Follower,
              {{"in", TR::Voltage}, {"out", TR::Voltage}}));
  lib.add(def("CURRENT_SOURCE_N", Polarity::N, PathArity::OneSignalPath,
              FunctionalTag::CurrentSource, {{"out", TR::CurrentOut}}));
  lib.add(def("CURRENT_SOURCE_P", Polarity::P, PathArity::OneSignalPath,
              FunctionalTag::CurrentSource, {{"out", TR::CurrentOut}}));
  lib.add(def("DIODE_LOAD_N", Polarity::N, PathArity::OneSignalPath, FunctionalTag::Load,
              {{"in", TR::CurrentIn}}));
  lib.add(def("DIODE_LOAD_P", Polarity::P, PathArity::OneSignalPath, FunctionalTag::Load,
              {{"in", TR::CurrentIn}}));

  // Passives.
  lib.add(def("RES", Polarity::None, PathArity::Passive, FunctionalTag::PassiveR,
              {{"a", TR::Voltage}, {"b", TR::Voltage}}));
  lib.add(def("CAP", Polarity::None, PathArity::Passive, FunctionalTag::PassiveC,
              {{"a", TR::Voltage}, {"b", TR::Voltage}}));
  return lib;
}

Library parse_library_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error("SchemaError", std::string("library file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kinds") || !j["kinds"].is_array()) {
    throw Error("SchemaError", "library file must be an object with a 'kinds' array");
  }

  Library builtin = builtin_library();
  Library lib = builtin_library();
  for (const auto& k : j["kinds"]) {
    if (!k.is_object() || !k.contains("name") || !k["name"].is_string()) {
      throw Error("SchemaError", "kind entry missing string 'name'");
    }
    std::string name = k["name"].get<std::string>();
    if (builtin.find(name)) {
      throw Error("ShadowsBuiltin", "user kind '" + name + "' shadows a built-in kind");
    }
    if (!is_identifier(name)) {
      throw Error("SchemaError", "kind name '" + name + "' is not a valid identifier");
    }
    for (const char* field : {"polarity", "arity_class", "functional_tag"}) {
      if (!k.contains(field) || !k[field].is_string()) {
        throw Error("SchemaError", "kind '" + name + "' missing string '" + field + "'");
      }
    }
    if (!k.contains("terminals") || !k["terminals"].is_array()) {
      throw Error("SchemaError", "kind '" + name + "' missing 'terminals' array");
    }
    SubcircuitDef d;
    d.name = name;
    d.polarity = polarity_from(k["polarity"].get<std::string>(), name);
    d.arity_class = arity_from(k["arity_class"].get<std::string>(), name);
    d.functional_tag = tag_from(k["functional_tag"].get<std::string>(), name);
    for (const auto& t : k["terminals"]) {
      if (!t.is_object() || !t.contains("name") || !t.contains("role")) {
        throw Error("SchemaError", "kind '" + name + "' has a malformed terminal entry");
      }
      d.terminals.push_back({t["name"].get<std::string>(),
                             role_from(t["role"].get<std::string>(), name)});
    }
    validate_def(d);
    lib.add(std::move(d));  // throws DuplicateKind on repeats within the file
  }
  if (j.contains("version") && j["version"].is_string()) {
    lib.version = j["version"].get<std::string>();
  } else {
    lib.version = "builtin-1+user";
  }
  return lib;
}

Library load_library(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("IoError", "cannot open library file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    return builtin_library();  // empty user file
  }
  return parse_library_json(text);
}

int signature_class(const SubcircuitDef& def) {
  bool two = def.arity_class == PathArity::TwoSignalPath;
  switch (def.functional_tag) {
    case FunctionalTag::Transconductor: return two ? 1 : 4;
    case FunctionalTag::Cascode: return two ? 2 : 5;
    case FunctionalTag::Load: return two ? 3 : 6;
    case FunctionalTag::CurrentSource: return 7;
    case FunctionalTag::Follower: return 8;
    case FunctionalTag::PassiveR: return 9;
    case FunctionalTag::PassiveC: return 10;
  }
  return 0;
}

TerminalRole AnnotatedTopology::role_of(const std::string& block_id, int term) const {
  return roles.at({block_id, term});
}

int AnnotatedTopology::class_of(const std::string& block_id) const {
  return classes.at(block_id);
}

AnnotatedTopology annotate(const Topology& topology, const Library& library) {
  AnnotatedTopology out;
  out.topology = topology;
  for (const auto& b : topology.blocks) {
    const SubcircuitDef* d = library.find(b.kind);
    if (!d) throw Error("UnknownKind", "block " + b.id + " references unknown kind " + b.kind);
    for (int t = 0; t < d->arity(); ++t) {
      out.roles[{b.id, t}] = d->terminals[t].role;
    }
    out.classes[b.id] = signature_class(*d);
  }
  return out;
}

}  // namespace topoxpert
