#include "topoxpert/benchgen.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "topoxpert/error.hpp"
#include "json.hpp"

namespace topoxpert {

namespace {

using nlohmann::json;

const std::vector<std::string> kDiffInputs = {"DIFF_PAIR_N", "DIFF_PAIR_P"};
const std::vector<std::string> kSeInputs = {"CS_AMP_N", "CS_AMP_P"};
const std::vector<std::string> kAllTransconductors = {"CS_AMP_N", "CS_AMP_P", "DIFF_PAIR_N",
                                                      "DIFF_PAIR_P"};

uint64_t draw(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[draw(rng, v.size())];
}

Polarity opposite(Polarity p) {
  if (p == Polarity::N) return Polarity::P;
  if (p == Polarity::P) return Polarity::N;
  return Polarity::None;
}

std::string pol_suffix(Polarity p) { return p == Polarity::N ? "N" : "P"; }

std::string requirement_key(const StructureRequirement& req) {
  json j;
  to_json(j, req);
  return j.dump();
}

// Kinds a requirement may list as extra given blocks: everything except
// transconductors (those would change the stage count), and differential
// cascode pairs only when a matching-polarity differential stage exists.
std::vector<std::string> given_pool(const Library& lib,
                                    const std::vector<std::string>& stage_kinds) {
  bool has_diff_n = false, has_diff_p = false;
  for (const auto& k : stage_kinds) {
    const SubcircuitDef* d = lib.find(k);
    if (d && signature_class(*d) == 1) {
      has_diff_n |= d->polarity == Polarity::N;
      has_diff_p |= d->polarity == Polarity::P;
    }
  }
  std::vector<std::string> pool;
  for (const auto& d : lib.defs()) {
    if (d.functional_tag == FunctionalTag::Transconductor) continue;
    if (signature_class(d) == 2 && d.arity_class == PathArity::TwoSignalPath) {
      if (d.polarity == Polarity::N && !has_diff_n) continue;
      if (d.polarity == Polarity::P && !has_diff_p) continue;
    }
    pool.push_back(d.name);
  }
  return pool;
}

std::vector<std::string> sample_stage_kinds(std::mt19937_64& rng, int stages,
                                            InputSignal signal) {
  std::vector<std::string> kinds;
  kinds.push_back(signal == InputSignal::Differential ? pick(rng, kDiffInputs)
                                                      : pick(rng, kSeInputs));
  for (int i = 1; i < stages; ++i) kinds.push_back(pick(rng, kAllTransconductors));
  return kinds;
}

}  // namespace

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::map<TaskCategory, int> default_quotas() {
  return {{TaskCategory::Task1, 20},  {TaskCategory::Task2, 125}, {TaskCategory::Task3, 625},
          {TaskCategory::Task4, 150}, {TaskCategory::Task5, 750}, {TaskCategory::Task6, 330}};
}

std::pair<int, int> max_blocks_range(int stages) {
  switch (stages) {
    case 1: return {2, 5};
    case 2: return {4, 9};
    default: return {6, 13};
  }
}

StructureRequirement sample_requirement(std::mt19937_64& rng, TaskCategory category,
                                        const Library& library) {
  StructureRequirement req;
  req.circuit_type = "amplifier";
  req.stages = category_stages(category);
  req.input_signal = draw(rng, 2) == 0 ? InputSignal::Differential : InputSignal::SingleEnded;
  req.input_blocks = sample_stage_kinds(rng, req.stages, req.input_signal);
  if (category_has_given(category)) {
    std::vector<std::string> pool = given_pool(library, req.input_blocks);
    req.given_blocks.push_back(pick(rng, pool));
  }
  auto [lo, hi] = max_blocks_range(req.stages);
  req.max_blocks = lo + static_cast<int>(draw(rng, hi - lo + 1));
  req.feedback = draw(rng, 2) == 0 ? Feedback::None : Feedback::Miller;
  return req;
}

std::vector<BenchmarkTask> generate_benchmark(uint64_t seed,
                                              const std::map<TaskCategory, int>& quotas,
                                              const Library& library, bool enumerate) {
  std::vector<BenchmarkTask> tasks;
  for (int ci = 0; ci < 6; ++ci) {
    auto category = static_cast<TaskCategory>(ci);
    auto it = quotas.find(category);
    int quota = it == quotas.end() ? 0 : it->second;
    if (quota < 0) throw Error("QuotaInfeasible", "negative quota");
    if (quota == 0) continue;

    std::vector<StructureRequirement> reqs;
    if (enumerate) {
      // Fixed-order walk of the requirement space.
      int stages = category_stages(category);
      auto [lo, hi] = max_blocks_range(stages);
      for (int sig = 0; sig < 2 && static_cast<int>(reqs.size()) < quota; ++sig) {
        InputSignal signal = sig == 0 ? InputSignal::Differential : InputSignal::SingleEnded;
        const auto& firsts = signal == InputSignal::Differential ? kDiffInputs : kSeInputs;
        // Enumerate stage-kind tuples with mixed radix over later stages.
        size_t later = static_cast<size_t>(stages) - 1;
        size_t tuple_count = 1;
        for (size_t i = 0; i < later; ++i) tuple_count *= kAllTransconductors.size();
        for (const auto& first : firsts) {
          for (size_t t = 0; t < tuple_count && static_cast<int>(reqs.size()) < quota; ++t) {
            std::vector<std::string> kinds = {first};
            size_t rem = t;
            for (size_t i = 0; i < later; ++i) {
              kinds.push_back(kAllTransconductors[rem % kAllTransconductors.size()]);
              rem /= kAllTransconductors.size();
            }
            std::vector<std::string> givens =
                category_has_given(category) ? given_pool(library, kinds)
                                             : std::vector<std::string>{""};
            for (const auto& given : givens) {
              for (int mb = lo; mb <= hi; ++mb) {
                for (int fb = 0; fb < 2; ++fb) {
                  if (static_cast<int>(reqs.size()) >= quota) break;
                  StructureRequirement req;
                  req.stages = stages;
                  req.input_signal = signal;
                  req.input_blocks = kinds;
                  if (!given.empty()) req.given_blocks.push_back(given);
                  req.max_blocks = mb;
                  req.feedback = fb == 0 ? Feedback::None : Feedback::Miller;
                  reqs.push_back(std::move(req));
                }
              }
            }
          }
        }
      }
      if (static_cast<int>(reqs.size()) < quota) {
        throw Error("QuotaInfeasible",
                    std::string(task_category_name(category)) + " space smaller than quota " +
                        std::to_string(quota));
      }
    } else {
      std::mt19937_64 rng(splitmix64(seed + static_cast<uint64_t>(ci) + 1));
      std::set<std::string> seen;
      long long stagnant = 0;
      const long long max_stagnant = 100000;  // consecutive draws with no new requirement
      while (static_cast<int>(reqs.size()) < quota) {
        if (stagnant > max_stagnant) {
          throw Error("QuotaInfeasible",
                      std::string(task_category_name(category)) +
                          " cannot reach quota " + std::to_string(quota) +
                          " with distinct requirements");
        }
        StructureRequirement req = sample_requirement(rng, category, library);
        if (seen.insert(requirement_key(req)).second) {
          reqs.push_back(std::move(req));
          stagnant = 0;
        } else {
          ++stagnant;
        }
      }
    }

    for (size_t i = 0; i < reqs.size(); ++i) {
      BenchmarkTask task;
      std::ostringstream id;
      id << "task" << (ci + 1) << "-";
      std::string idx = std::to_string(i);
      id << std::string(idx.size() < 4 ? 4 - idx.size() : 0, '0') << idx;
      task.id = id.str();
      task.category = category;
      task.requirement = std::move(reqs[i]);
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

// ---------------------------------------------------------------------------
// Constructive valid-topology builder.

namespace {

struct Builder {
  const Library& lib;
  Topology topo;
  int net_counter = 0;
  int block_counter = 0;
  bool used_bias = false;

  explicit Builder(const Library& l) : lib(l) {}

  std::string new_net() { return "n" + std::to_string(net_counter++); }

  std::string add(const std::string& kind, std::vector<std::string> nets) {
    BlockInstance b;
    b.id = "XI" + std::to_string(block_counter++);
    b.kind = kind;
    b.bindings = std::move(nets);
    topo.blocks.push_back(b);
    return b.id;
  }

  BlockInstance& block(const std::string& id) {
    for (auto& b : topo.blocks) {
      if (b.id == id) return b;
    }
    throw Error("Infeasible", "internal: missing block " + id);
  }
};

struct StageInfo {
  std::string tc_id;       // transconductor block
  std::string load_id;     // mirror or diode load
  std::string out;         // stage output net
  Polarity pol = Polarity::N;
  bool differential = false;
  bool cascoded = false;
  std::string mirror_in_p, mirror_in_n;  // diff stages: mirror input nets
};

}  // namespace

Topology construct_valid_topology(const StructureRequirement& req, std::mt19937_64& rng,
                                  const Library& library) {
  if (req.stages < 1 || req.stages > 3) throw Error("Infeasible", "stages must be 1..3");
  if (req.max_blocks < req.stages + 1) {
    throw Error("Infeasible", "a stage needs at least two blocks");
  }

  // One transconductor kind per stage; defaults fill unspecified stages.
  std::vector<std::string> stage_kinds;
  for (int i = 0; i < req.stages; ++i) {
    if (i < static_cast<int>(req.input_blocks.size())) {
      stage_kinds.push_back(req.input_blocks[i]);
    } else if (i == 0) {
      stage_kinds.push_back(req.input_signal == InputSignal::Differential ? "DIFF_PAIR_N"
                                                                          : "CS_AMP_N");
    } else {
      stage_kinds.push_back("CS_AMP_N");
    }
  }
  for (const auto& k : stage_kinds) {
    const SubcircuitDef* d = library.find(k);
    if (!d || d->functional_tag != FunctionalTag::Transconductor) {
      throw Error("Infeasible", "input block '" + k + "' is not a transconductor kind");
    }
  }
  {
    const SubcircuitDef* first = library.find(stage_kinds[0]);
    bool diff_kind = signature_class(*first) == 1;
    if (diff_kind != (req.input_signal == InputSignal::Differential)) {
      throw Error("Infeasible", "first-stage kind does not match the input signal type");
    }
  }

  Builder b(library);
  std::vector<StageInfo> stages;
  std::string prev_out;

  for (int i = 0; i < req.stages; ++i) {
    const SubcircuitDef* def = library.find(stage_kinds[i]);
    StageInfo stage;
    stage.pol = def->polarity;
    stage.differential = signature_class(*def) == 1;
    if (stage.differential) {
      std::string in1 = i == 0 ? "inp" : prev_out;
      std::string in2;
      if (i == 0) {
        in2 = "inn";
      } else {
        in2 = "vb";
        b.used_bias = true;
      }
      std::string tail = b.new_net();
      std::string na = b.new_net();
      std::string nb = b.new_net();
      stage.tc_id = b.add(stage_kinds[i], {in1, in2, na, nb, tail});
      b.add("CURRENT_SOURCE_" + pol_suffix(stage.pol), {tail});
      stage.load_id = b.add("MIRROR_LOAD_" + pol_suffix(opposite(stage.pol)), {na, nb, nb});
      stage.mirror_in_p = na;
      stage.mirror_in_n = nb;
      stage.out = nb;
    } else {
      std::string in = i == 0 ? "inp" : prev_out;
      std::string no = b.new_net();
      stage.tc_id = b.add(stage_kinds[i], {in, no});
      stage.load_id = b.add("DIODE_LOAD_" + pol_suffix(opposite(stage.pol)), {no});
      stage.out = no;
    }
    prev_out = stage.out;
    stages.push_back(stage);
  }
  std::string final_out = stages.back().out;

  // Deficits of required given kinds after the stage scaffolding.
  std::map<std::string, int> deficit;
  for (const auto& k : req.given_blocks) deficit[k]++;
  for (const auto& blk : b.topo.blocks) {
    auto it = deficit.find(blk.kind);
    if (it != deficit.end() && it->second > 0) --it->second;
  }

  auto place_rank = [&](const std::string& kind) {
    const SubcircuitDef* d = library.find(kind);
    if (!d) return 9;
    // Followers move the output node, so they go last; caps after that.
    if (d->functional_tag == FunctionalTag::Follower) return 8;
    if (d->functional_tag == FunctionalTag::PassiveC) return 7;
    return 0;
  };
  std::vector<std::string> to_place;
  for (const auto& [kind, count] : deficit) {
    for (int i = 0; i < count; ++i) to_place.push_back(kind);
  }
  std::stable_sort(to_place.begin(), to_place.end(),
                   [&](const std::string& x, const std::string& y) {
                     return place_rank(x) < place_rank(y);
                   });

  bool placed_cap = false;
  for (const auto& blk : b.topo.blocks) {
    if (blk.kind == "CAP") placed_cap = true;
  }

  auto place_cap = [&]() {
    if (req.feedback == Feedback::Miller && req.stages >= 2) {
      b.add("CAP", {stages[0].out, final_out});
    } else {
      b.add("CAP", {final_out, "vss"});
    }
    placed_cap = true;
  };

  for (const std::string& kind : to_place) {
    const SubcircuitDef* d = library.find(kind);
    if (!d) throw Error("Infeasible", "given block '" + kind + "' not in library");
    int cls = signature_class(*d);
    switch (cls) {
      case 1:
      case 4:
        throw Error("Infeasible",
                    "extra transconductor '" + kind + "' would change the stage count");
      case 2: {  // cascode pair: stack on a matching differential stage
        StageInfo* target = nullptr;
        for (auto& s : stages) {
          if (s.differential && s.pol == d->polarity && !s.cascoded) {
            target = &s;
            break;
          }
        }
        if (!target) {
          throw Error("Infeasible", "no matching differential stage for '" + kind + "'");
        }
        std::string ca = b.new_net();
        std::string cb = b.new_net();
        BlockInstance& tc = b.block(target->tc_id);
        tc.bindings[2] = ca;  // outp
        tc.bindings[3] = cb;  // outn
        b.add(kind, {ca, cb, target->mirror_in_p, target->mirror_in_n});
        target->cascoded = true;
        break;
      }
      case 5: {  // single cascode
        StageInfo* target = nullptr;
        for (auto& s : stages) {
          if (s.pol == d->polarity && !s.cascoded) {
            target = &s;
            break;
          }
        }
        if (target) {
          std::string nc = b.new_net();
          BlockInstance& tc = b.block(target->tc_id);
          if (target->differential) {
            std::string old = tc.bindings[3];  // outn carries the output branch
            tc.bindings[3] = nc;
            b.add(kind, {nc, old});
          } else {
            std::string old = tc.bindings[1];
            tc.bindings[1] = nc;
            b.add(kind, {nc, old});
          }
          target->cascoded = true;
        } else {
          // Cascoded bias branch into the output node.
          std::string nf = b.new_net();
          b.add("CURRENT_SOURCE_" + pol_suffix(d->polarity), {nf});
          b.add(kind, {nf, final_out});
        }
        break;
      }
      case 3: {  // mirror load
        StageInfo* target = nullptr;
        for (auto& s : stages) {
          if (s.differential && b.block(s.load_id).kind != kind) {
            target = &s;
            break;
          }
        }
        bool replaced = false;
        if (target) {
          // Reuse the stage's load slot for the required mirror kind.
          const SubcircuitDef* cur = library.find(b.block(target->load_id).kind);
          if (cur && signature_class(*cur) == 3) {
            b.block(target->load_id).kind = kind;
            replaced = true;
          }
        }
        if (!replaced) {
          std::string nm = b.new_net();
          b.add("CURRENT_SOURCE_" + pol_suffix(opposite(d->polarity)), {nm});
          b.add(kind, {final_out, nm, nm});
        }
        break;
      }
      case 6:  // extra diode load on a stage output
        b.add(kind, {stages[draw(rng, stages.size())].out});
        break;
      case 7:  // extra current source feeding the output node
        b.add(kind, {final_out});
        break;
      case 8: {  // output buffer
        std::string no = b.new_net();
        b.add(kind, {final_out, no});
        final_out = no;
        break;
      }
      case 9:
        b.add(kind, {final_out, "vss"});
        break;
      case 10:
        place_cap();
        break;
      default:
        throw Error("Infeasible", "cannot place given block '" + kind + "'");
    }
  }

  if (req.feedback == Feedback::Miller && !placed_cap) place_cap();

  b.topo.ports.push_back({PortRole::SignalInPos, "inp"});
  if (stages[0].differential) b.topo.ports.push_back({PortRole::SignalInNeg, "inn"});
  b.topo.ports.push_back({PortRole::SignalOut, final_out});
  b.topo.ports.push_back({PortRole::Vdd, "vdd"});
  b.topo.ports.push_back({PortRole::Vss, "vss"});
  if (b.used_bias) b.topo.ports.push_back({PortRole::Bias, "vb"});

  if (static_cast<int>(b.topo.blocks.size()) > req.max_blocks) {
    throw Error("Infeasible",
                "needs " + std::to_string(b.topo.blocks.size()) + " blocks, budget is " +
                    std::to_string(req.max_blocks));
  }
  b.topo.title = req.circuit_type;
  return b.topo;
}

// ---------------------------------------------------------------------------
// File formats.

namespace {

json task_to_json(const BenchmarkTask& task) {
  json j;
  j["id"] = task.id;
  j["category"] = task_category_name(task.category);
  to_json(j["requirement"], task.requirement);
  return j;
}

BenchmarkTask task_from_json(const json& j, int lineno) {
  BenchmarkTask task;
  try {
    task.id = j.at("id").get<std::string>();
    auto cat = task_category_from(j.at("category").get<std::string>());
    if (!cat) throw Error("SchemaError", "line " + std::to_string(lineno) + ": bad category");
    task.category = *cat;
    from_json(j.at("requirement"), task.requirement);
  } catch (const json::exception& e) {
    throw Error("SchemaError", "line " + std::to_string(lineno) + ": " + e.what());
  }
  return task;
}

}  // namespace

std::string benchmark_to_jsonl(const std::vector<BenchmarkTask>& tasks) {
  std::ostringstream out;
  for (const auto& t : tasks) out << task_to_json(t).dump() << "\n";
  return out.str();
}

void write_benchmark(const std::vector<BenchmarkTask>& tasks,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IoError", "cannot write " + path.string());
  out << benchmark_to_jsonl(tasks);
  if (!out) throw Error("IoError", "write failed for " + path.string());
}

std::vector<BenchmarkTask> parse_benchmark_jsonl(const std::string& text) {
  std::vector<BenchmarkTask> tasks;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("SchemaError", "line " + std::to_string(lineno) + ": " + e.what());
    }
    BenchmarkTask task = task_from_json(j, lineno);
    if (!ids.insert(task.id).second) {
      throw Error("SchemaError",
                  "line " + std::to_string(lineno) + ": duplicate task id " + task.id);
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::vector<BenchmarkTask> read_benchmark(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_benchmark_jsonl(buf.str());
}

void write_golden(const std::vector<GoldenCase>& cases, const std::filesystem::path& path,
                  const Library&) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IoError", "cannot write " + path.string());
  for (const auto& c : cases) {
    json j;
    j["task"] = task_to_json(c.task);
    j["golden_netlist"] = serialize(c.golden);
    out << j.dump() << "\n";
  }
}

std::vector<GoldenCase> read_golden(const std::filesystem::path& path, const Library& library) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot read " + path.string());
  std::vector<GoldenCase> cases;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("SchemaError", "line " + std::to_string(lineno) + ": " + e.what());
    }
    GoldenCase c;
    c.task = task_from_json(j.at("task"), lineno);
    std::string netlist;
    try {
      netlist = j.at("golden_netlist").get<std::string>();
    } catch (const json::exception& e) {
      throw Error("SchemaError", "line " + std::to_string(lineno) + ": " + e.what());
    }
    ParseResult parsed = parse_netlist(netlist, library);
    if (!parsed.ok()) {
      throw Error("SchemaError",
                  "line " + std::to_string(lineno) + ": golden netlist does not parse");
    }
    c.golden = *parsed.topology;
    cases.push_back(std::move(c));
  }
  return cases;
}

std::vector<GoldenCase> builtin_golden_cases(const Library& library) {
  struct CaseDef {
    const char* id;
    StructureRequirement req;
  };
  std::vector<CaseDef> specs;
  specs.push_back({"real-001",
                   {"amplifier", 1, InputSignal::Differential, {"DIFF_PAIR_N"}, {}, 5,
                    Feedback::None}});
  specs.push_back({"real-002",
                   {"amplifier", 1, InputSignal::SingleEnded, {"CS_AMP_N"}, {}, 4,
                    Feedback::None}});
  specs.push_back({"real-003",
                   {"amplifier", 2, InputSignal::Differential, {"DIFF_PAIR_N", "CS_AMP_P"},
                    {"CAP"}, 8, Feedback::Miller}});
  specs.push_back({"real-004",
                   {"amplifier", 1, InputSignal::Differential, {"DIFF_PAIR_N"},
                    {"CASCODE_PAIR_N"}, 5, Feedback::None}});
  specs.push_back({"real-005",
                   {"amplifier", 1, InputSignal::SingleEnded, {"CS_AMP_P"},
                    {"SRC_FOLLOWER_N"}, 4, Feedback::None}});

  std::vector<GoldenCase> cases;
  for (const auto& s : specs) {
    GoldenCase c;
    c.task.id = s.id;
    c.task.category = category_of(s.req);
    c.task.requirement = s.req;
    std::mt19937_64 rng(splitmix64(0x70706f746f ^ cases.size()));
    c.golden = construct_valid_topology(s.req, rng, library);
    c.golden.title = std::string("sample golden case ") + s.id;
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace topoxpert
