#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "topoxpert/benchgen.hpp"
#include "topoxpert/checker.hpp"
#include "topoxpert/error.hpp"
#include "topoxpert/library.hpp"
#include "topoxpert/netlist.hpp"
#include "topoxpert/requirement.hpp"

namespace txtest {

using namespace topoxpert;

// Five-transistor OTA, the canonical passing fixture.
inline const char* kOtaNetlist =
    "* five transistor ota\n"
    ".ports INP=inp INN=inn OUT=out VDD=vdd VSS=vss\n"
    "XDP inp inn n1 out ntail DIFF_PAIR_N\n"
    "XCS ntail CURRENT_SOURCE_N\n"
    "XML n1 out out MIRROR_LOAD_P\n"
    ".end\n";

inline StructureRequirement ota_requirement() {
  StructureRequirement req;
  req.stages = 1;
  req.input_signal = InputSignal::Differential;
  req.input_blocks = {"DIFF_PAIR_N"};
  req.max_blocks = 5;
  return req;
}

inline Topology parse_ok(const std::string& text, const Library& lib) {
  ParseResult r = parse_netlist(text, lib);
  if (!r.ok()) {
    std::string msg = "fixture does not parse:";
    for (const auto& d : r.diagnostics) msg += " " + d.message;
    throw std::runtime_error(msg);
  }
  return *r.topology;
}

inline CheckReport check_text(const std::string& text, const StructureRequirement& req,
                              const Library& lib) {
  return check(annotate(parse_ok(text, lib), lib), req, lib);
}

inline bool has_rule(const CheckReport& report, const std::string& rule) {
  return std::any_of(report.violations.begin(), report.violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

// ---------------------------------------------------------------------------
// Brute-force isomorphism oracle: searches every kind-preserving block
// bijection for a consistent net bijection that also preserves port roles.

namespace detail {

inline bool ports_compatible(const Topology& a, const Topology& b,
                             const std::map<std::string, std::string>& net_map) {
  for (int role = 0; role < 6; ++role) {
    std::vector<std::string> bn;
    std::vector<std::string> unmapped;
    for (const auto& p : b.ports) {
      if (static_cast<int>(p.role) == role) bn.push_back(p.net);
    }
    for (const auto& p : a.ports) {
      if (static_cast<int>(p.role) != role) continue;
      auto it = net_map.find(p.net);
      if (it == net_map.end()) {
        unmapped.push_back(p.net);
        continue;
      }
      auto bit = std::find(bn.begin(), bn.end(), it->second);
      if (bit == bn.end()) return false;
      bn.erase(bit);
    }
    if (unmapped.size() != bn.size()) return false;
  }
  return true;
}

inline bool extend(const Topology& a, const Topology& b, std::vector<int>& assign,
                   std::vector<bool>& used, size_t i) {
  if (i == a.blocks.size()) {
    // Build the net bijection induced by the block assignment.
    std::map<std::string, std::string> fwd, rev;
    for (size_t k = 0; k < a.blocks.size(); ++k) {
      const auto& ba = a.blocks[k];
      const auto& bb = b.blocks[assign[k]];
      for (size_t t = 0; t < ba.bindings.size(); ++t) {
        const std::string& na = ba.bindings[t];
        const std::string& nb = bb.bindings[t];
        auto f = fwd.find(na);
        if (f != fwd.end()) {
          if (f->second != nb) return false;
        } else {
          auto r = rev.find(nb);
          if (r != rev.end()) return false;
          fwd[na] = nb;
          rev[nb] = na;
        }
      }
    }
    return ports_compatible(a, b, fwd);
  }
  for (size_t j = 0; j < b.blocks.size(); ++j) {
    if (used[j] || b.blocks[j].kind != a.blocks[i].kind) continue;
    used[j] = true;
    assign[i] = static_cast<int>(j);
    if (extend(a, b, assign, used, i + 1)) return true;
    used[j] = false;
  }
  return false;
}

}  // namespace detail

inline bool brute_force_equivalent(const Topology& a, const Topology& b) {
  if (a.blocks.size() != b.blocks.size()) return false;
  std::map<std::string, int> ka, kb;
  for (const auto& blk : a.blocks) ++ka[blk.kind];
  for (const auto& blk : b.blocks) ++kb[blk.kind];
  if (ka != kb) return false;
  std::vector<int> assign(a.blocks.size(), -1);
  std::vector<bool> used(b.blocks.size(), false);
  return detail::extend(a, b, assign, used, 0);
}

// Deterministic block permutation + net renaming that preserves structure.
inline Topology scramble(const Topology& t, uint64_t seed) {
  Topology out = t;
  std::mt19937_64 rng(seed);
  std::shuffle(out.blocks.begin(), out.blocks.end(), rng);
  std::map<std::string, std::string> rename;
  int k = 0;
  for (const auto& n : t.nets()) rename[n] = "w" + std::to_string(100 + k++);
  for (auto& blk : out.blocks) {
    std::string idx = std::to_string(k++);
    blk.id = "XR" + idx;
    for (auto& net : blk.bindings) net = rename[net];
  }
  for (auto& p : out.ports) p.net = rename[p.net];
  return out;
}

// Rejection-samples a requirement whose constructive build succeeds.
inline std::pair<StructureRequirement, Topology> random_valid_fixture(std::mt19937_64& rng,
                                                                      const Library& lib) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    auto category = static_cast<TaskCategory>(rng() % 6);
    StructureRequirement req = sample_requirement(rng, category, lib);
    try {
      Topology t = construct_valid_topology(req, rng, lib);
      return {req, t};
    } catch (const Error&) {
      continue;
    }
  }
  throw std::runtime_error("could not sample a feasible requirement");
}

}  // namespace txtest
