#include "doctest.h"
#include "helpers.hpp"

#include "topoxpert/agent.hpp"
#include "topoxpert/error.hpp"
#include "topoxpert/eval.hpp"

using namespace topoxpert;
using namespace txtest;

namespace {

Episode episode_for(const std::string& id, TaskCategory cat, Outcome outcome) {
  Episode ep;
  ep.task.id = id;
  ep.task.category = cat;
  ep.outcome = outcome;
  return ep;
}

}  // namespace

TEST_CASE("equivalence holds under renaming and fails under kind swap") {
  Library lib = builtin_library();
  Topology t = parse_ok(kOtaNetlist, lib);

  MatchResult self = topologies_equivalent(t, t, lib);
  CHECK(self.equivalent);
  REQUIRE(self.block_witness.has_value());
  CHECK(self.block_witness->at("XDP") == "XDP");

  Topology renamed = scramble(t, 3);
  MatchResult m = topologies_equivalent(t, renamed, lib);
  CHECK(m.equivalent);
  REQUIRE(m.block_witness.has_value());
  // the witness maps the diff pair onto the renamed diff pair
  const BlockInstance* mapped = renamed.find_block(m.block_witness->at("XDP"));
  REQUIRE(mapped != nullptr);
  CHECK(mapped->kind == "DIFF_PAIR_N");
  // and it is consistent with the brute-force search
  CHECK(brute_force_equivalent(t, renamed));

  Topology swapped = t;
  swapped.blocks[2].kind = "MIRROR_LOAD_N";
  MatchResult no = topologies_equivalent(t, swapped, lib);
  CHECK_FALSE(no.equivalent);
  CHECK_FALSE(no.block_witness.has_value());
  CHECK_FALSE(brute_force_equivalent(t, swapped));
}

TEST_CASE("non-isomorphic wirings of the same block multiset differ") {
  Library lib = builtin_library();
  Topology t = parse_ok(kOtaNetlist, lib);
  Topology rewired = t;
  rewired.blocks[1].bindings[0] = "n1";  // same kinds, different wiring
  CHECK_FALSE(topologies_equivalent(t, rewired, lib).equivalent);
  CHECK_FALSE(brute_force_equivalent(t, rewired));
}

TEST_CASE("canonical equality agrees with brute force on random fixtures") {
  Library lib = builtin_library();
  std::mt19937_64 rng(5);
  std::vector<Topology> fixtures;
  while (fixtures.size() < 12) {
    auto [req, topo] = random_valid_fixture(rng, lib);
    if (topo.blocks.size() <= 8) fixtures.push_back(topo);
  }
  for (size_t i = 0; i < fixtures.size(); ++i) {
    for (size_t j = i; j < fixtures.size(); ++j) {
      bool canon = topologies_equivalent(fixtures[i], fixtures[j], lib).equivalent;
      bool brute = brute_force_equivalent(fixtures[i], fixtures[j]);
      CAPTURE(i);
      CAPTURE(j);
      CHECK(canon == brute);
    }
  }
}

TEST_CASE("grade_synthetic aggregates per category") {
  std::vector<Episode> eps = {
      episode_for("a", TaskCategory::Task1, Outcome::Pass),
      episode_for("b", TaskCategory::Task1, Outcome::Pass),
      episode_for("c", TaskCategory::Task1, Outcome::Pass),
      episode_for("d", TaskCategory::Task1, Outcome::FailMaxRounds),
      episode_for("e", TaskCategory::Task3, Outcome::FailUnparseable),
  };
  EvalReport r = grade_synthetic(eps);
  CHECK(r.per_category[TaskCategory::Task1].passed == 3);
  CHECK(r.per_category[TaskCategory::Task1].total == 4);
  CHECK(r.per_category[TaskCategory::Task3].total == 1);
  CHECK(r.overall.passed == 3);
  CHECK(r.overall.total == 5);

  EvalReport empty = grade_synthetic({});
  CHECK(empty.overall.total == 0);
  CHECK(empty.per_category.empty());
}

TEST_CASE("grade_real requires exact equivalence and a passing check") {
  Library lib = builtin_library();
  auto golden = builtin_golden_cases(lib);
  const GoldenCase& gc = golden[0];

  auto make_episode = [&](const Topology& topo, bool passed) {
    Episode ep;
    ep.task = gc.task;
    ep.outcome = passed ? Outcome::Pass : Outcome::FailMaxRounds;
    Round r;
    r.index = 1;
    r.parsed.topology = topo;
    CheckReport report;
    report.passed = passed;
    if (!passed) report.violations.push_back({"SEL-03", {}, "over budget", Severity::Error});
    r.report = report;
    ep.rounds.push_back(r);
    ep.rounds_used = 1;
    return ep;
  };

  SUBCASE("verbatim golden passes") {
    EvalReport r = grade_real({gc}, {make_episode(gc.golden, true)}, lib);
    CHECK(r.real->passed == 1);
    CHECK(r.real->total == 1);
  }
  SUBCASE("extra cap fails the exact match") {
    Topology extra = gc.golden;
    extra.blocks.push_back({"XEXTRA", "CAP", {"n1", "vss"}});
    EvalReport r = grade_real({gc}, {make_episode(extra, true)}, lib);
    CHECK(r.real->passed == 0);
  }
  SUBCASE("failing final check fails even with the right topology") {
    EvalReport r = grade_real({gc}, {make_episode(gc.golden, false)}, lib);
    CHECK(r.real->passed == 0);
  }
  SUBCASE("missing episode throws") {
    try {
      grade_real({gc}, {}, lib);
      FAIL("expected MissingEpisode");
    } catch (const Error& e) {
      CHECK(e.code() == "MissingEpisode");
    }
  }
}

TEST_CASE("format_ratio floors the percentage") {
  CHECK(format_ratio(16, 20) == "16/20(80%)");
  CHECK(format_ratio(801, 2000) == "801/2000(40%)");
  CHECK(format_ratio(53, 125) == "53/125(42%)");
  CHECK(format_ratio(0, 0) == "0/0(0%)");
  CHECK(format_ratio(1, 3) == "1/3(33%)");
}

TEST_CASE("render_report text and json") {
  EvalReport r;
  r.per_category[TaskCategory::Task1] = {16, 20};
  r.per_category[TaskCategory::Task2] = {53, 125};
  r.overall = {69, 145};

  std::string text = render_report(r, ReportFormat::Text);
  CHECK(text.find("Task1") != std::string::npos);
  CHECK(text.find("16/20(80%)") != std::string::npos);
  CHECK(text.find("53/125(42%)") != std::string::npos);
  CHECK(text.find("Average") != std::string::npos);

  std::string json = render_report(r, ReportFormat::Json);
  auto j = nlohmann::json::parse(json);
  CHECK(j["per_category"]["Task1"]["passed"] == 16);
  CHECK(j["overall"]["total"] == 145);
  CHECK_FALSE(j.contains("real"));

  EvalReport empty;
  std::string etext = render_report(empty, ReportFormat::Text);
  CHECK(etext.find("Average   0/0(0%)") != std::string::npos);
}
