#include "doctest.h"
#include "helpers.hpp"

#include <set>

#include "topoxpert/error.hpp"

using namespace topoxpert;
using namespace txtest;

TEST_CASE("default quotas match the published table denominators") {
  auto q = default_quotas();
  CHECK(q[TaskCategory::Task1] == 20);
  CHECK(q[TaskCategory::Task2] == 125);
  CHECK(q[TaskCategory::Task3] == 625);
  CHECK(q[TaskCategory::Task4] == 150);
  CHECK(q[TaskCategory::Task5] == 750);
  CHECK(q[TaskCategory::Task6] == 330);
  int total = 0;
  for (auto& [c, n] : q) total += n;
  CHECK(total == 2000);
}

TEST_CASE("max block ranges per stage count") {
  CHECK(max_blocks_range(1) == std::pair<int, int>{2, 5});
  CHECK(max_blocks_range(2) == std::pair<int, int>{4, 9});
  CHECK(max_blocks_range(3) == std::pair<int, int>{6, 13});
}

TEST_CASE("generate_benchmark is deterministic and distinct") {
  Library lib = builtin_library();
  auto a = generate_benchmark(42, default_quotas(), lib);
  auto b = generate_benchmark(42, default_quotas(), lib);
  REQUIRE(a.size() == 2000);
  CHECK(benchmark_to_jsonl(a) == benchmark_to_jsonl(b));

  auto c = generate_benchmark(43, default_quotas(), lib);
  CHECK(benchmark_to_jsonl(a) != benchmark_to_jsonl(c));

  std::set<std::string> keys, ids;
  for (const auto& t : a) {
    nlohmann::json j;
    to_json(j, t.requirement);
    // distinct within each category
    CHECK(keys.insert(task_category_name(t.category) + j.dump()).second);
    CHECK(ids.insert(t.id).second);
    CHECK(t.category == category_of(t.requirement));
    auto [lo, hi] = max_blocks_range(t.requirement.stages);
    CHECK(t.requirement.max_blocks >= lo);
    CHECK(t.requirement.max_blocks <= hi);
    CHECK(static_cast<int>(t.requirement.input_blocks.size()) == t.requirement.stages);
  }
}

TEST_CASE("sampled requirements are internally consistent") {
  Library lib = builtin_library();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    auto cat = static_cast<TaskCategory>(i % 6);
    StructureRequirement req = sample_requirement(rng, cat, lib);
    CHECK(req.stages == category_stages(cat));
    CHECK(req.given_blocks.size() == (category_has_given(cat) ? 1u : 0u));
    const SubcircuitDef* first = lib.find(req.input_blocks[0]);
    REQUIRE(first != nullptr);
    bool diff = signature_class(*first) == 1;
    CHECK(diff == (req.input_signal == InputSignal::Differential));
    for (const auto& g : req.given_blocks) {
      const SubcircuitDef* d = lib.find(g);
      REQUIRE(d != nullptr);
      CHECK(d->functional_tag != FunctionalTag::Transconductor);
    }
  }
}

TEST_CASE("enumerate mode walks the space in a fixed order") {
  Library lib = builtin_library();
  std::map<TaskCategory, int> quotas = {{TaskCategory::Task1, 10}};
  auto a = generate_benchmark(1, quotas, lib, true);
  auto b = generate_benchmark(99, quotas, lib, true);  // seed is ignored
  CHECK(benchmark_to_jsonl(a) == benchmark_to_jsonl(b));
  REQUIRE(a.size() == 10);
  CHECK(a[0].requirement.max_blocks == 2);
  CHECK(a[0].requirement.feedback == Feedback::None);
  CHECK(a[1].requirement.max_blocks == 2);
  CHECK(a[1].requirement.feedback == Feedback::Miller);

  std::map<TaskCategory, int> too_big = {{TaskCategory::Task1, 100000}};
  CHECK_THROWS_AS(generate_benchmark(1, too_big, lib, true), Error);
}

TEST_CASE("oversized random quota reports QuotaInfeasible") {
  Library lib = builtin_library();
  std::map<TaskCategory, int> too_big = {{TaskCategory::Task1, 100000}};
  try {
    generate_benchmark(1, too_big, lib);
    FAIL("expected QuotaInfeasible");
  } catch (const Error& e) {
    CHECK(e.code() == "QuotaInfeasible");
  }
}

TEST_CASE("construct_valid_topology passes the checker") {
  Library lib = builtin_library();
  std::mt19937_64 rng(11);
  int built = 0;
  while (built < 50) {
    auto [req, topo] = random_valid_fixture(rng, lib);
    CheckReport report = check(annotate(topo, lib), req, lib);
    if (!report.passed) {
      CAPTURE(serialize(topo));
      CAPTURE(requirement_to_text(req));
      for (const auto& v : report.violations) CAPTURE(v.rule + " " + v.detail);
      REQUIRE(report.passed);
    }
    CHECK(static_cast<int>(topo.blocks.size()) <= req.max_blocks);
    // every given kind is instantiated
    for (const auto& g : req.given_blocks) {
      bool found = false;
      for (const auto& b : topo.blocks) found |= b.kind == g;
      CHECK(found);
    }
    ++built;
  }
}

TEST_CASE("construct_valid_topology reports infeasible budgets") {
  Library lib = builtin_library();
  std::mt19937_64 rng(1);
  StructureRequirement req = ota_requirement();
  req.max_blocks = 1;
  CHECK_THROWS_AS(construct_valid_topology(req, rng, lib), Error);

  StructureRequirement bad = ota_requirement();
  bad.given_blocks = {"DIFF_PAIR_P"};  // a second transconductor breaks the stage count
  bad.max_blocks = 13;
  CHECK_THROWS_AS(construct_valid_topology(bad, rng, lib), Error);
}

TEST_CASE("benchmark jsonl roundtrip") {
  Library lib = builtin_library();
  std::map<TaskCategory, int> quotas = {{TaskCategory::Task1, 5}, {TaskCategory::Task4, 5}};
  auto tasks = generate_benchmark(3, quotas, lib);
  std::string text = benchmark_to_jsonl(tasks);
  auto back = parse_benchmark_jsonl(text);
  REQUIRE(back.size() == tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    CHECK(back[i].id == tasks[i].id);
    CHECK(back[i].requirement == tasks[i].requirement);
  }
  CHECK_THROWS_AS(parse_benchmark_jsonl("{\"nope\": 1}\n"), Error);
  CHECK_THROWS_AS(parse_benchmark_jsonl(text + text), Error);  // duplicate ids
}

TEST_CASE("builtin golden cases parse, pass, and satisfy their requirements") {
  Library lib = builtin_library();
  auto cases = builtin_golden_cases(lib);
  REQUIRE(cases.size() == 5);
  std::set<std::string> ids;
  for (const auto& c : cases) {
    CHECK(ids.insert(c.task.id).second);
    CheckReport report = check(annotate(c.golden, lib), c.task.requirement, lib);
    CAPTURE(c.task.id);
    CHECK(report.passed);
  }
}
