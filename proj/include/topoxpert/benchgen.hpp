#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "topoxpert/library.hpp"
#include "topoxpert/requirement.hpp"

namespace topoxpert {

struct BenchmarkTask {
  std::string id;
  TaskCategory category = TaskCategory::Task1;
  StructureRequirement requirement;
};

struct GoldenCase {
  BenchmarkTask task;
  Topology golden;
};

// Category sizes of the published results table.
std::map<TaskCategory, int> default_quotas();  // {20,125,625,150,750,330}

// Stage-dependent max-block range: 1 -> [2,5], 2 -> [4,9], 3 -> [6,13].
std::pair<int, int> max_blocks_range(int stages);

StructureRequirement sample_requirement(std::mt19937_64& rng, TaskCategory category,
                                        const Library& library);

// Deterministic for a fixed seed: one PRNG substream per category, output
// ordered by category then index. All requirements pairwise distinct.
// `enumerate` walks the requirement space in a fixed order instead of
// sampling. Throws QuotaInfeasible when a category cannot fill its quota.
std::vector<BenchmarkTask> generate_benchmark(uint64_t seed,
                                              const std::map<TaskCategory, int>& quotas,
                                              const Library& library,
                                              bool enumerate = false);

// Builds a topology that satisfies every checker rule for the requirement,
// uses all given blocks, and stays within the block budget.
// Throws Infeasible when no rule-satisfying topology fits.
Topology construct_valid_topology(const StructureRequirement& req, std::mt19937_64& rng,
                                  const Library& library);

// JSON-lines benchmark file: one {id, category, requirement} object per line.
void write_benchmark(const std::vector<BenchmarkTask>& tasks,
                     const std::filesystem::path& path);
std::string benchmark_to_jsonl(const std::vector<BenchmarkTask>& tasks);
std::vector<BenchmarkTask> read_benchmark(const std::filesystem::path& path);
std::vector<BenchmarkTask> parse_benchmark_jsonl(const std::string& text);

// Golden-case file: JSON-lines {task, golden_netlist}.
void write_golden(const std::vector<GoldenCase>& cases, const std::filesystem::path& path,
                  const Library& library);
std::vector<GoldenCase> read_golden(const std::filesystem::path& path, const Library& library);

// Shipped sample corpus (5 cases) standing in for the proprietary real-data
// benchmark; same file format.
std::vector<GoldenCase> builtin_golden_cases(const Library& library);

uint64_t splitmix64(uint64_t x);

}  // namespace topoxpert
