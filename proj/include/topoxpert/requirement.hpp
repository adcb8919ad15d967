#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace topoxpert {

enum class InputSignal { Differential, SingleEnded };
enum class Feedback { None, Miller };

// The conditional-generation input: what the synthesized topology must have.
struct StructureRequirement {
  std::string circuit_type = "amplifier";
  int stages = 1;                          // 1..3
  InputSignal input_signal = InputSignal::Differential;
  std::vector<std::string> input_blocks;   // transconductor kind per stage
  std::vector<std::string> given_blocks;   // extra required kinds
  int max_blocks = 5;
  Feedback feedback = Feedback::None;

  friend bool operator==(const StructureRequirement&, const StructureRequirement&) = default;
};

// Task1..3: stage 1..3 with no extra given block; Task4..6: with one.
enum class TaskCategory { Task1, Task2, Task3, Task4, Task5, Task6 };

const char* task_category_name(TaskCategory c);
std::optional<TaskCategory> task_category_from(const std::string& name);
TaskCategory category_of(const StructureRequirement& req);
int category_stages(TaskCategory c);
bool category_has_given(TaskCategory c);

std::string requirement_to_text(const StructureRequirement& req);

void to_json(nlohmann::json& j, const StructureRequirement& req);
void from_json(const nlohmann::json& j, StructureRequirement& req);

}  // namespace topoxpert
