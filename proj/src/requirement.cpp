#include "topoxpert/requirement.hpp"

#include <sstream>

#include "topoxpert/error.hpp"

namespace topoxpert {

const char* task_category_name(TaskCategory c) {
  switch (c) {
    case TaskCategory::Task1: return "Task1";
    case TaskCategory::Task2: return "Task2";
    case TaskCategory::Task3: return "Task3";
    case TaskCategory::Task4: return "Task4";
    case TaskCategory::Task5: return "Task5";
    case TaskCategory::Task6: return "Task6";
  }
  return "?";
}

std::optional<TaskCategory> task_category_from(const std::string& name) {
  for (int i = 0; i < 6; ++i) {
    auto c = static_cast<TaskCategory>(i);
    if (name == task_category_name(c)) return c;
  }
  return std::nullopt;
}

int category_stages(TaskCategory c) {
  switch (c) {
    case TaskCategory::Task1:
    case TaskCategory::Task4: return 1;
    case TaskCategory::Task2:
    case TaskCategory::Task5: return 2;
    case TaskCategory::Task3:
    case TaskCategory::Task6: return 3;
  }
  return 1;
}

bool category_has_given(TaskCategory c) {
  return c == TaskCategory::Task4 || c == TaskCategory::Task5 || c == TaskCategory::Task6;
}

TaskCategory category_of(const StructureRequirement& req) {
  bool given = !req.given_blocks.empty();
  switch (req.stages) {
    case 1: return given ? TaskCategory::Task4 : TaskCategory::Task1;
    case 2: return given ? TaskCategory::Task5 : TaskCategory::Task2;
    default: return given ? TaskCategory::Task6 : TaskCategory::Task3;
  }
}

std::string requirement_to_text(const StructureRequirement& req) {
  std::ostringstream out;
  out << "circuit type: " << req.circuit_type << "\n";
  out << "stages: " << req.stages << "\n";
  out << "input signal: "
      << (req.input_signal == InputSignal::Differential ? "differential" : "single-ended")
      << "\n";
  out << "input blocks:";
  for (const auto& k : req.input_blocks) out << " " << k;
  out << "\n";
  out << "given blocks:";
  if (req.given_blocks.empty()) out << " (none)";
  for (const auto& k : req.given_blocks) out << " " << k;
  out << "\n";
  out << "maximum number of blocks: " << req.max_blocks << "\n";
  out << "feedback: " << (req.feedback == Feedback::Miller ? "miller" : "none") << "\n";
  return out.str();
}

void to_json(nlohmann::json& j, const StructureRequirement& req) {
  j = nlohmann::json{
      {"circuit_type", req.circuit_type},
      {"stages", req.stages},
      {"input_signal",
       req.input_signal == InputSignal::Differential ? "differential" : "single_ended"},
      {"input_blocks", req.input_blocks},
      {"given_blocks", req.given_blocks},
      {"max_blocks", req.max_blocks},
      {"feedback", req.feedback == Feedback::Miller ? "miller" : "none"},
  };
}

void from_json(const nlohmann::json& j, StructureRequirement& req) {
  try {
    req.circuit_type = j.at("circuit_type").get<std::string>();
    req.stages = j.at("stages").get<int>();
    std::string sig = j.at("input_signal").get<std::string>();
    if (sig == "differential") {
      req.input_signal = InputSignal::Differential;
    } else if (sig == "single_ended") {
      req.input_signal = InputSignal::SingleEnded;
    } else {
      throw Error("SchemaError", "bad input_signal '" + sig + "'");
    }
    req.input_blocks = j.at("input_blocks").get<std::vector<std::string>>();
    req.given_blocks = j.at("given_blocks").get<std::vector<std::string>>();
    req.max_blocks = j.at("max_blocks").get<int>();
    std::string fb = j.value("feedback", "none");
    if (fb == "miller") {
      req.feedback = Feedback::Miller;
    } else if (fb == "none") {
      req.feedback = Feedback::None;
    } else {
      throw Error("SchemaError", "bad feedback '" + fb + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("SchemaError", std::string("bad requirement object: ") + e.what());
  }
  if (req.stages < 1 || req.stages > 3) {
    throw Error("SchemaError", "stages must be 1..3");
  }
  if (req.max_blocks < req.stages + 1) {
    throw Error("SchemaError", "max_blocks must be at least stages + 1");
  }
}

}  // namespace topoxpert
