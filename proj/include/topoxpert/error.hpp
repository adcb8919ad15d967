#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace topoxpert {

// Single exception type carrying a stable error code alongside the message.
// Codes in use: SyntaxError, UnknownKind, ArityMismatch, DuplicateBlockId,
// MissingPorts, SchemaError, DuplicateKind, ShadowsBuiltin, Infeasible,
// QuotaInfeasible, EmptyReport, EmptyPool, BudgetExceeded, NoNetlistFound,
// IoError, MissingEpisode.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace topoxpert
