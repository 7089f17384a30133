#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace fwbic {

enum class ErrorKind {
  ConfigError,
  ClearZoneViolation,
  MultiModeBand,
  BadIndexBounds,
  DegenerateGeometry,
  SnapFailure,
  NoConvergence,
  AmbiguousAssignment,
  BandViolation,
  NearZeroCoupling,
  IllConditioned,
  NoRootInBand,
  NoCrossing,
  NoSignChange,
  ParityViolation,
  EscapedBand,
  BranchJump,
  ValidationFailure,
};

const char *to_string(ErrorKind k);

// Exit-code class used by the CLI: 2 validation, 3 numerical, 4 config.
int exit_code_for(ErrorKind k);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string module, const std::string &message,
        std::map<std::string, std::string> details = {})
      : std::runtime_error(message), kind_(kind), module_(std::move(module)),
        details_(std::move(details)) {}

  ErrorKind kind() const { return kind_; }
  const std::string &module() const { return module_; }
  const std::map<std::string, std::string> &details() const { return details_; }

private:
  ErrorKind kind_;
  std::string module_;
  std::map<std::string, std::string> details_;
};

} // namespace fwbic
