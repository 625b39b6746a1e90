#pragma once

#include <stdexcept>
#include <string>

namespace panelmc {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory : int {
  Config = 1,
  Io = 2,
  Parse = 3,
  Domain = 4,
  Numeric = 5,
  Internal = 10,
};

// All library errors carry the module of origin so CLI messages read as
// "matching: no observations at treatment level 1".
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& module, const std::string& message)
      : std::runtime_error(module + ": " + message), category_(category), module_(module) {}

  ErrorCategory category() const { return category_; }
  const std::string& module() const { return module_; }

 private:
  ErrorCategory category_;
  std::string module_;
};

[[noreturn]] inline void throw_config(const std::string& module, const std::string& msg) {
  throw Error(ErrorCategory::Config, module, msg);
}
[[noreturn]] inline void throw_io(const std::string& module, const std::string& msg) {
  throw Error(ErrorCategory::Io, module, msg);
}
[[noreturn]] inline void throw_parse(const std::string& module, const std::string& msg) {
  throw Error(ErrorCategory::Parse, module, msg);
}
[[noreturn]] inline void throw_domain(const std::string& module, const std::string& msg) {
  throw Error(ErrorCategory::Domain, module, msg);
}
[[noreturn]] inline void throw_numeric(const std::string& module, const std::string& msg) {
  throw Error(ErrorCategory::Numeric, module, msg);
}

}  // namespace panelmc
