#pragma once

#include <stdexcept>
#include <string>

namespace conprom {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  Validation,
  Io,
  Runtime,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace conprom
