#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace signsgd {

// Machine-readable error categories. The CLI maps these to the "kind" field
// of its error JSON, so the string forms are part of the external interface.
enum class ErrorKind {
  kInvalidArgument,
  kDimensionMismatch,
  kNonFinite,
  kEmptyInput,
  kBadMagic,
  kTruncated,
  kCountMismatch,
  kIo,
  kConfigNotFound,
  kConfigParse,
  kConfigInvalid,
  kInadmissible,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace signsgd
