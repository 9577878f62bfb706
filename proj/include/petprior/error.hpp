#ifndef PETPRIOR_ERROR_HPP
#define PETPRIOR_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace petprior {

/// Machine-readable failure category, surfaced by the CLI as JSON on stderr.
enum class ErrorCode {
  kIo,
  kMissingFile,
  kCorruptHeader,
  kMultiChannel,
  kInvariant,
  kGridMismatch,
  kShapeMismatch,
  kDegenerateInput,
  kRange,
  kUnpaired,
  kDuplicate,
  kUnreachable,
  kLeakage,
  kEmptyInput,
  kUntrained,
  kStaleCache,
  kMissingResidual,
  kChannelOrder,
  kConfig,
  kDependency,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace petprior

#endif  // PETPRIOR_ERROR_HPP
