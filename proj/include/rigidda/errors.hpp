#pragma once

#include <stdexcept>
#include <string>

namespace rigidda {

// Validation problems are reported as std::invalid_argument.

// NaN/Inf during optimization or loss evaluation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class IoErrorCode {
  NotFound,
  MalformedHeader,
  TruncatedBuffer,
  NonOrthonormalDirection,
  UnknownClassId,
  UnsupportedDatatype,
  UnsupportedFormat,
  WriteFailed,
};

const char* to_string(IoErrorCode code);

class IoError : public std::runtime_error {
 public:
  IoError(IoErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}
  IoErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  IoErrorCode code_;
  std::string detail_;
};

}  // namespace rigidda
