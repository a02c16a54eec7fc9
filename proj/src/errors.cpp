#include "rigidda/errors.hpp"

namespace rigidda {

const char* to_string(IoErrorCode code) {
  switch (code) {
    case IoErrorCode::NotFound: return "not found";
    case IoErrorCode::MalformedHeader: return "malformed header";
    case IoErrorCode::TruncatedBuffer: return "truncated buffer";
    case IoErrorCode::NonOrthonormalDirection: return "non-orthonormal direction";
    case IoErrorCode::UnknownClassId: return "unknown class id";
    case IoErrorCode::UnsupportedDatatype: return "unsupported datatype";
    case IoErrorCode::UnsupportedFormat: return "unsupported format";
    case IoErrorCode::WriteFailed: return "write failed";
  }
  return "io error";
}

}  // namespace rigidda
