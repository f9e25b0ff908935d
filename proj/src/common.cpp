#include "sdrl/common.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>

namespace sdrl {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kNonFinite: return "non-finite value";
    case ErrorKind::kMissingFile: return "missing file";
    case ErrorKind::kSchema: return "schema error";
    case ErrorKind::kVersion: return "version mismatch";
    case ErrorKind::kDimension: return "dimension mismatch";
    case ErrorKind::kTooFewSamples: return "too few samples";
    case ErrorKind::kDegenerate: return "degenerate model";
    case ErrorKind::kUnreachable: return "target unreachable";
  }
  return "unknown";
}

void require_finite(const Matrix& m, const std::string& what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (!std::isfinite(m(r, c)))
        throw Error(ErrorKind::kNonFinite,
                    what + ": non-finite value at row " + std::to_string(r) +
                        ", column " + std::to_string(c));
}

void require_finite(const Vector& v, const std::string& what) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v(i)))
      throw Error(ErrorKind::kNonFinite,
                  what + ": non-finite value at index " + std::to_string(i));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::string out;
  out.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    out += buf;
  }
  return out;
}

}  // namespace sdrl
