#pragma once

#include <string>
#include <string_view>

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>

namespace triage {

inline constexpr std::string_view kSignaturePrefix = "sha256=";

/// Lowercase hex HMAC-SHA256 of `body` under `secret`.
inline std::string hmac_sha256_hex(std::string_view secret, std::string_view body) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), secret.data(), static_cast<int>(secret.size()),
       reinterpret_cast<const unsigned char*>(body.data()), body.size(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// True iff `signature_header` is "sha256=" followed by the lowercase hex
/// HMAC of the raw body. The digest comparison is constant-time.
inline bool verify_signature(std::string_view raw_body, std::string_view signature_header,
                             std::string_view secret) {
  if (secret.empty()) return false;
  const std::string expected = std::string(kSignaturePrefix) + hmac_sha256_hex(secret, raw_body);
  if (signature_header.size() != expected.size()) return false;
  return CRYPTO_memcmp(expected.data(), signature_header.data(), expected.size()) == 0;
}

}  // namespace triage
