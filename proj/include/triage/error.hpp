#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace triage {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or violated precondition on caller-supplied settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Requested sizes cannot be satisfied by the input (sampling, splitting).
class SizeError : public Error {
 public:
  using Error::Error;
};

/// No developer has enough assignment history to build a roster.
class ColdStartError : public Error {
 public:
  using Error::Error;
};

/// Model, vocabulary, or task do not fit together.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// Model container could not be decoded.
class FormatError : public Error {
 public:
  enum class Kind { kBadMagic, kUnsupportedVersion, kTruncated, kChecksumMismatch, kMalformed };

  FormatError(Kind kind, std::uint64_t offset, const std::string& what)
      : Error(what + " (offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

/// Failure while talking to the issue tracker. `retryable()` marks transport
/// failures and server-side errors.
class TrackerError : public Error {
 public:
  TrackerError(const std::string& what, int status, bool retryable)
      : Error(what), status_(status), retryable_(retryable) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  int status_;
  bool retryable_;
};

class RateLimitError : public TrackerError {
 public:
  RateLimitError(const std::string& what, std::int64_t reset_epoch_seconds)
      : TrackerError(what, 403, true), reset_(reset_epoch_seconds) {}

  /// Unix time at which the tracker restores the quota (0 when unknown).
  std::int64_t reset_epoch_seconds() const noexcept { return reset_; }

 private:
  std::int64_t reset_;
};

class NotFoundError : public TrackerError {
 public:
  explicit NotFoundError(const std::string& what) : TrackerError(what, 404, false) {}
};

/// Webhook payload could not be understood (maps to HTTP 400).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace triage
