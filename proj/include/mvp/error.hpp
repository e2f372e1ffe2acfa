#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mvp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed bytes handed to a decoder.
class DecodeError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an operation precondition (bad slot, duplicate address, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Envelope failed authentication.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// Server rejected the request because the client has no open context,
/// or already has one.
class ContextError : public Error {
 public:
  using Error::Error;
};

/// Admission limit reached; the request may be retried later.
class BusyError : public Error {
 public:
  using Error::Error;
};

/// No consolidated reply could be obtained from the replicas.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The protocol reached a state its invariants rule out (e.g. a block named
/// by the position map is missing from the fetched path and stashes).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Key shares that do not reconstruct a consistent secret.
class ShareError : public Error {
 public:
  ShareError(const std::string& what, std::vector<unsigned> offending)
      : Error(what), offending_(std::move(offending)) {}

  const std::vector<unsigned>& offending() const noexcept { return offending_; }

 private:
  std::vector<unsigned> offending_;
};

}  // namespace mvp
