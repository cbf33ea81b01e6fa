#pragma once

#include <stdexcept>
#include <string>

namespace navforge {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record (episode, sample, plan) violates one of its invariants.
class ValidationError : public Error {
 public:
  ValidationError(std::string entity_id, const std::string& message)
      : Error(entity_id.empty() ? message : entity_id + ": " + message),
        entity_id_(std::move(entity_id)) {}

  const std::string& entity_id() const { return entity_id_; }

 private:
  std::string entity_id_;
};

// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace navforge
