#ifndef QRLJO_ERRORS_HPP_
#define QRLJO_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace qrljo {

// A caller broke an operation's precondition (bad sizes, invalid action, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed persisted data. The message names the offending field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Persisted data carries a schema version this build does not understand.
class IncompatibleVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No plan satisfies the requested join restrictions (e.g. no cross-join-free plan).
class NoPlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qrljo

#endif  // QRLJO_ERRORS_HPP_
