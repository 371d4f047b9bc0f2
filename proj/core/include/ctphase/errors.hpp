#pragma once

#include <stdexcept>

namespace ctphase {

/// Malformed or inconsistent input data: unreadable files, bad headers,
/// grid mismatches, contract violations in user-supplied tables.
/// The CLI maps this to exit code 2; anything else is an internal error.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ctphase
