#pragma once

#include <stdexcept>
#include <string>

namespace tapsim {

/// Base class for all tapsim errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace err {

struct NotRadial : Error {
  using Error::Error;
};
struct Disconnected : Error {
  using Error::Error;
};
struct DuplicateLine : Error {
  using Error::Error;
};
struct LtcOnUnknownLine : Error {
  using Error::Error;
};
struct TapOutOfRange : Error {
  using Error::Error;
};
struct PositionOutOfRange : Error {
  using Error::Error;
};
struct SingularSystem : Error {
  using Error::Error;
};
struct NotConverged : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct NonMonotoneTimestamp : Error {
  using Error::Error;
};
struct ChainBroken : Error {
  using Error::Error;
};
struct EmptyHistory : Error {
  using Error::Error;
};
struct ActionNotInSet : Error {
  using Error::Error;
};
struct EmptyBatch : Error {
  using Error::Error;
};
struct NumericallySingular : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct SolverFailure : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct SchemaMismatch : Error {
  using Error::Error;
};
struct DegenerateShape : Error {
  using Error::Error;
};
struct BadWeights : Error {
  using Error::Error;
};
struct EmptyLog : Error {
  using Error::Error;
};

}  // namespace err
}  // namespace tapsim
