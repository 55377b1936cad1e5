#pragma once

#include <stdexcept>
#include <string>

namespace bustt {

enum class ErrorKind {
  invalid_argument,  // bad call, schema mismatch, malformed config
  data,              // unusable input data (empty windows, missing files)
  no_similar_trips,  // selection produced an empty sample
  numeric,           // numerical failure (non-finite loss, degenerate solve)
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw_error(kind, what);
}

}  // namespace bustt
