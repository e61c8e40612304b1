#pragma once

#include <stdexcept>
#include <string>

namespace prosper {

enum class ErrorKind {
    InvalidArgument,  // caller violated a precondition
    Io,               // file could not be opened, read or written
    Format,           // malformed file contents
    Numeric,          // non-finite value encountered
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) { throw Error(kind, what); }

inline void require(bool cond, const std::string &what) {
    if (!cond) {
        fail(ErrorKind::InvalidArgument, what);
    }
}

}  // namespace prosper
