#ifndef STYLETTS_ERROR_HPP_
#define STYLETTS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace styletts {

// Base class for every error raised by the library. The message is meant to
// be printed as a single line by the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace styletts

#endif  // STYLETTS_ERROR_HPP_
