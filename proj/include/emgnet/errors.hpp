#pragma once

#include <stdexcept>
#include <string>

namespace emgnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// signal_core
class EmptySegmentation : public Error { public: using Error::Error; };
class EmptyInput : public Error { public: using Error::Error; };

class ParseError : public Error {
 public:
  ParseError(const std::string& what, long line) : Error(what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

// wavelet
class UnknownFilter : public Error { public: using Error::Error; };
class BadLength : public Error { public: using Error::Error; };
class BadLevels : public Error { public: using Error::Error; };
class BadDecomposition : public Error { public: using Error::Error; };

// mspca
class TooFewRows : public Error { public: using Error::Error; };
class BadInput : public Error { public: using Error::Error; };
class ShapeMismatch : public Error { public: using Error::Error; };

// features
class EmptyBand : public Error { public: using Error::Error; };

// neuralnet
class BadLabel : public Error { public: using Error::Error; };
class InvalidState : public Error { public: using Error::Error; };
class ModelFormatError : public Error { public: using Error::Error; };

// pipeline
class StratificationError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

}  // namespace emgnet
