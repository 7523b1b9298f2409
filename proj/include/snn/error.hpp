#pragma once

#include <stdexcept>
#include <string>

namespace snn {

// All library failures derive from snn::Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class ValidationError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class ArgumentError : public Error { public: using Error::Error; };
class PlanError : public Error { public: using Error::Error; };

// Raised when an invariant the engine itself guarantees is broken.
class InternalError : public Error { public: using Error::Error; };

} // namespace snn
