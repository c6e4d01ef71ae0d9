#pragma once

#include <stdexcept>
#include <string>

namespace gdo {

/// Base of every error raised by the library. `category()` is a short,
/// machine-parsable tag that the CLI prints verbatim.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* category() const noexcept = 0;
};

#define GDO_DEFINE_ERROR(Name, tag)                          \
  class Name : public Error {                                \
   public:                                                   \
    using Error::Error;                                      \
    const char* category() const noexcept override { return tag; } \
  };

GDO_DEFINE_ERROR(ShapeError, "shape")
GDO_DEFINE_ERROR(ArgumentError, "argument")
GDO_DEFINE_ERROR(NumericError, "numeric")
GDO_DEFINE_ERROR(FormatError, "format")
GDO_DEFINE_ERROR(ConsistencyError, "consistency")
GDO_DEFINE_ERROR(IoError, "io")
GDO_DEFINE_ERROR(ContractError, "contract")
GDO_DEFINE_ERROR(ConfigError, "config")

#undef GDO_DEFINE_ERROR

}  // namespace gdo
