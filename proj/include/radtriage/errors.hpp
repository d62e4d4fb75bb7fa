#pragma once

#include <stdexcept>
#include <string>

namespace radtriage {

// Every library failure derives from Error so callers (the CLI in particular)
// can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class PartitionError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace radtriage
