#pragma once

#include <stdexcept>
#include <string>

namespace canopyscan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CANOPYSCAN_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

// Tensor engine
CANOPYSCAN_ERROR(DimensionError);
CANOPYSCAN_ERROR(ContractError);
CANOPYSCAN_ERROR(OptimizerError);

// Model
CANOPYSCAN_ERROR(VocabularyError);
CANOPYSCAN_ERROR(ChannelMismatchError);
CANOPYSCAN_ERROR(FormatError);
CANOPYSCAN_ERROR(CorruptionError);
CANOPYSCAN_ERROR(TrainingError);
CANOPYSCAN_ERROR(ConfigError);

// Conditioning, indexes, data
CANOPYSCAN_ERROR(ValidationError);
CANOPYSCAN_ERROR(InputError);
CANOPYSCAN_ERROR(EmptyCanopyError);
CANOPYSCAN_ERROR(ManifestError);
CANOPYSCAN_ERROR(RangeError);
CANOPYSCAN_ERROR(SplitError);
CANOPYSCAN_ERROR(SizeError);

// External services
CANOPYSCAN_ERROR(ServiceError);

#undef CANOPYSCAN_ERROR

class AuthError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

class ProtocolError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

class TransportError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

// Not a hard failure: the service answered but had nothing usable.
class DataGapError : public Error {
 public:
  using Error::Error;
};

}  // namespace canopyscan
