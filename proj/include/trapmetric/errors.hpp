#pragma once

#include <stdexcept>

namespace trapmetric {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error { using Error::Error; };

// robust fitting
struct DegenerateInput : Error { using Error::Error; };
struct NoConsensus : Error { using Error::Error; };

// rasters and masks
struct DimensionMismatch : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };

// calibration
struct CalibrationError : Error { using Error::Error; };
struct TooFewReferences : CalibrationError { using CalibrationError::CalibrationError; };
struct CalibrationDegenerate : CalibrationError { using CalibrationError::CalibrationError; };
struct CalibrationMissing : CalibrationError { using CalibrationError::CalibrationError; };

// estimation
struct EmptyBox : Error { using Error::Error; };

// metrics
struct EmptyInput : Error { using Error::Error; };
struct DegenerateBandwidth : Error { using Error::Error; };

// file io
struct IoError : Error { using Error::Error; };
struct ParseError : IoError { using IoError::IoError; };
struct SchemaError : IoError { using IoError::IoError; };
struct MissingColumn : IoError { using IoError::IoError; };
struct ValueError : IoError { using IoError::IoError; };
struct InvalidCrop : IoError { using IoError::IoError; };

// synthetic scenes
struct SpecError : Error { using Error::Error; };

// evaluation join
struct JoinError : Error { using Error::Error; };

}  // namespace trapmetric
