#ifndef RTFUSE_ERRORS_HPP
#define RTFUSE_ERRORS_HPP

#include <stdexcept>

namespace rtfuse {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an input value was violated (non-positive depth,
/// empty frame list, invalid scene, bad downsample target, ...).
class InvalidInputError : public Error {
public:
  using Error::Error;
};

/// Two rasters that must have identical dimensions do not.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Projection of a point with z <= 0 was requested.
class BehindCameraError : public Error {
public:
  using Error::Error;
};

/// No calibration target could be segmented from the image.
class TargetNotFoundError : public Error {
public:
  using Error::Error;
};

/// Fewer observations than required to constrain the parameters.
class UnderdeterminedError : public Error {
public:
  using Error::Error;
};

/// A calibration observation ends up behind the IR camera.
class DegenerateObservationError : public Error {
public:
  using Error::Error;
};

/// segment_footprint was called with no depth samples.
class EmptyFootprintError : public Error {
public:
  using Error::Error;
};

/// A statistic was requested over zero valid pixels.
class EmptyStatisticsError : public Error {
public:
  using Error::Error;
};

/// A file could not be opened or created.
class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed file content; the message carries the line or byte offset.
class ParseError : public Error {
public:
  using Error::Error;
};

}  // namespace rtfuse

#endif  // RTFUSE_ERRORS_HPP
