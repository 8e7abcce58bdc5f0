#pragma once

// Exception taxonomy shared by every module. The CLI maps these onto exit
// codes: data problems (malformed files, degenerate inputs, mismatched
// models) and numerical failures (blowups, horizon misuse, bad covariances)
// are kept apart so callers can tell them apart programmatically.

#include <stdexcept>
#include <string>

namespace shapebridge {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Unreadable or syntactically invalid input data; message carries file and
// line context where available.
class MalformedInputError : public Error {
public:
    using Error::Error;
};

// Geometrically unusable shape input (too few points, zero-length segments,
// zero centroid size).
class DegenerateShapeError : public Error {
public:
    using Error::Error;
};

// More output resolution requested than the input can support.
class InsufficientResolutionError : public Error {
public:
    using Error::Error;
};

// Noise frequencies not resolvable on the requested grid.
class AliasingError : public Error {
public:
    using Error::Error;
};

// Time parameter outside the horizon a formula is valid for.
class HorizonError : public Error {
public:
    using Error::Error;
};

// Covariance or weight matrix unusable (non-SPD, non-finite).
class IllConditionedError : public Error {
public:
    using Error::Error;
};

// Checkpoint and requested network plan disagree.
class IncompatibleModelError : public Error {
public:
    using Error::Error;
};

// A simulated or optimized state left the representable range. Carries the
// time at which it happened and the offending magnitude.
class NumericalBlowupError : public Error {
public:
    NumericalBlowupError(const std::string& what, double time, double magnitude)
        : Error(what), time_(time), magnitude_(magnitude) {}

    double time() const { return time_; }
    double magnitude() const { return magnitude_; }

private:
    double time_;
    double magnitude_;
};

}  // namespace shapebridge
