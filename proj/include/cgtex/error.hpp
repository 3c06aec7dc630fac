#pragma once

#include <stdexcept>
#include <string>

namespace cgtex {

// Base class for everything this library throws.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated API precondition (bad argument, empty mask, K < 2, ...).
struct ContractError : Error {
    using Error::Error;
};

// Tensor/network geometry problems: mismatched extents, degenerate output sizes.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed or unsupported file content (PNG bit depth, stereo WAV, frame gaps).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem level failure: missing file, short read, write error.
struct IoError : Error {
    using Error::Error;
};

// Invalid JSON job config; message carries the offending field path.
struct ConfigError : Error {
    using Error::Error;
};

// Network spec that cannot be instantiated (collapsed feature maps, counts
// out of range).
struct SpecError : Error {
    using Error::Error;
};

// States the library considers impossible (non-finite gradient under bounded energy).
struct InternalError : Error {
    using Error::Error;
};

}  // namespace cgtex
