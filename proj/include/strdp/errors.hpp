// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace strdp {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/image dimensions violate an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise invalid numeric input.
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// A scalar parameter lies outside its documented range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (file, flags, or programmatic).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Step index outside the diffusion schedule.
class ScheduleError : public Error {
public:
    using Error::Error;
};

/// A statistics/feature bundle does not match the denoiser's hook sites.
class BundleMismatchError : public Error {
public:
    using Error::Error;
};

/// Inconsistent state between pipeline stages (trajectory vs schedule, ...).
class PipelineError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents (container, PNG).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Operating-system level I/O failure.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace strdp
