#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hadl {

enum class ErrorKind {
    OddLength,
    TooShort,
    ShapeMismatch,
    WrongHead,
    InvalidConfig,
    EmptyData,
    InvalidStep,
    ParseError,
    MissingValue,
    EmptyFile,
    Io,
    SchemaMismatch,
    UnknownConvention,
    ConstantChannel,
    SegmentTooShort,
    UnknownKind,
    Empty,
    ZeroBaseline,
    MissingZeroEta,
    UnknownAxis,
    UnknownDataset,
    BadCheckpoint,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (and tests)
/// can branch on the category without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace hadl
