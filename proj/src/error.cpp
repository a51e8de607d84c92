#include "hadl/error.hpp"

namespace hadl {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::OddLength: return "OddLength";
        case ErrorKind::TooShort: return "TooShort";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::WrongHead: return "WrongHead";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::EmptyData: return "EmptyData";
        case ErrorKind::InvalidStep: return "InvalidStep";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::MissingValue: return "MissingValue";
        case ErrorKind::EmptyFile: return "EmptyFile";
        case ErrorKind::Io: return "Io";
        case ErrorKind::SchemaMismatch: return "SchemaMismatch";
        case ErrorKind::UnknownConvention: return "UnknownConvention";
        case ErrorKind::ConstantChannel: return "ConstantChannel";
        case ErrorKind::SegmentTooShort: return "SegmentTooShort";
        case ErrorKind::UnknownKind: return "UnknownKind";
        case ErrorKind::Empty: return "Empty";
        case ErrorKind::ZeroBaseline: return "ZeroBaseline";
        case ErrorKind::MissingZeroEta: return "MissingZeroEta";
        case ErrorKind::UnknownAxis: return "UnknownAxis";
        case ErrorKind::UnknownDataset: return "UnknownDataset";
        case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    }
    return "Unknown";
}

}  // namespace hadl
