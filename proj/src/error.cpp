#include "edpredict/error.hpp"

namespace edpredict {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::OutOfRangeCode: return "OutOfRangeCode";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::InvalidCard: return "InvalidCard";
    case ErrorCode::NonFiniteDelta: return "NonFiniteDelta";
    case ErrorCode::DegenerateCard: return "DegenerateCard";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::PValueOutOfRange: return "PValueOutOfRange";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::UnreadableFile: return "UnreadableFile";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::AllPatientsExcluded: return "AllPatientsExcluded";
    case ErrorCode::OutOfRangeAnswer: return "OutOfRangeAnswer";
    case ErrorCode::SingleHospital: return "SingleHospital";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::TooManySkippedReplicates: return "TooManySkippedReplicates";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

} // namespace edpredict
