#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace edpredict {

enum class ErrorCode {
    UnknownVariable,
    OutOfRangeCode,
    MissingField,
    InvalidCard,
    NonFiniteDelta,
    DegenerateCard,
    SampleTooSmall,
    EmptySample,
    PValueOutOfRange,
    MissingColumn,
    UnreadableFile,
    EmptyFile,
    AllPatientsExcluded,
    OutOfRangeAnswer,
    SingleHospital,
    TooFewRecords,
    SingleClass,
    RankDeficientDesign,
    NonConvergence,
    TooManySkippedReplicates,
    InfeasibleSpec,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code and,
/// where one applies, the name of the offending field or variable.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message, std::string field = {})
        : std::runtime_error(message), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string &field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

} // namespace edpredict
