#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fleetmind {

enum class Err {
    SequenceGap,
    DanglingReference,
    MalformedDelta,
    CorruptSnapshot,
    DuplicateId,
    OrphanCarrier,
    DuplicateObject,
    UnknownObject,
    InvalidTransform,
    UnknownNode,
    DegenerateConfiguration,
    NoConvergence,
    BehindCamera,
    DuplicateRobot,
    UnknownLocation,
    UnknownRobot,
    StaleTick,
    DetachMissingTool,
    UnknownTemplate,
    NoCapableRobot,
    TransportFailure,
    Timeout,
    Hallucination,
    RecoveryExhausted,
    BudgetExhausted,
    EmptyInput,
    InvalidPlan,
    CorruptScenario,
};

inline const char* err_name(Err code) {
    switch (code) {
        case Err::SequenceGap: return "SEQUENCE_GAP";
        case Err::DanglingReference: return "DANGLING_REFERENCE";
        case Err::MalformedDelta: return "MALFORMED_DELTA";
        case Err::CorruptSnapshot: return "CORRUPT_SNAPSHOT";
        case Err::DuplicateId: return "DUPLICATE_ID";
        case Err::OrphanCarrier: return "ORPHAN_CARRIER";
        case Err::DuplicateObject: return "DUPLICATE_OBJECT";
        case Err::UnknownObject: return "UNKNOWN_OBJECT";
        case Err::InvalidTransform: return "INVALID_TRANSFORM";
        case Err::UnknownNode: return "UNKNOWN_NODE";
        case Err::DegenerateConfiguration: return "DEGENERATE_CONFIGURATION";
        case Err::NoConvergence: return "NO_CONVERGENCE";
        case Err::BehindCamera: return "BEHIND_CAMERA";
        case Err::DuplicateRobot: return "DUPLICATE_ROBOT";
        case Err::UnknownLocation: return "UNKNOWN_LOCATION";
        case Err::UnknownRobot: return "UNKNOWN_ROBOT";
        case Err::StaleTick: return "STALE_TICK";
        case Err::DetachMissingTool: return "DETACH_MISSING_TOOL";
        case Err::UnknownTemplate: return "UNKNOWN_TEMPLATE";
        case Err::NoCapableRobot: return "NO_CAPABLE_ROBOT";
        case Err::TransportFailure: return "TRANSPORT_FAILURE";
        case Err::Timeout: return "TIMEOUT";
        case Err::Hallucination: return "HALLUCINATION";
        case Err::RecoveryExhausted: return "RECOVERY_EXHAUSTED";
        case Err::BudgetExhausted: return "BUDGET_EXHAUSTED";
        case Err::EmptyInput: return "EMPTY_INPUT";
        case Err::InvalidPlan: return "INVALID_PLAN";
        case Err::CorruptScenario: return "CORRUPT_SCENARIO";
    }
    return "UNKNOWN_ERROR";
}

/// Typed error used across the kernel. `details` carries structured extras
/// (e.g. validator violations for Hallucination).
class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& message, std::vector<std::string> details = {})
        : std::runtime_error(std::string(err_name(code)) + ": " + message),
          code_(code),
          details_(std::move(details)) {}

    Err code() const { return code_; }
    const std::vector<std::string>& details() const { return details_; }

private:
    Err code_;
    std::vector<std::string> details_;
};

}  // namespace fleetmind
