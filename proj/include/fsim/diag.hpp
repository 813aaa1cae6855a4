#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fsim {

struct Span {
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
    std::uint32_t line = 0;   // 1-based; 0 = unknown
    std::uint32_t col = 0;
};

enum class Severity { Error, Warning };

enum class DiagCode {
    // parse
    UnexpectedToken,
    UnexpectedEnd,
    UnterminatedString,
    InvalidNumber,
    NestingTooDeep,
    MissingDeclaration,
    DuplicateDeclaration,
    UnknownFunction,
    BadArity,
    ReservedWord,
    // validate
    ScopeViolation,
    UndeclaredVariable,
    DuplicateId,
    NonNormalizedInit,
    ActionOutsideController,
    ViewWritesState,
    InvalidDomain,
    RewardNotIncrement,
    EmitOutsideView,
    UnknownColor,
    InvalidScore,
    UnknownTarget,
    // runtime / tooling
    UnknownVariable,
    UnknownAction,
    SteppedAfterDone,
    NotFinite,
    CapExceeded,
    SchemaError,
    EmptySpec,
    UnparsablePlan,
    InvalidVariableProposal,
    StepFailed,
    IncompatibleActionSets,
    DegenerateNormalization,
    ReplayMismatch,
    CassetteExhausted,
    ProviderTransport,
};

inline const char* to_string(DiagCode c) {
    switch (c) {
        case DiagCode::UnexpectedToken: return "UnexpectedToken";
        case DiagCode::UnexpectedEnd: return "UnexpectedEnd";
        case DiagCode::UnterminatedString: return "UnterminatedString";
        case DiagCode::InvalidNumber: return "InvalidNumber";
        case DiagCode::NestingTooDeep: return "NestingTooDeep";
        case DiagCode::MissingDeclaration: return "MissingDeclaration";
        case DiagCode::DuplicateDeclaration: return "DuplicateDeclaration";
        case DiagCode::UnknownFunction: return "UnknownFunction";
        case DiagCode::BadArity: return "BadArity";
        case DiagCode::ReservedWord: return "ReservedWord";
        case DiagCode::ScopeViolation: return "ScopeViolation";
        case DiagCode::UndeclaredVariable: return "UndeclaredVariable";
        case DiagCode::DuplicateId: return "DuplicateId";
        case DiagCode::NonNormalizedInit: return "NonNormalizedInit";
        case DiagCode::ActionOutsideController: return "ActionOutsideController";
        case DiagCode::ViewWritesState: return "ViewWritesState";
        case DiagCode::InvalidDomain: return "InvalidDomain";
        case DiagCode::RewardNotIncrement: return "RewardNotIncrement";
        case DiagCode::EmitOutsideView: return "EmitOutsideView";
        case DiagCode::UnknownColor: return "UnknownColor";
        case DiagCode::InvalidScore: return "InvalidScore";
        case DiagCode::UnknownTarget: return "UnknownTarget";
        case DiagCode::UnknownVariable: return "UnknownVariable";
        case DiagCode::UnknownAction: return "UnknownAction";
        case DiagCode::SteppedAfterDone: return "SteppedAfterDone";
        case DiagCode::NotFinite: return "NotFinite";
        case DiagCode::CapExceeded: return "CapExceeded";
        case DiagCode::SchemaError: return "SchemaError";
        case DiagCode::EmptySpec: return "EmptySpec";
        case DiagCode::UnparsablePlan: return "UnparsablePlan";
        case DiagCode::InvalidVariableProposal: return "InvalidVariableProposal";
        case DiagCode::StepFailed: return "StepFailed";
        case DiagCode::IncompatibleActionSets: return "IncompatibleActionSets";
        case DiagCode::DegenerateNormalization: return "DegenerateNormalization";
        case DiagCode::ReplayMismatch: return "ReplayMismatch";
        case DiagCode::CassetteExhausted: return "CassetteExhausted";
        case DiagCode::ProviderTransport: return "ProviderTransport";
    }
    return "Unknown";
}

struct Diagnostic {
    Severity severity = Severity::Error;
    DiagCode code = DiagCode::UnexpectedToken;
    std::string message;
    Span span;

    std::string render() const {
        std::string s = severity == Severity::Error ? "error" : "warning";
        s += "[";
        s += to_string(code);
        s += "]";
        if (line() > 0) {
            s += " at " + std::to_string(line()) + ":" + std::to_string(col());
        }
        s += ": " + message;
        return s;
    }
    std::uint32_t line() const { return span.line; }
    std::uint32_t col() const { return span.col; }
};

inline bool has_errors(const std::vector<Diagnostic>& ds) {
    for (const auto& d : ds)
        if (d.severity == Severity::Error) return true;
    return false;
}

inline std::string render_all(const std::vector<Diagnostic>& ds) {
    std::string out;
    for (const auto& d : ds) {
        out += d.render();
        out += '\n';
    }
    return out;
}

// Error thrown by operations whose contract is exception-based (runtime,
// structural edits, providers). Validation paths return Diagnostic lists
// instead.
class SimError : public std::runtime_error {
public:
    SimError(DiagCode code, const std::string& msg)
        : std::runtime_error(std::string(to_string(code)) + ": " + msg), code_(code) {}
    DiagCode code() const { return code_; }

private:
    DiagCode code_;
};

}  // namespace fsim
