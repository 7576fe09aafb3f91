#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "triflow/network.hpp"

namespace triflow {

struct ParseDiagnostic {
    enum class Severity { error, warning };
    Severity severity = Severity::error;
    int line = 0;
    std::string message;
};

struct ParseResult {
    std::optional<Network> network;
    std::vector<ParseDiagnostic> diagnostics;

    bool ok() const { return network.has_value(); }
    bool has_errors() const;
    std::string diagnostics_text() const;
};

/// Parses the native line-oriented network format (.net). Never throws on
/// malformed input; problems come back as diagnostics with line numbers.
ParseResult parse_native(std::string_view text);

/// Serializes a network so that parse_native reproduces it field-for-field.
std::string write_native(const Network& net);

struct DssOptions {
    double frequency = 50.0;  // Hz, used for cmatrix -> susceptance
};

/// Parses the supported OpenDSS-style subset (.dss): New Circuit,
/// New Linecode, New Line, New Load. Anything else is rejected.
ParseResult parse_dss_subset(std::string_view text, const DssOptions& options = {});

}  // namespace triflow
