#pragma once

#include <string>
#include <string_view>

namespace triflow {

std::string sha256_hex(std::string_view data);

/// Provenance header embedded in every output file. The timestamp line
/// is excluded from reproducibility comparisons.
struct RunManifest {
    std::string input_path;
    std::string content_sha256;
    std::string command;
    std::string options;
    std::string version;
    std::string timestamp;  // ISO-8601 UTC

    static RunManifest make(const std::string& input_path, std::string_view input_content,
                            const std::string& command, const std::string& options);

    /// "# manifest ..." plus "# generated <timestamp>".
    std::string comment_lines() const;
};

std::string triflow_version();

}  // namespace triflow
