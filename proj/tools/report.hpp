#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmlcqr/dml.hpp"
#include "dmlcqr/sim.hpp"

namespace dmlcqr::cli {

/// Header block carried by every output file.
struct RunHeader {
    std::string command;
    std::string version;
    std::string config;  ///< canonical key=value text, one per line
    std::uint64_t seed = 0;

    std::string hash() const;
    nlohmann::ordered_json json() const;
    /// "# key: value" lines for CSV and text outputs.
    std::vector<std::string> comment_lines() const;
};

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

nlohmann::ordered_json estimate_record(const DmlEstimate& est);
nlohmann::ordered_json replication_record(const ReplicationRecord& rec);
nlohmann::ordered_json error_record(const std::string& kind, const std::string& message);

/// Writes the file in one go; throws IoError on failure.
void write_file(const std::string& path, const std::string& body);

std::string summary_table(const std::vector<DmlEstimate>& results);
std::string mc_table(const McReport& report);

}  // namespace dmlcqr::cli
