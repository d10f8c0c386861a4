#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"  // vendored nlohmann single header

#include "vds/model.hpp"

namespace vds {

inline constexpr const char* tool_version = "0.1.0";

/// Shortest locale-independent decimal form carrying at most 12 significant
/// digits. All numeric text the tool emits goes through here so outputs are
/// byte-stable across runs and locales.
[[nodiscard]] std::string format_number(double v);

/// v rounded to the nearest double representable by its 12-significant-digit
/// decimal form. Applied to numbers destined for JSON, where the serializer
/// would otherwise print a full round-trip expansion.
[[nodiscard]] double round_number(double v);

/// A cluster description plus the optional placement map used by trace
/// replay, where the users come from the trace rather than the cluster file.
struct ClusterFile {
    ClusterSpec spec;
    std::map<std::string, std::vector<std::string>> eligibility;
};

/// Reads the JSON cluster format:
///   {
///     "resources": ["cpu", ...],
///     "servers":   [{"id": "s1", "capacities": [12, 4]}, ...],
///     "users":     [{"id": "u1", "demand": [1, 0.5],
///                    "weight": 1.0, "eligible": ["s1"]}, ...],
///     "eligibility": {"trace-user": ["s1"], ...}
///   }
/// "users" may be absent or empty (simulation inputs carry no users);
/// "weight" defaults to 1 and "eligible" to every server; "eligibility"
/// restricts trace users during simulation. Structural problems throw
/// std::invalid_argument with the offending key in the message.
[[nodiscard]] ClusterFile read_cluster_json(std::istream& in);

/// read_cluster_json on a file path, folding open errors into the message.
[[nodiscard]] ClusterFile load_cluster_file(const std::string& path);

/// CSV "user,server,tasks" with one row per eligible pair, 12 significant
/// digits. Structural zeros (ineligible pairs) are omitted.
void write_allocation_csv(std::ostream& out, const Cluster& c, const Allocation& x);

/// Reads the write_allocation_csv format against a known cluster. Missing
/// eligible pairs default to zero tasks. Unknown ids, duplicate pairs,
/// negative or non-finite entries, and tasks on an ineligible pair are
/// rejected with std::invalid_argument.
[[nodiscard]] Allocation read_allocation_csv(std::istream& in, const Cluster& c);

/// read_allocation_csv on a file path, folding open errors into the message.
[[nodiscard]] Allocation load_allocation_file(const std::string& path, const Cluster& c);

/// Everything needed to rerun a command, embedded into each output bundle.
/// Timestamps are deliberately absent so reruns are byte-identical.
struct RunManifest {
    std::string command;
    std::vector<std::string> inputs;
    std::string mechanism;
    nlohmann::json params = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string output_dir;
    std::string version = tool_version;
};

[[nodiscard]] nlohmann::json manifest_json(const RunManifest& m);

}  // namespace vds
