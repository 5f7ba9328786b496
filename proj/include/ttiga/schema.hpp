#pragma once

// Validation of the files the CLI writes: report JSON, aggregate CSV, field
// dumps, experiment configs and TT containers.

#include <filesystem>
#include <string>
#include <vector>

namespace ttiga {

enum class ArtifactKind { report, config, csv, crossover_csv, field, tt, bench_summary, cache_manifest, unknown };

std::string to_string(ArtifactKind kind);

/// Guesses the kind from extension and content.
ArtifactKind detect_artifact(const std::filesystem::path& path);

/// Problems found; empty when the file is valid.
std::vector<std::string> check_artifact(const std::filesystem::path& path);

inline constexpr const char* kCrossoverHeader = "elems,dofs,t_tt_s,t_reference_s,reference_status,u_error,time_ratio";

} // namespace ttiga
