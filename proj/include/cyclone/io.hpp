#pragma once

#include "cyclone/grid.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace cyclone {

inline constexpr const char* kEngineVersion = "0.1.0";
inline constexpr const char* kManifestName = "manifest.json";

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// One line per row, comma separated, shortest round-trip decimal.
void write_field_csv(const std::filesystem::path& path, const Field& field);
Field read_field_csv(const std::filesystem::path& path, int rows, int cols);
Field parse_field_csv(const std::string& text, int rows, int cols, const std::string& label);
std::string format_double(double v);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Hash of every regular file below `dir` (relative path + content hash),
/// skipping run manifests, which carry wall-clock time.
std::string tree_hash(const std::filesystem::path& dir);

/// e.g. report_0015, report_00015 (1.5), report_0015n.
std::string report_dir_name(ReportIndex index, ReportOrigin origin);
/// Inverse of report_dir_name; origin is Original or Interpolated by
/// whether the index is whole, NoiseInjected when suffixed with 'n'.
std::optional<std::pair<ReportIndex, ReportOrigin>> parse_report_dir_name(const std::string& name);

void write_report_dir(const std::filesystem::path& dir, const Report& report);

/// Writes into a sibling temporary directory; `commit` renames it into
/// place, otherwise the temporary is removed on destruction.
class StagingDir {
public:
    explicit StagingDir(std::filesystem::path final_path);
    ~StagingDir();
    StagingDir(const StagingDir&) = delete;
    StagingDir& operator=(const StagingDir&) = delete;

    const std::filesystem::path& path() const { return staging_; }
    void commit();

private:
    std::filesystem::path final_;
    std::filesystem::path staging_;
    bool committed_ = false;
};

struct RunManifest {
    std::string stage;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    double wall_time_s = 0.0;
};

/// Writes manifest.json into `dir`, hashing every other file there.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);

/// Read access to a stage output directory. Each file read is checked
/// against the directory manifest and recorded in an access log.
class VerifiedDir {
public:
    explicit VerifiedDir(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    const nlohmann::json& manifest() const { return manifest_; }
    bool contains(const std::string& relative) const { return hashes_.count(relative) != 0; }
    std::vector<std::string> listed() const;

    std::string read(const std::string& relative) const;
    std::vector<std::string> accessed() const;

private:
    std::filesystem::path dir_;
    nlohmann::json manifest_;
    std::map<std::string, std::string> hashes_;
    mutable std::mutex mutex_;
    mutable std::vector<std::string> accessed_;
};

/// A scenario (or augmented scenario) directory: domain.txt plus one
/// directory per report.
class ScenarioStore {
public:
    explicit ScenarioStore(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return files_.dir(); }
    const GridDomain& domain() const { return *domain_; }
    const VerifiedDir& files() const { return files_; }

    /// Report directories present, in report order. Listing names does not
    /// read any report data.
    std::vector<std::pair<ReportIndex, ReportOrigin>> listing() const;
    std::vector<ReportIndex> original_indices() const;

    Report read_report(ReportIndex index, ReportOrigin origin, bool with_observation) const;
    /// Cyclone centre from the report metadata only.
    LatLon read_center(ReportIndex index, ReportOrigin origin) const;

    std::vector<std::string> accessed() const { return files_.accessed(); }

private:
    nlohmann::json read_meta(ReportIndex index, ReportOrigin origin) const;

    VerifiedDir files_;
    std::optional<GridDomain> domain_;
};

} // namespace cyclone
