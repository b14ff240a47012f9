#pragma once

#include "cyclone/field.hpp"

#include <array>
#include <chrono>
#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cyclone {

inline constexpr int kMemberCount = 20;
inline constexpr double kSeaSentinel = -9999.0;
inline constexpr double kMountainAltitude = 500.0;

enum class TerrainClass { Sea, Plain, Mountain };

// Ordered by intensity; the numeric value is used as a table row.
enum class RainCategory { VeryLight = 0, Light = 1, Heavy = 2, BeyondHeavy = 3 };

inline constexpr std::array<double, 3> kCategoryBounds = {10.0, 80.0, 200.0};

struct LatLon {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const LatLon&, const LatLon&) = default;
};

/// Size and placement of a regular lat/lon lattice. Cell (row, col) is
/// centred at (lat0 + row * cell, lon0 + col * cell).
struct DomainExtent {
    int rows = 84;
    int cols = 70;
    double lat0 = 21.375;
    double lon0 = 119.55;
    double cell = 0.05;

    static DomainExtent paper_scale() { return {}; }
    /// Coarsened lattice over the same area, for desk-scale experiments.
    static DomainExtent reduced() { return {28, 24, 21.375, 119.55, 0.15}; }
};

class GridDomain {
public:
    /// Altitude in metres per cell; `kSeaSentinel` marks sea.
    GridDomain(DomainExtent extent, Field altitude);

    const DomainExtent& extent() const { return extent_; }
    int rows() const { return extent_.rows; }
    int cols() const { return extent_.cols; }
    Eigen::Index cell_count() const { return static_cast<Eigen::Index>(rows()) * cols(); }

    const Field& altitude() const { return altitude_; }
    const Mask& land_mask() const { return land_; }
    TerrainClass terrain(int row, int col) const;

    Eigen::Index land_count() const { return land_.count(); }
    Eigen::Index plain_count() const;
    Eigen::Index mountain_count() const;

private:
    DomainExtent extent_;
    Field altitude_;
    Mask land_;
};

LatLon cell_latlon(const GridDomain& domain, int row, int col);

/// Per-cell coordinate fields.
Field latitude_field(const GridDomain& domain);
Field longitude_field(const GridDomain& domain);

/// "rows cols lat0 lon0 cell" header followed by row-major altitudes.
GridDomain read_domain_file(const std::filesystem::path& path);
GridDomain parse_domain_text(const std::string& text, const std::string& label);
void write_domain_file(const std::filesystem::path& path, const GridDomain& domain);

// ---------------------------------------------------------------------------

/// Fractional report number stored in tenths, so 1.5 is exact.
class ReportIndex {
public:
    constexpr ReportIndex() = default;
    static constexpr ReportIndex from_tenths(int tenths) { return ReportIndex(tenths); }
    static constexpr ReportIndex whole(int k) { return ReportIndex(k * 10); }

    constexpr int tenths() const { return tenths_; }
    constexpr double value() const { return tenths_ / 10.0; }
    constexpr bool is_whole() const { return tenths_ % 10 == 0; }
    /// Largest whole report index not exceeding this one.
    constexpr int floor() const { return tenths_ >= 0 ? tenths_ / 10 : -((-tenths_ + 9) / 10); }

    std::string to_string() const;

    friend constexpr auto operator<=>(ReportIndex, ReportIndex) = default;

private:
    constexpr explicit ReportIndex(int tenths) : tenths_(tenths) {}
    int tenths_ = 10;
};

enum class ReportOrigin { Original = 0, Interpolated = 1, NoiseInjected = 2 };

const char* to_string(ReportOrigin origin);

using UtcTime = std::chrono::sys_seconds;

std::string format_utc(UtcTime t);
UtcTime parse_utc(const std::string& text);

struct Report {
    ReportIndex index;
    ReportOrigin origin = ReportOrigin::Original;
    std::vector<Field> members;
    std::optional<Field> observation;
    LatLon tc_center;
    UtcTime valid_time{};

    /// Throws std::invalid_argument when the report breaks its invariants
    /// (member count, shapes, non-negative finite precipitation).
    void validate(const GridDomain& domain) const;

    /// Copy without the verifying observation.
    Report forecast_only() const;
};

/// Ascending index; plain copies before noise-injected copies on ties.
bool report_order(const Report& a, const Report& b);

// ---------------------------------------------------------------------------

RainCategory classify_rain(double y_mm);
const char* to_string(RainCategory category);
const char* to_string(TerrainClass terrain);

/// Land-cell counts per (category, terrain); column 0 is plain, 1 mountain.
using CategoryTable = std::array<std::array<long, 2>, 4>;

CategoryTable tabulate_categories(const Report& report, const GridDomain& domain);

} // namespace cyclone
