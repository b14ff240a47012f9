#pragma once

#include "cyclone/grid.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cyclone {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPassedRadiusKm = 100.0;

inline constexpr int kFeatureChannels = 25;
inline constexpr int kLonChannel = 20;
inline constexpr int kLatChannel = 21;
inline constexpr int kAltitudeChannel = 22;
inline constexpr int kDistTcChannel = 23;
inline constexpr int kPassedChannel = 24;

/// Great-circle distance on a spherical Earth.
double haversine_km(LatLon a, LatLon b);

/// Distance from every cell centre to the cyclone centre.
Field tc_distance_field(const GridDomain& domain, LatLon tc_center);

/// 1 where the track has come within `radius_km` of the cell, else 0.
Field passed_flag_field(std::span<const LatLon> track, const GridDomain& domain,
                        double radius_km = kPassedRadiusKm);

struct ChannelStats {
    double mean = 0.0;
    double std = 1.0;
};

using NormStats = std::vector<ChannelStats>;

struct FeatureStack {
    std::vector<Field> channels;
    std::vector<std::string> names;
    /// Empty until the stack has been standardized.
    NormStats norm_stats;
};

const std::vector<std::string>& feature_channel_names();

/// Members, then lon, lat, altitude (sea as 0 m), distance to the
/// cyclone centre and the passed-neighbourhood flag. `track` is the centre
/// history up to and including this report.
FeatureStack assemble_stack(const Report& report, const GridDomain& domain,
                            std::span<const LatLon> track);

NormStats fit_standardizer(std::span<const FeatureStack> stacks);
FeatureStack apply_standardizer(const FeatureStack& stack, const NormStats& stats);
FeatureStack invert_standardizer(const FeatureStack& stack);

/// channel_XX.csv per channel plus manifest.json with names and stats.
void write_feature_stack(const std::filesystem::path& dir, const FeatureStack& stack);
FeatureStack read_feature_stack(const std::filesystem::path& dir, int rows, int cols);

} // namespace cyclone
