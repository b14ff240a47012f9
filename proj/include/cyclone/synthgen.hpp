#pragma once

#include "cyclone/grid.hpp"
#include "cyclone/scoring.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cyclone {

struct TrackSpec {
    LatLon start{21.0, 125.2};
    LatLon end{26.4, 116.8};
    /// Optional interior points; the path is piecewise linear in lat/lon and
    /// reports are spaced evenly along it.
    std::vector<LatLon> waypoints;
};

struct RainSpec {
    double peak_mm = 380.0;
    double decay_km = 80.0;
    /// Fractional enhancement per km of altitude.
    double terrain_factor_per_km = 0.3;
    /// Standard deviation of the log of the multiplicative rain noise.
    double noise_sigma = 0.25;
};

struct EnsembleSpec {
    /// Mean multiplicative bias of the members relative to the truth model.
    double bias = 0.7;
    /// Log-scale spread of per-member amplitude factors.
    double member_bias_spread = 0.08;
    /// Additive per-cell noise, mm.
    double spread_mm = 6.0;
    /// Share of the terrain enhancement the members reproduce.
    double terrain_capture = 0.3;
    /// Systematic displacement of the ensemble track, km north / east.
    double track_offset_north_km = -35.0;
    double track_offset_east_km = 20.0;
    /// Per-member random track displacement, km.
    double track_error_km = 15.0;
};

struct ScenarioSpec {
    std::uint64_t seed = 2015;
    int n_reports = 15;
    DomainExtent domain = DomainExtent::paper_scale();
    TrackSpec track;
    RainSpec rain;
    EnsembleSpec ensemble;
    std::string start_time = "2015-08-05T18:00:00Z";
    int hours_between_reports = 6;

    void validate() const;
};

nlohmann::json to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_spec_from_json(const nlohmann::json& j);

/// Noise-free rain expectation per report, from which observations are drawn.
struct ScenarioTruth {
    std::vector<Field> expected;
    std::vector<LatLon> track;
    double noise_sigma = 0.0;
};

struct Scenario {
    GridDomain domain;
    std::vector<Report> reports;
    ScenarioTruth truth;
    std::vector<std::string> warnings;
};

/// Elongated island with a central ridge, sized like the paper-scale study
/// region: 1,286 land cells at 0.05 degrees, 618 of them below 500 m.
GridDomain make_island_domain(const DomainExtent& extent);

std::vector<LatLon> track_positions(const TrackSpec& track, int n_reports);

Scenario generate_scenario(const ScenarioSpec& spec, const GridDomain& domain);

/// Mean and standard deviation of the generator's observation law for
/// report `position` (0-based).
GaussianField truth_distribution(const ScenarioTruth& truth, std::size_t position);

std::vector<CategoryTable> category_profile(std::span<const Report> reports, const GridDomain& domain);

} // namespace cyclone
