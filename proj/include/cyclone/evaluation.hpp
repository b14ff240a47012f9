#pragma once

#include "cyclone/scoring.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cyclone {

inline constexpr double kExceedanceThresholdMm = 200.0;

/// P(Y > threshold) per cell under the Gaussian forecast.
Field exceedance_probability(const GaussianField& field, double threshold_mm);

struct ExceedanceCell {
    int row;
    int col;
    double p;
};

/// Land cells with p > cutoff, most probable first (ties by row, col).
std::vector<ExceedanceCell> exceedance_map(const Field& probabilities, const GridDomain& domain,
                                           double cutoff = 0.5);

struct SkillRow {
    ReportIndex report;
    int row;
    int col;
    TerrainClass terrain;
    RainCategory category;
    double crps_model;
    double crps_ref;
    double crpss; ///< NaN when crps_ref is zero
};

using SkillTable = std::vector<SkillRow>;

/// One row per land cell of the verifying report.
SkillTable build_skill_table(const GaussianField& model, const GaussianField& reference, const Report& verifying,
                             const GridDomain& domain);

/// Box-plot summary with Tukey whiskers (most extreme points within 1.5 IQR
/// of the quartiles). Quartiles interpolate linearly between order
/// statistics.
struct BoxSummary {
    std::size_t n = 0;
    double whisker_low = 0.0;
    double q1 = 0.0;
    double median = 0.0;
    double q3 = 0.0;
    double whisker_high = 0.0;
};

BoxSummary box_summary(std::vector<double> values);

using Stratum = std::pair<RainCategory, TerrainClass>;

/// Every (category, plain/mountain) stratum, empty ones with n = 0. Rows
/// with undefined CRPSS are skipped.
std::map<Stratum, BoxSummary> crpss_by_stratum(const SkillTable& table);

struct ReliabilityBin {
    double lower;
    double upper;
    double mean_probability; ///< NaN when empty
    double observed_frequency; ///< NaN when empty
    std::size_t count;
};

struct ReliabilityBins {
    std::vector<ReliabilityBin> bins;
    std::size_t total() const;
};

/// Equal-width bins on [0, 1]; the last bin is closed on the right.
ReliabilityBins reliability_diagram(std::span<const double> probabilities, std::span<const double> observations,
                                    double threshold_mm = kExceedanceThresholdMm, int n_bins = 10);

/// Count-weighted mean |observed frequency - mean probability| over
/// populated bins.
double mean_calibration_error(const ReliabilityBins& bins);

// CSV writers for plot-ready output; `label` fills the leading variant column.
void write_skill_table_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, SkillTable>>& tables);
void write_crpss_summary_csv(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::map<Stratum, BoxSummary>>>& summaries);
void write_exceedance_csv(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::vector<ExceedanceCell>>>& maps);
void write_reliability_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, ReliabilityBins>>& diagrams);

} // namespace cyclone
