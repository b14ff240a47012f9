#include "cyclone/evaluation.hpp"

#include "cyclone/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cyclone {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

} // namespace

Field exceedance_probability(const GaussianField& field, double threshold_mm) {
    Field out(field.mu.rows(), field.mu.cols());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        const double z = (threshold_mm - field.mu.data()[i]) / field.sigma.data()[i];
        // Upper tail via erfc keeps precision for large z.
        out.data()[i] = 0.5 * std::erfc(z / std::numbers::sqrt2);
    }
    return out;
}

std::vector<ExceedanceCell> exceedance_map(const Field& probabilities, const GridDomain& domain, double cutoff) {
    if (probabilities.rows() != domain.rows() || probabilities.cols() != domain.cols()) {
        throw std::invalid_argument("exceedance_map: shape mismatch");
    }
    std::vector<ExceedanceCell> out;
    for (int r = 0; r < domain.rows(); ++r) {
        for (int c = 0; c < domain.cols(); ++c) {
            if (domain.land_mask()(r, c) && probabilities(r, c) > cutoff) out.push_back({r, c, probabilities(r, c)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ExceedanceCell& a, const ExceedanceCell& b) { return a.p > b.p; });
    return out;
}

SkillTable build_skill_table(const GaussianField& model, const GaussianField& reference, const Report& verifying,
                             const GridDomain& domain) {
    if (!verifying.observation) {
        throw std::invalid_argument("build_skill_table: report " + verifying.index.to_string() + " has no observation");
    }
    const Field model_crps = crps_field(model, *verifying.observation);
    const Field ref_crps = crps_field(reference, *verifying.observation);
    const Field skill = crpss(model_crps, ref_crps);
    SkillTable table;
    for (int r = 0; r < domain.rows(); ++r) {
        for (int c = 0; c < domain.cols(); ++c) {
            const TerrainClass t = domain.terrain(r, c);
            if (t == TerrainClass::Sea) continue;
            table.push_back({verifying.index, r, c, t, classify_rain((*verifying.observation)(r, c)), model_crps(r, c),
                             ref_crps(r, c), skill(r, c)});
        }
    }
    return table;
}

BoxSummary box_summary(std::vector<double> values) {
    BoxSummary s;
    s.n = values.size();
    if (values.empty()) {
        s.whisker_low = s.q1 = s.median = s.q3 = s.whisker_high = kNaN;
        return s;
    }
    std::sort(values.begin(), values.end());
    s.q1 = quantile_sorted(values, 0.25);
    s.median = quantile_sorted(values, 0.5);
    s.q3 = quantile_sorted(values, 0.75);
    const double iqr = s.q3 - s.q1;
    const double lo_fence = s.q1 - 1.5 * iqr;
    const double hi_fence = s.q3 + 1.5 * iqr;
    s.whisker_low = *std::find_if(values.begin(), values.end(), [&](double v) { return v >= lo_fence; });
    s.whisker_high = *std::find_if(values.rbegin(), values.rend(), [&](double v) { return v <= hi_fence; });
    return s;
}

std::map<Stratum, BoxSummary> crpss_by_stratum(const SkillTable& table) {
    std::map<Stratum, std::vector<double>> groups;
    for (int cat = 0; cat < 4; ++cat) {
        for (TerrainClass t : {TerrainClass::Plain, TerrainClass::Mountain}) {
            groups[{static_cast<RainCategory>(cat), t}];
        }
    }
    for (const auto& row : table) {
        if (row.terrain == TerrainClass::Sea || std::isnan(row.crpss)) continue;
        groups[{row.category, row.terrain}].push_back(row.crpss);
    }
    std::map<Stratum, BoxSummary> out;
    for (auto& [key, values] : groups) out[key] = box_summary(std::move(values));
    return out;
}

std::size_t ReliabilityBins::total() const {
    std::size_t n = 0;
    for (const auto& b : bins) n += b.count;
    return n;
}

ReliabilityBins reliability_diagram(std::span<const double> probabilities, std::span<const double> observations,
                                    double threshold_mm, int n_bins) {
    if (probabilities.size() != observations.size()) {
        throw std::invalid_argument("reliability_diagram: probabilities and observations differ in length");
    }
    if (n_bins < 1) throw std::invalid_argument("reliability_diagram: need at least one bin");
    std::vector<std::vector<double>> p_in(static_cast<std::size_t>(n_bins));
    std::vector<std::size_t> events(static_cast<std::size_t>(n_bins), 0);
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("reliability_diagram: probability outside [0, 1]");
        const auto b = std::min(static_cast<std::size_t>(p * n_bins), static_cast<std::size_t>(n_bins - 1));
        p_in[b].push_back(p);
        if (observations[i] > threshold_mm) ++events[b];
    }
    ReliabilityBins out;
    for (int b = 0; b < n_bins; ++b) {
        const auto& ps = p_in[static_cast<std::size_t>(b)];
        const double n = static_cast<double>(ps.size());
        out.bins.push_back({static_cast<double>(b) / n_bins, static_cast<double>(b + 1) / n_bins,
                            ps.empty() ? kNaN : pairwise_sum(ps) / n,
                            ps.empty() ? kNaN : static_cast<double>(events[static_cast<std::size_t>(b)]) / n,
                            ps.size()});
    }
    return out;
}

double mean_calibration_error(const ReliabilityBins& bins) {
    double weighted = 0.0;
    std::size_t n = 0;
    for (const auto& b : bins.bins) {
        if (b.count == 0) continue;
        weighted += static_cast<double>(b.count) * std::abs(b.observed_frequency - b.mean_probability);
        n += b.count;
    }
    if (n == 0) throw std::invalid_argument("mean_calibration_error: no populated bins");
    return weighted / static_cast<double>(n);
}

void write_skill_table_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, SkillTable>>& tables) {
    std::string text = "variant,report_index,row,col,terrain,category,crps_model,crps_ref,crpss\n";
    for (const auto& [label, table] : tables) {
        for (const auto& r : table) {
            text += label + "," + r.report.to_string() + "," + std::to_string(r.row) + "," + std::to_string(r.col) +
                    "," + to_string(r.terrain) + "," + to_string(r.category) + "," + csv_number(r.crps_model) + "," +
                    csv_number(r.crps_ref) + "," + csv_number(r.crpss) + "\n";
        }
    }
    write_text_file(path, text);
}

void write_crpss_summary_csv(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::map<Stratum, BoxSummary>>>& summaries) {
    std::string text = "variant,category,terrain,n,whisker_low,q1,median,q3,whisker_high\n";
    for (const auto& [label, strata] : summaries) {
        for (const auto& [key, s] : strata) {
            text += label + "," + to_string(key.first) + "," + to_string(key.second) + "," + std::to_string(s.n) + "," +
                    csv_number(s.whisker_low) + "," + csv_number(s.q1) + "," + csv_number(s.median) + "," +
                    csv_number(s.q3) + "," + csv_number(s.whisker_high) + "\n";
        }
    }
    write_text_file(path, text);
}

void write_exceedance_csv(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::vector<ExceedanceCell>>>& maps) {
    std::string text = "variant,row,col,p\n";
    for (const auto& [label, cells] : maps) {
        for (const auto& c : cells) {
            text += label + "," + std::to_string(c.row) + "," + std::to_string(c.col) + "," + format_double(c.p) + "\n";
        }
    }
    write_text_file(path, text);
}

void write_reliability_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<std::string, ReliabilityBins>>& diagrams) {
    std::string text = "variant,bin_lower,bin_upper,mean_probability,observed_frequency,count\n";
    for (const auto& [label, d] : diagrams) {
        for (const auto& b : d.bins) {
            text += label + "," + format_double(b.lower) + "," + format_double(b.upper) + "," +
                    csv_number(b.mean_probability) + "," + csv_number(b.observed_frequency) + "," +
                    std::to_string(b.count) + "\n";
        }
    }
    write_text_file(path, text);
}

} // namespace cyclone
