#include "cyclone/features.hpp"

#include "cyclone/io.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace cyclone {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_latlon(LatLon p) {
    if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 ||
        p.lon < -180.0 || p.lon >= 360.0) {
        throw std::invalid_argument("invalid cyclone centre coordinates");
    }
}

// Channels whose spread is below this are left untouched.
constexpr double kConstantChannelTol = 1e-12;

} // namespace

double haversine_km(LatLon a, LatLon b) {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = phi2 - phi1;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s = std::sin(dphi / 2) * std::sin(dphi / 2) +
                     std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) * std::sin(dlambda / 2);
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(s)));
}

Field tc_distance_field(const GridDomain& domain, LatLon tc_center) {
    check_latlon(tc_center);
    Field out(domain.rows(), domain.cols());
    for (int r = 0; r < domain.rows(); ++r) {
        for (int c = 0; c < domain.cols(); ++c) {
            out(r, c) = haversine_km(cell_latlon(domain, r, c), tc_center);
        }
    }
    return out;
}

Field passed_flag_field(std::span<const LatLon> track, const GridDomain& domain, double radius_km) {
    if (track.empty()) throw std::invalid_argument("passed_flag_field: empty track");
    Field nearest = Field::Constant(domain.rows(), domain.cols(), std::numeric_limits<double>::infinity());
    for (const LatLon& p : track) nearest = nearest.min(tc_distance_field(domain, p));
    return (nearest <= radius_km).cast<double>();
}

const std::vector<std::string>& feature_channel_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (int m = 1; m <= kMemberCount; ++m) n.push_back("member_" + std::to_string(m));
        for (const char* s : {"lon", "lat", "altitude", "dist_tc", "passed_flag"}) n.emplace_back(s);
        return n;
    }();
    return names;
}

FeatureStack assemble_stack(const Report& report, const GridDomain& domain,
                            std::span<const LatLon> track) {
    if (report.members.size() != static_cast<std::size_t>(kMemberCount)) {
        throw std::invalid_argument("assemble_stack: report " + report.index.to_string() + " has " +
                                    std::to_string(report.members.size()) + " members");
    }
    FeatureStack stack;
    stack.names = feature_channel_names();
    stack.channels.reserve(kFeatureChannels);
    for (const Field& m : report.members) {
        if (m.rows() != domain.rows() || m.cols() != domain.cols()) {
            throw std::invalid_argument("assemble_stack: member shape mismatch");
        }
        stack.channels.push_back(m);
    }
    stack.channels.push_back(longitude_field(domain));
    stack.channels.push_back(latitude_field(domain));
    stack.channels.push_back(domain.land_mask().select(domain.altitude(), 0.0));
    stack.channels.push_back(tc_distance_field(domain, report.tc_center));
    stack.channels.push_back(passed_flag_field(track, domain));
    return stack;
}

NormStats fit_standardizer(std::span<const FeatureStack> stacks) {
    if (stacks.empty()) throw std::invalid_argument("fit_standardizer: empty fitting set");
    const std::size_t n_channels = stacks.front().channels.size();
    NormStats stats(n_channels);
    for (std::size_t ch = 0; ch < n_channels; ++ch) {
        std::vector<double> values;
        for (const auto& s : stacks) {
            if (s.channels.size() != n_channels) {
                throw std::invalid_argument("fit_standardizer: channel count differs between stacks");
            }
            const Field& f = s.channels[ch];
            values.insert(values.end(), f.data(), f.data() + f.size());
        }
        const double n = static_cast<double>(values.size());
        const double mean = pairwise_sum(values) / n;
        std::vector<double> sq(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
        const double std = std::sqrt(pairwise_sum(sq) / n);
        if (std <= kConstantChannelTol * std::max(1.0, std::abs(mean))) {
            stats[ch] = {0.0, 1.0};
        } else {
            stats[ch] = {mean, std};
        }
    }
    return stats;
}

FeatureStack apply_standardizer(const FeatureStack& stack, const NormStats& stats) {
    if (stats.size() != stack.channels.size()) {
        throw std::invalid_argument("apply_standardizer: stats/channel count mismatch");
    }
    FeatureStack out;
    out.names = stack.names;
    out.norm_stats = stats;
    out.channels.reserve(stack.channels.size());
    for (std::size_t ch = 0; ch < stats.size(); ++ch) {
        out.channels.push_back((stack.channels[ch] - stats[ch].mean) / stats[ch].std);
    }
    return out;
}

FeatureStack invert_standardizer(const FeatureStack& stack) {
    if (stack.norm_stats.size() != stack.channels.size()) {
        throw std::invalid_argument("invert_standardizer: stack is not standardized");
    }
    FeatureStack out;
    out.names = stack.names;
    for (std::size_t ch = 0; ch < stack.channels.size(); ++ch) {
        const auto& s = stack.norm_stats[ch];
        out.channels.push_back(stack.channels[ch] * s.std + s.mean);
    }
    return out;
}

void write_feature_stack(const std::filesystem::path& dir, const FeatureStack& stack) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["channels"] = stack.names;
    nlohmann::json stats = nlohmann::json::array();
    for (const auto& s : stack.norm_stats) stats.push_back({{"mean", s.mean}, {"std", s.std}});
    manifest["norm_stats"] = stats;
    for (std::size_t ch = 0; ch < stack.channels.size(); ++ch) {
        char name[32];
        std::snprintf(name, sizeof name, "channel_%02zu.csv", ch + 1);
        write_field_csv(dir / name, stack.channels[ch]);
    }
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

FeatureStack read_feature_stack(const std::filesystem::path& dir, int rows, int cols) {
    const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    FeatureStack stack;
    stack.names = manifest.at("channels").get<std::vector<std::string>>();
    for (const auto& s : manifest.at("norm_stats")) {
        stack.norm_stats.push_back({s.at("mean").get<double>(), s.at("std").get<double>()});
    }
    for (std::size_t ch = 0; ch < stack.names.size(); ++ch) {
        char name[32];
        std::snprintf(name, sizeof name, "channel_%02zu.csv", ch + 1);
        stack.channels.push_back(read_field_csv(dir / name, rows, cols));
    }
    return stack;
}

} // namespace cyclone
