#include "cyclone/synthgen.hpp"

#include "cyclone/features.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace cyclone {

namespace {

constexpr double kKmPerDegree = kEarthRadiusKm * std::numbers::pi / 180.0;

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t item) {
    return std::mt19937_64(mix(seed ^ mix(purpose * 1000003ULL + item)));
}

enum : std::uint64_t { kMemberParams = 1, kTruthNoise = 2, kMemberNoise = 3 };

LatLon displace(LatLon p, double north_km, double east_km) {
    const double coslat = std::cos(p.lat * std::numbers::pi / 180.0);
    return {p.lat + north_km / kKmPerDegree, p.lon + east_km / (kKmPerDegree * coslat)};
}

Field rain_field(const GridDomain& domain, LatLon center, double amplitude, double decay_km,
                 double terrain_per_km) {
    const Field dist = tc_distance_field(domain, center);
    const Field alt_km = domain.land_mask().select(domain.altitude(), 0.0) / 1000.0;
    const Field shape = std::isinf(decay_km) ? Field::Ones(domain.rows(), domain.cols()).eval()
                                             : (-dist / decay_km).exp().eval();
    return amplitude * shape * (1.0 + terrain_per_km * alt_km);
}

void put_latlon(nlohmann::json& j, const char* key, LatLon p) { j[key] = {p.lat, p.lon}; }

LatLon get_latlon(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw std::invalid_argument("spec: expected [lat, lon] pair");
    return {v[0], v[1]};
}

} // namespace

void ScenarioSpec::validate() const {
    if (n_reports < 2) throw std::invalid_argument("scenario spec: n_reports must be >= 2");
    if (!(rain.peak_mm >= 0.0)) throw std::invalid_argument("scenario spec: peak_mm must be >= 0");
    if (!(rain.decay_km > 0.0)) throw std::invalid_argument("scenario spec: decay_km must be > 0");
    if (!(rain.noise_sigma >= 0.0) || !(rain.terrain_factor_per_km >= 0.0)) {
        throw std::invalid_argument("scenario spec: negative noise or terrain factor");
    }
    if (!(ensemble.bias > 0.0) || !(ensemble.member_bias_spread >= 0.0) || !(ensemble.spread_mm >= 0.0) ||
        !(ensemble.track_error_km >= 0.0) || !(ensemble.terrain_capture >= 0.0)) {
        throw std::invalid_argument("scenario spec: invalid ensemble parameters");
    }
    if (hours_between_reports <= 0) throw std::invalid_argument("scenario spec: hours_between_reports must be > 0");
    parse_utc(start_time);
}

nlohmann::json to_json(const ScenarioSpec& spec) {
    nlohmann::json j;
    j["seed"] = spec.seed;
    j["n_reports"] = spec.n_reports;
    j["domain"] = {{"rows", spec.domain.rows}, {"cols", spec.domain.cols}, {"lat0", spec.domain.lat0},
                   {"lon0", spec.domain.lon0}, {"cell", spec.domain.cell}};
    nlohmann::json track;
    put_latlon(track, "start", spec.track.start);
    put_latlon(track, "end", spec.track.end);
    track["waypoints"] = nlohmann::json::array();
    for (const auto& w : spec.track.waypoints) track["waypoints"].push_back({w.lat, w.lon});
    j["track"] = track;
    j["rain"] = {{"peak_mm", spec.rain.peak_mm},
                 {"decay_km", spec.rain.decay_km},
                 {"terrain_factor_per_km", spec.rain.terrain_factor_per_km},
                 {"noise_sigma", spec.rain.noise_sigma}};
    const auto& e = spec.ensemble;
    j["ensemble"] = {{"bias", e.bias},
                     {"member_bias_spread", e.member_bias_spread},
                     {"spread_mm", e.spread_mm},
                     {"terrain_capture", e.terrain_capture},
                     {"track_offset_north_km", e.track_offset_north_km},
                     {"track_offset_east_km", e.track_offset_east_km},
                     {"track_error_km", e.track_error_km}};
    j["start_time"] = spec.start_time;
    j["hours_between_reports"] = spec.hours_between_reports;
    return j;
}

ScenarioSpec scenario_spec_from_json(const nlohmann::json& j) {
    // Missing keys keep their defaults so partial specs are accepted.
    ScenarioSpec s;
    auto get = [](const nlohmann::json& obj, const char* key, auto& target) {
        if (obj.contains(key)) target = obj.at(key).get<std::decay_t<decltype(target)>>();
    };
    get(j, "seed", s.seed);
    get(j, "n_reports", s.n_reports);
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        if (d.is_string()) {
            const auto name = d.get<std::string>();
            if (name == "paper") s.domain = DomainExtent::paper_scale();
            else if (name == "reduced") s.domain = DomainExtent::reduced();
            else throw std::invalid_argument("spec: unknown domain preset '" + name + "'");
        } else {
            get(d, "rows", s.domain.rows);
            get(d, "cols", s.domain.cols);
            get(d, "lat0", s.domain.lat0);
            get(d, "lon0", s.domain.lon0);
            get(d, "cell", s.domain.cell);
        }
    }
    if (j.contains("track")) {
        const auto& t = j.at("track");
        if (t.contains("start")) s.track.start = get_latlon(t.at("start"));
        if (t.contains("end")) s.track.end = get_latlon(t.at("end"));
        if (t.contains("waypoints")) {
            s.track.waypoints.clear();
            for (const auto& w : t.at("waypoints")) s.track.waypoints.push_back(get_latlon(w));
        }
    }
    if (j.contains("rain")) {
        const auto& r = j.at("rain");
        get(r, "peak_mm", s.rain.peak_mm);
        get(r, "decay_km", s.rain.decay_km);
        get(r, "terrain_factor_per_km", s.rain.terrain_factor_per_km);
        get(r, "noise_sigma", s.rain.noise_sigma);
    }
    if (j.contains("ensemble")) {
        const auto& e = j.at("ensemble");
        get(e, "bias", s.ensemble.bias);
        get(e, "member_bias_spread", s.ensemble.member_bias_spread);
        get(e, "spread_mm", s.ensemble.spread_mm);
        get(e, "terrain_capture", s.ensemble.terrain_capture);
        get(e, "track_offset_north_km", s.ensemble.track_offset_north_km);
        get(e, "track_offset_east_km", s.ensemble.track_offset_east_km);
        get(e, "track_error_km", s.ensemble.track_error_km);
    }
    get(j, "start_time", s.start_time);
    get(j, "hours_between_reports", s.hours_between_reports);
    s.validate();
    return s;
}

GridDomain make_island_domain(const DomainExtent& extent) {
    // Ellipse tilted 20 degrees east of north, ridge displaced to the east.
    constexpr double kCenterLat = 23.7;
    constexpr double kCenterLon = 120.95;
    constexpr double kSemiMajor = 1.65;
    constexpr double kSemiMinor = 0.62;
    constexpr double kTilt = 20.0 * std::numbers::pi / 180.0;
    constexpr double kRidgeShift = 0.2;
    constexpr double kPeak = 3500.0;
    constexpr double kProfileExponent = 2.65;

    Field altitude(extent.rows, extent.cols);
    for (int r = 0; r < extent.rows; ++r) {
        for (int c = 0; c < extent.cols; ++c) {
            const double dy = extent.lat0 + r * extent.cell - kCenterLat;
            const double dx = extent.lon0 + c * extent.cell - kCenterLon;
            const double along = dy * std::cos(kTilt) + dx * std::sin(kTilt);
            const double across = -dy * std::sin(kTilt) + dx * std::cos(kTilt);
            const double rho2 = (along / kSemiMajor) * (along / kSemiMajor) +
                                (across / kSemiMinor) * (across / kSemiMinor);
            if (rho2 > 1.0) {
                altitude(r, c) = kSeaSentinel;
                continue;
            }
            const double shifted = (across - kRidgeShift * kSemiMinor) / kSemiMinor;
            const double ridge2 = (along / kSemiMajor) * (along / kSemiMajor) + shifted * shifted;
            altitude(r, c) = 5.0 + kPeak * std::pow(std::max(0.0, 1.0 - ridge2), kProfileExponent);
        }
    }
    return GridDomain(extent, std::move(altitude));
}

std::vector<LatLon> track_positions(const TrackSpec& track, int n_reports) {
    if (n_reports < 1) throw std::invalid_argument("track_positions: n_reports must be >= 1");
    std::vector<LatLon> nodes{track.start};
    nodes.insert(nodes.end(), track.waypoints.begin(), track.waypoints.end());
    nodes.push_back(track.end);
    std::vector<double> cumulative{0.0};
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        cumulative.push_back(cumulative.back() + std::hypot(nodes[i].lat - nodes[i - 1].lat,
                                                            nodes[i].lon - nodes[i - 1].lon));
    }
    std::vector<LatLon> out;
    for (int k = 0; k < n_reports; ++k) {
        const double s = n_reports == 1 ? 0.0 : cumulative.back() * k / (n_reports - 1);
        std::size_t seg = 1;
        while (seg + 1 < nodes.size() && cumulative[seg] < s) ++seg;
        const double len = cumulative[seg] - cumulative[seg - 1];
        const double t = len > 0.0 ? (s - cumulative[seg - 1]) / len : 0.0;
        out.push_back({nodes[seg - 1].lat + t * (nodes[seg].lat - nodes[seg - 1].lat),
                       nodes[seg - 1].lon + t * (nodes[seg].lon - nodes[seg - 1].lon)});
    }
    return out;
}

Scenario generate_scenario(const ScenarioSpec& spec, const GridDomain& domain) {
    spec.validate();
    Scenario scenario{domain, {}, {}, {}};
    const auto track = track_positions(spec.track, spec.n_reports);
    scenario.truth.track = track;
    scenario.truth.noise_sigma = spec.rain.noise_sigma;

    const auto& e = domain.extent();
    const double lat_max = e.lat0 + (e.rows - 1) * e.cell;
    const double lon_max = e.lon0 + (e.cols - 1) * e.cell;
    bool any_inside = false;
    for (const auto& p : track) {
        any_inside |= p.lat >= e.lat0 && p.lat <= lat_max && p.lon >= e.lon0 && p.lon <= lon_max;
    }
    if (!any_inside) scenario.warnings.push_back("cyclone track never enters the domain");

    // Members keep their physics (amplitude factor, track displacement) for
    // the whole storm, so they are exchangeable but persistent.
    struct MemberLaw {
        double amplitude;
        double north_km;
        double east_km;
    };
    std::vector<MemberLaw> laws;
    {
        auto rng = stream(spec.seed, kMemberParams, 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        const double s = spec.ensemble.member_bias_spread;
        for (int m = 0; m < kMemberCount; ++m) {
            const double amp = spec.ensemble.bias * std::exp(s * normal(rng) - 0.5 * s * s);
            const double dn = spec.ensemble.track_offset_north_km + spec.ensemble.track_error_km * normal(rng);
            const double de = spec.ensemble.track_offset_east_km + spec.ensemble.track_error_km * normal(rng);
            laws.push_back({amp, dn, de});
        }
    }

    const UtcTime start = parse_utc(spec.start_time);
    const double sigma = spec.rain.noise_sigma;
    for (int k = 1; k <= spec.n_reports; ++k) {
        const LatLon center = track[static_cast<std::size_t>(k - 1)];
        Field expected = rain_field(domain, center, spec.rain.peak_mm, spec.rain.decay_km,
                                    spec.rain.terrain_factor_per_km);

        auto truth_rng = stream(spec.seed, kTruthNoise, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> normal(0.0, 1.0);
        Field obs(domain.rows(), domain.cols());
        for (Eigen::Index i = 0; i < obs.size(); ++i) {
            const double factor = std::exp(sigma * normal(truth_rng) - 0.5 * sigma * sigma);
            obs.data()[i] = std::max(0.0, expected.data()[i] * factor);
        }

        Report report;
        report.index = ReportIndex::whole(k);
        report.origin = ReportOrigin::Original;
        report.tc_center = center;
        report.valid_time = start + std::chrono::hours(spec.hours_between_reports * (k - 1));
        report.observation = std::move(obs);
        auto member_rng = stream(spec.seed, kMemberNoise, static_cast<std::uint64_t>(k));
        std::normal_distribution<double> member_normal(0.0, 1.0);
        for (const auto& law : laws) {
            Field member = rain_field(domain, displace(center, law.north_km, law.east_km),
                                      spec.rain.peak_mm * law.amplitude, spec.rain.decay_km,
                                      spec.rain.terrain_factor_per_km * spec.ensemble.terrain_capture);
            for (Eigen::Index i = 0; i < member.size(); ++i) {
                member.data()[i] = std::max(0.0, member.data()[i] + spec.ensemble.spread_mm * member_normal(member_rng));
            }
            report.members.push_back(std::move(member));
        }
        report.validate(domain);
        scenario.truth.expected.push_back(std::move(expected));
        scenario.reports.push_back(std::move(report));
    }
    return scenario;
}

GaussianField truth_distribution(const ScenarioTruth& truth, std::size_t position) {
    if (position >= truth.expected.size()) throw std::out_of_range("truth_distribution: no such report");
    const Field& m = truth.expected[position];
    const double s2 = truth.noise_sigma * truth.noise_sigma;
    const double rel_sd = std::sqrt(std::exp(s2) - 1.0);
    return {m, (m * rel_sd).max(kReferenceSigmaFloor)};
}

std::vector<CategoryTable> category_profile(std::span<const Report> reports, const GridDomain& domain) {
    std::vector<CategoryTable> out;
    out.reserve(reports.size());
    for (const auto& r : reports) out.push_back(tabulate_categories(r, domain));
    return out;
}

} // namespace cyclone
