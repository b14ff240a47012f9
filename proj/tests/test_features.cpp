#include "helpers.hpp"

#include "cyclone/features.hpp"
#include "cyclone/synthgen.hpp"

#include <cmath>
#include <limits>
#include <numbers>

using namespace cyclone;

namespace {

// Spherical law of cosines, an independent route to the same distance.
double cosine_law_km(LatLon a, LatLon b) {
    const double d = std::numbers::pi / 180.0;
    const double c = std::sin(a.lat * d) * std::sin(b.lat * d) +
                     std::cos(a.lat * d) * std::cos(b.lat * d) * std::cos((b.lon - a.lon) * d);
    return kEarthRadiusKm * std::acos(std::clamp(c, -1.0, 1.0));
}

} // namespace

TEST_CASE("haversine distances") {
    CHECK(haversine_km({23.5, 121.0}, {23.5, 121.0}) == 0.0);
    CHECK(haversine_km({23.5, 121.0}, {23.5, 122.0}) == doctest::Approx(cosine_law_km({23.5, 121.0}, {23.5, 122.0})).epsilon(1e-9));
    CHECK(std::abs(haversine_km({23.5, 121.0}, {23.5, 122.0}) - 102.0) < 0.5);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> lat(-89.0, 89.0), lon(-180.0, 180.0);
    for (int i = 0; i < 500; ++i) {
        const LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)};
        const double h = haversine_km(a, b);
        CHECK(h <= std::numbers::pi * kEarthRadiusKm + 1e-9);
        CHECK(h == doctest::Approx(haversine_km(b, a)));
        CHECK(h == doctest::Approx(cosine_law_km(a, b)).epsilon(1e-6));
    }
}

TEST_CASE("distance field is zero at the centre cell and symmetric") {
    const GridDomain d = make_island_domain(DomainExtent::reduced());
    const LatLon centre = cell_latlon(d, 10, 12);
    const Field dist = tc_distance_field(d, centre);
    CHECK(dist(10, 12) == 0.0);
    for (int r = 0; r < d.rows(); r += 3) {
        for (int c = 0; c < d.cols(); c += 4) {
            CHECK(dist(r, c) == doctest::Approx(haversine_km(centre, cell_latlon(d, r, c))));
        }
    }
    CHECK_THROWS(tc_distance_field(d, {95.0, 120.0}));
}

TEST_CASE("passed flag") {
    const GridDomain d = make_island_domain(DomainExtent::reduced());
    const std::vector<LatLon> offshore{{10.0, 150.0}};
    CHECK((passed_flag_field(offshore, d, 50.0) == 0.0).all());
    CHECK((passed_flag_field(offshore, d, std::numeric_limits<double>::infinity()) == 1.0).all());
    CHECK_THROWS(passed_flag_field(std::span<const LatLon>{}, d));

    std::vector<LatLon> track;
    for (int i = 0; i < 8; ++i) track.push_back({21.0 + 0.5 * i, 124.0 - 0.6 * i});
    const Field flags = passed_flag_field(track, d, 100.0);
    for (int r = 0; r < d.rows(); ++r) {
        for (int c = 0; c < d.cols(); ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& p : track) best = std::min(best, haversine_km(p, cell_latlon(d, r, c)));
            CHECK(flags(r, c) == (best <= 100.0 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("feature stack layout") {
    const GridDomain d = make_island_domain(DomainExtent::paper_scale());
    ScenarioSpec spec;
    spec.n_reports = 3;
    const Scenario s = generate_scenario(spec, d);
    const std::vector<LatLon> track{s.reports[0].tc_center, s.reports[1].tc_center};
    const FeatureStack a = assemble_stack(s.reports[0], d, std::span(track).first(1));
    const FeatureStack b = assemble_stack(s.reports[1], d, track);
    REQUIRE(a.channels.size() == 25);
    CHECK(a.channels[0].rows() == 84);
    CHECK(a.channels[0].cols() == 70);
    CHECK(a.names == feature_channel_names());
    for (int ch : {kLonChannel, kLatChannel, kAltitudeChannel}) CHECK((a.channels[ch] == b.channels[ch]).all());
    CHECK((b.channels[kDistTcChannel] == tc_distance_field(d, s.reports[1].tc_center)).all());
    CHECK((b.channels[kPassedChannel] == passed_flag_field(track, d)).all());
    CHECK((a.channels[3] == s.reports[0].members[3]).all());
    CHECK((a.channels[kAltitudeChannel] >= 0.0).all());

    Report short_report = s.reports[0];
    short_report.members.pop_back();
    CHECK_THROWS_AS(assemble_stack(short_report, d, track), std::invalid_argument);
}

TEST_CASE("standardizer") {
    const GridDomain d = testing::toy_domain();
    std::vector<FeatureStack> stacks;
    for (int i = 1; i <= 3; ++i) {
        FeatureStack s = assemble_stack(testing::random_report(d, i, i), d, std::vector<LatLon>{{22.3, 120.2}});
        s.channels[5].setConstant(7.0);
        stacks.push_back(s);
    }
    const NormStats stats = fit_standardizer(stacks);
    REQUIRE(stats.size() == 25);
    CHECK(stats[5].mean == 0.0);
    CHECK(stats[5].std == 1.0);
    std::vector<FeatureStack> standardized;
    for (const auto& s : stacks) standardized.push_back(apply_standardizer(s, stats));
    CHECK((standardized[0].channels[5] == 7.0).all());

    const NormStats again = fit_standardizer(standardized);
    for (std::size_t c = 0; c < again.size(); ++c) {
        if (c == 5) continue;
        CHECK(std::abs(again[c].mean) < 1e-12);
        CHECK(again[c].std == doctest::Approx(1.0).epsilon(1e-12));
    }
    const FeatureStack back = invert_standardizer(standardized[1]);
    REQUIRE(back.channels.size() == stacks[1].channels.size());
    for (std::size_t c = 0; c < back.channels.size(); ++c) {
        CHECK((back.channels[c] - stacks[1].channels[c]).abs().maxCoeff() < 1e-10);
    }
    CHECK(standardized[1].names == stacks[1].names);
}

TEST_CASE("feature stack files round trip") {
    const GridDomain d = testing::toy_domain();
    const FeatureStack s =
        assemble_stack(testing::random_report(d, 1, 9), d, std::vector<LatLon>{{22.3, 120.2}});
    const FeatureStack z = apply_standardizer(s, fit_standardizer(std::span(&s, 1)));
    testing::TempDir tmp("stack");
    write_feature_stack(tmp.path / "stack", z);
    const FeatureStack back = read_feature_stack(tmp.path / "stack", d.rows(), d.cols());
    CHECK(back.names == z.names);
    REQUIRE(back.norm_stats.size() == z.norm_stats.size());
    for (std::size_t c = 0; c < z.channels.size(); ++c) CHECK((back.channels[c] == z.channels[c]).all());
}
