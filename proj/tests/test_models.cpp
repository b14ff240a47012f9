#include "helpers.hpp"

#include "cyclone/models.hpp"
#include "cyclone/synthgen.hpp"

#include <algorithm>
#include <cmath>

using namespace cyclone;

namespace {

struct Fixture {
    GridDomain domain = make_island_domain(DomainExtent::reduced());
    Scenario scenario = generate_scenario(spec(), domain);
    static ScenarioSpec spec() {
        ScenarioSpec s;
        s.seed = 5;
        s.domain = DomainExtent::reduced();
        return s;
    }
    std::span<const Report> history(int k) const { return std::span(scenario.reports).first(k - 1); }
    const Report& target(int k) const { return scenario.reports[k - 1]; }
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

ModelConfig quick(Variant v, int epochs = 5) {
    ModelConfig c = ModelConfig::for_variant(v, 3);
    c.epochs = epochs;
    return c;
}

bool same(const GaussianField& a, const GaussianField& b) {
    return (a.mu == b.mu).all() && (a.sigma == b.sigma).all();
}

GaussianField predict_at(const TrainedModel& m, int k) {
    const auto& f = fixture();
    return m.predict(f.target(k), f.domain, target_track(f.history(k), f.target(k)));
}

} // namespace

TEST_CASE("variant names and config flags") {
    for (Variant v : kAllVariants) CHECK(parse_variant(to_string(v)) == v);
    CHECK_THROWS_AS(parse_variant("cnn_all"), std::invalid_argument);
    const auto cnn = ModelConfig::for_variant(Variant::Cnn);
    const auto dyn = ModelConfig::for_variant(Variant::CnnDyn);
    const auto aug = ModelConfig::for_variant(Variant::CnnAug);
    const auto all = ModelConfig::for_variant(Variant::CnnAll);
    CHECK((!cnn.use_geo_dyn && !cnn.use_augmentation));
    CHECK((dyn.use_geo_dyn && !dyn.use_augmentation));
    CHECK((!aug.use_geo_dyn && aug.use_augmentation));
    CHECK((all.use_geo_dyn && all.use_augmentation));
    CHECK(!ModelConfig::for_variant(Variant::Members).trainable());
    const auto back = model_config_from_json(to_json(all));
    CHECK(back.variant == all.variant);
    CHECK(back.seed == all.seed);
    CHECK(back.noise_scale == all.noise_scale);
    CHECK(back.epochs == all.epochs);
    ModelConfig bad = all;
    bad.epochs = -1;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("members baseline") {
    const GridDomain d = testing::toy_domain();
    Report r = testing::random_report(d, 1, 1);
    for (auto& m : r.members) m.setConstant(7.0);
    const auto flat = predict_members_baseline(r);
    CHECK((flat.mu == 7.0).all());
    CHECK((flat.sigma == kReferenceSigmaFloor).all());

    for (int k = 0; k < kMemberCount; ++k) r.members[k].setConstant(k);
    const auto ramp = predict_members_baseline(r);
    CHECK((ramp.mu == 9.5).all());
    // Sample variance of 0..19 is 35.
    CHECK((ramp.sigma - std::sqrt(35.0)).abs().maxCoeff() < 1e-12);

    Report shuffled = testing::random_report(d, 1, 2);
    const auto before = predict_members_baseline(shuffled);
    std::reverse(shuffled.members.begin(), shuffled.members.end());
    const auto after = predict_members_baseline(shuffled);
    CHECK((before.mu - after.mu).abs().maxCoeff() < 1e-12);
    CHECK((before.sigma - after.sigma).abs().maxCoeff() < 1e-12);
}

TEST_CASE("cnn-all training lowers the loss and is deterministic") {
    const auto& f = fixture();
    const auto a = train_model(quick(Variant::CnnAll, 20), f.history(8), f.domain);
    CHECK(a.summary().final_loss < a.summary().initial_loss);
    // 7 originals -> 26 augmented reports, one step each per epoch.
    CHECK(a.summary().steps == 20 * 26);
    CHECK(a.summary().training_reports.size() == 26);
    const auto b = train_model(quick(Variant::CnnAll, 20), f.history(8), f.domain);
    CHECK(a.to_json() == b.to_json());
    const auto pa = predict_at(a, 8);
    CHECK(same(pa, predict_at(b, 8)));
    CHECK_NOTHROW(pa.validate());
    CHECK((pa.sigma >= kSigmaFloorMm).all());
}

TEST_CASE("zero epochs leaves the initial network") {
    const auto& f = fixture();
    const auto m = train_model(quick(Variant::Cnn, 0), f.history(6), f.domain);
    CHECK(m.summary().steps == 0);
    CHECK(m.summary().final_loss == m.summary().initial_loss);
}

TEST_CASE("input channels per variant") {
    const auto& f = fixture();
    CHECK(train_model(quick(Variant::Cnn, 1), f.history(6), f.domain).input_stats().size() == 20);
    CHECK(train_model(quick(Variant::CnnDyn, 1), f.history(6), f.domain).input_stats().size() == 25);
    CHECK(train_model(quick(Variant::Fcn, 1), f.history(6), f.domain).input_stats().size() == 2);
    const auto aug = train_model(quick(Variant::CnnAug, 1), f.history(6), f.domain);
    CHECK(aug.summary().training_reports.size() == 18);
    const auto plain = train_model(quick(Variant::Cnn, 1), f.history(6), f.domain);
    CHECK(plain.summary().training_reports.size() == 5);
}

TEST_CASE("fcn learns and acts per cell") {
    const auto& f = fixture();
    const auto m = train_model(quick(Variant::Fcn, 30), f.history(8), f.domain);
    CHECK(m.summary().final_loss < m.summary().initial_loss);

    // Each cell's forecast depends only on that cell's members.
    Report t = f.target(8);
    const auto base = predict_at(m, 8);
    for (auto& member : t.members) member(3, 4) += 50.0;
    const auto moved = m.predict(t, f.domain, target_track(f.history(8), t));
    for (int r = 0; r < f.domain.rows(); ++r) {
        for (int c = 0; c < f.domain.cols(); ++c) {
            if (r == 3 && c == 4) continue;
            CHECK(moved.mu(r, c) == base.mu(r, c));
        }
    }
    CHECK(moved.mu(3, 4) != base.mu(3, 4));
}

TEST_CASE("checkpoint round trip is exact") {
    const auto& f = fixture();
    for (Variant v : {Variant::CnnAll, Variant::Fcn}) {
        const auto m = train_model(quick(v, 3), f.history(7), f.domain);
        const auto back = TrainedModel::from_json(nlohmann::json::parse(m.to_json().dump()));
        CHECK(same(predict_at(m, 7), predict_at(back, 7)));
        CHECK(back.to_json() == m.to_json());
    }
    CHECK_THROWS(TrainedModel::from_json(nlohmann::json::object()));
}

TEST_CASE("training refuses bad input") {
    const auto& f = fixture();
    CHECK_THROWS(train_model(quick(Variant::Members), f.history(6), f.domain));
    CHECK_THROWS(train_model(quick(Variant::Cnn), {}, f.domain));
    std::vector<Report> unobserved(f.history(4).begin(), f.history(4).end());
    unobserved[1].observation.reset();
    CHECK_THROWS(train_model(quick(Variant::Cnn), unobserved, f.domain));
}

TEST_CASE("rolling origin") {
    const auto& f = fixture();
    const std::vector<ModelConfig> configs{quick(Variant::Cnn, 2), quick(Variant::CnnAll, 2)};
    const std::vector<int> targets{6, 7, 8, 9, 10, 11};
    const auto run = rolling_origin_run(configs, f.scenario.reports, f.domain, targets, 2);
    CHECK(run.predictions.size() == 12);
    CHECK(run.warnings.empty());

    // Matches training by hand at one target.
    const auto by_hand = train_model(configs[1], f.history(9), f.domain);
    CHECK(same(run.predictions.at({Variant::CnnAll, 9}), predict_at(by_hand, 9)));

    // Target 1 has no history; target 2 has one report, too few to augment.
    const std::vector<int> early{1, 2};
    const auto thin = rolling_origin_run(configs, f.scenario.reports, f.domain, early, 1);
    CHECK(thin.predictions.count({Variant::Cnn, 1}) == 0);
    CHECK(thin.predictions.count({Variant::Cnn, 2}) == 1);
    CHECK(!thin.warnings.empty());
}

TEST_CASE("parallel_for") {
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 3,
                                 [](std::size_t i) {
                                     if (i == 7) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}
