#include "helpers.hpp"

#include "cyclone/io.hpp"

#include <fstream>
#include <limits>

using namespace cyclone;
namespace fs = std::filesystem;

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("field csv round trip") {
    testing::TempDir tmp("csv");
    Field f(3, 4);
    f << 0.1, 1e-300, 123456.789, 0.0, 2.0 / 3.0, 1e20, 5e-324, 7.0, -0.0, 3.14159, 1.0 / 7.0, 42.0;
    write_field_csv(tmp.path / "f.csv", f);
    const Field back = read_field_csv(tmp.path / "f.csv", 3, 4);
    CHECK((back == f).all());
    CHECK_THROWS(read_field_csv(tmp.path / "f.csv", 4, 4));
    CHECK_THROWS(parse_field_csv("1,2\n3,x\n", 2, 2, "bad"));
    CHECK_THROWS(parse_field_csv("1,2\n3,nan\n", 2, 2, "nan"));
    CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("report directory names") {
    CHECK(report_dir_name(ReportIndex::whole(15), ReportOrigin::Original) == "report_0015");
    CHECK(report_dir_name(ReportIndex::from_tenths(15), ReportOrigin::Interpolated) == "report_00015");
    CHECK(report_dir_name(ReportIndex::whole(15), ReportOrigin::NoiseInjected) == "report_0015n");
    for (int tenths : {10, 15, 20, 145, 150}) {
        for (bool noisy : {false, true}) {
            const auto idx = ReportIndex::from_tenths(tenths);
            const ReportOrigin origin = noisy ? ReportOrigin::NoiseInjected
                                        : idx.is_whole() ? ReportOrigin::Original
                                                         : ReportOrigin::Interpolated;
            const auto parsed = parse_report_dir_name(report_dir_name(idx, origin));
            REQUIRE(parsed);
            CHECK(parsed->first == idx);
            CHECK(parsed->second == origin);
        }
    }
    CHECK(!parse_report_dir_name("report_15"));
    CHECK(!parse_report_dir_name("report_0015x"));
    CHECK(!parse_report_dir_name("manifest.json"));
}

TEST_CASE("staging directories") {
    testing::TempDir tmp("stage");
    const fs::path target = tmp.path / "out";
    try {
        StagingDir stage(target);
        write_text_file(stage.path() / "a.txt", "x");
        throw std::runtime_error("stage failed");
    } catch (const std::runtime_error&) {
    }
    CHECK(!fs::exists(target));
    CHECK(std::distance(fs::directory_iterator(tmp.path), fs::directory_iterator{}) == 0);

    {
        StagingDir stage(target);
        write_text_file(stage.path() / "a.txt", "x");
        write_manifest(stage.path(), {"test", nlohmann::json::object(), 1, {}, 0.0});
        stage.commit();
    }
    CHECK(read_text_file(target / "a.txt") == "x");

    // A committed stage replaces an earlier output as a whole.
    {
        StagingDir stage(target);
        write_text_file(stage.path() / "b.txt", "y");
        stage.commit();
    }
    CHECK(!fs::exists(target / "a.txt"));
    CHECK(read_text_file(target / "b.txt") == "y");
}

TEST_CASE("verified directories detect tampering") {
    testing::TempDir tmp("verify");
    const fs::path dir = tmp.path / "d";
    {
        StagingDir stage(dir);
        write_text_file(stage.path() / "a.txt", "alpha");
        fs::create_directories(stage.path() / "sub");
        write_text_file(stage.path() / "sub" / "b.txt", "beta");
        write_manifest(stage.path(), {"test", nlohmann::json::object(), 1, {}, 0.0});
        stage.commit();
    }
    const std::string before = tree_hash(dir);
    {
        VerifiedDir v(dir);
        CHECK(v.contains("sub/b.txt"));
        CHECK(v.read("a.txt") == "alpha");
        CHECK(v.accessed() == std::vector<std::string>{"a.txt"});
        CHECK_THROWS(v.read("missing.txt"));
    }
    write_text_file(dir / "a.txt", "alphA");
    CHECK(tree_hash(dir) != before);
    VerifiedDir v(dir);
    CHECK_THROWS(v.read("a.txt"));
    CHECK(v.read("sub/b.txt") == "beta");
    CHECK_THROWS(VerifiedDir(tmp.path / "nope"));
}

TEST_CASE("report directories round trip through the store") {
    testing::TempDir tmp("store");
    const GridDomain d = testing::toy_domain();
    const fs::path dir = tmp.path / "scenario";
    const Report r1 = testing::random_report(d, 1, 1), r2 = testing::random_report(d, 2, 2);
    {
        StagingDir stage(dir);
        write_domain_file(stage.path() / "domain.txt", d);
        write_report_dir(stage.path() / report_dir_name(r1.index, r1.origin), r1);
        write_report_dir(stage.path() / report_dir_name(r2.index, r2.origin), r2);
        write_manifest(stage.path(), {"test", nlohmann::json::object(), 1, {}, 0.0});
        stage.commit();
    }
    ScenarioStore store(dir);
    CHECK(store.original_indices() == std::vector<ReportIndex>{r1.index, r2.index});
    const Report back = store.read_report(r2.index, ReportOrigin::Original, true);
    CHECK(back.tc_center == r2.tc_center);
    CHECK(back.valid_time == r2.valid_time);
    CHECK((*back.observation == *r2.observation).all());
    for (int k = 0; k < kMemberCount; ++k) CHECK((back.members[k] == r2.members[k]).all());
    ScenarioStore fresh(dir);
    const Report blind = fresh.read_report(r2.index, ReportOrigin::Original, false);
    CHECK(!blind.observation);
    for (const auto& f : fresh.accessed()) CHECK(f.find("obs.csv") == std::string::npos);
}
