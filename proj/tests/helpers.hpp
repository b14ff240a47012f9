#pragma once

#include "cyclone/grid.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace testing {

using namespace cyclone;

/// Small domain: sea border, plain and mountain cells inside.
inline GridDomain toy_domain(int rows = 6, int cols = 5) {
    Field alt(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const bool edge = r == 0 || c == 0 || r == rows - 1 || c == cols - 1;
            alt(r, c) = edge ? kSeaSentinel : (r + c) % 2 ? 800.0 : 120.0;
        }
    }
    return GridDomain({rows, cols, 22.0, 120.0, 0.1}, alt);
}

inline Report random_report(const GridDomain& d, int index, std::uint64_t seed, double scale = 100.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, scale);
    Report r;
    r.index = ReportIndex::whole(index);
    r.tc_center = {d.extent().lat0 + 0.1 * index, d.extent().lon0 + 0.2};
    r.valid_time = parse_utc("2015-08-05T18:00:00Z") + std::chrono::hours(6 * (index - 1));
    for (int m = 0; m < kMemberCount; ++m) {
        Field f(d.rows(), d.cols());
        for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
        r.members.push_back(f);
    }
    Field obs(d.rows(), d.cols());
    for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = u(rng);
    r.observation = obs;
    return r;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("cyclone-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

} // namespace testing
