#pragma once

#include "cyclone/grid.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace cyclone {

inline constexpr double kDefaultNoiseScale = 0.05;

struct AugmentedSet {
    /// Report order (see report_order); noise copies follow their source.
    std::vector<Report> reports;
    double noise_scale = kDefaultNoiseScale;
    std::uint64_t seed = 0;
};

/// Midpoint of two consecutive original reports: members, observation,
/// cyclone centre and valid time are averaged.
Report interpolate_reports(const Report& a, const Report& b);

/// Adds N(0, (eta * std(member))^2) to every member value, clamped at zero.
/// The observation is left untouched.
Report inject_noise(const Report& report, double eta, std::mt19937_64& rng);

/// Independent noise stream for one report, so output does not depend on
/// the order reports are processed in.
std::mt19937_64 noise_stream(std::uint64_t seed, ReportIndex index);

/// N originals -> N originals, N-1 midpoints and a noise copy of each.
AugmentedSet build_augmented_set(std::span<const Report> originals, double eta, std::uint64_t seed);

/// Reports of any origin whose index is strictly below `target_k`.
std::vector<Report> training_subset(const AugmentedSet& set, int target_k);

} // namespace cyclone
