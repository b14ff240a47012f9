#include "cyclone/augmentation.hpp"

#include <algorithm>
#include <stdexcept>

namespace cyclone {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

Report interpolate_reports(const Report& a, const Report& b) {
    if (a.origin != ReportOrigin::Original || b.origin != ReportOrigin::Original) {
        throw std::invalid_argument("interpolate_reports: inputs must be original reports");
    }
    if (!a.index.is_whole() || b.index.tenths() != a.index.tenths() + 10) {
        throw std::invalid_argument("interpolate_reports: reports " + a.index.to_string() + " and " +
                                    b.index.to_string() + " are not consecutive");
    }
    if (a.members.size() != b.members.size()) {
        throw std::invalid_argument("interpolate_reports: member counts differ");
    }
    Report out;
    out.index = ReportIndex::from_tenths(a.index.tenths() + 5);
    out.origin = ReportOrigin::Interpolated;
    out.members.reserve(a.members.size());
    for (std::size_t m = 0; m < a.members.size(); ++m) {
        out.members.push_back(0.5 * (a.members[m] + b.members[m]));
    }
    if (a.observation && b.observation) out.observation = 0.5 * (*a.observation + *b.observation);
    out.tc_center = {0.5 * (a.tc_center.lat + b.tc_center.lat), 0.5 * (a.tc_center.lon + b.tc_center.lon)};
    out.valid_time = a.valid_time + (b.valid_time - a.valid_time) / 2;
    return out;
}

Report inject_noise(const Report& report, double eta, std::mt19937_64& rng) {
    if (!(eta >= 0.0)) throw std::invalid_argument("inject_noise: noise scale must be >= 0");
    Report out = report;
    out.origin = ReportOrigin::NoiseInjected;
    if (eta == 0.0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Field& member : out.members) {
        const double sd = eta * field_std(member);
        for (Eigen::Index i = 0; i < member.size(); ++i) {
            const double noisy = member.data()[i] + sd * normal(rng);
            member.data()[i] = std::max(0.0, noisy);
        }
    }
    return out;
}

std::mt19937_64 noise_stream(std::uint64_t seed, ReportIndex index) {
    const auto tag = static_cast<std::uint64_t>(static_cast<std::int64_t>(index.tenths()));
    return std::mt19937_64(splitmix64(seed ^ splitmix64(tag)));
}

AugmentedSet build_augmented_set(std::span<const Report> originals, double eta, std::uint64_t seed) {
    if (originals.size() < 2) {
        throw std::invalid_argument("build_augmented_set: need at least 2 original reports");
    }
    for (std::size_t i = 0; i < originals.size(); ++i) {
        if (originals[i].origin != ReportOrigin::Original || !originals[i].index.is_whole()) {
            throw std::invalid_argument("build_augmented_set: input " + originals[i].index.to_string() +
                                        " is not an original report");
        }
        if (i > 0 && originals[i].index.tenths() != originals[i - 1].index.tenths() + 10) {
            throw std::invalid_argument("build_augmented_set: original indices are not consecutive");
        }
    }
    AugmentedSet set;
    set.noise_scale = eta;
    set.seed = seed;
    set.reports.reserve(2 * (2 * originals.size() - 1));
    auto push_with_noise = [&](Report r) {
        auto rng = noise_stream(seed, r.index);
        Report noisy = inject_noise(r, eta, rng);
        set.reports.push_back(std::move(r));
        set.reports.push_back(std::move(noisy));
    };
    for (std::size_t i = 0; i < originals.size(); ++i) {
        push_with_noise(originals[i]);
        if (i + 1 < originals.size()) push_with_noise(interpolate_reports(originals[i], originals[i + 1]));
    }
    return set;
}

std::vector<Report> training_subset(const AugmentedSet& set, int target_k) {
    const ReportIndex cutoff = ReportIndex::whole(target_k);
    std::vector<Report> out;
    for (const Report& r : set.reports) {
        if (r.index < cutoff) out.push_back(r);
    }
    if (out.empty()) {
        throw std::invalid_argument("training_subset: no reports before target " + std::to_string(target_k));
    }
    std::stable_sort(out.begin(), out.end(), report_order);
    return out;
}

} // namespace cyclone
