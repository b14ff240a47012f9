#include "cyclone/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cyclone {

GridDomain::GridDomain(DomainExtent extent, Field altitude)
    : extent_(extent), altitude_(std::move(altitude)) {
    if (extent_.rows <= 0 || extent_.cols <= 0 || !(extent_.cell > 0.0)) {
        throw std::invalid_argument("GridDomain: non-positive dimensions or cell size");
    }
    if (altitude_.rows() != extent_.rows || altitude_.cols() != extent_.cols) {
        throw std::invalid_argument("GridDomain: altitude shape does not match extent");
    }
    if (!all_finite(altitude_)) throw std::invalid_argument("GridDomain: non-finite altitude");
    land_ = altitude_ != kSeaSentinel;
}

TerrainClass GridDomain::terrain(int row, int col) const {
    if (!land_(row, col)) return TerrainClass::Sea;
    return altitude_(row, col) < kMountainAltitude ? TerrainClass::Plain : TerrainClass::Mountain;
}

Eigen::Index GridDomain::plain_count() const {
    return (land_ && altitude_ < kMountainAltitude).count();
}

Eigen::Index GridDomain::mountain_count() const {
    return (land_ && altitude_ >= kMountainAltitude).count();
}

LatLon cell_latlon(const GridDomain& domain, int row, int col) {
    if (row < 0 || row >= domain.rows() || col < 0 || col >= domain.cols()) {
        throw std::out_of_range("cell_latlon: cell (" + std::to_string(row) + ", " +
                                std::to_string(col) + ") outside domain");
    }
    const auto& e = domain.extent();
    return {e.lat0 + row * e.cell, e.lon0 + col * e.cell};
}

Field latitude_field(const GridDomain& domain) {
    Field out(domain.rows(), domain.cols());
    for (int r = 0; r < domain.rows(); ++r) out.row(r).setConstant(cell_latlon(domain, r, 0).lat);
    return out;
}

Field longitude_field(const GridDomain& domain) {
    Field out(domain.rows(), domain.cols());
    for (int c = 0; c < domain.cols(); ++c) out.col(c).setConstant(cell_latlon(domain, 0, c).lon);
    return out;
}

GridDomain parse_domain_text(const std::string& text, const std::string& label) {
    std::istringstream in(text);
    DomainExtent e;
    if (!(in >> e.rows >> e.cols >> e.lat0 >> e.lon0 >> e.cell)) {
        throw std::runtime_error("malformed domain header in " + label);
    }
    if (e.rows <= 0 || e.cols <= 0) throw std::runtime_error("bad domain dimensions in " + label);
    Field alt(e.rows, e.cols);
    for (Eigen::Index i = 0; i < alt.size(); ++i) {
        if (!(in >> alt.data()[i])) {
            throw std::runtime_error("domain file " + label + " truncated at value " + std::to_string(i));
        }
    }
    std::string extra;
    if (in >> extra) throw std::runtime_error("trailing data in domain file " + label);
    return GridDomain(e, std::move(alt));
}

GridDomain read_domain_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open domain file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_domain_text(ss.str(), path.string());
}

void write_domain_file(const std::filesystem::path& path, const GridDomain& domain) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write domain file " + path.string());
    const auto& e = domain.extent();
    char buf[64];
    out << e.rows << ' ' << e.cols;
    for (double v : {e.lat0, e.lon0, e.cell}) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
    }
    out << '\n';
    for (int r = 0; r < domain.rows(); ++r) {
        for (int c = 0; c < domain.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", domain.altitude()(r, c));
            out << (c ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing domain file " + path.string());
}

// ---------------------------------------------------------------------------

std::string ReportIndex::to_string() const {
    const int whole = floor();
    const int frac = tenths_ - whole * 10;
    return frac ? std::to_string(whole) + "." + std::to_string(frac) : std::to_string(whole);
}

const char* to_string(ReportOrigin origin) {
    switch (origin) {
    case ReportOrigin::Original: return "original";
    case ReportOrigin::Interpolated: return "interpolated";
    case ReportOrigin::NoiseInjected: return "noise";
    }
    return "?";
}

std::string format_utc(UtcTime t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), long(hms.hours().count()),
                  long(hms.minutes().count()), long(hms.seconds().count()));
    return buf;
}

UtcTime parse_utc(const std::string& text) {
    using namespace std::chrono;
    int y = 0;
    unsigned mo = 0, d = 0;
    int h = 0, mi = 0, s = 0;
    char z = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%uT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &z) != 7 || z != 'Z') {
        throw std::invalid_argument("bad UTC timestamp '" + text + "'");
    }
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) throw std::invalid_argument("bad UTC date '" + text + "'");
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

void Report::validate(const GridDomain& domain) const {
    if (members.size() != static_cast<std::size_t>(kMemberCount)) {
        throw std::invalid_argument("report " + index.to_string() + ": expected " +
                                    std::to_string(kMemberCount) + " members, got " +
                                    std::to_string(members.size()));
    }
    if (origin == ReportOrigin::Original && !index.is_whole()) {
        throw std::invalid_argument("original report with fractional index " + index.to_string());
    }
    auto check = [&](const Field& f, const char* what) {
        if (f.rows() != domain.rows() || f.cols() != domain.cols()) {
            throw std::invalid_argument("report " + index.to_string() + ": " + what + " shape mismatch");
        }
        if (!all_finite(f) || (f < 0.0).any()) {
            throw std::invalid_argument("report " + index.to_string() + ": " + what +
                                        " has negative or non-finite values");
        }
    };
    for (const auto& m : members) check(m, "member");
    if (observation) check(*observation, "observation");
}

Report Report::forecast_only() const {
    Report copy = *this;
    copy.observation.reset();
    return copy;
}

bool report_order(const Report& a, const Report& b) {
    if (a.index != b.index) return a.index < b.index;
    return static_cast<int>(a.origin) < static_cast<int>(b.origin);
}

// ---------------------------------------------------------------------------

RainCategory classify_rain(double y_mm) {
    if (!std::isfinite(y_mm) || y_mm < 0.0) {
        throw std::domain_error("classify_rain: precipitation must be finite and non-negative");
    }
    if (y_mm <= kCategoryBounds[0]) return RainCategory::VeryLight;
    if (y_mm <= kCategoryBounds[1]) return RainCategory::Light;
    if (y_mm <= kCategoryBounds[2]) return RainCategory::Heavy;
    return RainCategory::BeyondHeavy;
}

const char* to_string(RainCategory category) {
    switch (category) {
    case RainCategory::VeryLight: return "very_light";
    case RainCategory::Light: return "light";
    case RainCategory::Heavy: return "heavy";
    case RainCategory::BeyondHeavy: return "beyond_heavy";
    }
    return "?";
}

const char* to_string(TerrainClass terrain) {
    switch (terrain) {
    case TerrainClass::Sea: return "sea";
    case TerrainClass::Plain: return "plain";
    case TerrainClass::Mountain: return "mountain";
    }
    return "?";
}

CategoryTable tabulate_categories(const Report& report, const GridDomain& domain) {
    if (!report.observation) {
        throw std::invalid_argument("tabulate_categories: report " + report.index.to_string() +
                                    " has no observation");
    }
    const Field& obs = *report.observation;
    if (obs.rows() != domain.rows() || obs.cols() != domain.cols()) {
        throw std::invalid_argument("tabulate_categories: observation shape mismatch");
    }
    CategoryTable table{};
    for (int r = 0; r < domain.rows(); ++r) {
        for (int c = 0; c < domain.cols(); ++c) {
            const TerrainClass t = domain.terrain(r, c);
            if (t == TerrainClass::Sea) continue;
            const int col = t == TerrainClass::Plain ? 0 : 1;
            ++table[static_cast<int>(classify_rain(obs(r, c)))][col];
        }
    }
    return table;
}

} // namespace cyclone
