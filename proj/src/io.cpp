#include "cyclone/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace cyclone {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_field_csv(const fs::path& path, const Field& field) {
    std::string text;
    text.reserve(static_cast<std::size_t>(field.size()) * 8);
    char buf[32];
    for (Eigen::Index r = 0; r < field.rows(); ++r) {
        for (Eigen::Index c = 0; c < field.cols(); ++c) {
            if (c) text.push_back(',');
            const auto res = std::to_chars(buf, buf + sizeof buf, field(r, c));
            text.append(buf, res.ptr);
        }
        text.push_back('\n');
    }
    write_text_file(path, text);
}

Field parse_field_csv(const std::string& text, int rows, int cols, const std::string& label) {
    Field out(rows, cols);
    const char* p = text.data();
    const char* end = p + text.size();
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const char expected_sep = c + 1 < cols ? ',' : '\n';
            const auto res = std::from_chars(p, end, out(r, c));
            if (res.ec != std::errc{} || !std::isfinite(out(r, c))) {
                throw std::runtime_error(label + ": bad value at row " + std::to_string(r) + ", col " +
                                         std::to_string(c));
            }
            p = res.ptr;
            if (p == end || *p != expected_sep) {
                throw std::runtime_error(label + ": expected " + std::to_string(cols) +
                                         " columns on row " + std::to_string(r));
            }
            ++p;
        }
    }
    if (p != end) throw std::runtime_error(label + ": more than " + std::to_string(rows) + " rows");
    return out;
}

Field read_field_csv(const fs::path& path, int rows, int cols) {
    return parse_field_csv(read_text_file(path), rows, cols, path.string());
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const fs::path& path) {
    return sha256_hex(read_text_file(path));
}

namespace {

std::vector<std::string> hashed_files(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().filename() == kManifestName) continue;
        files.push_back(fs::relative(entry.path(), dir).generic_string());
    }
    std::sort(files.begin(), files.end());
    return files;
}

} // namespace

std::string tree_hash(const fs::path& dir) {
    std::string listing;
    for (const auto& rel : hashed_files(dir)) {
        listing += rel;
        listing.push_back('\0');
        listing += sha256_file(dir / rel);
        listing.push_back('\n');
    }
    return sha256_hex(listing);
}

std::string report_dir_name(ReportIndex index, ReportOrigin origin) {
    char buf[32];
    const int whole = index.floor();
    const int frac = index.tenths() - whole * 10;
    if (frac) {
        std::snprintf(buf, sizeof buf, "report_%04d%d", whole, frac);
    } else {
        std::snprintf(buf, sizeof buf, "report_%04d", whole);
    }
    std::string name = buf;
    if (origin == ReportOrigin::NoiseInjected) name.push_back('n');
    return name;
}

std::optional<std::pair<ReportIndex, ReportOrigin>> parse_report_dir_name(const std::string& name) {
    static const std::string prefix = "report_";
    if (name.rfind(prefix, 0) != 0) return std::nullopt;
    std::string rest = name.substr(prefix.size());
    bool noise = false;
    if (!rest.empty() && rest.back() == 'n') {
        noise = true;
        rest.pop_back();
    }
    if ((rest.size() != 4 && rest.size() != 5) ||
        !std::all_of(rest.begin(), rest.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
        return std::nullopt;
    }
    const int whole = std::stoi(rest.substr(0, 4));
    const int frac = rest.size() == 5 ? rest[4] - '0' : 0;
    if (rest.size() == 5 && frac == 0) return std::nullopt;
    const ReportIndex idx = ReportIndex::from_tenths(whole * 10 + frac);
    ReportOrigin origin = idx.is_whole() ? ReportOrigin::Original : ReportOrigin::Interpolated;
    if (noise) origin = ReportOrigin::NoiseInjected;
    return std::make_pair(idx, origin);
}

void write_report_dir(const fs::path& dir, const Report& report) {
    fs::create_directories(dir);
    nlohmann::json meta;
    meta["index"] = report.index.to_string();
    meta["tenths"] = report.index.tenths();
    meta["origin"] = to_string(report.origin);
    meta["tc_center"] = {{"lat", report.tc_center.lat}, {"lon", report.tc_center.lon}};
    meta["valid_time"] = format_utc(report.valid_time);
    meta["has_observation"] = report.observation.has_value();
    write_text_file(dir / "report.json", meta.dump(2) + "\n");
    for (std::size_t m = 0; m < report.members.size(); ++m) {
        char name[32];
        std::snprintf(name, sizeof name, "member_%02zu.csv", m + 1);
        write_field_csv(dir / name, report.members[m]);
    }
    if (report.observation) write_field_csv(dir / "obs.csv", *report.observation);
}

// ---------------------------------------------------------------------------

StagingDir::StagingDir(fs::path final_path) : final_(std::move(final_path)) {
    if (final_.filename().empty()) final_ = final_.parent_path();
    std::random_device rd;
    staging_ = final_;
    staging_ += ".staging-" + std::to_string(::getpid()) + "-" + std::to_string(rd());
    if (!final_.parent_path().empty()) fs::create_directories(final_.parent_path());
    fs::create_directories(staging_);
}

StagingDir::~StagingDir() {
    if (!committed_) {
        std::error_code ec;
        fs::remove_all(staging_, ec);
    }
}

void StagingDir::commit() {
    if (committed_) return;
    if (fs::exists(final_)) fs::remove_all(final_);
    fs::rename(staging_, final_);
    committed_ = true;
}

void write_manifest(const fs::path& dir, const RunManifest& manifest) {
    nlohmann::json out;
    out["stage"] = manifest.stage;
    out["engine_version"] = kEngineVersion;
    out["config"] = manifest.config;
    out["config_hash"] = sha256_hex(manifest.config.dump());
    out["seed"] = manifest.seed;
    out["inputs"] = manifest.inputs;
    nlohmann::json outputs = nlohmann::json::object();
    for (const auto& rel : hashed_files(dir)) outputs[rel] = sha256_file(dir / rel);
    out["outputs"] = outputs;
    out["output_tree_hash"] = tree_hash(dir);
    out["wall_time_s"] = manifest.wall_time_s;
    write_text_file(dir / kManifestName, out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

VerifiedDir::VerifiedDir(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::is_directory(dir_)) throw std::runtime_error("not a directory: " + dir_.string());
    const fs::path manifest_path = dir_ / kManifestName;
    if (!fs::exists(manifest_path)) throw std::runtime_error("missing " + manifest_path.string());
    try {
        manifest_ = nlohmann::json::parse(read_text_file(manifest_path));
        for (const auto& [rel, hash] : manifest_.at("outputs").items()) hashes_[rel] = hash.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt manifest " + manifest_path.string() + ": " + e.what());
    }
}

std::vector<std::string> VerifiedDir::listed() const {
    std::vector<std::string> out;
    for (const auto& [rel, hash] : hashes_) out.push_back(rel);
    return out;
}

std::string VerifiedDir::read(const std::string& relative) const {
    const auto it = hashes_.find(relative);
    if (it == hashes_.end()) {
        throw std::runtime_error(dir_.string() + ": file '" + relative + "' not listed in manifest");
    }
    std::string bytes = read_text_file(dir_ / relative);
    if (sha256_hex(bytes) != it->second) {
        throw std::runtime_error(dir_.string() + ": hash mismatch for '" + relative + "'");
    }
    std::lock_guard lock(mutex_);
    accessed_.push_back(relative);
    return bytes;
}

std::vector<std::string> VerifiedDir::accessed() const {
    std::lock_guard lock(mutex_);
    return accessed_;
}

ScenarioStore::ScenarioStore(fs::path dir) : files_(std::move(dir)) {
    domain_ = parse_domain_text(files_.read("domain.txt"), (files_.dir() / "domain.txt").string());
}

std::vector<std::pair<ReportIndex, ReportOrigin>> ScenarioStore::listing() const {
    std::vector<std::pair<ReportIndex, ReportOrigin>> out;
    for (const auto& entry : fs::directory_iterator(dir())) {
        if (!entry.is_directory()) continue;
        if (auto parsed = parse_report_dir_name(entry.path().filename().string())) out.push_back(*parsed);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return static_cast<int>(a.second) < static_cast<int>(b.second);
    });
    return out;
}

std::vector<ReportIndex> ScenarioStore::original_indices() const {
    std::vector<ReportIndex> out;
    for (const auto& [idx, origin] : listing()) {
        if (origin == ReportOrigin::Original) out.push_back(idx);
    }
    return out;
}

nlohmann::json ScenarioStore::read_meta(ReportIndex index, ReportOrigin origin) const {
    const std::string base = report_dir_name(index, origin);
    try {
        auto meta = nlohmann::json::parse(files_.read(base + "/report.json"));
        if (meta.at("origin").get<std::string>() != to_string(origin) ||
            meta.at("tenths").get<int>() != index.tenths()) {
            throw std::runtime_error(base + ": metadata does not match directory name");
        }
        return meta;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(base + ": bad report metadata: " + e.what());
    }
}

LatLon ScenarioStore::read_center(ReportIndex index, ReportOrigin origin) const {
    const auto meta = read_meta(index, origin);
    return {meta.at("tc_center").at("lat").get<double>(), meta.at("tc_center").at("lon").get<double>()};
}

Report ScenarioStore::read_report(ReportIndex index, ReportOrigin origin, bool with_observation) const {
    const std::string base = report_dir_name(index, origin);
    const auto meta = read_meta(index, origin);
    Report report;
    report.index = index;
    report.origin = origin;
    try {
        report.tc_center = {meta.at("tc_center").at("lat").get<double>(), meta.at("tc_center").at("lon").get<double>()};
        report.valid_time = parse_utc(meta.at("valid_time").get<std::string>());
        if (with_observation && !meta.at("has_observation").get<bool>()) {
            throw std::runtime_error(base + ": observation requested but absent");
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(base + ": bad report metadata: " + e.what());
    }
    const int rows = domain().rows();
    const int cols = domain().cols();
    for (int m = 1; m <= kMemberCount; ++m) {
        char name[32];
        std::snprintf(name, sizeof name, "/member_%02d.csv", m);
        report.members.push_back(parse_field_csv(files_.read(base + name), rows, cols, base + name));
    }
    if (with_observation) {
        report.observation = parse_field_csv(files_.read(base + "/obs.csv"), rows, cols, base + "/obs.csv");
    }
    report.validate(domain());
    return report;
}

} // namespace cyclone
