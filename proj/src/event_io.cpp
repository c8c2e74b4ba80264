#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "bellhalo/detector.hpp"
#include "bellhalo/errors.hpp"

namespace bellhalo {
namespace {

static_assert(std::endian::native == std::endian::little, "binary event format assumes a little-endian host");

constexpr std::string_view kCsvHeader = "shot_id,x_mm,y_mm,z_mm,spin";
constexpr char kMagic[5] = {'B', 'H', 'E', 'V', '1'};
constexpr std::size_t kRecordSize = 4 + 3 * 8 + 1;

std::string where(const std::filesystem::path& path) { return path.string(); }

[[noreturn]] void csv_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
    throw IoError(where(path) + ":" + std::to_string(line) + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ofstream out(path, mode);
    if (!out) throw IoError("cannot open " + where(path) + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
    std::ifstream in(path, mode);
    if (!in) throw IoError("cannot open " + where(path));
    return in;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void write_events_csv(std::span<const DetectorHit> hits, const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::out | std::ios::trunc);
    out << kCsvHeader << '\n';
    char buf[160];
    for (const auto& h : hits) {
        const int n = std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%.17g,%c\n", h.shot_id, h.r.x(), h.r.y(), h.r.z(),
                                    h.spin_region == Spin::Up ? 'U' : 'D');
        out.write(buf, n);
    }
    if (!out) throw IoError("write failed: " + where(path));
}

std::vector<DetectorHit> read_events_csv(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in);
    std::string line;
    if (!std::getline(in, line)) csv_error(path, 1, "missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) csv_error(path, 1, "malformed header, expected '" + std::string(kCsvHeader) + "'");

    std::vector<DetectorHit> hits;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::string_view fields[5];
        std::size_t nf = 0, start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i) {
            if (i == line.size() || line[i] == ',') {
                if (nf == 5) csv_error(path, lineno, "too many fields");
                fields[nf++] = std::string_view(line).substr(start, i - start);
                start = i + 1;
            }
        }
        if (nf != 5) csv_error(path, lineno, "expected 5 fields, found " + std::to_string(nf));
        DetectorHit h;
        if (!parse_number(fields[0], h.shot_id)) csv_error(path, lineno, "bad shot_id '" + std::string(fields[0]) + "'");
        for (int a = 0; a < 3; ++a) {
            double v = 0.0;
            if (!parse_number(fields[1 + a], v)) csv_error(path, lineno, "bad coordinate '" + std::string(fields[1 + a]) + "'");
            h.r[a] = v;
        }
        if (fields[4] == "U")
            h.spin_region = Spin::Up;
        else if (fields[4] == "D")
            h.spin_region = Spin::Down;
        else
            csv_error(path, lineno, "unknown spin token '" + std::string(fields[4]) + "'");
        hits.push_back(h);
    }
    if (in.bad()) throw IoError("read failed: " + where(path));
    return hits;
}

void write_events_binary(std::span<const DetectorHit> hits, const std::filesystem::path& path) {
    auto out = open_out(path, std::ios::out | std::ios::binary | std::ios::trunc);
    out.write(kMagic, sizeof kMagic);
    char rec[kRecordSize];
    for (const auto& h : hits) {
        std::memcpy(rec, &h.shot_id, 4);
        for (int a = 0; a < 3; ++a) {
            const double v = h.r[a];
            std::memcpy(rec + 4 + 8 * a, &v, 8);
        }
        rec[28] = static_cast<char>(h.spin_region == Spin::Up ? 0 : 1);
        out.write(rec, kRecordSize);
    }
    if (!out) throw IoError("write failed: " + where(path));
}

std::vector<DetectorHit> read_events_binary(const std::filesystem::path& path) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string data = std::move(buf).str();
    if (data.size() < sizeof kMagic || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        throw IoError(where(path) + ": offset 0: missing BHEV1 magic");
    const std::size_t body = data.size() - sizeof kMagic;
    if (body % kRecordSize != 0) {
        const std::size_t off = sizeof kMagic + body / kRecordSize * kRecordSize;
        throw IoError(where(path) + ": offset " + std::to_string(off) + ": truncated record");
    }
    std::vector<DetectorHit> hits(body / kRecordSize);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const std::size_t off = sizeof kMagic + i * kRecordSize;
        const char* rec = data.data() + off;
        std::memcpy(&hits[i].shot_id, rec, 4);
        for (int a = 0; a < 3; ++a) {
            double v;
            std::memcpy(&v, rec + 4 + 8 * a, 8);
            hits[i].r[a] = v;
        }
        const auto spin = static_cast<unsigned char>(rec[28]);
        if (spin > 1) throw IoError(where(path) + ": offset " + std::to_string(off + 28) + ": bad spin byte");
        hits[i].spin_region = spin == 0 ? Spin::Up : Spin::Down;
    }
    return hits;
}

namespace {
bool is_binary(const std::filesystem::path& path) { return path.extension() == ".bhev"; }
}  // namespace

void write_events(std::span<const DetectorHit> hits, const std::filesystem::path& path) {
    is_binary(path) ? write_events_binary(hits, path) : write_events_csv(hits, path);
}

std::vector<DetectorHit> read_events(const std::filesystem::path& path) {
    return is_binary(path) ? read_events_binary(path) : read_events_csv(path);
}

}  // namespace bellhalo
