#include "qsync/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace qsync {

namespace {

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_i64(std::ostream& os, int64_t v) { put_u64(os, static_cast<uint64_t>(v)); }

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) {
        throw std::runtime_error("truncated input");
    }
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

int64_t get_i64(std::istream& is) { return static_cast<int64_t>(get_u64(is)); }

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
    char got[4];
    if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
        throw std::runtime_error("bad magic in " + path);
    }
}

}  // namespace

void write_timetags(const std::string& path, const EventStream& events) {
    events.validate();
    auto os = open_out(path);
    os.write("QTT1", 4);
    const bool tagged = events.tagged();
    os.put(tagged ? 1 : 0);
    put_u64(os, events.size());
    for (int64_t t : events.t_ps) put_i64(os, t);
    if (tagged) {
        for (const EventTag& tag : events.tags) {
            os.put(static_cast<char>(tag.pack()));
        }
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

EventStream read_timetags(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, "QTT1", path);
    const int flags = is.get();
    if (flags < 0) throw std::runtime_error("truncated input: " + path);
    const uint64_t n = get_u64(is);
    EventStream out;
    out.t_ps.reserve(n);
    for (uint64_t i = 0; i < n; ++i) out.t_ps.push_back(get_i64(is));
    if (flags & 1) {
        out.tags.reserve(n);
        for (uint64_t i = 0; i < n; ++i) {
            const int b = is.get();
            if (b < 0) throw std::runtime_error("truncated input: " + path);
            out.tags.push_back(EventTag::unpack(static_cast<uint8_t>(b)));
        }
    }
    out.validate();
    return out;
}

void write_histogram(const std::string& path, const CorrelationHistogram& hist) {
    auto os = open_out(path);
    os.write("QCH1", 4);
    put_i64(os, hist.bin_width_ps);
    put_i64(os, hist.offset_bins);
    put_u64(os, hist.iterations);
    put_u64(os, hist.counts.size());
    for (uint64_t c : hist.counts) put_u64(os, c);
    if (!os) throw std::runtime_error("write failed: " + path);
}

CorrelationHistogram read_histogram(const std::string& path) {
    auto is = open_in(path);
    expect_magic(is, "QCH1", path);
    CorrelationHistogram h;
    h.bin_width_ps = get_i64(is);
    h.offset_bins = get_i64(is);
    h.iterations = get_u64(is);
    const uint64_t n = get_u64(is);
    h.counts.reserve(n);
    for (uint64_t i = 0; i < n; ++i) h.counts.push_back(get_u64(is));
    return h;
}

std::string format_double(double value) {
    char buf[64];
    // Shortest representation that round-trips: try increasing precision.
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, value);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == value) break;
    }
    return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [key, value] : table.metadata) {
        os << "# " << key << "=" << value << "\n";
    }
    for (size_t c = 0; c < table.columns.size(); ++c) {
        if (c) os << ",";
        os << table.columns[c];
    }
    os << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size()) {
            throw std::invalid_argument("csv row width does not match the header");
        }
        for (size_t c = 0; c < row.size(); ++c) {
            if (c) os << ",";
            os << row[c];
        }
        os << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

uint64_t fnv1a64(const std::string& text) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

}  // namespace qsync
