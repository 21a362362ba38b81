#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "qsync/correlation.hpp"
#include "qsync/events.hpp"
#include "qsync/io.hpp"

using namespace qsync;

namespace {

std::filesystem::path temp_file(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "qsync_io_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("tagged time tags survive a write/read round trip") {
    EventStream events;
    events.t_ps = {-5000, 0, 17, 123456789012345};
    events.tags = {
        EventTag{Basis::Z, 0, Origin::Signal},
        EventTag{Basis::X, 1, Origin::Signal},
        EventTag{Basis::Z, 1, Origin::Dark},
        EventTag{Basis::X, 0, Origin::Dark},
    };
    const auto path = temp_file("tagged.qtt");
    write_timetags(path.string(), events);

    const EventStream back = read_timetags(path.string());
    REQUIRE(back.size() == events.size());
    CHECK(back.t_ps == events.t_ps);
    REQUIRE(back.tagged());
    for (size_t i = 0; i < events.size(); ++i) {
        CHECK(back.tags[i].pack() == events.tags[i].pack());
    }
}

TEST_CASE("untagged time tags round trip without growing tags") {
    EventStream events;
    events.t_ps = {1, 2, 3};
    const auto path = temp_file("plain.qtt");
    write_timetags(path.string(), events);

    const EventStream back = read_timetags(path.string());
    CHECK(back.t_ps == events.t_ps);
    CHECK_FALSE(back.tagged());
    CHECK(back.tags.empty());
}

TEST_CASE("reading a file with the wrong magic throws") {
    const auto path = temp_file("corrupt.qtt");
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE" << std::string(64, '\0');
    }
    CHECK_THROWS_AS(read_timetags(path.string()), std::runtime_error);
    CHECK_THROWS_AS(read_histogram(path.string()), std::runtime_error);
}

TEST_CASE("reading a missing file throws") {
    CHECK_THROWS_AS(read_timetags("/nonexistent/dir/x.qtt"), std::runtime_error);
}

TEST_CASE("histograms survive a write/read round trip") {
    CorrelationHistogram hist;
    hist.bin_width_ps = 50;
    hist.offset_bins = -7;
    hist.iterations = 3;
    hist.counts = {0, 12, 99, 4, 0, 123456789};
    const auto path = temp_file("hist.qch");
    write_histogram(path.string(), hist);

    const CorrelationHistogram back = read_histogram(path.string());
    CHECK(back.bin_width_ps == hist.bin_width_ps);
    CHECK(back.offset_bins == hist.offset_bins);
    CHECK(back.iterations == hist.iterations);
    CHECK(back.counts == hist.counts);
}

TEST_CASE("format_double emits the shortest string that parses back exactly") {
    const double values[] = {0.0,   1.0,     10.0,     0.1,  1.0 / 3.0,
                             1e300, 1e-300,  -2.5e-7,  42.0, 0.059294168,
                             3.14159265358979, -0.0};
    for (double v : values) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    // Small integers and simple decimals stay short instead of gaining
    // seventeen significant digits.
    CHECK(format_double(42.0) == "42");
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("csv writer emits metadata comments, header and rows verbatim") {
    CsvTable table;
    table.metadata = {{"seed", "1"}, {"config_hash", "deadbeef"}};
    table.columns = {"a", "b"};
    table.rows = {{"1", "2"}, {"0.5", "x"}};
    const auto path = temp_file("table.csv");
    write_csv(path.string(), table);

    CHECK(slurp(path) ==
          "# seed=1\n"
          "# config_hash=deadbeef\n"
          "a,b\n"
          "1,2\n"
          "0.5,x\n");
}

TEST_CASE("csv writer rejects rows whose width disagrees with the header") {
    CsvTable table;
    table.columns = {"a", "b"};
    table.rows = {{"only one"}};
    const auto path = temp_file("bad.csv");
    CHECK_THROWS_AS(write_csv(path.string(), table), std::invalid_argument);
}

TEST_CASE("fnv1a64 matches the published test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("hex64 zero-pads to sixteen lowercase digits") {
    CHECK(hex64(0) == "0000000000000000");
    CHECK(hex64(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(hex64(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}
