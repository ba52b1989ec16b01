#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <locale>
#include <sstream>

#include "beliefnav/config.hpp"
#include "beliefnav/csv.hpp"
#include "beliefnav/scenario.hpp"

using namespace bnav;

namespace {

std::string error_of(const std::string &text) {
    try {
        (void)Config::parse(text, "t.cfg");
    } catch (const ConfigError &e) {
        return e.what();
    }
    return {};
}

struct CommaDecimal : std::numpunct<char> {
    char do_decimal_point() const override { return ','; }
};

}  // namespace

TEST(Config, ParsesSectionsListsAndComments) {
    const Config c = Config::parse(
        "schema = 1\n# comment\n[world]\nbounds = 0, 10, 0, 5  # trailing\nname = test\n"
        "[beacon]\nposition = 1, 2\n[beacon]\nposition = 3, 4\n");
    const Section &w = c.one("world");
    EXPECT_EQ(w.numbers("bounds", 4), (std::vector<double>{0, 10, 0, 5}));
    EXPECT_EQ(w.text("name"), "test");
    ASSERT_EQ(c.all("beacon").size(), 2u);
    EXPECT_EQ(c.all("beacon")[1]->numbers("position")[0], 3.0);
    EXPECT_EQ(c.optional("missing"), nullptr);
    EXPECT_EQ(w.number_or("absent", 2.5), 2.5);
}

TEST(Config, NumbersUseDotRegardlessOfLocale) {
    const std::locale old = std::locale::global(std::locale(std::locale::classic(), new CommaDecimal));
    const Config c = Config::parse("schema = 1\n[a]\nx = 0.25\n");
    std::locale::global(old);
    EXPECT_EQ(c.one("a").number("x"), 0.25);
}

TEST(Config, ErrorsNameLineSectionAndField) {
    EXPECT_NE(error_of("[a]\nx = 1\n").find("t.cfg:1"), std::string::npos);
    EXPECT_NE(error_of("schema = 2\n").find("unsupported schema"), std::string::npos);
    EXPECT_NE(error_of("x = 1\n").find("schema"), std::string::npos);
    EXPECT_NE(error_of("schema = 1\n[a\n").find("malformed"), std::string::npos);
    EXPECT_NE(error_of("schema = 1\n[a]\njunk\n").find("t.cfg:3"), std::string::npos);
    EXPECT_NE(error_of("schema = 1\n[a]\nx = 1\nx = 2\n").find("t.cfg:4: [a] duplicate field 'x'"), std::string::npos);

    const Config c = Config::parse("schema = 1\n[a]\nx = 1, two\ny = 1.5\n[b]\n[b]\n", "t.cfg");
    try {
        (void)c.one("a").numbers("x");
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_NE(std::string(e.what()).find("t.cfg:3: [a] field 'x'"), std::string::npos);
    }
    EXPECT_THROW((void)c.one("a").integer("y"), ConfigError);
    EXPECT_THROW((void)c.one("a").number("z"), ConfigError);
    EXPECT_THROW((void)c.one("b"), ConfigError);
    EXPECT_THROW((void)c.one("c"), ConfigError);
    EXPECT_THROW((void)c.one("a").numbers("y", 2), ConfigError);
}

TEST(Config, MissingFileIsAConfigError) {
    EXPECT_THROW(Config::load("/nonexistent/x.cfg"), ConfigError);
}

TEST(Scenario, BodyRequiresRadiusAndValidCovariance) {
    const Config ok = Config::parse("schema = 1\n[o]\nposition = 1, 2\nradius = 0.5\ncov = 0.1, 0.02, 0.2\n");
    const Body b = read_body(ok.one("o"));
    EXPECT_EQ(b.radius, 0.5);
    EXPECT_DOUBLE_EQ(b.position_cov()(0, 1), 0.02);
    try {
        (void)read_body(Config::parse("schema = 1\n[o]\nposition = 1, 2\n").one("o"));
        FAIL();
    } catch (const ConfigError &e) {
        EXPECT_NE(std::string(e.what()).find("radius"), std::string::npos);
    }
    EXPECT_THROW(read_body(Config::parse("schema = 1\n[o]\nposition = 1, 2\nradius = -1\n").one("o")), ConfigError);
    EXPECT_THROW(read_body(Config::parse("schema = 1\n[o]\nposition = 1, 2\nradius = 1\ncov = 0.1, 0.5, 0.1\n").one("o")),
                 ConfigError);
}

TEST(Scenario, FixturesLoad) {
    const std::string d = BNAV_DATA_DIR;
    for (const char *f : {"beacon_world.cfg", "beacon_world_uncertain_obstacle.cfg", "beacon_world_offset.cfg",
                          "beacon_world_blocked_gap.cfg", "beacon_world_walled.cfg"}) {
        const BeaconScenario sc = load_beacon_scenario(Config::load(d + "/" + f));
        EXPECT_FALSE(sc.world.beacons.empty()) << f;
        EXPECT_EQ(sc.world.start_pose.size(), 3) << f;
    }
    for (const char *f : {"grasp_ball.cfg", "grasp_no_ball.cfg"}) {
        const GraspScenario sc = load_grasp_scenario(Config::load(d + "/" + f));
        EXPECT_FALSE(sc.world.lattice.empty()) << f;
    }
}

TEST(Csv, NumbersRoundTripExactly) {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0, 4.577932433891314e-05}) {
        const std::string s = format_number(v);
        EXPECT_EQ(s.find(','), std::string::npos);
        EXPECT_EQ(std::stod(s), v);
    }
    EXPECT_EQ(format_number(std::nan("")), "nan");
    EXPECT_EQ(format_number(-std::numeric_limits<double>::infinity()), "-inf");
}

TEST(Csv, FormattingIgnoresGlobalLocale) {
    const std::locale old = std::locale::global(std::locale(std::locale::classic(), new CommaDecimal));
    const std::string s = format_number(0.5);
    std::locale::global(old);
    EXPECT_EQ(s, "0.5");
}

TEST(Csv, WriteParseRoundTrip) {
    std::ostringstream out;
    {
        CsvWriter w(out, {"name", "value", "count", "flag"});
        w.row("a", 0.25, 3, true);
        w.row(std::string("b"), std::nan(""), 4L, false);
        w.footer({{"k", 1.5}});
    }
    const std::string text = out.str();
    EXPECT_EQ(text.find('\r'), std::string::npos);
    EXPECT_EQ(text.back(), '\n');
    const CsvTable t = parse_csv(text);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.cell(0, "name"), "a");
    EXPECT_EQ(t.number(0, "value"), 0.25);
    EXPECT_EQ(t.cell(0, "flag"), "1");
    EXPECT_TRUE(std::isnan(t.number(1, "value")));
    EXPECT_EQ(t.footer["k"], 1.5);
}

TEST(Csv, WriterAndParserRejectMalformedInput) {
    std::ostringstream out;
    CsvWriter w(out, {"a", "b"});
    EXPECT_THROW(w.row(1), CsvError);
    EXPECT_THROW(w.row("x,y", 1), CsvError);
    EXPECT_THROW(parse_csv("a,b\r\n1,2\r\n"), CsvError);
    EXPECT_THROW(parse_csv("a,b\n1\n"), CsvError);
    EXPECT_THROW(parse_csv(""), CsvError);
    EXPECT_THROW(parse_csv("a\n# {bad\n"), CsvError);
    EXPECT_THROW(parse_csv("a\n1\n# {}\n2\n"), CsvError);
    const CsvTable t = parse_csv("a,b\n1,2\n");
    EXPECT_THROW((void)t.column("c"), CsvError);
    EXPECT_THROW((void)parse_csv("a\nx\n").number(0, "a"), CsvError);
}
