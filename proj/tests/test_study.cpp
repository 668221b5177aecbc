#include "ladder/errors.hpp"
#include "ladder/study.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sstream>
#include <string>

using namespace ladder;
using namespace ladder::study;
using nlohmann::json;

namespace {

std::string field_of(const StudyConfig& c)
{
    try {
        c.validate();
    } catch (const ConfigError& e) {
        return e.field();
    } catch (const GeometryError&) {
        return "geometry";
    }
    return "";
}

StudyConfig fem_bands_config()
{
    StudyConfig c;
    c.command = Command::fem_bands;
    c.eps = {0.2};
    c.ntheta = 5;
    c.nev = 3;
    return c;
}

int count_lines(const std::string& s)
{
    int n = 0;
    for (char ch : s)
        n += ch == '\n';
    return n;
}

} // namespace

TEST(Config, DefaultsAreValid)
{
    StudyConfig c;
    EXPECT_EQ(field_of(c), "");
    EXPECT_EQ(field_of(fem_bands_config()), "");
}

TEST(Config, ValidationNamesTheField)
{
    StudyConfig c;
    c.omega_max = -1;
    EXPECT_EQ(field_of(c), "omega-max");

    c = {};
    c.mu = {0.5, -0.1};
    EXPECT_EQ(field_of(c), "mu");

    c = {};
    c.ntheta = 1;
    EXPECT_EQ(field_of(c), "ntheta");

    c = fem_bands_config();
    c.eps.clear();
    EXPECT_EQ(field_of(c), "eps");

    c = fem_bands_config();
    c.h = 0.1;
    EXPECT_EQ(field_of(c), "h");

    c = fem_bands_config();
    c.command = Command::fem_localized;
    c.cells = 3;
    EXPECT_EQ(field_of(c), "cells");

    c = fem_bands_config();
    c.command = Command::study_convergence;
    c.eps = {0.2, 0.1};
    EXPECT_EQ(field_of(c), "eps");
    c.study = StudyKind::flatband;
    EXPECT_EQ(field_of(c), "");

    c = {};
    c.window = std::make_pair(2.0, 1.0);
    EXPECT_EQ(field_of(c), "window");
}

TEST(Config, ThickRungsAreRejected)
{
    StudyConfig c = fem_bands_config();
    c.L = LengthSpec(1, 2);
    c.eps = {0.3};
    EXPECT_NE(field_of(c), "");
}

TEST(Config, JsonRoundTrip)
{
    StudyConfig c = fem_bands_config();
    c.L = LengthSpec(10, 7, true);
    c.mu = {0.25, 0.5};
    c.cls = SymmetryClass::antisymmetric;
    c.h = 0.05;
    c.window = std::make_pair(1.3, 1.8);
    c.study = StudyKind::quasimode;
    c.seed = 7;
    const StudyConfig back = config_from_json(config_to_json(c));
    EXPECT_EQ(back, c);
    EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, JsonErrors)
{
    try {
        config_from_json("{\"ntheta\": \"many\"}");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "ntheta");
    }
    try {
        config_from_json("{\"class\": \"odd\"}");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "class");
    }
    EXPECT_THROW(config_from_json("{not json"), ConfigError);
    EXPECT_THROW(config_from_json("[1, 2]"), ConfigError);
}

TEST(Run, GraphGapsCsv)
{
    StudyConfig c;
    c.command = Command::graph_gaps;
    const Output out = run(c);
    std::istringstream is(out.csv);
    std::string line;
    std::getline(is, line);
    ASSERT_EQ(line.rfind("# ", 0), 0u);
    const json head = json::parse(line.substr(2));
    EXPECT_EQ(head["schema_version"], schema_version);
    EXPECT_EQ(head["config"]["command"], "graph gaps");
    std::getline(is, line);
    EXPECT_EQ(line, "omega,lambda,kind,gap_type,class");
    std::getline(is, line);
    EXPECT_EQ(line.rfind("1.2309594173407", 0), 0u);
    EXPECT_FALSE(out.pass.has_value());
}

TEST(Run, GraphEigsCounts)
{
    StudyConfig c;
    c.command = Command::graph_eigs;
    c.omega_max = 3.0;
    c.mu = {0.25};
    EXPECT_EQ(count_lines(run(c).csv), 2 + 2);
    c.mu = {1.0};
    EXPECT_EQ(count_lines(run(c).csv), 2);
}

TEST(Run, CsvIsDeterministic)
{
    const StudyConfig c = fem_bands_config();
    const Output a = run(c);
    const Output b = run(c);
    EXPECT_EQ(a.csv, b.csv);
    EXPECT_EQ(a.json, b.json);
    EXPECT_EQ(count_lines(a.csv), 2 + 5 * 3);
}

TEST(Run, ReportRoundTrip)
{
    const StudyConfig c = fem_bands_config();
    const Output out = run(c);
    const ParsedReport parsed = parse_report(out.json);
    EXPECT_EQ(parsed.config, c);
    EXPECT_EQ(json::parse(parsed.results_json), json::parse(out.json)["results"]);
    EXPECT_EQ(run(parsed.config).csv, out.csv);

    json bad = json::parse(out.json);
    bad["schema_version"] = 99;
    EXPECT_THROW(parse_report(bad.dump()), ConfigError);
}

TEST(Run, LocalizedWindowMustLieInGap)
{
    StudyConfig c;
    c.command = Command::fem_localized;
    c.eps = {0.2};
    c.mu = {0.25};
    c.cells = 4;
    c.window = std::make_pair(0.5, 1.0);
    try {
        run(c);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.field(), "window");
    }
}

TEST(Run, LocalizedDumpsModes)
{
    StudyConfig c;
    c.command = Command::fem_localized;
    c.eps = {0.1};
    c.mu = {0.25};
    c.cells = 6;
    c.dump_modes = true;
    const Output out = run(c);
    ASSERT_FALSE(out.attachments.empty());
    EXPECT_EQ(out.attachments.front().first.rfind("mode_", 0), 0u);
    EXPECT_NE(out.attachments.front().second.find("values"), std::string::npos);
    EXPECT_GE(count_lines(out.csv), 3);
}

TEST(Format, FullPrecision)
{
    EXPECT_EQ(format_number(1.0), "1.0000000000000000e+00");
    EXPECT_EQ(std::stod(format_number(0.1)), 0.1);
}
