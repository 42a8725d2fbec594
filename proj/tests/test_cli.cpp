#include <greenhyp/cli.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace greenhyp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("greenhyp_cli_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string write(const fs::path& p, const std::string& text)
{
    std::ofstream(p) << text;
    return p.string();
}

const char* flat_box = R"([spacetime]
topology = line
t_min = 0
t_max = 2
x_min = -2
x_max = 2

[grid]
nt = 61
nx = 61
)";

const char* transport = R"([spacetime]
topology = line
t_min = 0
t_max = 1.6
x_min = -2.5
x_max = 2.5

[grid]
nt = 101
nx = 101

[system]
preset = transport
speed = 0.5

[sources]
bumps = 0.6 0 0.5 1

[green]
op = custom
strategy = cauchy
)";

const cli::Artifact* find(const cli::Result& r, const std::string& name)
{
    for (const auto& a : r.artifacts)
        if (a.name == name) return &a;
    return nullptr;
}

const CheckRow* row(const cli::Result& r, const std::string& name)
{
    for (const auto& c : r.report.rows)
        if (c.name == name) return &c;
    return nullptr;
}

} // namespace

TEST(Cli, ClassifyWedgeIsPastCompactOnly)
{
    const fs::path d = scratch("classify");
    cli::Options o;
    o.set = write(d / "wedge.plset", "# t >= |x|/2\n-1 0.5 0\n-1 -0.5 0\n");
    const auto r = cli::run("classify", o);
    const cli::Artifact* a = find(r, "classify.csv");
    ASSERT_NE(a, nullptr);
    EXPECT_EQ(a->bytes, "name,compact,spc,sfc,sc,pc,fc,tc\nwedge,0,0,0,0,1,0,0\n");
}

TEST(Cli, ExactSequenceOnZeroSourceIsTrivial)
{
    const fs::path d = scratch("exact");
    cli::Options o;
    o.config = write(d / "flatbox.cfg", flat_box);
    o.check = "exact-seq";
    const auto r = cli::run("verify", o);
    EXPECT_TRUE(r.report.pass());
    for (const auto& c : r.report.rows) EXPECT_EQ(c.value, 0.0) << c.name;
}

TEST(Cli, TransportConvergenceOrder)
{
    const fs::path d = scratch("conv");
    cli::Options o;
    o.config = write(d / "transport.cfg", transport);
    o.levels = 3;
    const auto r = cli::run("convergence", o);
    ASSERT_NE(row(r, "level1.order"), nullptr);
    ASSERT_NE(row(r, "level2.order"), nullptr);
    EXPECT_GE(row(r, "level1.order")->value, 1.8);
    EXPECT_GE(row(r, "level2.order")->value, 1.8);
    EXPECT_TRUE(r.report.pass());
    ASSERT_NE(find(r, "convergence.csv"), nullptr);
}

TEST(Cli, SameInputsSameBytes)
{
    const fs::path d = scratch("det");
    cli::Options o;
    o.config = write(d / "transport.cfg", transport);
    const auto a = cli::run("solve", o), b = cli::run("solve", o);
    EXPECT_EQ(a.report.csv(), b.report.csv());
    ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
    for (std::size_t k = 0; k < a.artifacts.size(); ++k) EXPECT_EQ(a.artifacts[k].bytes, b.artifacts[k].bytes);

    cli::Options other = o;
    other.seed = 7;
    EXPECT_NE(cli::run("solve", other).report.inputs_digest, a.report.inputs_digest);
}

TEST(Cli, CorpusIsDeterministic)
{
    for (const std::string kind : {"plsets", "systems", "sources"}) {
        cli::Options o;
        o.kind = kind;
        o.seed = 11;
        o.size = 4;
        const auto a = cli::run("corpus", o), b = cli::run("corpus", o);
        ASSERT_EQ(a.artifacts.size(), b.artifacts.size()) << kind;
        ASSERT_FALSE(a.artifacts.empty()) << kind;
        for (std::size_t k = 0; k < a.artifacts.size(); ++k) EXPECT_EQ(a.artifacts[k].bytes, b.artifacts[k].bytes);
    }
    cli::Options bad;
    bad.kind = "plsets";
    bad.size = 0;
    EXPECT_THROW((void)cli::run("corpus", bad), Error);
}

TEST(Cli, ArtifactsAndReportWritten)
{
    const fs::path d = scratch("artifacts");
    cli::Options o;
    o.config = write(d / "transport.cfg", transport);
    const auto r = cli::run("green", o);
    EXPECT_TRUE(r.report.pass());
    cli::write_artifacts(r, (d / "out").string());
    for (const char* f : {"report.csv", "green.csv", "green.pgm", "green.pgm.range"})
        EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
    std::ifstream pgm(d / "out" / "green.pgm", std::ios::binary);
    std::string magic;
    pgm >> magic;
    EXPECT_EQ(magic, "P5");
}

TEST(Cli, InputErrorsAreNotCheckFailures)
{
    const fs::path d = scratch("errors");
    cli::Options o;
    o.check = "energy";
    try {
        (void)cli::run("verify", o);
        FAIL() << "missing config accepted";
    } catch (const Error& e) {
        EXPECT_NE(e.kind(), ErrorKind::precondition);
    }
    o.config = write(d / "bad.cfg", std::string(flat_box) + "[system]\npreset = maxwell\n");
    EXPECT_THROW((void)cli::run("verify", o), Error);
    cli::Options g;
    g.config = write(d / "box.cfg", flat_box);
    g.op = "box";
    g.strategy = "sqrt";
    EXPECT_THROW((void)cli::run("green", g), Error);
}

TEST(Cli, DualityFlagsSetsOutsideFamilyRange)
{
    const fs::path d = scratch("duality");
    cli::Options o;
    o.check = "duality";
    o.set = write(d / "steep.plset", "-1 0.8 0\n-1 -0.8 0\n");
    const auto r = cli::run("verify", o);
    ASSERT_NE(row(r, "set.near_null_normals"), nullptr);
    EXPECT_FALSE(row(r, "set.near_null_normals")->pass);
}
