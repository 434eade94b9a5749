#include "qrf/cli.hpp"
#include "qrf/errors.hpp"

#include <gtest/gtest.h>

using namespace qrf;
using namespace qrf::cli;

namespace {

std::string config_error(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
        return e.what();
    }
    ADD_FAILURE() << "accepted: " << text;
    return {};
}

}  // namespace

TEST(Cli, MinimalConfigUsesDefaults) {
    const RunConfig c = parse_config_text(R"({"model": {"kind": "nparticle"}})");
    EXPECT_EQ(c.model.kind, models::ModelKind::nparticle);
    EXPECT_EQ(c.model.particles, 3);
    EXPECT_EQ(c.model.N, 8);
    EXPECT_FALSE(c.suites.has_value());
    EXPECT_EQ(c.tol, 1e-10);
    EXPECT_EQ(c.seed, 1u);
}

TEST(Cli, UnknownFieldsAreNamed) {
    EXPECT_NE(config_error(R"({"model": {"kind": "su2", "bogus": 1}})").find("model.bogus"), std::string::npos);
    EXPECT_NE(config_error(R"({"model": {"kind": "su2", "state": {"sigma": 1}}})").find("model.state.sigma"), std::string::npos);
    EXPECT_NE(config_error(R"({"extra": true})").find("extra"), std::string::npos);
    EXPECT_NE(config_error(R"({"suites": ["equivalence", "nope"]})").find("suites[1]"), std::string::npos);
    EXPECT_NE(config_error(R"({"model": {"kind": "su2", "beta": 0.5}})").find("model.beta"), std::string::npos);
    EXPECT_NE(config_error(R"({"model": {"kind": "spin"}})").find("model.kind"), std::string::npos);
    EXPECT_NE(config_error("{not json").find("invalid JSON"), std::string::npos);
}

TEST(Cli, RationalInputs) {
    const RunConfig c = parse_config_text(
        R"({"model": {"kind": "su2", "beta": "2", "j": "1/2", "hbar": 1, "dp": "0.5"}, "hbar_ladder": ["1", "1/2"]})");
    EXPECT_EQ(c.model.beta, Rational(2));
    EXPECT_EQ(c.model.j, Rational(1, 2));
    EXPECT_EQ(c.model.dp, Rational(1, 2));
    ASSERT_EQ(c.scaling.ladder.size(), 2u);
    EXPECT_EQ(c.scaling.ladder[1], Rational(1, 2));
    EXPECT_EQ(parse_rational("-3/6"), Rational(-1, 2));
    EXPECT_EQ(parse_rational("0.125"), Rational(1, 8));
    EXPECT_EQ(parse_ladder("1,1/2,1/4"), (std::vector<Rational>{1, Rational(1, 2), Rational(1, 4)}));
    EXPECT_THROW(parse_rational("1/0"), Error);
    EXPECT_THROW(parse_rational("abc"), Error);
}

TEST(Cli, OffLatticeBetaSurfacesWithHint) {
    const RunConfig c = parse_config_text(R"({"model": {"kind": "su2", "beta": "1/3"}})");
    try {
        run(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::IncommensurableSpectrum);
        EXPECT_NE(std::string(e.what()).find("choose beta"), std::string::npos);
    }
}

TEST(Cli, EmptySuiteSelection) {
    const RunResult r = run(parse_config_text(R"({"model": {"kind": "su2", "beta": "1/3"}, "suites": []})"));
    EXPECT_TRUE(r.passed);
    EXPECT_TRUE(r.reports.empty());
}

TEST(Cli, DeterministicCsv) {
    const RunConfig c = parse_config_text(R"({"model": {"kind": "degenerate"}, "seed": 7})");
    const RunResult a = run(c), b = run(c);
    ASSERT_EQ(a.reports.size(), 2u);
    for (size_t i = 0; i < a.reports.size(); ++i) EXPECT_EQ(to_csv(a.reports[i]), to_csv(b.reports[i]));
    const std::string csv = to_csv(a.reports[0]);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "quantity,formalism,value_re,value_im,residual");
    EXPECT_TRUE(a.passed);
}

TEST(Cli, CsvQuotesFields) {
    models::Report r{"s", "m", {{"cov(q_B,q_C)", "x", {1.0, 0.0}, 0.0, std::nullopt, true}}};
    EXPECT_NE(to_csv(r).find("\"cov(q_B,q_C)\",x,1,0,0"), std::string::npos);
}

TEST(Cli, DefaultSuites) {
    EXPECT_EQ(default_suites(models::ModelKind::nparticle),
              (std::vector<std::string>{"equivalence", "variance", "projectors"}));
    EXPECT_EQ(default_suites(models::ModelKind::degenerate), (std::vector<std::string>{"degenerate", "projectors"}));
}
