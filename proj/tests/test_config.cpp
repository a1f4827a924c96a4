#include <gtest/gtest.h>

#include <sstream>

#include <atomlaser/config.hpp>

using namespace atomlaser;

TEST(Config, DefaultsDescribeTheReferenceSystem) {
    RunConfig c;
    EXPECT_EQ(c.params.n_atoms, 2000);
    EXPECT_EQ(c.grid.extent, 40);
    EXPECT_EQ(c.grid.n_points, 1024);
    EXPECT_EQ(c.output_modes, "scattering");
    EXPECT_DOUBLE_EQ(c.params.u1(), c.params.U0);
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, ParsesKeyValueWithComments) {
    RunConfig c;
    std::istringstream in("# comment\ntemperature = 150\n  n_points=512 # trailing\n\nlevel_shift_feedback = true\noutput_modes=plane\n");
    parse_config(c, in);
    EXPECT_EQ(c.params.temperature, 150);
    EXPECT_EQ(c.grid.n_points, 512);
    EXPECT_TRUE(c.level_shift_feedback);
    EXPECT_EQ(c.output_modes, "plane");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    RunConfig c;
    EXPECT_THROW(set_key(c, "nonsense", "1"), ConfigError);
    EXPECT_THROW(set_key(c, "temperature", "hot"), ConfigError);
    EXPECT_THROW(set_key(c, "temperature", "1.5x"), ConfigError);
    EXPECT_THROW(set_key(c, "level_shift_feedback", "maybe"), ConfigError);
    EXPECT_THROW(apply_assignment(c, "no equals sign"), ConfigError);
}

TEST(Config, ValidationCatchesOutOfRange) {
    RunConfig c;
    c.mixing = 0;
    EXPECT_THROW(validate(c), ConfigError);
    c = RunConfig{};
    c.params.trap_frequency = 2;
    EXPECT_THROW(validate(c), ConfigError);
    c = RunConfig{};
    c.params.temperature = -1;
    EXPECT_THROW(validate(c), ConfigError);
    c = RunConfig{};
    c.normalization = "other";
    EXPECT_THROW(validate(c), ConfigError);
    c = RunConfig{};
    c.grid.n_points = 4;
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(Config, MissingFileReportsConfigNotFound) {
    try {
        load_config("/nonexistent/path/run.cfg");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("config not found"), std::string::npos);
    }
}

TEST(Config, ValuesRoundTripThroughTheKeyTable) {
    RunConfig a;
    a.params.temperature = 37.25;
    a.lambda = 0.125;
    a.output_modes = "plane";
    a.level_shift_feedback = true;
    RunConfig b;
    for (const auto& [k, v] : config_values(a)) set_key(b, k, v);
    EXPECT_EQ(config_values(a), config_values(b));
    EXPECT_EQ(config_values(a).size(), config_keys().size());
}

TEST(Grid, MirrorSymmetricAndUniform) {
    const SimSetup s = build_setup(PhysicalParams{}, SpatialGrid{});
    const double h = s.dx();
    EXPECT_DOUBLE_EQ(h, 40.0 / 1024);
    for (int i = 0; i < s.n(); ++i) {
        EXPECT_EQ(s.x[i], -s.x[s.n() - 1 - i]);
        EXPECT_DOUBLE_EQ(s.trap[i], 0.5 * s.x[i] * s.x[i]);
    }
    for (int i = 1; i < s.n(); ++i) EXPECT_NEAR(s.x[i] - s.x[i - 1], h, 1e-12);
}

TEST(Units, DisplayLengthIsHalfNatural) {
    EXPECT_DOUBLE_EQ(to_display_length(4.0), 2.0);
    EXPECT_DOUBLE_EQ(to_natural_length(to_display_length(3.7)), 3.7);
}

TEST(Stencil, DispersionMatchesPlaneWaveAction) {
    const Stencil st(0.05);
    const double k = 1.3;
    // apply the five-point stencil to e^{ikx} at one point
    cplx acc = st.c0;
    acc += st.c1 * (std::exp(cplx(0, k * st.h)) + std::exp(cplx(0, -k * st.h)));
    acc += st.c2 * (std::exp(cplx(0, 2 * k * st.h)) + std::exp(cplx(0, -2 * k * st.h)));
    EXPECT_NEAR(std::abs(acc - st.energy(cplx(k, 0))), 0.0, 1e-10);
    EXPECT_NEAR(st.energy(cplx(k, 0)).real(), 0.5 * k * k, 2e-6);
    EXPECT_NEAR(st.wavenumber(st.energy(cplx(k, 0)).real()).real(), k, 1e-10);
}

TEST(Hash, Fnv1aReferenceValues) {
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
}
