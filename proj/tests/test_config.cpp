#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oploc/config.hpp"

using namespace oploc;

namespace {

std::string error_of(const std::string& text)
{
    try {
        RunConfig cfg;
        apply_ini(cfg, IniFile::parse_string(text, "test.ini"));
        cfg.validate();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST_CASE("INI parsing")
{
    const IniFile ini = IniFile::parse_string("top = 1\n"
                                              "# comment\n"
                                              "; another\n"
                                              "[schedule]\n"
                                              "  epsilon = 0.5   # trailing\n"
                                              "\n"
                                              "[manifold]\n"
                                              "times = 3, 4,5\n",
                                              "x.ini");
    REQUIRE(ini.find("", "top") != nullptr);
    CHECK(ini.find("", "top")->value == "1");
    CHECK(ini.find("schedule", "epsilon")->value == "0.5");
    CHECK(ini.find("schedule", "epsilon")->line == 5);
    CHECK(ini.find("manifold", "times")->value == "3, 4,5");
    CHECK(ini.find("manifold", "missing") == nullptr);
    CHECK(ini.source() == "x.ini");
}

TEST_CASE("INI syntax errors carry the line")
{
    CHECK_THROWS_WITH_AS(IniFile::parse_string("[a]\nx = 1\nx = 2\n", "f.ini"), doctest::Contains("f.ini:3"), ConfigError);
    CHECK_THROWS_WITH_AS(IniFile::parse_string("[a\n", "f.ini"), doctest::Contains("f.ini:1"), ConfigError);
    CHECK_THROWS_WITH_AS(IniFile::parse_string("[a]\njunk\n", "f.ini"), doctest::Contains("f.ini:2"), ConfigError);
    CHECK_THROWS_AS(IniFile::load("/nonexistent/oploc.ini"), ConfigError);
}

TEST_CASE("values are applied to the run config")
{
    RunConfig cfg;
    apply_ini(cfg, IniFile::parse_string("[schedule]\nepsilon = 0.5\ntau_m = 0.05\n"
                                         "[integrator]\nmethod = rk4\ndt = 0.002\np_max = 200\n"
                                         "[refine]\nmax_gap_theta = 0.1\n"
                                         "[manifold]\ntimes = 3, 4\np0_max = 2\n"
                                         "[multipath]\nunwrapped = false\n"
                                         "[sqt]\nn_traj = 123\n"
                                         "[run]\nseed = 18446744073709551615\nthreads = 3\nout_dir = results\n",
                                         "ok.ini"));
    CHECK(cfg.epsilon == 0.5);
    CHECK(cfg.tau_m == 0.05);
    CHECK(cfg.integrator.method == IntegrationMethod::RK4);
    CHECK(cfg.integrator.dt == 0.002);
    CHECK(cfg.integrator.p_max == 200.0);
    CHECK(cfg.refine.max_gap_theta == 0.1);
    CHECK(cfg.manifold.times == std::vector<double>{3.0, 4.0});
    CHECK(cfg.manifold.p0_max == 2.0);
    CHECK_FALSE(cfg.multipath.unwrapped);
    CHECK(cfg.sqt.n_traj == 123);
    CHECK(cfg.seed == 18446744073709551615ull);
    CHECK(cfg.threads == 3);
    CHECK(cfg.out_dir == "results");
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.schedule().epsilon() == 0.5);

    const auto flat = describe(cfg);
    CHECK(flat.at("schedule.epsilon") == "0.5");
    CHECK(flat.at("integrator.method") == "rk4");
}

TEST_CASE("bad keys and values are rejected with their line")
{
    CHECK(error_of("[schedule]\nepsilon = 0.5\nepsilonn = 1\n").find("test.ini:3") != std::string::npos);
    CHECK(error_of("[nosuch]\nx = 1\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[schedule]\nepsilon = abc\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[schedule]\nepsilon = 0.5x\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[sqt]\nn_traj = -4\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[multipath]\nunwrapped = maybe\n").find("test.ini:2") != std::string::npos);
    CHECK(error_of("[integrator]\nmethod = euler\n").find("test.ini:2") != std::string::npos);
    CHECK_FALSE(error_of("[schedule]\nepsilon = 1.5\n").empty());
    CHECK_FALSE(error_of("[manifold]\np0_min = 2\np0_max = 1\n").empty());
    CHECK_FALSE(error_of("[integrator]\ndt = 0\n").empty());
    CHECK(error_of("[schedule]\nepsilon = 0.3\n").empty());
}

TEST_CASE("every preset parses and validates")
{
    REQUIRE(presets().size() >= 10);
    for (const auto& [name, text] : presets()) {
        CAPTURE(name);
        RunConfig cfg;
        CHECK_NOTHROW(apply_ini(cfg, IniFile::parse_string(text, "preset:" + name)));
        CHECK_NOTHROW(cfg.validate());
    }
    RunConfig cfg;
    apply_ini(cfg, IniFile::parse_string(presets().at("manifold-t3"), "preset"));
    CHECK(cfg.manifold.times == std::vector<double>{3.0});
    CHECK(cfg.epsilon == 0.99);
}

TEST_CASE("config files load from disk")
{
    const auto path = std::filesystem::temp_directory_path() / "oploc_test.ini";
    {
        std::ofstream out(path);
        out << "[schedule]\nepsilon = 0.25\n";
    }
    RunConfig cfg;
    apply_ini(cfg, IniFile::load(path.string()));
    CHECK(cfg.epsilon == 0.25);
    std::filesystem::remove(path);
}
