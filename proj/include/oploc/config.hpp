#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "oploc/integrator.hpp"
#include "oploc/manifold.hpp"
#include "oploc/model.hpp"

namespace oploc {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sectioned key = value text. '#' and ';' start comments; keys before the
/// first [section] belong to section "". Every value keeps its source line
/// for error messages.
class IniFile {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static IniFile parse(std::istream& in, const std::string& source);
    static IniFile parse_string(const std::string& text, const std::string& source);
    static IniFile load(const std::string& path);

    const std::string& source() const noexcept { return source_; }
    const std::map<std::string, std::map<std::string, Entry>>& sections() const noexcept { return sections_; }
    const Entry* find(const std::string& section, const std::string& key) const;

private:
    std::string source_;
    std::map<std::string, std::map<std::string, Entry>> sections_;
};

struct PortraitParams {
    std::vector<double> p0;          ///< seeded momenta
    double p0_jitter = 0.2;          ///< each seed also launched at +- jitter
    int theta_points = 24;           ///< initial angles per momentum, spread over [0, 2 pi)
    int n_strobes = 100;
    double delta_theta0 = 0.01;
};

struct ManifoldParams {
    double theta0 = 0.0;
    double p0_min = 0.0;
    double p0_max = 1.5;
    std::vector<double> times{4.0};
};

struct MultipathParams {
    std::vector<double> targets{9.28, 9.32};
    bool unwrapped = true;           ///< targets are unwrapped angles, else mod 2 pi
    double tol_theta = 1e-8;
};

struct StretchParams {
    double p0_min = -2.0;
    double p0_max = 2.0;
    std::vector<double> times{1.0, 2.0, 3.0, 4.0, 5.0};
    double delta_theta0 = 0.01;
};

struct LeParams {
    std::vector<double> theta0{0.286, 1.142};
    std::vector<double> p0{1.227, -0.545};
    double T = 15.0;
    double sample_dt = 0.1;
    double delta_theta0 = 0.01;
};

struct SqtParams {
    double dt = 1e-3;
    std::size_t n_traj = 20000;
    double theta0 = 0.0;
    double T = 3.0;
    double theta_f = 3.141592653589793;
    double window = 0.1;
    std::size_t t_bins = 400;
    std::size_t theta_bins = 400;
    std::size_t record_stride = 5;
    std::size_t min_population = 50;
    int kick_substeps = 10;
};

struct KickLimitSweep {
    double theta_i = 1.5707963267948966;
    double theta_f = 1.5707963267948966;
    double gamma_min = 0.01;
    double gamma_max = 100.0;
    int points = 200;
};

struct ResonanceParams {
    int n_max = 12;
    int k_max = 40;
    double T = 20.0;                 ///< manifold time for the deviation profile
    double p0_min = 0.0;
    double p0_max = 10.0;
    int p0_points = 2001;
};

/// Everything one CLI invocation needs.
struct RunConfig {
    double tau_x = 1.0;
    double epsilon = 0.99;
    double tau_m = 0.025;
    double period = 1.0;
    IntegratorConfig integrator;
    RefineConfig refine;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    int threads = 0;

    PortraitParams portrait;
    ManifoldParams manifold;
    MultipathParams multipath;
    StretchParams stretch;
    LeParams le;
    SqtParams sqt;
    KickLimitSweep kicklimit;
    ResonanceParams resonance;

    MeasurementSchedule schedule() const;
    /// Throws ConfigError naming the offending block.
    void validate() const;
};

/// Overlays the keys of `ini` onto `cfg`. Unknown sections or keys and
/// malformed values raise ConfigError with "source:line:" prefixes.
void apply_ini(RunConfig& cfg, const IniFile& ini);

/// Built-in presets by name, as INI text.
const std::map<std::string, std::string>& presets();

/// Flat key list for metadata sidecars: "section.key" -> value string.
std::map<std::string, std::string> describe(const RunConfig& cfg);

} // namespace oploc
