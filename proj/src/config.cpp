#include "oploc/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace oploc {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string where(const IniFile& ini, int line)
{
    return ini.source() + ":" + std::to_string(line) + ": ";
}

double to_double(const std::string& v)
{
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw std::invalid_argument("expected a number");
    return out;
}

long long to_integer(const std::string& v)
{
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw std::invalid_argument("expected an integer");
    return out;
}

std::size_t to_count(const std::string& v)
{
    const long long n = to_integer(v);
    if (n < 0) throw std::invalid_argument("expected a non-negative integer");
    return static_cast<std::size_t>(n);
}

std::uint64_t to_u64(const std::string& v)
{
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw std::invalid_argument("expected an unsigned 64-bit integer");
    return out;
}

bool to_bool(const std::string& v)
{
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

std::vector<double> to_list(const std::string& v)
{
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("empty list item");
        out.push_back(to_double(item));
    }
    if (out.empty()) throw std::invalid_argument("expected a comma-separated list of numbers");
    return out;
}

// Shortest text that reads back to the same double.
std::string fmt(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
    return out;
}

struct Binding {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

using Table = std::map<std::string, std::map<std::string, Binding>>;

Binding bind(double& x) { return {[&x](const std::string& v) { x = to_double(v); }, [&x] { return fmt(x); }}; }
Binding bind(int& x)
{
    return {[&x](const std::string& v) { x = static_cast<int>(to_integer(v)); }, [&x] { return std::to_string(x); }};
}
Binding bind(std::size_t& x) { return {[&x](const std::string& v) { x = to_count(v); }, [&x] { return std::to_string(x); }}; }
Binding bind_seed(std::uint64_t& x)
{
    return {[&x](const std::string& v) { x = to_u64(v); }, [&x] { return std::to_string(x); }};
}
Binding bind(bool& x)
{
    return {[&x](const std::string& v) { x = to_bool(v); }, [&x] { return std::string(x ? "true" : "false"); }};
}
Binding bind(std::string& x) { return {[&x](const std::string& v) { x = v; }, [&x] { return x; }}; }
Binding bind(std::vector<double>& x) { return {[&x](const std::string& v) { x = to_list(v); }, [&x] { return fmt(x); }}; }

Table bindings(RunConfig& c)
{
    Table t;
    t["run"] = {{"out_dir", bind(c.out_dir)}, {"seed", bind_seed(c.seed)}, {"threads", bind(c.threads)}};
    t["schedule"] = {{"tau_x", bind(c.tau_x)},
                     {"epsilon", bind(c.epsilon)},
                     {"tau_m", bind(c.tau_m)},
                     {"period", bind(c.period)}};
    IntegratorConfig& ic = c.integrator;
    t["integrator"] = {
        {"method", {[&ic](const std::string& v) { ic.method = parse_integration_method(v); },
                    [&ic] { return to_string(ic.method); }}},
        {"dt", bind(ic.dt)},
        {"rel_tol", bind(ic.rel_tol)},
        {"abs_tol", bind(ic.abs_tol)},
        {"p_max", bind(ic.p_max)},
        {"max_steps", bind(ic.max_steps)},
        {"kick_min_steps", bind(ic.kick_min_steps)},
        {"kick_half_width", bind(ic.kick_half_width)},
    };
    RefineConfig& r = c.refine;
    t["refine"] = {{"seed_points", bind(r.seed_points)}, {"max_gap_theta", bind(r.max_gap_theta)},
                   {"max_gap_p", bind(r.max_gap_p)},     {"min_dp0", bind(r.min_dp0)},
                   {"max_points", bind(r.max_points)},   {"max_iterations", bind(r.max_iterations)}};
    t["portrait"] = {{"p0", bind(c.portrait.p0)},
                     {"p0_jitter", bind(c.portrait.p0_jitter)},
                     {"theta_points", bind(c.portrait.theta_points)},
                     {"n_strobes", bind(c.portrait.n_strobes)},
                     {"delta_theta0", bind(c.portrait.delta_theta0)}};
    t["manifold"] = {{"theta0", bind(c.manifold.theta0)},
                     {"p0_min", bind(c.manifold.p0_min)},
                     {"p0_max", bind(c.manifold.p0_max)},
                     {"times", bind(c.manifold.times)}};
    t["multipath"] = {{"targets", bind(c.multipath.targets)},
                      {"unwrapped", bind(c.multipath.unwrapped)},
                      {"tol_theta", bind(c.multipath.tol_theta)}};
    t["stretch"] = {{"p0_min", bind(c.stretch.p0_min)},
                    {"p0_max", bind(c.stretch.p0_max)},
                    {"times", bind(c.stretch.times)},
                    {"delta_theta0", bind(c.stretch.delta_theta0)}};
    t["le"] = {{"theta0", bind(c.le.theta0)},
               {"p0", bind(c.le.p0)},
               {"T", bind(c.le.T)},
               {"sample_dt", bind(c.le.sample_dt)},
               {"delta_theta0", bind(c.le.delta_theta0)}};
    SqtParams& s = c.sqt;
    t["sqt"] = {{"dt", bind(s.dt)},
                {"n_traj", bind(s.n_traj)},
                {"theta0", bind(s.theta0)},
                {"T", bind(s.T)},
                {"theta_f", bind(s.theta_f)},
                {"window", bind(s.window)},
                {"t_bins", bind(s.t_bins)},
                {"theta_bins", bind(s.theta_bins)},
                {"record_stride", bind(s.record_stride)},
                {"min_population", bind(s.min_population)},
                {"kick_substeps", bind(s.kick_substeps)}};
    t["kicklimit"] = {{"theta_i", bind(c.kicklimit.theta_i)},
                      {"theta_f", bind(c.kicklimit.theta_f)},
                      {"gamma_min", bind(c.kicklimit.gamma_min)},
                      {"gamma_max", bind(c.kicklimit.gamma_max)},
                      {"points", bind(c.kicklimit.points)}};
    t["resonance"] = {{"n_max", bind(c.resonance.n_max)},     {"k_max", bind(c.resonance.k_max)},
                      {"T", bind(c.resonance.T)},             {"p0_min", bind(c.resonance.p0_min)},
                      {"p0_max", bind(c.resonance.p0_max)},   {"p0_points", bind(c.resonance.p0_points)}};
    return t;
}

} // namespace

IniFile IniFile::parse(std::istream& in, const std::string& source)
{
    IniFile ini;
    ini.source_ = source;
    std::string section;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto comment = raw.find_first_of("#;");
        std::string text = trim(comment == std::string::npos ? raw : raw.substr(0, comment));
        if (text.empty()) continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(source + ":" + std::to_string(line) + ": unterminated section header");
            section = trim(text.substr(1, text.size() - 2));
            if (section.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": empty section name");
            ini.sections_[section];
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(line) + ": expected 'key = value', got '" + text + "'");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + ":" + std::to_string(line) + ": missing key before '='");
        auto& sec = ini.sections_[section];
        if (const auto it = sec.find(key); it != sec.end())
            throw ConfigError(source + ":" + std::to_string(line) + ": duplicate key '" + key + "' (first set on line " +
                              std::to_string(it->second.line) + ")");
        sec[key] = {value, line};
    }
    return ini;
}

IniFile IniFile::parse_string(const std::string& text, const std::string& source)
{
    std::istringstream in(text);
    return parse(in, source);
}

IniFile IniFile::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    return parse(in, path);
}

const IniFile::Entry* IniFile::find(const std::string& section, const std::string& key) const
{
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
}

void apply_ini(RunConfig& cfg, const IniFile& ini)
{
    Table table = bindings(cfg);
    for (const auto& [section, entries] : ini.sections()) {
        const std::string sec_name = section.empty() ? "run" : section;
        const auto sec = table.find(sec_name);
        if (sec == table.end()) {
            const int line = entries.empty() ? 0 : entries.begin()->second.line;
            throw ConfigError(where(ini, line) + "unknown section [" + section + "]");
        }
        for (const auto& [key, entry] : entries) {
            const auto b = sec->second.find(key);
            if (b == sec->second.end())
                throw ConfigError(where(ini, entry.line) + "unknown key '" + key + "' in [" + sec_name + "]");
            try {
                b->second.set(entry.value);
            } catch (const std::exception& e) {
                throw ConfigError(where(ini, entry.line) + sec_name + "." + key + " = '" + entry.value + "': " + e.what());
            }
        }
    }
}

MeasurementSchedule RunConfig::schedule() const
{
    return MeasurementSchedule(tau_x, epsilon, tau_m, period);
}

void RunConfig::validate() const
{
    auto check = [](const char* block, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[") + block + "] " + e.what());
        }
    };
    check("schedule", [&] { (void)schedule(); });
    check("integrator", [&] { integrator.validate(); });
    check("refine", [&] { refine.validate(); });
    check("run", [&] {
        if (out_dir.empty()) throw std::invalid_argument("out_dir must not be empty");
        if (threads < 0) throw std::invalid_argument("threads must be >= 0");
    });
    check("portrait", [&] {
        if (portrait.n_strobes < 1) throw std::invalid_argument("n_strobes must be >= 1");
        if (portrait.theta_points < 1) throw std::invalid_argument("theta_points must be >= 1");
        if (!(portrait.delta_theta0 > 0.0)) throw std::invalid_argument("delta_theta0 must be > 0");
    });
    check("manifold", [&] {
        if (!(manifold.p0_max > manifold.p0_min)) throw std::invalid_argument("p0_max must exceed p0_min");
    });
    check("multipath", [&] {
        if (!(multipath.tol_theta > 0.0)) throw std::invalid_argument("tol_theta must be > 0");
    });
    check("stretch", [&] {
        if (!(stretch.p0_max > stretch.p0_min)) throw std::invalid_argument("p0_max must exceed p0_min");
        if (!(stretch.delta_theta0 > 0.0)) throw std::invalid_argument("delta_theta0 must be > 0");
    });
    check("le", [&] {
        if (le.theta0.size() != le.p0.size()) throw std::invalid_argument("theta0 and p0 lists differ in length");
        if (!(le.T > 0.0) || !(le.sample_dt > 0.0)) throw std::invalid_argument("T and sample_dt must be > 0");
    });
    check("sqt", [&] {
        if (!(sqt.T > 0.0)) throw std::invalid_argument("T must be > 0");
        if (!(sqt.window > 0.0)) throw std::invalid_argument("window must be > 0");
        if (sqt.t_bins < 1 || sqt.theta_bins < 1) throw std::invalid_argument("bin counts must be >= 1");
    });
    check("kicklimit", [&] {
        if (!(kicklimit.gamma_min > 0.0 && kicklimit.gamma_max > kicklimit.gamma_min))
            throw std::invalid_argument("need 0 < gamma_min < gamma_max");
        if (kicklimit.points < 2) throw std::invalid_argument("points must be >= 2");
    });
    check("resonance", [&] {
        if (resonance.n_max < 1 || resonance.k_max < 0) throw std::invalid_argument("need n_max >= 1, k_max >= 0");
        if (resonance.p0_points < 2 || !(resonance.p0_max > resonance.p0_min))
            throw std::invalid_argument("need p0_points >= 2 and p0_max > p0_min");
        if (!(resonance.T > 0.0)) throw std::invalid_argument("T must be > 0");
    });
}

const std::map<std::string, std::string>& presets()
{
    static const std::map<std::string, std::string> table = {
        {"weak-kick-portrait", "[schedule]\nepsilon = 0.1\n[portrait]\n"
                               "p0 = 0, 1.0471975511965976, 1.5707963267948966, 2.0943951023931953, "
                               "3.141592653589793, 4.71238898038469, 6.283185307179586, 9.42477796076938\n"
                               "p0_jitter = 0.2\ntheta_points = 24\nn_strobes = 100\n"},
        {"strong-kick-portrait", "[schedule]\nepsilon = 0.99\n[portrait]\np0 = -3, -2, -1, 0, 1, 2, 3\n"
                                 "p0_jitter = 0.25\ntheta_points = 24\nn_strobes = 15\n"},
        {"strong-kick-le", "[schedule]\nepsilon = 0.99\n[le]\ntheta0 = 0.286, 1.142\np0 = 1.227, -0.545\nT = 15\n"},
        {"resonance-manifold", "[schedule]\nepsilon = 0.1\n[resonance]\nT = 20\np0_min = 0\np0_max = 10\n"
                               "p0_points = 4001\n"},
        {"manifold-t3", "[schedule]\nepsilon = 0.99\n[manifold]\ntheta0 = 0\np0_min = 0\np0_max = 1.5\ntimes = 3\n"},
        {"manifold-t4", "[schedule]\nepsilon = 0.99\n[manifold]\ntheta0 = 0\np0_min = 0\np0_max = 1.5\ntimes = 4\n"},
        {"manifold-t5", "[schedule]\nepsilon = 0.99\n[manifold]\ntheta0 = 0\np0_min = 0\np0_max = 1.5\ntimes = 5\n"},
        {"multipath-t5", "[schedule]\nepsilon = 0.99\n[manifold]\ntheta0 = 0\np0_min = 0\np0_max = 1.5\ntimes = 5\n"
                         "[multipath]\ntargets = 9.28, 9.32\nunwrapped = true\n"},
        {"ground-postselect", "[schedule]\nepsilon = 0.99\n[sqt]\ntheta0 = 0\nT = 3\ntheta_f = 3.141592653589793\n"
                              "window = 0.1\nn_traj = 100000\n"},
        {"kicklimit-symmetric", "[kicklimit]\ntheta_i = 1.5707963267948966\ntheta_f = 1.5707963267948966\n"},
        {"kicklimit-offset", "[kicklimit]\ntheta_i = 0.286\ntheta_f = 1.5707963267948966\n"},
        {"stretch-t5", "[schedule]\nepsilon = 0.99\n[stretch]\np0_min = -2\np0_max = 2\ntimes = 1, 2, 3, 4, 5\n"},
    };
    return table;
}

std::map<std::string, std::string> describe(const RunConfig& cfg)
{
    RunConfig copy = cfg;
    std::map<std::string, std::string> out;
    for (const auto& [section, keys] : bindings(copy))
        for (const auto& [key, b] : keys) out[section + "." + key] = b.get();
    return out;
}

} // namespace oploc
