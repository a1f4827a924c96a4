#pragma once
// Parameters, grids and the validated simulation setup.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace atomlaser {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// interaction strength that reproduces mu ~ 2.5 for N_t = 2000 (see README)
inline constexpr double default_U0 = 0.0035355339059327377;

struct PhysicalParams {
    double n_atoms = 2000;       // N_t
    double trap_frequency = 1;   // omega, fixed
    double U0 = default_U0;      // trapped-trapped
    double U1 = -1;              // trapped-free; negative means "same as U0"
    double temperature = 10;     // T, k_B = 1

    double u1() const { return U1 < 0 ? U0 : U1; }
};

struct SpatialGrid {
    double extent = 40;  // L
    int n_points = 1024;
    double spacing() const { return extent / n_points; }
};

struct OutputModeGrid {
    double omega_max = 800;
    int n_omega = 4000;
    double density_of_states = 1.0;  // total, split evenly over the two branches
};

inline void validate(const PhysicalParams& p) {
    if (!(p.n_atoms >= 1)) throw ConfigError("n_atoms must be >= 1");
    if (p.trap_frequency != 1.0) throw ConfigError("trap_frequency is fixed at 1 in natural units");
    if (!(p.U0 >= 0)) throw ConfigError("U0 must be nonnegative");
    if (!(p.temperature >= 0)) throw ConfigError("temperature must be nonnegative");
}
inline void validate(const SpatialGrid& g) {
    if (!(g.extent > 0)) throw ConfigError("extent must be positive");
    if (g.n_points < 16) throw ConfigError("n_points must be >= 16");
}
inline void validate(const OutputModeGrid& m) {
    if (!(m.omega_max > 0)) throw ConfigError("omega_max must be positive");
    if (m.n_omega < 2) throw ConfigError("n_omega must be >= 2");
}

// display length unit of the figures is 2 sqrt(hbar / m omega)
inline constexpr double display_length_unit = 2.0;
inline double to_display_length(double x) { return x / display_length_unit; }
inline double to_natural_length(double x) { return x * display_length_unit; }

struct SimSetup {
    PhysicalParams params;
    SpatialGrid grid;
    OutputModeGrid modes;
    Stencil stencil;
    std::vector<double> x;
    std::vector<double> trap;  // V_t = x^2 / 2

    int n() const { return grid.n_points; }
    double dx() const { return stencil.h; }
};

inline SimSetup build_setup(const PhysicalParams& p, const SpatialGrid& g, const OutputModeGrid& m = {}) {
    validate(p);
    validate(g);
    validate(m);
    SimSetup s{p, g, m, Stencil(g.spacing()), {}, {}};
    const int n = g.n_points;
    const double h = g.spacing();
    s.x.resize(n);
    s.trap.resize(n);
    for (int i = 0; i < n; ++i) {
        // mirror-symmetric construction so that x[i] == -x[n-1-i] exactly
        const int j = n - 1 - i;
        const double xi = (i <= j) ? -(0.5 * (j - i)) * h : (0.5 * (i - j)) * h;
        s.x[i] = xi;
        s.trap[i] = 0.5 * xi * xi;
    }
    return s;
}

// ---------------------------------------------------------------------------
// flat key=value configuration

struct RunConfig {
    PhysicalParams params;
    SpatialGrid grid;
    OutputModeGrid modes;

    // hfb-solver
    double mixing = 0.3;
    double e_cut = 0;  // 0: max(10, 5 T)
    double hfb_tol = 1e-6;
    double gpe_tol = 1e-8;
    int max_outer = 400;

    // outcoupling
    std::string output_modes = "scattering";  // scattering | plane
    std::string normalization = "unit";       // unit | energy
    double lambda = 0.5;
    std::string lambda_profile = "uniform";   // uniform | gaussian
    double lambda_width = 2.0;
    double delta_em = 0;
    double k_em = 0;
    double t_obs = 100;

    // coherence
    double node_fraction = 1e-4;
    double x1 = 0;

    // trap-dynamics
    double ode_rtol = 1e-9;
    double t_end = 200;
    int n_samples = 201;
    bool level_shift_feedback = false;

    // oracle
    double oracle_lambda_norm = 0.01;

    std::string cache_dir = ".atomlaser_cache";
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}
inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}
inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}
}  // namespace detail

struct ConfigKey {
    std::string name, symbol, help;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline const std::vector<ConfigKey>& config_keys() {
    using detail::to_bool;
    using detail::to_double;
#define AL_NUM(key, sym, help, member)                                                                 \
    ConfigKey{key, sym, help, [](RunConfig& c, const std::string& v) { c.member = to_double(key, v); }, \
              [](const RunConfig& c) { return fmt_double(double(c.member)); }}
#define AL_INT(key, sym, help, member)                                                                      \
    ConfigKey{key, sym, help, [](RunConfig& c, const std::string& v) { c.member = int(to_double(key, v)); }, \
              [](const RunConfig& c) { return std::to_string(c.member); }}
#define AL_STR(key, sym, help, member)                                                   \
    ConfigKey{key, sym, help, [](RunConfig& c, const std::string& v) { c.member = v; }, \
              [](const RunConfig& c) { return c.member; }}
    static const std::vector<ConfigKey> keys = {
        AL_NUM("n_atoms", "N_t", "total atom number", params.n_atoms),
        AL_NUM("U0", "U_0", "trapped-trapped interaction strength", params.U0),
        AL_NUM("U1", "U_1", "trapped-free interaction strength (negative: equal to U0)", params.U1),
        AL_NUM("temperature", "T", "temperature", params.temperature),
        AL_NUM("extent", "L", "box length", grid.extent),
        AL_INT("n_points", "N_x", "grid points", grid.n_points),
        AL_NUM("omega_max", "omega_max", "output energy cutoff", modes.omega_max),
        AL_INT("n_omega", "n_omega", "output energy samples", modes.n_omega),
        AL_NUM("mixing", "alpha", "density mixing fraction", mixing),
        AL_NUM("e_cut", "E_cut", "excitation cutoff (0: max(10, 5T))", e_cut),
        AL_NUM("hfb_tol", "", "self-consistency tolerance", hfb_tol),
        AL_NUM("gpe_tol", "", "GPE residual tolerance", gpe_tol),
        AL_INT("max_outer", "", "self-consistency iteration budget", max_outer),
        AL_STR("output_modes", "phi_k", "scattering | plane", output_modes),
        AL_STR("normalization", "rho", "unit | energy output-mode normalization", normalization),
        AL_NUM("lambda", "lambda", "coupling amplitude", lambda),
        AL_STR("lambda_profile", "lambda(x)", "uniform | gaussian", lambda_profile),
        AL_NUM("lambda_width", "", "gaussian profile width", lambda_width),
        AL_NUM("delta_em", "Delta_em", "detuning", delta_em),
        AL_NUM("k_em", "k_em", "momentum kick", k_em),
        AL_NUM("t", "t", "observation time", t_obs),
        AL_NUM("node_fraction", "", "density threshold marking nodes, relative to max", node_fraction),
        AL_NUM("x1", "x_1", "reference point for g1", x1),
        AL_NUM("ode_rtol", "", "rate-equation relative tolerance", ode_rtol),
        AL_NUM("t_end", "", "trajectory end time", t_end),
        AL_INT("n_samples", "", "trajectory samples", n_samples),
        ConfigKey{"level_shift_feedback", "Im Gamma", "shift resonances by the level shifts",
                  [](RunConfig& c, const std::string& v) { c.level_shift_feedback = to_bool("level_shift_feedback", v); },
                  [](const RunConfig& c) { return std::string(c.level_shift_feedback ? "true" : "false"); }},
        AL_NUM("oracle_lambda_norm", "Lambda", "coupling norm of the oracle toy", oracle_lambda_norm),
        AL_STR("cache_dir", "", "HFB cache directory", cache_dir),
    };
#undef AL_NUM
#undef AL_INT
#undef AL_STR
    return keys;
}

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    for (const auto& k : config_keys())
        if (k.name == key) {
            k.set(c, value);
            return;
        }
    throw ConfigError("unknown key: " + key);
}

inline void apply_assignment(RunConfig& c, const std::string& line) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value: '" + line + "'");
    set_key(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
}

inline void parse_config(RunConfig& c, std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        apply_assignment(c, line);
    }
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config not found: " + path);
    RunConfig c;
    parse_config(c, f);
    return c;
}

inline std::map<std::string, std::string> config_values(const RunConfig& c) {
    std::map<std::string, std::string> m;
    for (const auto& k : config_keys()) m[k.name] = k.get(c);
    return m;
}

inline void validate(const RunConfig& c) {
    validate(c.params);
    validate(c.grid);
    validate(c.modes);
    if (!(c.mixing > 0 && c.mixing <= 1)) throw ConfigError("mixing must be in (0, 1]");
    if (c.output_modes != "scattering" && c.output_modes != "plane") throw ConfigError("output_modes must be scattering or plane");
    if (c.normalization != "unit" && c.normalization != "energy") throw ConfigError("normalization must be unit or energy");
    if (c.lambda_profile != "uniform" && c.lambda_profile != "gaussian") throw ConfigError("lambda_profile must be uniform or gaussian");
    if (!(c.node_fraction >= 0 && c.node_fraction < 1)) throw ConfigError("node_fraction must be in [0, 1)");
    if (c.n_samples < 2) throw ConfigError("n_samples must be >= 2");
}

inline double excitation_cutoff(const RunConfig& c) {
    return c.e_cut > 0 ? c.e_cut : std::max(10.0, 5.0 * c.params.temperature);
}

inline SimSetup build_setup(const RunConfig& c) { return build_setup(c.params, c.grid, c.modes); }

// 64-bit FNV-1a
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace atomlaser
