// atomlaser: scenario runner. Each command writes CSV files and a JSON manifest into --out.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomlaser/coherence.hpp>
#include <atomlaser/dynamics.hpp>
#include <atomlaser/io.hpp>
#include <atomlaser/oracle.hpp>

extern "C" void openblas_set_num_threads(int);

using namespace atomlaser;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* version = "1.0.0";

struct Case {
    std::string name;
    double T, delta, lambda;
};

// coupling strength used for each detuning in the figure scenarios
double lambda_for(double delta) {
    if (delta < -1) return 0.5;
    if (delta > 1) return 2.0;
    return 0.2;
}

Case make_case(const std::string& name, double T, double delta) { return {name, T, delta, lambda_for(delta)}; }

const std::vector<Case> coherence_cases = {make_case("a", 10, 0), make_case("b", 150, 0), make_case("c", 150, -5),
                                           make_case("d", 150, 8)};
const std::vector<Case> evolve_cases = coherence_cases;
const std::vector<Case> density_cases = {make_case("a", 150, -5), make_case("b", 150, 0), make_case("c", 150, 8)};
const std::vector<double> density_times = {60, 80, 100};

struct Context {
    RunConfig cfg;
    fs::path out;
    std::string command;
    json manifest;
    std::vector<std::string> files;

    RunConfig at(double T) const {
        RunConfig c = cfg;
        c.params.temperature = T;
        return c;
    }
    std::string file(const std::string& name) {
        files.push_back(name);
        return (out / name).string();
    }
};

// HFB solution for temperature T, cached; timing goes to the manifest
HfbSolution solve(Context& ctx, double T) {
    const RunConfig c = ctx.at(T);
    const auto t0 = std::chrono::steady_clock::now();
    bool hit = false;
    HfbSolution h = cached_solve(c, &hit);
    const auto s = build_setup(c);
    const std::string key = "hfb_T" + fmt_double(T);
    ctx.manifest["hfb"][key] = {{"mu", h.mu()},
                                {"n0", h.n0()},
                                {"noncondensate_fraction", noncondensate_fraction(h, s)},
                                {"modes", h.modes.count()},
                                {"e_cut", h.e_cut},
                                {"iterations", h.iterations},
                                {"cache_key", hfb_cache_key(s, hfb_options(c))}};
    ctx.manifest["timings"][key] = {{"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                                    {"cache_hit", hit}};
    std::cout << "hfb T=" << T << " mu=" << h.mu() << " fraction=" << noncondensate_fraction(h, s) << (hit ? " (cached)" : "") << "\n";
    return h;
}

// ---------------------------------------------------------------------------

void cmd_hfb(Context& ctx) {
    const double T = ctx.cfg.params.temperature;
    const HfbSolution h = solve(ctx, T);
    const auto s = build_setup(ctx.cfg);
    CsvWriter d(ctx.file("hfb_density.csv"));
    d.header({"x", "psi0", "n_c", "n_bar"});
    for (int i = 0; i < s.n(); ++i) {
        const double p = h.condensate.psi[i];
        d.row({s.x[i], p, h.n0() * p * p, h.nbar[i]});
    }
    const ModeWeights w = mode_weights(h, s.dx());
    CsvWriter m(ctx.file("hfb_modes.csv"));
    m.header({"j", "E_j", "n_j", "int_u2", "int_v2"});
    for (int j = 0; j < h.modes.count(); ++j) m.row({double(j), h.modes.E[j], h.occupation[j], w.uu[j], w.vv[j]});
    CsvWriter tr(ctx.file("hfb_convergence.csv"));
    tr.header({"iteration", "mu"});
    for (std::size_t i = 0; i < h.mu_trace.size(); ++i) tr.row({double(i + 1), h.mu_trace[i]});
}

void cmd_spectrum(Context& ctx) {
    CsvWriter rates(ctx.file("rates.csv"));
    rates.header({"T", "delta_em", "rate_condensate", "rate_sqe", "rate_pb"});
    for (double T : {10.0, 150.0}) {
        const RunConfig c = ctx.at(T);
        const HfbSolution h = solve(ctx, T);
        const auto s = build_setup(c);
        const OutputLattice L = make_output_lattice(s, h, c);
        for (int i = 0; i <= 88; ++i) {
            const double delta = -10.0 + 0.25 * i;
            const auto ch = build_channels(s, h, make_coupling(s, c.lambda, delta, c.k_em, c.lambda_profile, c.lambda_width));
            const RateAggregate r = golden_rule_rates(L, ch);
            rates.row({T, delta, r.condensate, r.sqe, r.pb});
        }
        // per-channel table at the configured detuning
        const auto ch = build_channels(s, h, make_coupling(s, c));
        const RateAggregate r = golden_rule_rates(L, ch);
        CsvWriter t(ctx.file("channels_T" + fmt_double(T) + ".csv"));
        t.header({"eta", "kind", "j", "E_eta", "omega_out", "n_t", "gamma", "rate"});
        for (std::size_t q = 0; q < ch.size(); ++q) {
            const double g = pi * branch_density * resonant_strength(L, ch[q]);
            t.row_strings({std::to_string(q), kind_name(ch[q].kind), std::to_string(ch[q].mode), CsvWriter::num(ch[q].energy),
                           CsvWriter::num(ch[q].omega_out), CsvWriter::num(ch[q].population), CsvWriter::num(g),
                           CsvWriter::num(r.channel[q])});
        }
    }
    ctx.manifest["scan"] = {{"delta_min", -10.0}, {"delta_max", 12.0}, {"delta_step", 0.25}};
}

struct Prepared {
    SimSetup s;
    HfbSolution h;
    OutputLattice L;
    std::vector<Channel> ch;
};

Prepared prepare(Context& ctx, const Case& k) {
    const RunConfig c = ctx.at(k.T);
    Prepared p{build_setup(c), solve(ctx, k.T), {}, {}};
    p.L = make_output_lattice(p.s, p.h, c);
    p.ch = build_channels(p.s, p.h, make_coupling(p.s, k.lambda, k.delta, c.k_em, c.lambda_profile, c.lambda_width));
    return p;
}

json case_json(const Case& k) { return {{"T", k.T}, {"delta_em", k.delta}, {"lambda", k.lambda}}; }

void cmd_density(Context& ctx) {
    for (const auto& k : density_cases) {
        Prepared p = prepare(ctx, k);
        std::vector<FieldSet> fs;
        for (double t : density_times) fs.push_back(output_fields(p.L, p.ch, t));
        CsvWriter w(ctx.file("density_" + k.name + ".csv"));
        std::vector<std::string> head = {"x"};
        for (double t : density_times)
            for (const char* part : {"n_out", "n_coherent", "n_sqe", "n_pb"}) head.push_back(std::string(part) + "_t" + fmt_double(t));
        w.header(head);
        std::vector<MatrixXd> dens;
        for (const auto& f : fs) dens.push_back(channel_densities(f.psi, p.ch));
        for (int i = 0; i < p.L.size(); ++i) {
            std::vector<double> row = {p.L.x(i)};
            for (const auto& d : dens) {
                double c0 = 0, sq = 0, pb = 0;
                for (std::size_t q = 0; q < p.ch.size(); ++q) {
                    const double v = d(i, Eigen::Index(q));
                    if (p.ch[q].kind == ChannelKind::condensate) c0 += v;
                    else if (p.ch[q].kind == ChannelKind::sqe) sq += v;
                    else pb += v;
                }
                row.insert(row.end(), {c0 + sq + pb, c0, sq, pb});
            }
            w.row(row);
        }
        ctx.manifest["cases"]["density_" + k.name] = case_json(k);
    }
    ctx.manifest["times"] = density_times;
}

void cmd_coherence(Context& ctx, bool first_order) {
    const double t = ctx.cfg.t_obs;
    for (const auto& k : coherence_cases) {
        Prepared p = prepare(ctx, k);
        const FieldSet f = output_fields(p.L, p.ch, t);
        const OutputComponents oc = output_components(f.psi, p.ch);
        const double nf = ctx.cfg.node_fraction;
        json info = case_json(k);
        if (first_order) {
            const auto i1 = nearest_index(f.x, ctx.cfg.x1);
            CsvWriter w(ctx.file("g1_" + k.name + ".csv"));
            w.header({"x", "re_g1", "im_g1", "abs_g1", "n_out"});
            const auto row = g1_row(f.psi, p.ch, oc, i1, nf);
            for (std::size_t i = 0; i < row.size(); ++i) {
                const double nan = std::nan("");
                const cplx g = row[i] ? *row[i] : cplx(nan, nan);
                w.row({f.x[i], g.real(), g.imag(), row[i] ? std::abs(g) : nan, oc.n_out[Eigen::Index(i)]});
            }
            info["x1"] = f.x[std::size_t(i1)];
        } else {
            CsvWriter w(ctx.file("g2_" + k.name + ".csv"));
            w.header({"x", "g2", "n_out", "n_0", "n_tilde", "abs_m_tilde"});
            const auto prof = g2_profile(oc, nf);
            double mx = 0;
            for (std::size_t i = 0; i < prof.size(); ++i) {
                const auto I = Eigen::Index(i);
                w.row({f.x[i], prof[i] ? *prof[i] : std::nan(""), oc.n_out[I], oc.n0[I], oc.n_tilde[I], std::abs(oc.m_tilde[I])});
                if (prof[i]) mx = std::max(mx, *prof[i]);
            }
            info["max_g2"] = mx;
        }
        ctx.manifest["cases"][std::string(first_order ? "g1_" : "g2_") + k.name] = info;
    }
}

void cmd_evolve(Context& ctx) {
    const RunConfig& c = ctx.cfg;
    std::vector<double> times;
    for (int i = 0; i < c.n_samples; ++i) times.push_back(c.t_end * i / (c.n_samples - 1));
    for (const auto& k : evolve_cases) {
        Prepared p = prepare(ctx, k);
        const DecayRates r = decay_rates(p.L, p.ch, true, c.level_shift_feedback);
        const PopulationTrajectory tr = evolve_adiabatic(r, p.h, p.s.dx(), times, c.ode_rtol);
        CsvWriter w(ctx.file("evolve_" + k.name + ".csv"));
        w.header({"t", "N0", "sum_n_j", "N_t", "E_t", "N_out_coherent", "N_out_sqe", "N_out_pb"});
        for (std::size_t i = 0; i < tr.t.size(); ++i)
            w.row({tr.t[i], tr.N0[i], tr.excitations[i], tr.Nt[i], tr.Et[i], tr.out_coherent[i], tr.out_sqe[i], tr.out_pb[i]});
        CsvWriter m(ctx.file("evolve_modes_" + k.name + ".csv"));
        m.header({"j", "E_j", "n_j_initial", "n_j_final", "gamma_plus", "gamma_minus", "level_shift"});
        for (int j = 0; j < r.modes(); ++j)
            m.row({double(j), p.h.modes.E[j], p.h.occupation[j], tr.n.back()[j], r.gamma_plus[j], r.gamma_minus[j], r.level_shift[j]});
        json info = case_json(k);
        info["gamma0"] = r.gamma0;
        info["level_shift0"] = r.shift0;
        info["closure_error"] = tr.closure_error();
        info["terminated"] = tr.terminated;
        if (tr.terminated) info["t_stop"] = tr.t_stop;
        ctx.manifest["cases"]["evolve_" + k.name] = info;
        if (tr.terminated) std::cout << "evolve " << k.name << ": N0 reached zero, trajectory stopped at t=" << tr.t_stop << "\n";
    }
}

void cmd_oracle(Context& ctx) {
    const double T = ctx.cfg.params.temperature;
    const RunConfig c = ctx.at(T);
    const HfbSolution h = solve(ctx, T);
    const auto s = build_setup(c);
    const OutputLattice L = make_output_lattice(s, h, c);
    // uniform coupling with norm Lambda over the box
    const double lam = c.oracle_lambda_norm / std::sqrt(c.grid.extent);
    const auto ch = build_channels(s, h, make_coupling(s, lam, c.delta_em));
    if (!ch[0].open()) throw NumericalError("oracle check needs an open condensate channel (raise delta_em)");
    const double dw = spectral_width_estimates(condensate_rms_width(h, s), 0).delta_omega;
    const OracleReport r = compare_to_quasi_steady(L, ch[0], c.oracle_lambda_norm, dw);
    CsvWriter w(ctx.file("oracle.csv"));
    w.header({"observable", "predicted", "oracle", "rel_error"});
    w.row_strings({"gamma", CsvWriter::num(r.gamma_golden), CsvWriter::num(r.gamma_fit), CsvWriter::num(r.rate_rel_error)});
    w.row_strings({"N0_perturbative", CsvWriter::num(r.N0_pert), CsvWriter::num(r.N0_oracle), CsvWriter::num(r.pert_rel_error)});
    w.row_strings({"depletion_perturbative", "", "", CsvWriter::num(r.depletion_rel_error)});
    w.row_strings({"spectrum_near_resonance", "", "", CsvWriter::num(r.spectrum_rel_error)});
    w.row_strings({"two_mode_frequency", CsvWriter::num(2.0 * r.two_mode_g), CsvWriter::num(r.two_mode_freq), CsvWriter::num(r.two_mode_rel_error)});

    // reference trajectory of the trapped channel over [0, 10/gamma]
    const TruncatedSystem sys = single_channel_system(L, ch[0], r.gamma_golden);
    const auto tr = integrate_coupled_modes(sys, 10.0 / r.gamma_golden / 200, 200);
    CsvWriter t(ctx.file("oracle_trajectory.csv"));
    t.header({"t", "N0_oracle", "N0_markov"});
    for (std::size_t i = 0; i < tr.t.size(); ++i)
        t.row({tr.t[i], tr.trapped[i][0], ch[0].population * std::exp(-2.0 * r.gamma_golden * tr.t[i])});

    ctx.manifest["oracle"] = {{"lambda_norm", r.lambda_strength}, {"delta_omega", r.delta_omega}, {"weak_coupling", r.weak_coupling},
                              {"t_perturbative", r.t_pert}, {"t_spectrum", r.t_spec}, {"sigma_drift", r.sigma_drift},
                              {"bath_modes", sys.bath_omega.size()}, {"note", r.note}};
    std::cout << "oracle: rate error " << r.rate_rel_error << ", perturbative N0 error " << r.pert_rel_error << ", two-mode error "
              << r.two_mode_rel_error << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak adiabatic output coupling from a finite-temperature trapped 1D Bose gas"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out";
    std::vector<std::string> overrides;
    int threads = 1;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", overrides, "override KEY=VALUE (repeatable)");
    app.add_option("--threads", threads, "BLAS threads")->check(CLI::PositiveNumber);
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"hfb", "self-consistent HFB-Popov solution at the configured temperature"},
        {"spectrum", "golden-rule output rates over the detuning scan at T = 10 and 150"},
        {"density", "output densities for the three T = 150 cases at t = 60, 80, 100"},
        {"g1", "first-order coherence for the four coherence cases"},
        {"g2", "second-order coherence for the four coherence cases"},
        {"evolve", "trap population trajectories for the four evolution cases"},
        {"oracle-check", "coupled-mode oracle against the golden rule and perturbation theory"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();
    app.set_config();  // disable CLI11's own config handling

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    Context ctx;
    ctx.command = app.get_subcommands().front()->get_name();
    try {
        if (!config_path.empty()) ctx.cfg = load_config(config_path);
        for (const auto& o : overrides) apply_assignment(ctx.cfg, o);
        validate(ctx.cfg);
        ctx.out = out_dir;
        fs::create_directories(ctx.out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    openblas_set_num_threads(threads);
    const auto t0 = std::chrono::steady_clock::now();
    ctx.manifest["command"] = ctx.command;
    ctx.manifest["version"] = version;
    ctx.manifest["config_file"] = config_path;
    ctx.manifest["overrides"] = overrides;
    ctx.manifest["threads"] = threads;
    ctx.manifest["config"] = config_values(ctx.cfg);
    ctx.manifest["derived"] = {{"dx", ctx.cfg.grid.spacing()},
                               {"U1", ctx.cfg.params.u1()},
                               {"e_cut_rule", "max(10, 5 T) unless e_cut > 0"},
                               {"e_cut_T10", excitation_cutoff(ctx.at(10))},
                               {"e_cut_T150", excitation_cutoff(ctx.at(150))},
                               {"output_lattice_pad", OutputLattice{}.pad},
                               {"branch_density", branch_density}};
    ctx.manifest["units"] = {{"hbar", 1}, {"m", 1}, {"omega", 1}, {"k_B", 1}, {"length", "natural (hbar / m omega)^(1/2)"},
                             {"display_length_unit", display_length_unit}, {"to_display_length", "divide by display_length_unit"}};
    try {
        if (ctx.command == "hfb") cmd_hfb(ctx);
        else if (ctx.command == "spectrum") cmd_spectrum(ctx);
        else if (ctx.command == "density") cmd_density(ctx);
        else if (ctx.command == "g1") cmd_coherence(ctx, true);
        else if (ctx.command == "g2") cmd_coherence(ctx, false);
        else if (ctx.command == "evolve") cmd_evolve(ctx);
        else if (ctx.command == "oracle-check") cmd_oracle(ctx);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << ctx.command << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << ctx.command << ": " << e.what() << "\n";
        return 2;
    }
    ctx.manifest["files"] = ctx.files;
    ctx.manifest["timings"]["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(ctx.out / ("manifest_" + ctx.command + ".json")) << ctx.manifest.dump(2) << "\n";
    for (const auto& f : ctx.files) std::cout << (ctx.out / f).string() << "\n";
    return 0;
}
