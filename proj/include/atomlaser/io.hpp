#pragma once
// HFB serialization, parameter-hash cache, CSV and manifest helpers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "hfb.hpp"

namespace atomlaser {

inline constexpr const char* hfb_magic = "ATOMLASER-HFB 1";

inline nlohmann::json hfb_header(const SimSetup& s, const HfbOptions& o) {
    return {{"n_atoms", s.params.n_atoms}, {"U0", s.params.U0},       {"temperature", s.params.temperature},
            {"extent", s.grid.extent},     {"n_points", s.grid.n_points}, {"e_cut", o.e_cut},
            {"mixing", o.mixing},          {"hfb_tol", o.tol},         {"gpe_tol", o.gpe_tol}};
}

inline std::string hfb_cache_key(const SimSetup& s, const HfbOptions& o) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(hfb_header(s, o).dump());
    return os.str();
}

namespace detail {
inline void write_block(std::ostream& f, const double* p, std::size_t n) {
    f.write(reinterpret_cast<const char*>(p), std::streamsize(n * sizeof(double)));
}
inline void read_block(std::istream& f, double* p, std::size_t n) {
    f.read(reinterpret_cast<char*>(p), std::streamsize(n * sizeof(double)));
    if (!f) throw std::runtime_error("truncated HFB file");
}
}  // namespace detail

// text header (one JSON line) followed by raw little-endian doubles
inline void save_hfb(const std::string& path, const HfbSolution& h, const SimSetup& s, const HfbOptions& o) {
    auto head = hfb_header(s, o);
    head["mu"] = h.condensate.mu;
    head["n0"] = h.condensate.n0;
    head["residual"] = h.condensate.residual;
    head["iterations"] = h.iterations;
    head["n_modes"] = h.modes.count();
    head["arrays"] = {"psi", "nbar", "E", "occupation", "u", "v"};
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << hfb_magic << "\n" << head.dump() << "\n";
        const auto n = std::size_t(s.n()), m = std::size_t(h.modes.count());
        detail::write_block(f, h.condensate.psi.data(), n);
        detail::write_block(f, h.nbar.data(), n);
        detail::write_block(f, h.modes.E.data(), m);
        detail::write_block(f, h.occupation.data(), m);
        detail::write_block(f, h.modes.u.data(), n * m);
        detail::write_block(f, h.modes.v.data(), n * m);
    }
    std::filesystem::rename(tmp, path);
}

inline HfbSolution load_hfb(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::string magic, line;
    std::getline(f, magic);
    if (magic != hfb_magic) throw std::runtime_error("not an HFB file: " + path);
    std::getline(f, line);
    const auto head = nlohmann::json::parse(line);
    const int n = head["n_points"], m = head["n_modes"];
    HfbSolution h;
    h.temperature = head["temperature"];
    h.e_cut = head["e_cut"];
    h.iterations = head["iterations"];
    h.condensate.mu = head["mu"];
    h.condensate.n0 = head["n0"];
    h.condensate.residual = head["residual"];
    h.condensate.psi.resize(n);
    h.nbar.resize(n);
    h.modes.E.resize(m);
    h.occupation.resize(m);
    h.modes.u.resize(n, m);
    h.modes.v.resize(n, m);
    detail::read_block(f, h.condensate.psi.data(), n);
    detail::read_block(f, h.nbar.data(), n);
    detail::read_block(f, h.modes.E.data(), m);
    detail::read_block(f, h.occupation.data(), m);
    detail::read_block(f, h.modes.u.data(), std::size_t(n) * m);
    detail::read_block(f, h.modes.v.data(), std::size_t(n) * m);
    return h;
}

// solve or reuse a cached solution; cache_dir empty disables caching
inline HfbSolution cached_solve(const SimSetup& s, const HfbOptions& o, const std::string& cache_dir, bool* hit = nullptr) {
    if (hit) *hit = false;
    if (cache_dir.empty()) return self_consistent_solve(s, o);
    std::filesystem::create_directories(cache_dir);
    const auto path = (std::filesystem::path(cache_dir) / ("hfb_" + hfb_cache_key(s, o) + ".bin")).string();
    if (std::filesystem::exists(path)) {
        if (hit) *hit = true;
        return load_hfb(path);
    }
    HfbSolution h = self_consistent_solve(s, o);
    save_hfb(path, h, s, o);
    return h;
}

inline HfbSolution cached_solve(const RunConfig& c, bool* hit = nullptr) {
    return cached_solve(build_setup(c), hfb_options(c), c.cache_dir, hit);
}

// fixed-format CSV; empty string marks a missing value
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path) : f_(path) {
        if (!f_) throw std::runtime_error("cannot write " + path);
    }
    void header(const std::vector<std::string>& cols) { row_strings(cols); }
    void row(const std::vector<double>& vals) {
        std::vector<std::string> s;
        s.reserve(vals.size());
        for (double v : vals) s.push_back(num(v));
        row_strings(s);
    }
    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << cells[i];
        f_ << "\n";
    }
    static std::string num(double v) {
        if (std::isnan(v)) return "";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.12e", v);
        return buf;
    }

private:
    std::ofstream f_;
};

}  // namespace atomlaser
