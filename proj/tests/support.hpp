#pragma once
// Shared fixtures: cached HFB solutions for the full grid and a quick coarse grid.

#include <string>

#include <atomlaser/io.hpp>
#include <atomlaser/outcoupling.hpp>

namespace testsupport {

using namespace atomlaser;

inline RunConfig full_config(double T) {
    RunConfig c;
    c.params.temperature = T;
    c.cache_dir = AL_CACHE_DIR;
    return c;
}

// 256 points on the same box: seconds instead of a minute
inline RunConfig coarse_config(double T) {
    RunConfig c = full_config(T);
    c.grid.n_points = 256;
    return c;
}

struct Prepared {
    RunConfig cfg;
    SimSetup s;
    HfbSolution h;
    OutputLattice L;
};

inline Prepared prepare(const RunConfig& c) {
    Prepared p{c, build_setup(c), cached_solve(c), {}};
    p.L = make_output_lattice(p.s, p.h, c);
    return p;
}

}  // namespace testsupport
