#include "cmfg/grid.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cmfg {

Grid Grid::line(int nx) {
    if (nx < 3) throw std::invalid_argument("Grid: nx must be >= 3");
    Grid g;
    g.dim = 1;
    g.nx = nx;
    g.ny = 0;
    g.hx = 1.0 / (nx - 1);
    g.hy = 0.0;
    return g;
}

Grid Grid::square(int nx, int ny) {
    if (nx < 3 || ny < 3) throw std::invalid_argument("Grid: nx, ny must be >= 3");
    Grid g;
    g.dim = 2;
    g.nx = nx;
    g.ny = ny;
    g.hx = 1.0 / (nx - 1);
    g.hy = 1.0 / (ny - 1);
    return g;
}

TimeGrid TimeGrid::make(double T, int nt) {
    if (!(T > 0.0)) throw std::invalid_argument("TimeGrid: T must be > 0");
    if (nt < 2) throw std::invalid_argument("TimeGrid: nt must be >= 2");
    TimeGrid tg;
    tg.T = T;
    tg.nt = nt;
    tg.dt = T / (nt - 1);
    return tg;
}

ScalarField SpaceTimeField::slice(int k) const {
    ScalarField f(grid);
    const double* src = slice_data(k);
    std::copy(src, src + grid.num_nodes(), f.v.begin());
    return f;
}

void SpaceTimeField::set_slice(int k, const ScalarField& f) {
    std::copy(f.v.begin(), f.v.end(), slice_data(k));
}

bool on_boundary(const Grid& g, int ix, int iy) {
    if (g.dim == 1) return ix == 0 || ix == g.nx - 1;
    return ix == 0 || ix == g.nx - 1 || iy == 0 || iy == g.ny - 1;
}

BoundaryPartition partition_boundary(const Grid& g) {
    BoundaryPartition bp;
    if (g.dim == 1) {
        bp.gamma0.push_back(g.nx - 1);
        bp.gamma1.push_back(0);
        return bp;
    }
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            if (!on_boundary(g, ix, iy)) continue;
            if (on_gamma0(g, ix, iy))
                bp.gamma0.push_back(g.index(ix, iy));
            else
                bp.gamma1.push_back(g.index(ix, iy));
        }
    return bp;
}

namespace {

inline double trap_w(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

void require_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

}  // namespace

double integrate_space(const ScalarField& f) {
    require_finite(f.v, "integrate_space");
    const Grid& g = f.grid;
    if (g.dim == 1) {
        double acc = 0.0;
        for (int ix = 0; ix < g.nx; ++ix) acc += trap_w(ix, g.nx) * f.v[ix];
        return acc * g.hx;
    }
    double acc = 0.0;
    for (int iy = 0; iy < g.ny; ++iy) {
        double row = 0.0;
        for (int ix = 0; ix < g.nx; ++ix) row += trap_w(ix, g.nx) * f.at(ix, iy);
        acc += trap_w(iy, g.ny) * row;
    }
    return acc * g.hx * g.hy;
}

double integrate_spacetime(const SpaceTimeField& f) {
    require_finite(f.v, "integrate_spacetime");
    double acc = 0.0;
    for (int k = 0; k < f.time.nt; ++k) {
        acc += trap_w(k, f.time.nt) * integrate_space(f.slice(k));
    }
    return acc * f.time.dt;
}

namespace {

// d/ds along one line of values with spacing h; central interior,
// one-sided second-order ends.
void diff_line(const double* f, int n, int stride, double h, double* out, int out_stride) {
    const double inv2h = 1.0 / (2.0 * h);
    out[0] = (-3.0 * f[0] + 4.0 * f[stride] - f[2 * stride]) * inv2h;
    for (int i = 1; i < n - 1; ++i)
        out[i * out_stride] = (f[(i + 1) * stride] - f[(i - 1) * stride]) * inv2h;
    out[(n - 1) * out_stride] =
        (3.0 * f[(n - 1) * stride] - 4.0 * f[(n - 2) * stride] + f[(n - 3) * stride]) * inv2h;
}

void diff2_line(const double* f, int n, int stride, double h, double* out, int out_stride) {
    const double invh2 = 1.0 / (h * h);
    out[0] = (2.0 * f[0] - 5.0 * f[stride] + 4.0 * f[2 * stride] - f[3 * stride]) * invh2;
    for (int i = 1; i < n - 1; ++i)
        out[i * out_stride] =
            (f[(i + 1) * stride] - 2.0 * f[i * stride] + f[(i - 1) * stride]) * invh2;
    out[(n - 1) * out_stride] = (2.0 * f[(n - 1) * stride] - 5.0 * f[(n - 2) * stride] +
                                 4.0 * f[(n - 3) * stride] - f[(n - 4) * stride]) *
                                invh2;
}

}  // namespace

GradientField gradient(const ScalarField& f) {
    const Grid& g = f.grid;
    GradientField out;
    out.x = ScalarField(g);
    if (g.dim == 1) {
        diff_line(f.v.data(), g.nx, 1, g.hx, out.x.v.data(), 1);
        return out;
    }
    out.y = ScalarField(g);
    for (int iy = 0; iy < g.ny; ++iy)
        diff_line(f.v.data() + g.index(0, iy), g.nx, 1, g.hx, out.x.v.data() + g.index(0, iy), 1);
    for (int ix = 0; ix < g.nx; ++ix)
        diff_line(f.v.data() + ix, g.ny, g.nx, g.hy, out.y.v.data() + ix, g.nx);
    return out;
}

ScalarField second_derivative(const ScalarField& f, int axis) {
    const Grid& g = f.grid;
    ScalarField out(g);
    if (axis == 0) {
        if (g.nx < 4) throw std::invalid_argument("second_derivative: nx must be >= 4");
        int rows = (g.dim == 1) ? 1 : g.ny;
        for (int iy = 0; iy < rows; ++iy)
            diff2_line(f.v.data() + g.index(0, iy), g.nx, 1, g.hx, out.v.data() + g.index(0, iy),
                       1);
    } else {
        if (g.dim != 2) throw std::invalid_argument("second_derivative: axis 1 needs dim 2");
        if (g.ny < 4) throw std::invalid_argument("second_derivative: ny must be >= 4");
        for (int ix = 0; ix < g.nx; ++ix)
            diff2_line(f.v.data() + ix, g.ny, g.nx, g.hy, out.v.data() + ix, g.nx);
    }
    return out;
}

double h1_norm(const ScalarField& f) {
    GradientField gr = gradient(f);
    ScalarField sq(f.grid);
    for (size_t i = 0; i < f.v.size(); ++i) {
        double g2 = gr.x.v[i] * gr.x.v[i];
        if (f.grid.dim == 2) g2 += gr.y.v[i] * gr.y.v[i];
        sq.v[i] = f.v[i] * f.v[i] + g2;
    }
    return std::sqrt(integrate_space(sq));
}

double l2_norm(const ScalarField& f) {
    ScalarField sq(f.grid);
    for (size_t i = 0; i < f.v.size(); ++i) sq.v[i] = f.v[i] * f.v[i];
    return std::sqrt(integrate_space(sq));
}

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path, size_t ncols) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != ncols) throw std::runtime_error("bad CSV row in " + path);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void write_csv(const ScalarField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const Grid& g = f.grid;
    if (g.dim == 1) {
        out << "x,value\n";
        for (int ix = 0; ix < g.nx; ++ix) out << fmt(g.x(ix)) << ',' << fmt(f.v[ix]) << '\n';
        return;
    }
    out << "x,y,value\n";
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix)
            out << fmt(g.x(ix)) << ',' << fmt(g.y(iy)) << ',' << fmt(f.at(ix, iy)) << '\n';
}

void write_csv(const SpaceTimeField& f, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    const Grid& g = f.grid;
    if (g.dim == 1) {
        out << "t,x,value\n";
        for (int k = 0; k < f.time.nt; ++k)
            for (int ix = 0; ix < g.nx; ++ix)
                out << fmt(f.time.t(k)) << ',' << fmt(g.x(ix)) << ',' << fmt(f.at(k, ix)) << '\n';
        return;
    }
    out << "t,x,y,value\n";
    for (int k = 0; k < f.time.nt; ++k)
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                out << fmt(f.time.t(k)) << ',' << fmt(g.x(ix)) << ',' << fmt(g.y(iy)) << ','
                    << fmt(f.at(k, ix, iy)) << '\n';
}

ScalarField read_scalar_csv(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(probe, header);
    probe.close();
    const bool one_d = header == "x,value";
    auto rows = read_numeric_csv(path, one_d ? 2 : 3);
    if (rows.empty()) throw std::runtime_error("empty CSV " + path);
    if (one_d) {
        Grid g = Grid::line(static_cast<int>(rows.size()));
        ScalarField f(g);
        for (int i = 0; i < g.nx; ++i) f.v[i] = rows[i][1];
        return f;
    }
    // x varies fastest; nx = rows until x returns to its first value
    int nx = 1;
    while (nx < static_cast<int>(rows.size()) && rows[nx][0] != rows[0][0]) ++nx;
    if (rows.size() % nx != 0) throw std::runtime_error("inconsistent CSV grid in " + path);
    int ny = static_cast<int>(rows.size()) / nx;
    Grid g = Grid::square(nx, ny);
    ScalarField f(g);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) f.at(ix, iy) = rows[iy * nx + ix][2];
    return f;
}

SpaceTimeField read_spacetime_csv(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(probe, header);
    probe.close();
    const bool one_d = header == "t,x,value";
    auto rows = read_numeric_csv(path, one_d ? 3 : 4);
    if (rows.empty()) throw std::runtime_error("empty CSV " + path);
    size_t per_level = 1;
    while (per_level < rows.size() && rows[per_level][0] == rows[0][0]) ++per_level;
    if (rows.size() % per_level != 0) throw std::runtime_error("inconsistent CSV levels in " + path);
    int nt = static_cast<int>(rows.size() / per_level);
    double T = rows.back()[0];
    TimeGrid tg = TimeGrid::make(T, nt);
    if (one_d) {
        Grid g = Grid::line(static_cast<int>(per_level));
        SpaceTimeField f(g, tg);
        for (int k = 0; k < nt; ++k)
            for (int ix = 0; ix < g.nx; ++ix) f.at(k, ix) = rows[k * per_level + ix][2];
        return f;
    }
    int nx = 1;
    while (nx < static_cast<int>(per_level) && rows[nx][1] != rows[0][1]) ++nx;
    if (per_level % nx != 0) throw std::runtime_error("inconsistent CSV grid in " + path);
    int ny = static_cast<int>(per_level) / nx;
    Grid g = Grid::square(nx, ny);
    SpaceTimeField f(g, tg);
    for (int k = 0; k < nt; ++k)
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                f.at(k, ix, iy) = rows[static_cast<size_t>(k) * per_level + iy * nx + ix][3];
    return f;
}

}  // namespace cmfg
