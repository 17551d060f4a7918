#pragma once

#include <string>
#include <vector>

namespace cmfg {

/// Uniform tensor-product grid on [0,1] (dim 1) or [0,1]x[0,1] (dim 2).
/// Node coordinates are i/(n-1), so the grid covers [0,1] inclusive.
struct Grid {
    int dim = 2;
    int nx = 0;
    int ny = 0;  // 0 when dim == 1
    double hx = 0.0;
    double hy = 0.0;

    static Grid line(int nx);
    static Grid square(int nx, int ny);

    int num_nodes() const { return dim == 1 ? nx : nx * ny; }
    int index(int ix, int iy = 0) const { return iy * nx + ix; }
    double x(int ix) const { return static_cast<double>(ix) / (nx - 1); }
    double y(int iy) const { return static_cast<double>(iy) / (ny - 1); }

    bool operator==(const Grid&) const = default;
};

/// Time axis [0,T] with nt levels, dt = T/(nt-1).
struct TimeGrid {
    double T = 0.0;
    int nt = 0;
    double dt = 0.0;

    static TimeGrid make(double T, int nt);

    double t(int k) const { return T * static_cast<double>(k) / (nt - 1); }

    bool operator==(const TimeGrid&) const = default;
};

/// Scalar function sampled at the grid nodes. Storage is row-major over
/// (y, x), matching the CSV layout.
struct ScalarField {
    Grid grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const Grid& g) : grid(g), v(g.num_nodes(), 0.0) {}

    double& at(int ix, int iy = 0) { return v[grid.index(ix, iy)]; }
    double at(int ix, int iy = 0) const { return v[grid.index(ix, iy)]; }

    template <class F>
    static ScalarField sample(const Grid& g, F f) {
        ScalarField out(g);
        if (g.dim == 1) {
            for (int ix = 0; ix < g.nx; ++ix) out.v[ix] = f(g.x(ix), 0.0);
        } else {
            for (int iy = 0; iy < g.ny; ++iy)
                for (int ix = 0; ix < g.nx; ++ix)
                    out.at(ix, iy) = f(g.x(ix), g.y(iy));
        }
        return out;
    }
};

/// Scalar function on the tensor grid Omega x [0,T]; level-major storage.
struct SpaceTimeField {
    Grid grid;
    TimeGrid time;
    std::vector<double> v;

    SpaceTimeField() = default;
    SpaceTimeField(const Grid& g, const TimeGrid& tg)
        : grid(g), time(tg), v(static_cast<size_t>(g.num_nodes()) * tg.nt, 0.0) {}

    double& at(int k, int ix, int iy = 0) {
        return v[static_cast<size_t>(k) * grid.num_nodes() + grid.index(ix, iy)];
    }
    double at(int k, int ix, int iy = 0) const {
        return v[static_cast<size_t>(k) * grid.num_nodes() + grid.index(ix, iy)];
    }

    double* slice_data(int k) { return v.data() + static_cast<size_t>(k) * grid.num_nodes(); }
    const double* slice_data(int k) const {
        return v.data() + static_cast<size_t>(k) * grid.num_nodes();
    }

    ScalarField slice(int k) const;
    void set_slice(int k, const ScalarField& f);
};

/// Gamma0 is the absorbing face {x=1}; Gamma1 the remaining boundary.
struct BoundaryPartition {
    std::vector<int> gamma0;
    std::vector<int> gamma1;
};

BoundaryPartition partition_boundary(const Grid& g);

inline bool on_gamma0(const Grid& g, int ix, int /*iy*/ = 0) { return ix == g.nx - 1; }
bool on_boundary(const Grid& g, int ix, int iy = 0);

/// Per-axis gradient by second-order central differences, one-sided
/// second-order at the boundary nodes. `y` is empty when dim == 1.
struct GradientField {
    ScalarField x;
    ScalarField y;
};

double integrate_space(const ScalarField& f);
double integrate_spacetime(const SpaceTimeField& f);
GradientField gradient(const ScalarField& f);
double h1_norm(const ScalarField& f);
double l2_norm(const ScalarField& f);

/// Second derivative along one axis (0 = x, 1 = y); second-order one-sided
/// stencils at the boundary rows (needs >= 4 nodes on that axis).
ScalarField second_derivative(const ScalarField& f, int axis);

double sup_abs(const std::vector<double>& v);
double sup_diff(const std::vector<double>& a, const std::vector<double>& b);
bool all_finite(const std::vector<double>& v);

// CSV layout per the external interface: header "x,y,value" or
// "t,x,y,value", rows ordered with x fastest, then y, then t.
void write_csv(const ScalarField& f, const std::string& path);
void write_csv(const SpaceTimeField& f, const std::string& path);
ScalarField read_scalar_csv(const std::string& path);
SpaceTimeField read_spacetime_csv(const std::string& path);

}  // namespace cmfg
