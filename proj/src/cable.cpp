#include "spiny/cable.hpp"

#include <cmath>

namespace spiny {

Grid Grid::uniform(double length, int n) {
    if (n < 2) throw ShapeError("grid needs at least 2 nodes");
    Grid g;
    g.dx = length / (n - 1);
    g.x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g.x[static_cast<std::size_t>(i)] = i * g.dx;
    return g;
}

std::size_t Grid::nearest(double position) const {
    const long i = std::lround(position / dx);
    if (i <= 0) return 0;
    if (static_cast<std::size_t>(i) >= x.size()) return x.size() - 1;
    return static_cast<std::size_t>(i);
}

CouplingMap CouplingMap::point_attachments(const Grid& grid, std::span<const double> positions) {
    CouplingMap m;
    m.spine_nodes.reserve(positions.size());
    m.weights.assign(positions.size(), 1.0 / grid.dx);
    for (double p : positions) m.spine_nodes.push_back(grid.nearest(p));
    return m;
}

void laplacian_apply(std::span<const double> V, double D, double dx, std::span<double> out) {
    const std::size_t n = V.size();
    if (n < 3) throw ShapeError("laplacian needs at least 3 nodes");
    if (out.size() != n) throw ShapeError("laplacian output length mismatch");
    const double k = D / (dx * dx);
    out[0] = k * 2.0 * (V[1] - V[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) out[i] = k * (V[i - 1] - 2.0 * V[i] + V[i + 1]);
    out[n - 1] = k * 2.0 * (V[n - 2] - V[n - 1]);
}

std::vector<double> laplacian_apply(std::span<const double> V, double D, double dx) {
    std::vector<double> out(V.size());
    laplacian_apply(V, D, dx, out);
    return out;
}

void inject_spine_current(std::span<const double> V, std::span<const double> U_hat, const CouplingMap& map,
                          double D, double r_a, double r, std::span<double> out) {
    if (U_hat.size() != map.spine_nodes.size() || map.weights.size() != map.spine_nodes.size()) {
        throw ShapeError("spine count mismatch in coupling");
    }
    if (out.size() != V.size()) throw ShapeError("cable output length mismatch");
    const double k = D * r_a / r;
    for (std::size_t s = 0; s < map.spine_nodes.size(); ++s) {
        const std::size_t node = map.spine_nodes[s];
        if (node >= V.size()) throw ShapeError("spine node outside grid");
        out[node] += k * map.weights[s] * (U_hat[s] - V[node]);
    }
}

void add_affine_leak(std::span<const double> V, double g, double V_rest, std::span<double> out) {
    for (std::size_t i = 0; i < V.size(); ++i) out[i] -= g * (V[i] - V_rest);
}

double cable_decay_check(double V0, double tau, double t) { return V0 * std::exp(-t / tau); }

}  // namespace spiny
