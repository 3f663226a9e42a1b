#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace spiny {

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Grid {
    double dx = 0.0;
    std::vector<double> x;

    static Grid uniform(double length, int n);
    std::size_t size() const { return x.size(); }
    // Index of the node closest to position.
    std::size_t nearest(double position) const;
};

struct CableState {
    std::vector<double> V;
    double t = 0.0;
};

struct CouplingMap {
    std::vector<std::size_t> spine_nodes;
    std::vector<double> weights;

    // Point attachments: weight 1/dx at the node nearest each position.
    static CouplingMap point_attachments(const Grid& grid, std::span<const double> positions);
};

// out = D * second difference / dx^2 with mirrored ghost nodes (zero flux).
void laplacian_apply(std::span<const double> V, double D, double dx, std::span<double> out);
std::vector<double> laplacian_apply(std::span<const double> V, double D, double dx);

// out[node] += D r_a w (U_hat - V[node]) / r for each spine.
void inject_spine_current(std::span<const double> V, std::span<const double> U_hat, const CouplingMap& map,
                          double D, double r_a, double r, std::span<double> out);

// out += -g (V - V_rest): the leak of both cable models (SDS: g = 1/tau, V_rest = 0).
void add_affine_leak(std::span<const double> V, double g, double V_rest, std::span<double> out);

// Homogeneous sealed-cable solution V0 exp(-t / tau).
double cable_decay_check(double V0, double tau, double t);

}  // namespace spiny
