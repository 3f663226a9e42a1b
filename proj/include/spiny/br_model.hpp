#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spiny/cable.hpp"
#include "spiny/config.hpp"
#include "spiny/integrators.hpp"
#include "spiny/noise.hpp"
#include "spiny/simulation.hpp"

namespace spiny::br {

enum class Gate { m, n, h };

struct HHRates {
    double alpha = 0.0;
    double beta = 0.0;
};

// Squid-axon rate functions (1/ms) at membrane voltage U (mV), rest -65 mV.
HHRates hh_rates(Gate gate, double U);

// alpha / (alpha + beta)
double steady_gate(Gate gate, double U);

// Gate drift alpha (1 - X) - beta X.
double gate_drift(Gate gate, double X, double U);

// Cable noise shape -(65 + V).
double g_c(double V);
// Gate noise shape m (1 - m) on [0, 1], zero elsewhere.
double g_m(double m);

struct HHParams {
    double g_na = 120.0, g_k = 36.0, g_l = 0.3;
    double v_na = 50.0, v_k = -77.0, v_l = -54.402;

    static HHParams from(const PhysicalParams& p) { return {p.g_na, p.g_k, p.g_l, p.v_na, p.v_k, p.v_l}; }
};

// Total ionic current into the spine head (uA/cm^2).
double hh_current(const HHParams& p, double U, double m, double n, double h);

struct HHState {
    std::vector<double> U, m, n, h;
};

struct SpineDensity {
    double kappa = 0.0;
    double rho_max = 0.0;
    double d_spacing = 0.0;
    std::vector<double> values;
};

// rho(x) = sum_n rho_max xi_n(x) exp(-kappa (x - x_n)^2), xi_n the indicator
// of (x_n - d/2, x_n + d/2]; the first window also includes its left end.
// spine_x must be uniformly spaced by d_spacing.
SpineDensity spine_density(std::span<const double> x, std::span<const double> spine_x, double kappa,
                           double rho_max, double d_spacing);

// Adds a rectangular bump of `amplitude` on |x - center| <= width.
void stimulate(std::span<double> V, std::span<const double> x, double amplitude, double center, double width);

// Local equilibrium of one spine-head site given a rest cable value.
struct SiteRest {
    double V, U, m, n, h;
};

// Packed layout: [V(grid) | U | m | n | h] with one entry per spine site.
class BrModel {
public:
    BrModel(const ModelConfig& cfg, std::uint64_t realization);

    void step();
    // Without noise, step with the configured scheme and zero increments
    // instead of the shared Euler path.
    void set_noiseless_scheme(bool on) { noiseless_scheme_ = on; }

    double t() const { return t_; }
    double dt() const { return dt_; }
    const Grid& grid() const { return grid_; }
    const SpineDensity& density() const { return density_; }
    std::span<const double> V() const { return std::span(x_).first(grid_.size()); }
    std::span<const double> U() const { return block(0); }
    std::span<const double> m() const { return block(1); }
    std::span<const double> n() const { return block(2); }
    std::span<const double> h() const { return block(3); }
    const std::vector<std::size_t>& site_nodes() const { return site_node_; }
    const std::vector<double>& state() const { return x_; }
    std::vector<double>& mutable_state() { return x_; }
    const std::vector<double>& rest() const { return rest_; }
    std::uint64_t noise_draws() const { return noise_ ? noise_->rng().draws() : 0; }

    struct System {
        const BrModel* model;
        void drift(std::span<const double> x, std::span<double> out) const;
        void diffusion(std::span<const double> x, std::span<double> out) const;
    };

private:
    std::span<const double> block(std::size_t k) const {
        return std::span(x_).subspan(grid_.size() + k * site_node_.size(), site_node_.size());
    }
    void compute_rest();

    ModelConfig cfg_;
    HHParams hh_;
    Grid grid_;
    SpineDensity density_;
    std::vector<std::size_t> site_node_;
    std::vector<double> site_rho_;
    double dt_;
    double t_ = 0.0;
    std::vector<double> x_;
    std::vector<double> rest_;
    std::vector<double> dW_;
    std::vector<double> noise_buf_;
    std::optional<NoiseSource> noise_;
    StepWorkspace ws_;
    bool noiseless_scheme_ = false;
};

RunResult run(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts);

}  // namespace spiny::br
