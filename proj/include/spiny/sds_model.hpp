#pragma once

#include <optional>
#include <span>
#include <vector>

#include "spiny/cable.hpp"
#include "spiny/config.hpp"
#include "spiny/integrators.hpp"
#include "spiny/noise.hpp"
#include "spiny/simulation.hpp"

namespace spiny::sds {

// Multiplicative noise shape U (1 - U) on [0, 1], zero elsewhere.
double g_if(double U);

// dU/dt = V / (C_hat r) - epsilon U between firings.
double if_drift(double U, double V_at_spine, double c_hat, double r, double epsilon);

struct IFSpines {
    std::vector<double> U;
    std::vector<double> last_fire;  // kNever until the first firing
    std::vector<FireEvent> fire_log;

    explicit IFSpines(std::size_t n = 0) : U(n, 0.0), last_fire(n, kNever) {}
};

struct FireRule {
    double h_thresh = 0.04;
    double tau_r = 40.0;
    ResetMode reset = ResetMode::subtract;
};

// Spines with U >= h outside their refractory window fire at t: they are
// reset, logged, and returned.
std::vector<int> fire_check(IFSpines& spines, double t, const FireRule& rule);

// Rectangular action potential eta_0 on 0 <= t - T <= tau_s. Overlapping
// pulses of one spine do not stack.
double pulse_value(double t, std::span<const double> fire_times, double eta_0, double tau_s);

// Firing times with t - T <= tau_s, per spine.
struct PulseTrain {
    std::vector<std::vector<double>> active;

    explicit PulseTrain(std::size_t n = 0) : active(n) {}
    void add(int spine, double t) { active[static_cast<std::size_t>(spine)].push_back(t); }
    void prune(double t, double tau_s);
};

// Full spike-diffuse-spike realization. State layout: [V(grid) | U(spines)].
class SdsModel {
public:
    SdsModel(const ModelConfig& cfg, std::uint64_t realization);

    // Advances one dt: scheme step, U clamp, then firing events at t + dt.
    void step();
    // Without noise, step with the configured scheme and zero increments
    // instead of the shared Euler path.
    void set_noiseless_scheme(bool on) { noiseless_scheme_ = on; }
    // Fires spine 0 at the current time.
    void force_fire(int spine);

    double t() const { return t_; }
    double dt() const { return dt_; }
    const Grid& grid() const { return grid_; }
    std::span<const double> V() const { return std::span(x_).first(grid_.size()); }
    std::span<const double> U() const { return std::span(x_).subspan(grid_.size()); }
    const IFSpines& spines() const { return spines_; }
    const std::vector<double>& state() const { return x_; }
    const CouplingMap& coupling() const { return coupling_; }
    std::uint64_t noise_draws() const { return noise_ ? noise_->rng().draws() : 0; }

    // Drift and noise multiplier over the packed state, with the spine
    // potentials U_hat held fixed over the step.
    struct System {
        const SdsModel* model;
        void drift(std::span<const double> x, std::span<double> out) const;
        void diffusion(std::span<const double> x, std::span<double> out) const;
    };

private:
    ModelConfig cfg_;
    Grid grid_;
    CouplingMap coupling_;
    double dt_;
    double t_ = 0.0;
    double epsilon_;
    double D_;
    std::vector<double> x_;
    IFSpines spines_;
    PulseTrain pulses_;
    std::vector<double> u_hat_;
    std::vector<double> dW_;
    std::vector<double> noise_buf_;
    std::optional<NoiseSource> noise_;
    StepWorkspace ws_;
    bool noiseless_scheme_ = false;
};

RunResult run(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts);

}  // namespace spiny::sds
