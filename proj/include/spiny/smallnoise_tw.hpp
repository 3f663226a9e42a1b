#pragma once

#include <array>
#include <stdexcept>
#include <vector>

#include "spiny/br_model.hpp"
#include "spiny/config.hpp"

namespace spiny::tw {

// Wave-frame state over xi = c t - x: cable V, its derivative W = V', spine
// head U and the gates.
enum Component { kV = 0, kW, kU, kM, kN, kH };
using TWState = std::array<double, 6>;

struct TWParams {
    double c = 0.0;
    double nu_c = 0.0, nu_m = 0.0, nu_n = 0.0, nu_h = 0.0;
    double F_c0 = 0.0;  // kernel at zero lag, 1 / (2 zeta)
    double rho = 0.0;
    double r = 0.0;
    double C = 1.0;
    double c_hat = 1.0;
    double D = 0.0;
    br::HHParams hh;

    // BR parameters of cfg with rho = rho_max and F_c0 from cfg.noise.zeta.
    static TWParams from(const ModelConfig& cfg);
};

class RootFindError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// No speed bracket produced a sign change: no wave at these parameters.
class NoWaveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Gate drift correction polynomial X (1 - 3X + 2X^2).
double gate_correction(double X);

TWState tw_rhs(const TWState& s, const TWParams& p);

// Equilibrium of tw_rhs near the HH rest (Newton, residual < 1e-12).
TWState rest_state(const TWParams& p);

// Jacobian of tw_rhs by central differences.
std::array<std::array<double, 6>, 6> jacobian(const TWState& s, const TWParams& p);

// Unit eigenvector of the single positive real eigenvalue at rest, oriented
// so V increases. Throws RootFindError if there is not exactly one.
TWState unstable_direction(const TWParams& p, const TWState& rest);

struct ShootOptions {
    double xi_length = 100.0;
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double offset = 1e-6;        // initial step along the unstable direction
    double return_tol = 1e-4;    // distance to rest that counts as a return
    double escape = 150.0;       // |V - V_rest| that counts as blow-up (mV)
    double tail_escape = 30.0;   // the same after the spike has passed
    double c_guess = 0.45;       // fast-branch seed
    double scan_lo = 0.3, scan_hi = 3.0;  // bracket scan as multiples of c_guess
    int scan_points = 40;
    int max_bisections = 80;
};

// Outcome of integrating one trial speed.
struct Trial {
    int sign = 0;               // +1 escaped upward, -1 downward, 0 neither
    double xi_end = 0.0;
    double min_return = 0.0;    // closest approach to rest after the pulse
    bool excited = false;       // V rose well above rest
};

Trial shoot_trial(const TWParams& p, const TWState& rest, const TWState& dir, const ShootOptions& opt);

struct ShootResult {
    double c = 0.0;
    bool converged = false;
    double min_return = 0.0;
    int bisections = 0;
};

// Fast-branch wave speed for cfg at m-noise intensity nu_m.
ShootResult shoot_speed(const TWParams& base, double nu_m, const ShootOptions& opt = {});

struct SweepPoint {
    double nu_m = 0.0;
    double c = 0.0;
    bool converged = false;
};

// shoot_speed over nu values, seeding each point from the previous speed.
// Points without a wave get c = NaN and converged = false.
std::vector<SweepPoint> speed_curve(const TWParams& base, const std::vector<double>& nu, ShootOptions opt = {});

}  // namespace spiny::tw
