#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spiny/config.hpp"

namespace spiny {

inline constexpr double kNever = std::numeric_limits<double>::quiet_NaN();

struct FireEvent {
    int spine = 0;
    double t = 0.0;
};

// Raised when a realization produces a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(double t, const std::string& what)
        : std::runtime_error(what + " at t=" + std::to_string(t)), t_(t) {}
    double t() const { return t_; }

private:
    double t_;
};

struct RunOptions {
    bool record_field = false;
    int field_stride = 10;  // steps between field snapshots
    bool record_gates = false;  // BR only: U, m, n, h snapshots alongside V
    // With mu = nu = 0, integrate with the configured scheme (zero increments)
    // rather than the shared Euler path; used for scheme-matched references.
    bool noiseless_scheme = false;
    // When finite, stop once V(x2) has reached this level and every spine in
    // [x1, x2] has fired; later dynamics cannot change the speed measurement.
    double stop_theta = kNever;
};

// True when the early-stop rule of `opts` is met.
bool measurement_complete(const RunOptions& opts, double v_x2, std::span<const double> fire_times,
                          std::span<const double> spine_x, double x1, double x2);

struct FieldSnapshot {
    double t = 0.0;
    std::vector<double> V;
    // BR only, one entry per spine site.
    std::vector<double> U, m, n, h;
};

// Everything the speed measurement needs from one realization.
struct RunResult {
    double dt = 0.0;
    double x1 = 0.0, x2 = 0.0;
    // Cable voltage at the two stations; sample k is at t = k dt.
    std::vector<double> trace_x1, trace_x2;
    double v_rest = 0.0;
    std::vector<double> spine_x;
    std::vector<double> first_fire;  // kNever when a spine never fired
    std::vector<FireEvent> fire_log;
    bool diverged = false;
    double diverged_at = kNever;
    std::uint64_t noise_draws = 0;
    std::uint64_t steps = 0;
    std::vector<double> grid_x;
    std::vector<double> final_state;
    std::vector<double> site_x;  // BR spine-head sites
    std::vector<FieldSnapshot> field;
};

// Runs one realization of cfg.model; realization selects the noise stream.
RunResult simulate(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts = {});

}  // namespace spiny
