#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "spiny/config.hpp"
#include "spiny/simulation.hpp"

namespace spiny {

class InvalidCrossingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// First time the uniformly sampled trace reaches theta, linearly
// interpolated between samples. Throws std::invalid_argument on an empty trace.
std::optional<double> detect_crossing(std::span<const double> trace, double dt, double theta);

// (x2 - x1) / (t2 - t1); throws InvalidCrossingError unless t2 > t1.
double measure_speed(double x1, double x2, double t1, double t2);

bool check_propagation(std::span<const double> trace_x2, double theta);

// True iff every spine in [x_lo, x_hi] fired and their first firings are
// strictly increasing with position.
bool check_sequential(std::span<const double> first_fire, std::span<const double> spine_x, double x_lo,
                      double x_hi);
// Same rule from an ordered (spine, time) event log.
bool check_sequential(std::span<const FireEvent> fire_log, std::span<const double> spine_x, double x_lo,
                      double x_hi);

// Spread (max - min) of first firing times of the spines in [x_lo, x_hi];
// kNever if any of them never fired.
double first_fire_spread(std::span<const double> first_fire, std::span<const double> spine_x, double x_lo,
                         double x_hi);

// Deterministic wave used to rescale speeds and fix theta_prop.
struct Reference {
    bool propagated = false;
    double c_det = 0.0;
    double theta = 0.0;
    double v_rest = 0.0;
    double peak = 0.0;
    double t1 = 0.0, t2 = 0.0;
    double x1 = 0.0, x2 = 0.0;
};

// Runs cfg with mu = nu = 0 under the configured scheme and measures the
// deterministic wave.
Reference deterministic_reference(const ModelConfig& cfg);

struct SpeedResult {
    double c_noisy = kNever;
    double c_rescaled = kNever;
    bool propagated = false;
    bool sequential = false;
    bool diverged = false;
    double t1 = kNever, t2 = kNever;
    std::uint64_t realization_seed = 0;
};

SpeedResult measure_realization(const RunResult& run, const Reference& ref);

struct EnsembleStats {
    double mean_c = kNever;
    double sd_c = kNever;
    int n_failed = 0;
    int n_nonsequential = 0;
    int n_valid = 0;
    int M = 0;
    double c_det = 0.0;
    double mean_c_noisy = kNever;
    std::vector<SpeedResult> results;

    bool empty() const { return n_valid == 0; }
};

// sqrt(E(c^2) - E(c)^2) and the two-pass form; both population SDs.
double sd_moments(std::span<const double> c);
double sd_two_pass(std::span<const double> c);

// Aggregates realizations: only propagated, sequential ones enter mean_c.
EnsembleStats aggregate(std::vector<SpeedResult> results, double c_det);

// Runs M seeded realizations of cfg (cfg.noise.seed is the master seed) on
// `workers` threads; results depend only on (cfg, seed, M).
EnsembleStats ensemble_speed(const ModelConfig& cfg, int M, int workers = 1);
EnsembleStats ensemble_speed(const ModelConfig& cfg, int M, const Reference& ref, int workers = 1);

}  // namespace spiny
