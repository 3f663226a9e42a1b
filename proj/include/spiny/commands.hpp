#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spiny/config.hpp"
#include "spiny/wavespeed.hpp"

namespace spiny {

enum class Command { simulate, sweep_noise, sweep_kappa, smallnoise, noise_test };

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitDivergence = 2, kExitStatistical = 3 };

struct ExperimentSpec {
    Command command = Command::simulate;
    std::string config_path;            // empty: defaults only
    std::string output_path = "spiny.csv";
    std::vector<std::string> overrides;  // "key=value", applied after the file
    std::optional<std::uint64_t> seed;
    std::optional<int> realizations;
    std::optional<int> workers;
    // noise-test only
    std::size_t samples = 100000;
    std::string dump_path;  // optional binary dump of increments
};

// Config file, then overrides, then seed / M / workers; resolved and validated.
ModelConfig resolve_spec(const ExperimentSpec& spec);

// JSON object of every resolved config key.
std::string config_json(const ModelConfig& cfg);

// "out.csv" -> "out<suffix>", e.g. "_fires.csv" or ".json".
std::string sibling_path(const std::string& out, const std::string& suffix);

struct SweepRow {
    double intensity = 0.0;
    EnsembleStats stats;
};

// One ensemble per entry of nu_values (multiplicative) or, when that is
// empty, of mu_values (additive). The deterministic reference is shared.
std::vector<SweepRow> sweep_noise(const ModelConfig& cfg);
void write_sweep_csv(std::ostream& os, const ModelConfig& cfg, const std::vector<SweepRow>& rows);

struct KappaRow {
    double kappa = 0.0;
    double c_det = 0.0;
    double c_noisy = kNever;  // ensemble mean, kNever without noise
    double diff = kNever;     // c_det - c_noisy
    double sd_c = kNever;
    int n_valid = 0, n_failed = 0, n_nonsequential = 0, M = 0;
};

std::vector<KappaRow> sweep_kappa(const ModelConfig& cfg);
void write_kappa_csv(std::ostream& os, const std::vector<KappaRow>& rows);

struct NoiseTestLine {
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct NoiseTestReport {
    std::vector<NoiseTestLine> lines;
    bool pass() const;
};

// Empirical statistics of cfg.noise.kind against analytic targets at 4 standard
// errors. OU: stationary variance sigma^2 / (2 beta). Q-Wiener: covariance of
// increments against F_c(x - x') dt at interior points. White: per-point mean
// and variance. Optionally dumps the increments as little-endian f64 rows.
NoiseTestReport noise_test(const ModelConfig& cfg, std::size_t samples, const std::string& dump_path = {});

int run_simulate(const ExperimentSpec& spec, std::ostream& log);
int run_sweep_noise(const ExperimentSpec& spec, std::ostream& log);
int run_sweep_kappa(const ExperimentSpec& spec, std::ostream& log);
int run_smallnoise(const ExperimentSpec& spec, std::ostream& log);
int run_noise_test(const ExperimentSpec& spec, std::ostream& log);

// Dispatches spec.command and maps errors to exit codes.
int run_command(const ExperimentSpec& spec, std::ostream& log);

}  // namespace spiny
