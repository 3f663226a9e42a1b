#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spiny {

enum class ModelKind { sds, br };
enum class NoiseKind { white, ou_temporal, q_wiener_spatial };
enum class Interpretation { ito, stratonovich };
enum class NoiseTarget { cable, spines };
enum class ResetMode { subtract, zero };

// Thrown by load_config when a line cannot be parsed.
class MalformedFileError : public std::runtime_error {
public:
    MalformedFileError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Thrown when a loaded or overridden config breaks an invariant.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& what)
        : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct PhysicalParams {
    // Cable and spine-head passive properties. r_m, r_a, c_m, c_hat, r_hat
    // and a are the physical table values (Ohm cm^2, Ohm cm, uF/cm^2, um);
    // length, r and d_spacing are already in electrotonic units.
    double r_m = 2500.0;
    double r_a = 70.0;
    double c_m = 1.0;
    double c_hat = 1.0;
    double r_hat = 2500.0;
    double a = 0.36;
    double length = 64.8;
    double r = 1.0;
    double d_spacing = 0.8;
    int n_spines = 81;

    // Hodgkin-Huxley spine heads (mS/cm^2, mV).
    double g_na = 120.0;
    double g_k = 36.0;
    double g_l = 0.3;
    double v_na = 50.0;
    double v_k = -77.0;
    double v_l = -54.402;

    // Integrate-and-fire spine heads. tau_r, tau_s and eta_0 are not
    // tabulated; these values come from the propagation calibration.
    double h_thresh = 0.04;
    double tau_r = 40.0;
    double tau_s = 2.0;
    double eta_0 = 2.0;
};

struct DerivedParams {
    // Physical scales: lambda_e in cm, tau_m in ms, D in cm^2/ms.
    double lambda_e = 0.0;
    double tau_m = 0.0;
    double D = 0.0;
    // Leak rate of the integrate-and-fire head in membrane time units.
    double epsilon = 0.0;
    // The cable equation is solved with x in units of lambda_e and t in
    // units of tau_m, so the constants seen by the solver are exactly these.
    double scaled_lambda = 1.0;
    double scaled_tau = 1.0;
    double scaled_D = 1.0;
};

struct NoiseConfig {
    NoiseKind kind = NoiseKind::white;
    double mu = 0.0;
    double nu = 0.0;
    double beta = 1.0;
    double theta_ou = 0.0;
    double sigma = 1.0;
    double zeta = 2.4;
    int J = 0;  // 0 selects the smallest J with lambda_J < 1e-8
    Interpretation interpretation = Interpretation::ito;
    NoiseTarget target = NoiseTarget::spines;
    std::uint64_t seed = 1;
    // One shared path for every point instead of independent per-point noise
    // (white and OU kinds only).
    bool shared = false;

    bool active() const { return mu != 0.0 || nu != 0.0; }
};

struct Discretization {
    double dx = 0.0;       // 0 selects the model default
    double dt = 0.0;       // 0 selects an explicit-stability bound with 10% margin
    double t_final = 0.0;  // 0 selects the model default
    int grid_n = 0;        // derived from length / dx
};

struct BrParams {
    double rho_max = 4.0;
    double r = 0.1;
    double kappa = 0.0;
    // 1 / (r_a pi a) with the scaled r_a = a = 1.
    double diffusion = 0.3183098861837907;
    double stim_amplitude = 60.0;
    double stim_width = 3.0;
    double stim_center = 0.0;
    // Spine-head voltage (mV) that counts as a firing event.
    double spike_threshold = -20.0;
};

struct MeasureParams {
    double x1_frac = 0.25;
    double x2_frac = 0.75;
    // theta_prop as a fraction of the deterministic peak above rest at x2.
    double theta_frac = 0.5;
};

struct ModelConfig {
    ModelKind model = ModelKind::sds;
    PhysicalParams phys;
    NoiseConfig noise;
    Discretization disc;
    BrParams br;
    MeasureParams measure;
    ResetMode reset = ResetMode::subtract;

    // Sweep descriptions used by the CLI.
    std::vector<double> nu_values;
    std::vector<double> mu_values;
    std::vector<double> kappa_values;
    int realizations = 100;
    int workers = 1;

    // Resolved diffusion coefficient of the selected model's cable.
    double cable_diffusion() const;
    // Effective diffusivity in the explicit stability bound (includes C for BR).
    double stability_diffusion() const;
    // Spine attachment positions x_n = (n + 1/2) L / N.
    std::vector<double> spine_positions() const;
};

// Parses `key = value` lines ('#' starts a comment) over the defaults,
// resolves model-dependent discretization defaults and validates.
ModelConfig load_config(std::string_view text);

// load_config without resolving defaults or validating, for callers that
// apply further overrides before calling finalize.
ModelConfig parse_config(std::string_view text);

// resolve_discretization followed by require_valid.
void finalize(ModelConfig& cfg);

// Applies one `key=value` assignment; throws ValidationError on unknown keys
// or unparsable values.
void apply_setting(ModelConfig& cfg, std::string_view key, std::string_view value);

// Fills dx, dt, t_final and grid_n left at 0. Idempotent.
void resolve_discretization(ModelConfig& cfg);

// Writes every field as `key = value` with round-trip precision.
std::string serialize_config(const ModelConfig& cfg);

DerivedParams nondimensionalize(const PhysicalParams& p);

struct Violation {
    std::string field;
    std::string message;
};

std::vector<Violation> validate(const ModelConfig& cfg);

// Throws ValidationError for the first violation, if any.
void require_valid(const ModelConfig& cfg);

std::string to_string(ModelKind k);
std::string to_string(NoiseKind k);
std::string to_string(Interpretation k);
std::string to_string(NoiseTarget k);

}  // namespace spiny
