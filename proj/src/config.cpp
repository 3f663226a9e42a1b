#include "spiny/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace spiny {

namespace {

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view v) {
    v = trim(v);
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ValidationError(std::string(key), "expected a number, got '" + std::string(v) + "'");
    }
    return out;
}

long long parse_int(std::string_view key, std::string_view v) {
    v = trim(v);
    long long out = 0;
    const auto* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) {
        throw ValidationError(std::string(key), "expected an integer, got '" + std::string(v) + "'");
    }
    return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
    v = trim(v);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError(std::string(key), "expected a boolean, got '" + std::string(v) + "'");
}

std::vector<double> parse_list(std::string_view key, std::string_view v) {
    std::vector<double> out;
    v = trim(v);
    while (!v.empty()) {
        const auto comma = v.find(',');
        const auto item = trim(v.substr(0, comma));
        if (!item.empty()) out.push_back(parse_double(key, item));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    return out;
}

std::string fmt_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ", ";
        out += fmt_double(xs[i]);
    }
    return out;
}

template <class E>
E parse_enum(std::string_view key, std::string_view v,
             std::initializer_list<std::pair<std::string_view, E>> choices) {
    v = trim(v);
    for (const auto& [name, value] : choices) {
        if (v == name) return value;
    }
    throw ValidationError(std::string(key), "unknown value '" + std::string(v) + "'");
}

struct Field {
    std::string_view key;
    std::function<void(ModelConfig&, std::string_view)> set;
    std::function<std::string(const ModelConfig&)> get;
};

#define SPINY_DOUBLE(name, member)                                                          \
    Field {                                                                                 \
        name, [](ModelConfig& c, std::string_view v) { c.member = parse_double(name, v); }, \
            [](const ModelConfig& c) { return fmt_double(c.member); }                       \
    }
#define SPINY_INT(name, member)                                                                     \
    Field {                                                                                         \
        name,                                                                                       \
            [](ModelConfig& c, std::string_view v) {                                                \
                c.member = static_cast<decltype(c.member)>(parse_int(name, v));                     \
            },                                                                                      \
            [](const ModelConfig& c) { return std::to_string(c.member); }                           \
    }
#define SPINY_LIST(name, member)                                                          \
    Field {                                                                               \
        name, [](ModelConfig& c, std::string_view v) { c.member = parse_list(name, v); }, \
            [](const ModelConfig& c) { return fmt_list(c.member); }                       \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"model",
              [](ModelConfig& c, std::string_view v) {
                  c.model = parse_enum<ModelKind>("model", v, {{"sds", ModelKind::sds}, {"br", ModelKind::br}});
              },
              [](const ModelConfig& c) { return to_string(c.model); }},
        SPINY_DOUBLE("r_m", phys.r_m),
        SPINY_DOUBLE("r_a", phys.r_a),
        SPINY_DOUBLE("c_m", phys.c_m),
        SPINY_DOUBLE("c_hat", phys.c_hat),
        SPINY_DOUBLE("r_hat", phys.r_hat),
        SPINY_DOUBLE("a", phys.a),
        SPINY_DOUBLE("length", phys.length),
        SPINY_DOUBLE("r", phys.r),
        SPINY_DOUBLE("d_spacing", phys.d_spacing),
        SPINY_INT("n_spines", phys.n_spines),
        SPINY_DOUBLE("g_na", phys.g_na),
        SPINY_DOUBLE("g_k", phys.g_k),
        SPINY_DOUBLE("g_l", phys.g_l),
        SPINY_DOUBLE("v_na", phys.v_na),
        SPINY_DOUBLE("v_k", phys.v_k),
        SPINY_DOUBLE("v_l", phys.v_l),
        SPINY_DOUBLE("h_thresh", phys.h_thresh),
        SPINY_DOUBLE("tau_r", phys.tau_r),
        SPINY_DOUBLE("tau_s", phys.tau_s),
        SPINY_DOUBLE("eta_0", phys.eta_0),
        Field{"reset",
              [](ModelConfig& c, std::string_view v) {
                  c.reset = parse_enum<ResetMode>("reset", v,
                                                  {{"subtract", ResetMode::subtract}, {"zero", ResetMode::zero}});
              },
              [](const ModelConfig& c) { return std::string(c.reset == ResetMode::zero ? "zero" : "subtract"); }},
        Field{"kind",
              [](ModelConfig& c, std::string_view v) {
                  c.noise.kind = parse_enum<NoiseKind>("kind", v,
                                                       {{"white", NoiseKind::white},
                                                        {"ou_temporal", NoiseKind::ou_temporal},
                                                        {"q_wiener_spatial", NoiseKind::q_wiener_spatial}});
              },
              [](const ModelConfig& c) { return to_string(c.noise.kind); }},
        SPINY_DOUBLE("mu", noise.mu),
        SPINY_DOUBLE("nu", noise.nu),
        SPINY_DOUBLE("beta", noise.beta),
        SPINY_DOUBLE("theta_ou", noise.theta_ou),
        SPINY_DOUBLE("sigma", noise.sigma),
        SPINY_DOUBLE("zeta", noise.zeta),
        SPINY_INT("j", noise.J),
        Field{"interpretation",
              [](ModelConfig& c, std::string_view v) {
                  c.noise.interpretation = parse_enum<Interpretation>(
                      "interpretation", v,
                      {{"ito", Interpretation::ito}, {"stratonovich", Interpretation::stratonovich}});
              },
              [](const ModelConfig& c) { return to_string(c.noise.interpretation); }},
        Field{"target",
              [](ModelConfig& c, std::string_view v) {
                  c.noise.target = parse_enum<NoiseTarget>("target", v,
                                                           {{"cable", NoiseTarget::cable},
                                                            {"spines", NoiseTarget::spines}});
              },
              [](const ModelConfig& c) { return to_string(c.noise.target); }},
        SPINY_INT("seed", noise.seed),
        Field{"shared",
              [](ModelConfig& c, std::string_view v) { c.noise.shared = parse_bool("shared", v); },
              [](const ModelConfig& c) { return std::string(c.noise.shared ? "true" : "false"); }},
        SPINY_DOUBLE("dx", disc.dx),
        SPINY_DOUBLE("dt", disc.dt),
        SPINY_DOUBLE("t_final", disc.t_final),
        SPINY_INT("grid_n", disc.grid_n),
        SPINY_DOUBLE("rho_max", br.rho_max),
        SPINY_DOUBLE("br_r", br.r),
        SPINY_DOUBLE("kappa", br.kappa),
        SPINY_DOUBLE("br_diffusion", br.diffusion),
        SPINY_DOUBLE("stim_amplitude", br.stim_amplitude),
        SPINY_DOUBLE("stim_width", br.stim_width),
        SPINY_DOUBLE("stim_center", br.stim_center),
        SPINY_DOUBLE("spike_threshold", br.spike_threshold),
        SPINY_DOUBLE("x1_frac", measure.x1_frac),
        SPINY_DOUBLE("x2_frac", measure.x2_frac),
        SPINY_DOUBLE("theta_frac", measure.theta_frac),
        SPINY_LIST("nu_values", nu_values),
        SPINY_LIST("mu_values", mu_values),
        SPINY_LIST("kappa_values", kappa_values),
        SPINY_INT("realizations", realizations),
        SPINY_INT("workers", workers),
    };
    return table;
}

#undef SPINY_DOUBLE
#undef SPINY_INT
#undef SPINY_LIST

}  // namespace

std::string to_string(ModelKind k) { return k == ModelKind::sds ? "sds" : "br"; }

std::string to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::white: return "white";
        case NoiseKind::ou_temporal: return "ou_temporal";
        case NoiseKind::q_wiener_spatial: return "q_wiener_spatial";
    }
    return "white";
}

std::string to_string(Interpretation k) { return k == Interpretation::ito ? "ito" : "stratonovich"; }

std::string to_string(NoiseTarget k) { return k == NoiseTarget::cable ? "cable" : "spines"; }

double ModelConfig::cable_diffusion() const {
    return model == ModelKind::sds ? nondimensionalize(phys).scaled_D : br.diffusion;
}

double ModelConfig::stability_diffusion() const {
    return model == ModelKind::sds ? cable_diffusion() : br.diffusion / phys.c_m;
}

std::vector<double> ModelConfig::spine_positions() const {
    std::vector<double> xs;
    if (phys.n_spines <= 0) return xs;
    xs.reserve(static_cast<std::size_t>(phys.n_spines));
    const double spacing = phys.length / phys.n_spines;
    for (int n = 0; n < phys.n_spines; ++n) xs.push_back((n + 0.5) * spacing);
    return xs;
}

void apply_setting(ModelConfig& cfg, std::string_view key, std::string_view value) {
    key = trim(key);
    if (key == "J") key = "j";
    if (key == "l") key = "length";
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(cfg, value);
            return;
        }
    }
    throw ValidationError(std::string(key), "unknown key");
}

void resolve_discretization(ModelConfig& cfg) {
    auto& d = cfg.disc;
    if (d.dx == 0.0) d.dx = 0.2;
    if (d.t_final == 0.0) d.t_final = cfg.model == ModelKind::sds ? 50.0 : 130.0;
    if (d.dx > 0.0 && cfg.phys.length > 0.0) {
        const long cells = std::lround(cfg.phys.length / d.dx);
        if (d.grid_n == 0) d.grid_n = static_cast<int>(cells) + 1;
    }
    const double diff = cfg.stability_diffusion();
    if (d.dt == 0.0 && d.dx > 0.0 && diff > 0.0) {
        d.dt = 0.9 * d.dx * d.dx / (2.0 * diff);
        if (cfg.model == ModelKind::br) {
            // Euler bound including leak and stem coupling, which are stiff at high density.
            const double reaction = (cfg.phys.g_l + cfg.br.rho_max / cfg.br.r) / cfg.phys.c_m;
            d.dt = std::min(d.dt, 0.9 * 2.0 / (4.0 * diff / (d.dx * d.dx) + reaction));
            // Spine head during a spike: stem plus potassium and about half the peak sodium conductance.
            const auto& p = cfg.phys;
            const double head = (1.0 / cfg.br.r + p.g_k + 0.5 * p.g_na + p.g_l) / p.c_hat;
            d.dt = std::min(d.dt, 0.9 * 2.0 / head);
        }
    }
}

ModelConfig parse_config(std::string_view text) {
    ModelConfig cfg;
    int line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw MalformedFileError(line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw MalformedFileError(line_no, "missing key");
        if (value.empty() && key != "nu_values" && key != "mu_values" && key != "kappa_values") {
            throw MalformedFileError(line_no, "missing value for '" + std::string(key) + "'");
        }
        try {
            apply_setting(cfg, key, value);
        } catch (const ValidationError& e) {
            if (std::string_view(e.what()).find("unknown key") != std::string_view::npos) {
                throw MalformedFileError(line_no, "unknown key '" + std::string(key) + "'");
            }
            throw;
        }
    }
    return cfg;
}

void finalize(ModelConfig& cfg) {
    resolve_discretization(cfg);
    require_valid(cfg);
}

ModelConfig load_config(std::string_view text) {
    auto cfg = parse_config(text);
    finalize(cfg);
    return cfg;
}

std::string serialize_config(const ModelConfig& cfg) {
    std::ostringstream os;
    for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << '\n';
    return os.str();
}

DerivedParams nondimensionalize(const PhysicalParams& p) {
    const auto require_positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(name, "must be positive");
    };
    require_positive(p.r_m, "r_m");
    require_positive(p.r_a, "r_a");
    require_positive(p.c_m, "c_m");
    require_positive(p.c_hat, "c_hat");
    require_positive(p.r_hat, "r_hat");
    require_positive(p.a, "a");
    require_positive(p.r, "r");

    DerivedParams d;
    const double a_cm = p.a * 1e-4;
    d.lambda_e = std::sqrt(a_cm * p.r_m / (4.0 * p.r_a));
    d.tau_m = p.r_m * p.c_m * 1e-3;  // Ohm cm^2 * uF/cm^2 = us -> ms
    d.D = d.lambda_e * d.lambda_e / d.tau_m;
    // Spine-head constants relative to the cable membrane.
    const double c_hat = p.c_hat / p.c_m;
    const double r_hat = p.r_hat / p.r_m;
    d.epsilon = (1.0 / c_hat) * (1.0 / p.r + 1.0 / r_hat);
    return d;
}

std::vector<Violation> validate(const ModelConfig& cfg) {
    std::vector<Violation> out;
    const auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) out.push_back({name, "must be positive and finite"});
    };
    const auto nonneg = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) out.push_back({name, "must be nonnegative and finite"});
    };
    const auto& p = cfg.phys;
    positive(p.r_m, "r_m");
    positive(p.r_a, "r_a");
    positive(p.c_m, "c_m");
    positive(p.c_hat, "c_hat");
    positive(p.r_hat, "r_hat");
    positive(p.a, "a");
    positive(p.length, "length");
    positive(p.r, "r");
    positive(p.d_spacing, "d_spacing");
    if (p.n_spines < 1) out.push_back({"n_spines", "must be at least 1"});
    positive(p.g_na, "g_na");
    positive(p.g_k, "g_k");
    positive(p.g_l, "g_l");
    if (!(p.v_k < p.v_l && p.v_l < p.v_na)) out.push_back({"v_l", "requires v_k < v_l < v_na"});
    if (!(p.h_thresh > 0.0 && p.h_thresh < 1.0)) out.push_back({"h_thresh", "must lie in (0, 1)"});
    positive(p.tau_r, "tau_r");
    positive(p.tau_s, "tau_s");
    nonneg(p.eta_0, "eta_0");

    const auto& n = cfg.noise;
    nonneg(n.mu, "mu");
    nonneg(n.nu, "nu");
    nonneg(n.beta, "beta");
    nonneg(n.sigma, "sigma");
    if (!std::isfinite(n.theta_ou)) out.push_back({"theta_ou", "must be finite"});
    if (n.kind == NoiseKind::q_wiener_spatial && !(n.zeta > 0.0 && std::isfinite(n.zeta))) {
        out.push_back({"zeta", "must be positive for q_wiener_spatial noise"});
    }
    if (n.J < 0) out.push_back({"j", "must be >= 1 (or 0 for automatic)"});

    const auto& d = cfg.disc;
    positive(d.dx, "dx");
    positive(d.dt, "dt");
    positive(d.t_final, "t_final");
    if (d.grid_n < 3) {
        out.push_back({"grid_n", "must be at least 3"});
    } else if (d.dx > 0.0 && std::isfinite(d.dx) &&
               std::abs(d.dx * (d.grid_n - 1) - p.length) > 1e-9 * std::max(1.0, p.length)) {
        out.push_back({"dx", "dx * (grid_n - 1) must equal length"});
    }
    const double diff = cfg.stability_diffusion();
    if (d.dt > 0.0 && d.dx > 0.0 && diff > 0.0 && std::isfinite(d.dt) &&
        d.dt > d.dx * d.dx / (2.0 * diff) * (1.0 + 1e-12)) {
        out.push_back({"dt", "exceeds the explicit stability bound dx^2 / (2 D)"});
    }

    nonneg(cfg.br.rho_max, "rho_max");
    positive(cfg.br.r, "br_r");
    nonneg(cfg.br.kappa, "kappa");
    positive(cfg.br.diffusion, "br_diffusion");
    nonneg(cfg.br.stim_width, "stim_width");

    const auto& m = cfg.measure;
    if (!(m.x1_frac >= 0.0 && m.x1_frac < m.x2_frac && m.x2_frac <= 1.0)) {
        out.push_back({"x2_frac", "requires 0 <= x1_frac < x2_frac <= 1"});
    }
    if (!(m.theta_frac >= 0.0 && m.theta_frac <= 1.0)) out.push_back({"theta_frac", "must lie in [0, 1]"});
    if (cfg.realizations < 1) out.push_back({"realizations", "must be at least 1"});
    if (cfg.workers < 1) out.push_back({"workers", "must be at least 1"});
    return out;
}

void require_valid(const ModelConfig& cfg) {
    const auto v = validate(cfg);
    if (!v.empty()) throw ValidationError(v.front().field, v.front().message);
}

}  // namespace spiny
