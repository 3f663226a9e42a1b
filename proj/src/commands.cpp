#include "spiny/commands.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "spiny/noise.hpp"
#include "spiny/simulation.hpp"
#include "spiny/smallnoise_tw.hpp"

namespace spiny {

namespace {

constexpr std::uint64_t kNoiseTestStream = 0x7e57;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ValidationError("out", "cannot write " + path);
    os << std::setprecision(10);
    return os;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

void write_json_sidecar(const std::string& out, const ModelConfig& cfg) {
    std::ofstream js(sibling_path(out, ".json"));
    js << config_json(cfg) << '\n';
}

// NaN prints as an empty CSV cell.
struct Cell {
    double v;
};
std::ostream& operator<<(std::ostream& os, Cell c) {
    if (std::isfinite(c.v)) os << c.v;
    return os;
}

void put_f64(std::ostream& os, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

NoiseTestLine check(std::string name, double value, double target, double tol) {
    return {std::move(name), value, target, tol, std::abs(value - target) <= tol};
}

NoiseTestReport test_ou(const ModelConfig& cfg, std::size_t samples, std::ostream* dump) {
    const double dt = 0.01;
    const NoiseConfig& n = cfg.noise;
    Rng rng = make_stream(n.seed, 0, kNoiseTestStream);
    const double var = n.sigma * n.sigma / (2.0 * n.beta);
    OUState s{n.theta_ou + std::sqrt(var) * rng.normal(), n.beta, n.theta_ou, n.sigma};

    double sum = 0.0, sum2 = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        s = ou_step(s, dt, rng);
        sum += s.K;
        sum2 += s.K * s.K;
        if (dump) put_f64(*dump, s.K);
    }
    const double N = static_cast<double>(samples);
    const double mean = sum / N;
    const double sample_var = (sum2 - N * mean * mean) / (N - 1.0);

    // Sample variance of an AR(1) sequence with lag-one correlation phi.
    const double phi = 1.0 - n.beta * dt;
    const double se_var = std::sqrt(2.0 * var * var / N * (1.0 + phi * phi) / (1.0 - phi * phi));
    const double se_mean = std::sqrt(var / N * (1.0 + phi) / (1.0 - phi));

    NoiseTestReport rep;
    rep.lines.push_back(check("ou_mean", mean, n.theta_ou, 4.0 * se_mean));
    rep.lines.push_back(check("ou_variance", sample_var, var, 4.0 * se_var));
    return rep;
}

NoiseTestReport test_qwiener(const ModelConfig& cfg, std::size_t samples, std::ostream* dump) {
    const double L = cfg.phys.length;
    const double zeta = cfg.noise.zeta;
    const double dt = cfg.disc.dt;

    // Up to 12 consecutive spine sites about the middle, clear of the
    // reflecting boundaries where the cosine basis adds image terms.
    std::vector<double> pos;
    for (double x : cfg.spine_positions()) {
        if (x >= 4.0 * zeta && x <= L - 4.0 * zeta) pos.push_back(x);
    }
    if (pos.size() < 2) throw ValidationError("zeta", "too large for an interior covariance test");
    if (pos.size() > 12) {
        const std::size_t start = (pos.size() - 12) / 2;
        pos = std::vector<double>(pos.begin() + static_cast<std::ptrdiff_t>(start),
                                  pos.begin() + static_cast<std::ptrdiff_t>(start + 12));
    }

    const int J = cfg.noise.J > 0 ? cfg.noise.J : default_truncation(zeta, L);
    QWiener qw(pos, zeta, L, J);
    Rng rng = make_stream(cfg.noise.seed, 0, kNoiseTestStream);
    std::vector<std::vector<double>> rows(samples, std::vector<double>(pos.size()));
    for (auto& row : rows) {
        qw.increment(dt, rng, row);
        if (dump) {
            for (double v : row) put_f64(*dump, v);
        }
    }
    const auto cov = estimate_covariance(rows);

    const std::size_t n = pos.size();
    const double F0 = correlation_fn(0.0, zeta);
    const double N = static_cast<double>(samples);
    double max_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double F = correlation_fn(pos[i] - pos[j], zeta);
            const double se = dt * std::sqrt((F0 * F0 + F * F) / N);
            const double dev = std::abs(cov[i * n + j] - F * dt);
            max_z = std::max(max_z, dev / se);
        }
    }
    NoiseTestReport rep;
    rep.lines.push_back(check("qw_cov_max_z", max_z, 0.0, 4.0));
    return rep;
}

NoiseTestReport test_white(const ModelConfig& cfg, std::size_t samples, std::ostream* dump) {
    const double dt = cfg.disc.dt;
    const double scale = 1.0 / std::sqrt(cfg.disc.dx);
    const std::size_t n = 4;
    Rng rng = make_stream(cfg.noise.seed, 0, kNoiseTestStream);
    std::vector<double> sum(n, 0.0), sum2(n, 0.0);
    for (std::size_t k = 0; k < samples; ++k) {
        const auto w = white_increment(n, dt, rng, false, scale);
        for (std::size_t i = 0; i < n; ++i) {
            sum[i] += w[i];
            sum2[i] += w[i] * w[i];
            if (dump) put_f64(*dump, w[i]);
        }
    }
    const double N = static_cast<double>(samples);
    const double var = dt * scale * scale;
    double worst_mean = 0.0, worst_var = var;
    for (std::size_t i = 0; i < n; ++i) {
        const double m = sum[i] / N;
        const double v = (sum2[i] - N * m * m) / (N - 1.0);
        if (std::abs(m) > std::abs(worst_mean)) worst_mean = m;
        if (std::abs(v - var) > std::abs(worst_var - var)) worst_var = v;
    }
    NoiseTestReport rep;
    rep.lines.push_back(check("white_mean", worst_mean, 0.0, 4.0 * std::sqrt(var / N)));
    rep.lines.push_back(check("white_variance", worst_var, var, 4.0 * var * std::sqrt(2.0 / N)));
    return rep;
}

void write_field_csv(std::ostream& os, const RunResult& run) {
    os << "t,x,V\n";
    for (const auto& snap : run.field) {
        for (std::size_t i = 0; i < snap.V.size(); ++i) os << snap.t << ',' << run.grid_x[i] << ',' << snap.V[i] << '\n';
    }
}

void write_fires_csv(std::ostream& os, const RunResult& run) {
    os << "spine_index,t\n";
    for (const auto& e : run.fire_log) os << e.spine << ',' << e.t << '\n';
}

}  // namespace

std::string sibling_path(const std::string& out, const std::string& suffix) {
    const auto slash = out.find_last_of('/');
    const auto dot = out.find_last_of('.');
    const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
    return (has_ext ? out.substr(0, dot) : out) + suffix;
}

ModelConfig resolve_spec(const ExperimentSpec& spec) {
    ModelConfig cfg = spec.config_path.empty() ? ModelConfig{} : parse_config(read_file(spec.config_path));
    for (const auto& kv : spec.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError(kv, "override must be key=value");
        apply_setting(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (spec.seed) cfg.noise.seed = *spec.seed;
    if (spec.realizations) cfg.realizations = *spec.realizations;
    if (spec.workers) cfg.workers = *spec.workers;
    finalize(cfg);
    return cfg;
}

std::string config_json(const ModelConfig& cfg) {
    nlohmann::ordered_json j;
    std::istringstream in(serialize_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "nu_values" || key == "mu_values" || key == "kappa_values") {
            auto arr = nlohmann::json::array();
            std::istringstream items(value);
            std::string item;
            while (std::getline(items, item, ',')) {
                double d;
                if (parse_number(trim(item), d)) arr.push_back(d);
            }
            j[key] = arr;
            continue;
        }
        double d;
        if (value == "true" || value == "false") {
            j[key] = value == "true";
        } else if (parse_number(value, d)) {
            if (value.find_first_of(".eEn") == std::string::npos) {
                j[key] = static_cast<long long>(d);
            } else {
                j[key] = d;
            }
        } else {
            j[key] = value;
        }
    }
    return j.dump(2);
}

std::vector<SweepRow> sweep_noise(const ModelConfig& cfg) {
    const bool multiplicative = !cfg.nu_values.empty();
    const auto& values = multiplicative ? cfg.nu_values : cfg.mu_values;
    if (values.empty()) throw ValidationError("nu_values", "sweep needs nu_values or mu_values");

    const Reference ref = deterministic_reference(cfg);
    std::vector<SweepRow> rows;
    for (double v : values) {
        ModelConfig c = cfg;
        (multiplicative ? c.noise.nu : c.noise.mu) = v;
        rows.push_back({v, ensemble_speed(c, cfg.realizations, ref, cfg.workers)});
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const ModelConfig& cfg, const std::vector<SweepRow>& rows) {
    const char* intensity = cfg.nu_values.empty() ? "mu" : "nu";
    os << intensity << ",mean_c,sd_c,n_failed,n_nonsequential,M,model,target,noise_kind,interpretation\n";
    for (const auto& r : rows) {
        os << r.intensity << ',' << Cell{r.stats.mean_c} << ',' << Cell{r.stats.sd_c} << ',' << r.stats.n_failed
           << ',' << r.stats.n_nonsequential << ',' << r.stats.M << ',' << to_string(cfg.model) << ','
           << to_string(cfg.noise.target) << ',' << to_string(cfg.noise.kind) << ','
           << to_string(cfg.noise.interpretation) << '\n';
    }
}

std::vector<KappaRow> sweep_kappa(const ModelConfig& cfg) {
    if (cfg.model != ModelKind::br) throw ValidationError("model", "kappa sweep needs model = br");
    if (cfg.kappa_values.empty()) throw ValidationError("kappa_values", "must not be empty");
    std::vector<KappaRow> rows;
    for (double k : cfg.kappa_values) {
        ModelConfig c = cfg;
        c.br.kappa = k;
        const Reference ref = deterministic_reference(c);
        KappaRow row;
        row.kappa = k;
        row.c_det = ref.propagated ? ref.c_det : kNever;
        if (c.noise.active() && ref.propagated) {
            const auto st = ensemble_speed(c, c.realizations, ref, c.workers);
            row.c_noisy = st.mean_c_noisy;
            row.diff = ref.c_det - st.mean_c_noisy;
            row.sd_c = st.sd_c;
            row.n_valid = st.n_valid;
            row.n_failed = st.n_failed;
            row.n_nonsequential = st.n_nonsequential;
            row.M = st.M;
        }
        rows.push_back(row);
    }
    return rows;
}

void write_kappa_csv(std::ostream& os, const std::vector<KappaRow>& rows) {
    os << "kappa,c_det,c_noisy,c_det_minus_c_noisy,sd_c,n_valid,n_failed,n_nonsequential,M\n";
    for (const auto& r : rows) {
        os << r.kappa << ',' << Cell{r.c_det} << ',' << Cell{r.c_noisy} << ',' << Cell{r.diff} << ','
           << Cell{r.sd_c} << ',' << r.n_valid << ',' << r.n_failed << ',' << r.n_nonsequential << ',' << r.M
           << '\n';
    }
}

bool NoiseTestReport::pass() const {
    return !lines.empty() && std::all_of(lines.begin(), lines.end(), [](const auto& l) { return l.pass; });
}

NoiseTestReport noise_test(const ModelConfig& cfg, std::size_t samples, const std::string& dump_path) {
    if (samples < 2) throw ValidationError("samples", "need at least 2");
    std::ofstream dump;
    if (!dump_path.empty()) {
        dump.open(dump_path, std::ios::binary);
        if (!dump) throw ValidationError("dump", "cannot write " + dump_path);
    }
    std::ostream* d = dump_path.empty() ? nullptr : &dump;
    switch (cfg.noise.kind) {
        case NoiseKind::ou_temporal: return test_ou(cfg, samples, d);
        case NoiseKind::q_wiener_spatial: return test_qwiener(cfg, samples, d);
        case NoiseKind::white: break;
    }
    return test_white(cfg, samples, d);
}

int run_simulate(const ExperimentSpec& spec, std::ostream& log) {
    const ModelConfig cfg = resolve_spec(spec);
    const Reference ref = deterministic_reference(cfg);

    RunOptions opts;
    opts.record_field = true;
    const RunResult run = simulate(cfg, 0, opts);
    const SpeedResult sr = measure_realization(run, ref);

    auto field = open_out(spec.output_path);
    write_field_csv(field, run);
    auto fires = open_out(sibling_path(spec.output_path, "_fires.csv"));
    write_fires_csv(fires, run);

    const double spread =
        first_fire_spread(run.first_fire, run.spine_x, run.x1, run.x2);
    auto summary = open_out(sibling_path(spec.output_path, "_summary.csv"));
    summary << "propagated,sequential,diverged,c_noisy,c_rescaled,c_det,t1,t2,first_fire_spread\n"
            << sr.propagated << ',' << sr.sequential << ',' << run.diverged << ',' << Cell{sr.c_noisy} << ','
            << Cell{sr.c_rescaled} << ',' << Cell{ref.c_det} << ',' << Cell{sr.t1} << ',' << Cell{sr.t2} << ','
            << Cell{spread} << '\n';
    write_json_sidecar(spec.output_path, cfg);

    if (run.diverged) {
        log << "diverged at t=" << run.diverged_at << '\n';
        return kExitDivergence;
    }
    log << "propagated=" << sr.propagated << " sequential=" << sr.sequential << " c=" << sr.c_noisy
        << " c_rescaled=" << sr.c_rescaled << '\n';
    return kExitOk;
}

int run_sweep_noise(const ExperimentSpec& spec, std::ostream& log) {
    const ModelConfig cfg = resolve_spec(spec);
    const auto rows = sweep_noise(cfg);
    auto os = open_out(spec.output_path);
    write_sweep_csv(os, cfg, rows);
    write_json_sidecar(spec.output_path, cfg);
    for (const auto& r : rows) {
        log << "intensity=" << r.intensity << " mean_c=" << r.stats.mean_c << " valid=" << r.stats.n_valid << '/'
            << r.stats.M << '\n';
    }
    return kExitOk;
}

int run_sweep_kappa(const ExperimentSpec& spec, std::ostream& log) {
    const ModelConfig cfg = resolve_spec(spec);
    const auto rows = sweep_kappa(cfg);
    auto os = open_out(spec.output_path);
    write_kappa_csv(os, rows);
    write_json_sidecar(spec.output_path, cfg);
    for (const auto& r : rows) log << "kappa=" << r.kappa << " c_det=" << r.c_det << " diff=" << r.diff << '\n';
    return kExitOk;
}

int run_smallnoise(const ExperimentSpec& spec, std::ostream& log) {
    const ModelConfig cfg = resolve_spec(spec);
    if (cfg.model != ModelKind::br) throw ValidationError("model", "smallnoise needs model = br");
    if (!(cfg.noise.zeta > 0.0)) throw ValidationError("zeta", "must be positive");
    std::vector<double> nu = cfg.nu_values;
    if (nu.empty()) nu = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    const auto curve = tw::speed_curve(tw::TWParams::from(cfg), nu);
    auto os = open_out(spec.output_path);
    os << "nu_m,c,converged\n";
    for (const auto& p : curve) os << p.nu_m << ',' << Cell{p.c} << ',' << (p.converged ? 1 : 0) << '\n';
    write_json_sidecar(spec.output_path, cfg);
    for (const auto& p : curve) log << "nu_m=" << p.nu_m << " c=" << p.c << " converged=" << p.converged << '\n';
    return kExitOk;
}

int run_noise_test(const ExperimentSpec& spec, std::ostream& log) {
    const ModelConfig cfg = resolve_spec(spec);
    const auto rep = noise_test(cfg, spec.samples, spec.dump_path);
    auto os = open_out(spec.output_path);
    os << "name,value,target,tolerance,pass\n";
    for (const auto& l : rep.lines) {
        os << l.name << ',' << l.value << ',' << l.target << ',' << l.tolerance << ',' << (l.pass ? 1 : 0) << '\n';
        log << (l.pass ? "PASS " : "FAIL ") << l.name << " value=" << l.value << " target=" << l.target
            << " tol=" << l.tolerance << '\n';
    }
    write_json_sidecar(spec.output_path, cfg);
    return rep.pass() ? kExitOk : kExitStatistical;
}

int run_command(const ExperimentSpec& spec, std::ostream& log) {
    try {
        switch (spec.command) {
            case Command::simulate: return run_simulate(spec, log);
            case Command::sweep_noise: return run_sweep_noise(spec, log);
            case Command::sweep_kappa: return run_sweep_kappa(spec, log);
            case Command::smallnoise: return run_smallnoise(spec, log);
            case Command::noise_test: return run_noise_test(spec, log);
        }
    } catch (const ValidationError& e) {
        log << "validation error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const MalformedFileError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const DivergenceError& e) {
        log << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const tw::NoWaveError& e) {
        log << "no wave: " << e.what() << '\n';
        return kExitDivergence;
    }
    return kExitValidation;
}

}  // namespace spiny
