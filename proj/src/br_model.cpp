#include "spiny/br_model.hpp"

#include <algorithm>
#include <cmath>

namespace spiny::br {

namespace {

// x / (1 - exp(-x)), continuous through x = 0.
double vtrap(double x) {
    if (std::abs(x) < 1e-8) return 1.0 + 0.5 * x;
    return x / -std::expm1(-x);
}

// Sites carry spine heads where the density exceeds this.
constexpr double kSiteThreshold = 1e-12;

// Solves tridiagonal a_i y_{i-1} + b_i y_i + c_i y_{i+1} = d_i in place.
void thomas(std::vector<double>& a, std::vector<double>& b, std::vector<double>& c, std::vector<double>& d) {
    const std::size_t n = d.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
    }
    d[n - 1] /= b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) d[i] = (d[i] - c[i] * d[i + 1]) / b[i];
}

}  // namespace

HHRates hh_rates(Gate gate, double U) {
    switch (gate) {
        case Gate::m: return {vtrap((U + 40.0) / 10.0), 4.0 * std::exp(-(U + 65.0) / 18.0)};
        case Gate::h: return {0.07 * std::exp(-(U + 65.0) / 20.0), 1.0 / (1.0 + std::exp(-(U + 35.0) / 10.0))};
        case Gate::n: return {0.1 * vtrap((U + 55.0) / 10.0), 0.125 * std::exp(-(U + 65.0) / 80.0)};
    }
    return {};
}

double steady_gate(Gate gate, double U) {
    const auto r = hh_rates(gate, U);
    return r.alpha / (r.alpha + r.beta);
}

double gate_drift(Gate gate, double X, double U) {
    const auto r = hh_rates(gate, U);
    return r.alpha * (1.0 - X) - r.beta * X;
}

double g_c(double V) { return -(65.0 + V); }

double g_m(double m) { return (m >= 0.0 && m <= 1.0) ? m * (1.0 - m) : 0.0; }

double hh_current(const HHParams& p, double U, double m, double n, double h) {
    const double n2 = n * n;
    return p.g_k * n2 * n2 * (p.v_k - U) + p.g_na * h * m * m * m * (p.v_na - U) + p.g_l * (p.v_l - U);
}

SpineDensity spine_density(std::span<const double> x, std::span<const double> spine_x, double kappa,
                           double rho_max, double d_spacing) {
    SpineDensity d{kappa, rho_max, d_spacing, std::vector<double>(x.size(), 0.0)};
    if (spine_x.empty()) return d;
    // Window index from position, with a relative tolerance so nodes on a
    // shared edge land in exactly one window (the left one, right-closed).
    const double tol = 1e-9;
    const double lo0 = spine_x.front() - 0.5 * d_spacing;
    const auto last = static_cast<long>(spine_x.size()) - 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = (x[i] - lo0) / d_spacing;
        if (u < -tol || u > static_cast<double>(last + 1) + tol) continue;
        const long s = std::clamp(static_cast<long>(std::ceil(u - tol)) - 1, 0L, last);
        const double dx = x[i] - spine_x[static_cast<std::size_t>(s)];
        d.values[i] = rho_max * std::exp(-kappa * dx * dx);
    }
    return d;
}

void stimulate(std::span<double> V, std::span<const double> x, double amplitude, double center, double width) {
    for (std::size_t i = 0; i < V.size(); ++i) {
        if (std::abs(x[i] - center) <= width) V[i] += amplitude;
    }
}

BrModel::BrModel(const ModelConfig& cfg, std::uint64_t realization)
    : cfg_(cfg),
      hh_(HHParams::from(cfg.phys)),
      grid_(Grid::uniform(cfg.phys.length, cfg.disc.grid_n)),
      dt_(cfg.disc.dt) {
    const auto spines = cfg.spine_positions();
    density_ = spine_density(grid_.x, spines, cfg.br.kappa, cfg.br.rho_max, cfg.phys.d_spacing);
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (density_.values[i] > kSiteThreshold) {
            site_node_.push_back(i);
            site_rho_.push_back(density_.values[i]);
        }
    }
    x_.assign(grid_.size() + 4 * site_node_.size(), 0.0);
    compute_rest();
    x_ = rest_;
    dW_.assign(x_.size(), 0.0);
    if (cfg.noise.active()) {
        const bool cable = cfg.noise.target == NoiseTarget::cable;
        std::vector<double> pts;
        if (cable) {
            pts = grid_.x;
        } else {
            for (auto i : site_node_) pts.push_back(grid_.x[i]);
        }
        noise_buf_.assign(pts.size(), 0.0);
        noise_.emplace(cfg.noise, std::move(pts), cfg.phys.length, grid_.dx,
                       make_stream(cfg.noise.seed, realization, 1));
    }
    ws_.resize(x_.size());
}

void BrModel::compute_rest() {
    const std::size_t nv = grid_.size();
    const std::size_t ns = site_node_.size();
    const double r = cfg_.br.r;
    const double D = cfg_.br.diffusion;
    std::vector<double> V(nv, -65.0), U(ns, -65.0);

    // Spine-head balance with gates at their steady state.
    const auto site_residual = [&](double u, double v) {
        return hh_current(hh_, u, steady_gate(Gate::m, u), steady_gate(Gate::n, u), steady_gate(Gate::h, u)) -
               (u - v) / r;
    };
    const double k = D / (grid_.dx * grid_.dx);
    for (int sweep = 0; sweep < 500; ++sweep) {
        for (std::size_t s = 0; s < ns; ++s) {
            double u = U[s];
            const double v = V[site_node_[s]];
            for (int it = 0; it < 50; ++it) {
                const double f = site_residual(u, v);
                const double du = 1e-6;
                const double df = (site_residual(u + du, v) - site_residual(u - du, v)) / (2.0 * du);
                const double step = f / df;
                u -= step;
                if (std::abs(step) < 1e-13) break;
            }
            U[s] = u;
        }
        // Cable balance -g_L (V - V_L) + D V_xx + rho (U - V) / r = 0 for fixed U.
        std::vector<double> a(nv, 0.0), b(nv, 0.0), c(nv, 0.0), d(nv, 0.0);
        for (std::size_t i = 0; i < nv; ++i) {
            b[i] = -hh_.g_l - 2.0 * k;
            d[i] = -hh_.g_l * hh_.v_l;
            if (i > 0) a[i] = k;
            if (i + 1 < nv) c[i] = k;
        }
        c[0] = 2.0 * k;
        a[nv - 1] = 2.0 * k;
        for (std::size_t s = 0; s < ns; ++s) {
            const auto i = site_node_[s];
            b[i] -= site_rho_[s] / r;
            d[i] -= site_rho_[s] * U[s] / r;
        }
        thomas(a, b, c, d);
        double change = 0.0;
        for (std::size_t i = 0; i < nv; ++i) change = std::max(change, std::abs(d[i] - V[i]));
        V = d;
        if (change < 1e-13) break;
    }
    rest_.assign(x_.size(), 0.0);
    std::copy(V.begin(), V.end(), rest_.begin());
    for (std::size_t s = 0; s < ns; ++s) {
        // One more Newton polish so U matches the final V.
        double u = U[s];
        const double v = V[site_node_[s]];
        for (int it = 0; it < 50; ++it) {
            const double f = site_residual(u, v);
            const double du = 1e-6;
            const double df = (site_residual(u + du, v) - site_residual(u - du, v)) / (2.0 * du);
            const double step = f / df;
            u -= step;
            if (std::abs(step) < 1e-14) break;
        }
        rest_[nv + s] = u;
        rest_[nv + ns + s] = steady_gate(Gate::m, u);
        rest_[nv + 2 * ns + s] = steady_gate(Gate::n, u);
        rest_[nv + 3 * ns + s] = steady_gate(Gate::h, u);
    }
}

void BrModel::System::drift(std::span<const double> x, std::span<double> out) const {
    const auto& M = *model;
    const std::size_t nv = M.grid_.size();
    const std::size_t ns = M.site_node_.size();
    const auto& hh = M.hh_;
    const double r = M.cfg_.br.r;
    const double C = M.cfg_.phys.c_m;
    const double c_hat = M.cfg_.phys.c_hat;
    const auto V = x.first(nv);
    auto outV = out.first(nv);
    laplacian_apply(V, M.cfg_.br.diffusion, M.grid_.dx, outV);
    add_affine_leak(V, hh.g_l, hh.v_l, outV);
    for (std::size_t s = 0; s < ns; ++s) {
        const std::size_t node = M.site_node_[s];
        const double U = x[nv + s];
        const double m = x[nv + ns + s];
        const double n = x[nv + 2 * ns + s];
        const double h = x[nv + 3 * ns + s];
        const double stem = (U - V[node]) / r;
        outV[node] += M.site_rho_[s] * stem;
        out[nv + s] = (hh_current(hh, U, m, n, h) - stem) / c_hat;
        const auto rm = hh_rates(Gate::m, U);
        const auto rn = hh_rates(Gate::n, U);
        const auto rh = hh_rates(Gate::h, U);
        out[nv + ns + s] = rm.alpha * (1.0 - m) - rm.beta * m;
        out[nv + 2 * ns + s] = rn.alpha * (1.0 - n) - rn.beta * n;
        out[nv + 3 * ns + s] = rh.alpha * (1.0 - h) - rh.beta * h;
    }
    for (std::size_t i = 0; i < nv; ++i) outV[i] /= C;
}

void BrModel::System::diffusion(std::span<const double> x, std::span<double> out) const {
    const auto& M = *model;
    const auto& nz = M.cfg_.noise;
    const std::size_t nv = M.grid_.size();
    const std::size_t ns = M.site_node_.size();
    std::fill(out.begin(), out.end(), 0.0);
    if (nz.target == NoiseTarget::cable) {
        const double C = M.cfg_.phys.c_m;
        for (std::size_t i = 0; i < nv; ++i) out[i] = (nz.mu + nz.nu * g_c(x[i])) / C;
    } else {
        for (std::size_t s = 0; s < ns; ++s) out[nv + ns + s] = nz.mu + nz.nu * g_m(x[nv + ns + s]);
    }
}

void BrModel::step() {
    const System sys{this};
    const std::size_t nv = grid_.size();
    const std::size_t ns = site_node_.size();
    if (noise_) {
        noise_->next(dt_, noise_buf_);
        const std::size_t offset = cfg_.noise.target == NoiseTarget::cable ? 0 : nv + ns;
        std::copy(noise_buf_.begin(), noise_buf_.end(), dW_.begin() + static_cast<std::ptrdiff_t>(offset));
        scheme_step(cfg_.noise.interpretation, sys, x_, dW_, dt_, ws_);
    } else if (noiseless_scheme_) {
        scheme_step(cfg_.noise.interpretation, sys, x_, dW_, dt_, ws_);
    } else {
        deterministic_step(sys, x_, dt_, ws_);
    }
    t_ += dt_;
    for (double v : x_) {
        if (!std::isfinite(v)) throw DivergenceError(t_, "non-finite BR state");
    }
    for (std::size_t i = nv + ns; i < x_.size(); ++i) x_[i] = std::clamp(x_[i], 0.0, 1.0);
}

RunResult run(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts) {
    BrModel model(cfg, realization);
    model.set_noiseless_scheme(opts.noiseless_scheme);
    RunResult out;
    out.dt = model.dt();
    const auto& grid = model.grid();
    const std::size_t i1 = grid.nearest(cfg.measure.x1_frac * cfg.phys.length);
    const std::size_t i2 = grid.nearest(cfg.measure.x2_frac * cfg.phys.length);
    out.x1 = grid.x[i1];
    out.x2 = grid.x[i2];
    out.v_rest = model.rest()[i2];
    out.spine_x = cfg.spine_positions();
    out.grid_x = grid.x;
    for (auto i : model.site_nodes()) out.site_x.push_back(grid.x[i]);

    // Spine-head probe for each attachment point: the site at its node.
    const auto& sites = model.site_nodes();
    std::vector<std::ptrdiff_t> probe(out.spine_x.size(), -1);
    for (std::size_t s = 0; s < out.spine_x.size(); ++s) {
        const auto node = grid.nearest(out.spine_x[s]);
        const auto it = std::lower_bound(sites.begin(), sites.end(), node);
        if (it != sites.end() && *it == node) probe[s] = it - sites.begin();
    }
    out.first_fire.assign(out.spine_x.size(), kNever);
    std::vector<bool> above(out.spine_x.size(), false);
    const auto detect = [&]() {
        const auto U = model.U();
        for (std::size_t s = 0; s < probe.size(); ++s) {
            if (probe[s] < 0) continue;
            const bool up = U[static_cast<std::size_t>(probe[s])] >= cfg.br.spike_threshold;
            if (up && !above[s]) {
                out.fire_log.push_back({static_cast<int>(s), model.t()});
                if (std::isnan(out.first_fire[s])) out.first_fire[s] = model.t();
            }
            above[s] = up;
        }
    };

    {
        auto& x = model.mutable_state();
        stimulate(std::span(x).first(grid.size()), grid.x, cfg.br.stim_amplitude, cfg.br.stim_center,
                  cfg.br.stim_width);
    }

    const auto steps = static_cast<std::uint64_t>(std::llround(cfg.disc.t_final / model.dt()));
    out.trace_x1.reserve(steps + 1);
    out.trace_x2.reserve(steps + 1);
    const auto record = [&](std::uint64_t k) {
        out.trace_x1.push_back(model.V()[i1]);
        out.trace_x2.push_back(model.V()[i2]);
        detect();
        if (opts.record_field && k % static_cast<std::uint64_t>(std::max(1, opts.field_stride)) == 0) {
            FieldSnapshot snap;
            snap.t = model.t();
            snap.V.assign(model.V().begin(), model.V().end());
            if (opts.record_gates) {
                snap.U.assign(model.U().begin(), model.U().end());
                snap.m.assign(model.m().begin(), model.m().end());
                snap.n.assign(model.n().begin(), model.n().end());
                snap.h.assign(model.h().begin(), model.h().end());
            }
            out.field.push_back(std::move(snap));
        }
    };
    record(0);
    try {
        for (std::uint64_t k = 1; k <= steps; ++k) {
            model.step();
            record(k);
            if (measurement_complete(opts, out.trace_x2.back(), out.first_fire, out.spine_x, out.x1, out.x2)) break;
        }
    } catch (const DivergenceError& e) {
        out.diverged = true;
        out.diverged_at = e.t();
    }
    out.steps = out.trace_x1.size() - 1;
    out.noise_draws = model.noise_draws();
    out.final_state = model.state();
    return out;
}

}  // namespace spiny::br
