#include "spiny/sds_model.hpp"

#include <algorithm>
#include <cmath>

namespace spiny::sds {

namespace {

// Cable constants in electrotonic units.
constexpr double kScaledRa = 1.0;
constexpr double kScaledTau = 1.0;

}  // namespace

double g_if(double U) { return (U >= 0.0 && U <= 1.0) ? U * (1.0 - U) : 0.0; }

double if_drift(double U, double V_at_spine, double c_hat, double r, double epsilon) {
    return V_at_spine / (c_hat * r) - epsilon * U;
}

std::vector<int> fire_check(IFSpines& spines, double t, const FireRule& rule) {
    std::vector<int> fired;
    for (std::size_t n = 0; n < spines.U.size(); ++n) {
        if (spines.U[n] < rule.h_thresh) continue;
        const double last = spines.last_fire[n];
        if (!std::isnan(last) && t - last < rule.tau_r) continue;
        spines.U[n] = rule.reset == ResetMode::subtract ? spines.U[n] - rule.h_thresh : 0.0;
        spines.last_fire[n] = t;
        spines.fire_log.push_back({static_cast<int>(n), t});
        fired.push_back(static_cast<int>(n));
    }
    return fired;
}

double pulse_value(double t, std::span<const double> fire_times, double eta_0, double tau_s) {
    for (double T : fire_times) {
        const double s = t - T;
        if (s >= 0.0 && s <= tau_s) return eta_0;
    }
    return 0.0;
}

void PulseTrain::prune(double t, double tau_s) {
    for (auto& times : active) {
        std::erase_if(times, [&](double T) { return t - T > tau_s; });
    }
}

SdsModel::SdsModel(const ModelConfig& cfg, std::uint64_t realization)
    : cfg_(cfg),
      grid_(Grid::uniform(cfg.phys.length, cfg.disc.grid_n)),
      dt_(cfg.disc.dt),
      epsilon_(nondimensionalize(cfg.phys).epsilon),
      D_(cfg.cable_diffusion()) {
    const auto positions = cfg.spine_positions();
    coupling_ = CouplingMap::point_attachments(grid_, positions);
    const std::size_t n_spines = positions.size();
    x_.assign(grid_.size() + n_spines, 0.0);
    spines_ = IFSpines(n_spines);
    pulses_ = PulseTrain(n_spines);
    u_hat_.assign(n_spines, 0.0);
    dW_.assign(x_.size(), 0.0);
    if (cfg.noise.active()) {
        const bool cable = cfg.noise.target == NoiseTarget::cable;
        auto pts = cable ? grid_.x : positions;
        noise_buf_.assign(pts.size(), 0.0);
        noise_.emplace(cfg.noise, std::move(pts), cfg.phys.length, cable ? grid_.dx : 0.0,
                       make_stream(cfg.noise.seed, realization, 0));
    }
    ws_.resize(x_.size());
}

void SdsModel::System::drift(std::span<const double> x, std::span<double> out) const {
    const auto& m = *model;
    const std::size_t nv = m.grid_.size();
    const auto V = x.first(nv);
    const auto U = x.subspan(nv);
    auto outV = out.first(nv);
    laplacian_apply(V, m.D_, m.grid_.dx, outV);
    add_affine_leak(V, 1.0 / kScaledTau, 0.0, outV);
    inject_spine_current(V, m.u_hat_, m.coupling_, m.D_, kScaledRa, m.cfg_.phys.r, outV);
    const double c_hat = m.cfg_.phys.c_hat / m.cfg_.phys.c_m;
    for (std::size_t s = 0; s < U.size(); ++s) {
        out[nv + s] = if_drift(U[s], V[m.coupling_.spine_nodes[s]], c_hat, m.cfg_.phys.r, m.epsilon_);
    }
}

void SdsModel::System::diffusion(std::span<const double> x, std::span<double> out) const {
    const auto& m = *model;
    const auto& nz = m.cfg_.noise;
    const std::size_t nv = m.grid_.size();
    std::fill(out.begin(), out.end(), 0.0);
    if (nz.target == NoiseTarget::cable) {
        for (std::size_t i = 0; i < nv; ++i) out[i] = nz.mu + nz.nu * g_if(x[i]);
    } else {
        for (std::size_t i = nv; i < x.size(); ++i) out[i] = nz.mu + nz.nu * g_if(x[i]);
    }
}

void SdsModel::force_fire(int spine) {
    const auto s = static_cast<std::size_t>(spine);
    spines_.last_fire[s] = t_;
    spines_.fire_log.push_back({spine, t_});
    pulses_.add(spine, t_);
}

void SdsModel::step() {
    const auto& p = cfg_.phys;
    pulses_.prune(t_, p.tau_s);
    for (std::size_t s = 0; s < u_hat_.size(); ++s) {
        u_hat_[s] = pulse_value(t_, pulses_.active[s], p.eta_0, p.tau_s);
    }
    const System sys{this};
    if (noise_) {
        noise_->next(dt_, noise_buf_);
        const std::size_t offset = cfg_.noise.target == NoiseTarget::cable ? 0 : grid_.size();
        std::copy(noise_buf_.begin(), noise_buf_.end(), dW_.begin() + static_cast<std::ptrdiff_t>(offset));
        scheme_step(cfg_.noise.interpretation, sys, x_, dW_, dt_, ws_);
    } else if (noiseless_scheme_) {
        scheme_step(cfg_.noise.interpretation, sys, x_, dW_, dt_, ws_);
    } else {
        deterministic_step(sys, x_, dt_, ws_);
    }
    t_ += dt_;

    const std::size_t nv = grid_.size();
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!std::isfinite(x_[i])) throw DivergenceError(t_, "non-finite SDS state");
    }
    for (std::size_t s = 0; s < spines_.U.size(); ++s) spines_.U[s] = std::clamp(x_[nv + s], 0.0, 1.0);
    const auto fired = fire_check(spines_, t_, FireRule{p.h_thresh, p.tau_r, cfg_.reset});
    for (int s : fired) pulses_.add(s, t_);
    for (std::size_t s = 0; s < spines_.U.size(); ++s) x_[nv + s] = spines_.U[s];
}

RunResult run(const ModelConfig& cfg, std::uint64_t realization, const RunOptions& opts) {
    SdsModel model(cfg, realization);
    model.set_noiseless_scheme(opts.noiseless_scheme);
    RunResult out;
    out.dt = model.dt();
    const auto& grid = model.grid();
    const std::size_t i1 = grid.nearest(cfg.measure.x1_frac * cfg.phys.length);
    const std::size_t i2 = grid.nearest(cfg.measure.x2_frac * cfg.phys.length);
    out.x1 = grid.x[i1];
    out.x2 = grid.x[i2];
    out.v_rest = 0.0;
    out.spine_x = cfg.spine_positions();
    out.grid_x = grid.x;
    const auto steps = static_cast<std::uint64_t>(std::llround(cfg.disc.t_final / model.dt()));
    out.trace_x1.reserve(steps + 1);
    out.trace_x2.reserve(steps + 1);

    const auto record = [&](std::uint64_t k) {
        out.trace_x1.push_back(model.V()[i1]);
        out.trace_x2.push_back(model.V()[i2]);
        if (opts.record_field && k % static_cast<std::uint64_t>(std::max(1, opts.field_stride)) == 0) {
            FieldSnapshot snap;
            snap.t = model.t();
            snap.V.assign(model.V().begin(), model.V().end());
            if (opts.record_gates) snap.U.assign(model.U().begin(), model.U().end());
            out.field.push_back(std::move(snap));
        }
    };

    model.force_fire(0);
    record(0);
    try {
        for (std::uint64_t k = 1; k <= steps; ++k) {
            model.step();
            record(k);
            if (measurement_complete(opts, out.trace_x2.back(), model.spines().last_fire, out.spine_x, out.x1,
                                     out.x2))
                break;
        }
    } catch (const DivergenceError& e) {
        out.diverged = true;
        out.diverged_at = e.t();
    }
    out.steps = out.trace_x1.size() - 1;
    out.fire_log = model.spines().fire_log;
    out.first_fire.assign(out.spine_x.size(), kNever);
    for (const auto& ev : out.fire_log) {
        auto& ff = out.first_fire[static_cast<std::size_t>(ev.spine)];
        if (std::isnan(ff)) ff = ev.t;
    }
    out.noise_draws = model.noise_draws();
    out.final_state = model.state();
    return out;
}

}  // namespace spiny::sds
