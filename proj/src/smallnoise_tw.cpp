#include "spiny/smallnoise_tw.hpp"

#include <algorithm>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <Eigen/Dense>
#include <limits>

namespace spiny::tw {

namespace {

namespace odeint = boost::numeric::odeint;

struct Stop {};

double distance(const TWState& a, const TWState& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

}  // namespace

TWParams TWParams::from(const ModelConfig& cfg) {
    TWParams p;
    p.F_c0 = 1.0 / (2.0 * cfg.noise.zeta);
    p.rho = cfg.br.rho_max;
    p.r = cfg.br.r;
    p.C = cfg.phys.c_m;
    p.c_hat = cfg.phys.c_hat;
    p.D = cfg.br.diffusion;
    p.hh = br::HHParams::from(cfg.phys);
    return p;
}

double gate_correction(double X) { return X * (1.0 - 3.0 * X + 2.0 * X * X); }

TWState tw_rhs(const TWState& s, const TWParams& p) {
    const double V = s[kV], W = s[kW], U = s[kU];
    const double m = s[kM], n = s[kN], h = s[kH];
    const double stem = (U - V) / p.r;
    TWState d{};
    d[kV] = W;
    d[kW] = (p.C * p.c * W + p.hh.g_l * (V - p.hh.v_l) - p.rho * stem + p.nu_c * p.nu_c * p.F_c0 * (65.0 + V)) / p.D;
    d[kU] = (br::hh_current(p.hh, U, m, n, h) - stem) / (p.c * p.c_hat);
    const double nus[3] = {p.nu_m, p.nu_n, p.nu_h};
    const br::Gate gates[3] = {br::Gate::m, br::Gate::n, br::Gate::h};
    for (int g = 0; g < 3; ++g) {
        const double X = s[kM + g];
        d[kM + g] = (br::gate_drift(gates[g], X, U) + nus[g] * nus[g] * p.F_c0 * gate_correction(X)) / p.c;
    }
    return d;
}

TWState rest_state(const TWParams& p) {
    // Unknowns (V, U, m, n, h); W = 0 at rest.
    using Vec = Eigen::Matrix<double, 5, 1>;
    const auto residual = [&](const Vec& y) {
        TWState s{y[0], 0.0, y[1], y[2], y[3], y[4]};
        auto q = p;
        q.c = 1.0;
        const auto d = tw_rhs(s, q);
        Vec out;
        out << d[kW] * p.D, d[kU], d[kM], d[kN], d[kH];
        return out;
    };
    Vec y;
    y << -65.0, -65.0, br::steady_gate(br::Gate::m, -65.0), br::steady_gate(br::Gate::n, -65.0),
        br::steady_gate(br::Gate::h, -65.0);
    for (int it = 0; it < 100; ++it) {
        const Vec f = residual(y);
        if (f.norm() < 1e-12) return {y[0], 0.0, y[1], y[2], y[3], y[4]};
        Eigen::Matrix<double, 5, 5> J;
        for (int j = 0; j < 5; ++j) {
            const double h = 1e-7 * std::max(1.0, std::abs(y[j]));
            Vec a = y, b = y;
            a[j] += h;
            b[j] -= h;
            J.col(j) = (residual(a) - residual(b)) / (2.0 * h);
        }
        y -= J.fullPivLu().solve(f);
    }
    throw RootFindError("travelling-wave rest state did not converge");
}

std::array<std::array<double, 6>, 6> jacobian(const TWState& s, const TWParams& p) {
    std::array<std::array<double, 6>, 6> J{};
    for (int j = 0; j < 6; ++j) {
        const double h = 1e-7 * std::max(1.0, std::abs(s[j]));
        auto a = s, b = s;
        a[j] += h;
        b[j] -= h;
        const auto fa = tw_rhs(a, p);
        const auto fb = tw_rhs(b, p);
        for (int i = 0; i < 6; ++i) J[i][j] = (fa[i] - fb[i]) / (2.0 * h);
    }
    return J;
}

TWState unstable_direction(const TWParams& p, const TWState& rest) {
    const auto J = jacobian(rest, p);
    Eigen::Matrix<double, 6, 6> A;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) A(i, j) = J[i][j];
    Eigen::EigenSolver<Eigen::Matrix<double, 6, 6>> es(A);
    int found = -1, count = 0;
    for (int k = 0; k < 6; ++k) {
        const auto lam = es.eigenvalues()[k];
        if (lam.real() > 0.0 && std::abs(lam.imag()) < 1e-12 * std::max(1.0, std::abs(lam.real()))) {
            found = k;
            ++count;
        }
    }
    if (count != 1) throw RootFindError("rest state does not have exactly one unstable direction");
    TWState v{};
    for (int i = 0; i < 6; ++i) v[i] = es.eigenvectors()(i, found).real();
    const double norm = distance(v, TWState{});
    const double sign = v[kV] >= 0.0 ? 1.0 : -1.0;
    for (auto& x : v) x *= sign / norm;
    return v;
}

namespace {

// Integrates from (y, xi0) until blow-up or xi_end; sign of the escape and,
// when requested, the states on a uniform xi grid.
struct Path {
    int sign = 0;
    double xi_end = 0.0;
    std::vector<TWState> samples;
};

constexpr double kSampleStep = 0.01;

Path integrate(const TWParams& p, const TWState& rest, TWState y, double xi0, const ShootOptions& opt,
               bool keep_samples, double escape) {
    Path out;
    out.xi_end = xi0;
    const auto system = [&](const TWState& s, TWState& d, double) { d = tw_rhs(s, p); };
    const auto observer = [&](const TWState& s, double xi) {
        out.xi_end = xi;
        const double dv = s[kV] - rest[kV];
        if (!std::isfinite(dv) || std::abs(dv) > escape) {
            out.sign = (std::isfinite(dv) && dv < 0.0) ? -1 : 1;
            throw Stop{};
        }
        if (keep_samples) out.samples.push_back(s);
    };
    auto stepper = odeint::make_dense_output(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<TWState>());
    try {
        odeint::integrate_const(stepper, system, y, xi0, opt.xi_length, kSampleStep, observer);
    } catch (const Stop&) {
    } catch (const odeint::step_adjustment_error&) {
        out.sign = y[kV] >= rest[kV] ? 1 : -1;
    }
    return out;
}

TWState start_point(const TWState& rest, const TWState& dir, double offset) {
    TWState y;
    for (int i = 0; i < 6; ++i) y[i] = rest[i] + offset * dir[i];
    return y;
}

}  // namespace

Trial shoot_trial(const TWParams& p, const TWState& rest, const TWState& dir, const ShootOptions& opt) {
    const auto path = integrate(p, rest, start_point(rest, dir, opt.offset), 0.0, opt, true, opt.escape);
    Trial out;
    out.sign = path.sign;
    out.xi_end = path.xi_end;
    out.min_return = std::numeric_limits<double>::infinity();
    double peak = rest[kV];
    bool falling = false;
    for (const auto& s : path.samples) {
        peak = std::max(peak, s[kV]);
        if (s[kV] - rest[kV] > 20.0) out.excited = true;
        if (out.excited && s[kV] < peak - 20.0) falling = true;
        if (falling) out.min_return = std::min(out.min_return, distance(s, rest));
    }
    return out;
}

ShootResult shoot_speed(const TWParams& base, double nu_m, const ShootOptions& opt) {
    auto p = base;
    p.nu_m = nu_m;
    p.c = opt.c_guess;
    const TWState rest = rest_state(p);
    const auto launch = [&](double c) {
        p.c = c;
        return start_point(rest, unstable_direction(p, rest), opt.offset);
    };
    const auto sign_at = [&](double c) { return integrate(p, rest, launch(c), 0.0, opt, false, opt.escape).sign; };

    // Scan downward from the top so the fastest bracket (the fast branch) is found first.
    double lo = 0.0, hi = 0.0;
    int s_hi = 0;
    bool bracketed = false;
    const int n = std::max(2, opt.scan_points);
    double prev_c = opt.c_guess * opt.scan_hi;
    int prev_s = sign_at(prev_c);
    for (int k = 1; k < n && !bracketed; ++k) {
        const double c = opt.c_guess * (opt.scan_hi - (opt.scan_hi - opt.scan_lo) * k / (n - 1));
        const int s = sign_at(c);
        if (s != 0 && prev_s != 0 && s != prev_s) {
            lo = c;
            hi = prev_c;
            s_hi = prev_s;
            bracketed = true;
        }
        prev_c = c;
        prev_s = s;
    }
    if (!bracketed) throw NoWaveError("no sign change in the speed scan");

    ShootResult res;
    for (; res.bisections < opt.max_bisections && hi - lo > 1e-13 * hi; ++res.bisections) {
        const double mid = 0.5 * (lo + hi);
        const int s = sign_at(mid);
        if (s == s_hi || s == 0) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    res.c = 0.5 * (lo + hi);

    // Extend the orbit past the point where round-off lets it escape: keep two
    // states that escape on opposite sides and bisect between them just before
    // they separate. The homoclinic orbit stays between the pair.
    auto path_a = integrate(p, rest, launch(lo), 0.0, opt, true, opt.escape);
    auto path_b = integrate(p, rest, launch(hi), 0.0, opt, true, opt.escape);
    p.c = res.c;
    double xi0 = 0.0;
    double peak = rest[kV];
    bool excited = false, falling = false;
    res.min_return = std::numeric_limits<double>::infinity();
    while (true) {
        const std::size_t common = std::min(path_a.samples.size(), path_b.samples.size());
        std::size_t split = 0;
        while (split < common && distance(path_a.samples[split], path_b.samples[split]) < 1e-6) ++split;
        for (std::size_t k = 0; k < split; ++k) {
            const auto& s = path_a.samples[k];
            peak = std::max(peak, s[kV]);
            if (s[kV] - rest[kV] > 20.0) excited = true;
            if (excited && s[kV] < peak - 20.0) falling = true;
            if (falling) res.min_return = std::min(res.min_return, distance(s, rest));
        }
        if (falling && res.min_return < opt.return_tol) break;
        if (split < 2) break;
        const std::size_t k = split - 1;
        const double xi_k = xi0 + kSampleStep * static_cast<double>(k);
        if (xi_k >= opt.xi_length - kSampleStep) break;
        // After the spike, a second firing or a fall well below rest both mark
        // departure from the orbit.
        // If the tight threshold cannot tell the pair apart (both refire),
        // fall back to the wide one.
        double escape = falling ? opt.tail_escape : opt.escape;
        TWState a = path_a.samples[k], b = path_b.samples[k];
        path_a = integrate(p, rest, a, xi_k, opt, false, escape);
        path_b = integrate(p, rest, b, xi_k, opt, false, escape);
        if (path_a.sign == path_b.sign && escape != opt.escape) {
            escape = opt.escape;
            path_a = integrate(p, rest, a, xi_k, opt, false, escape);
            path_b = integrate(p, rest, b, xi_k, opt, false, escape);
        }
        const int sa = path_a.sign;
        if (sa == 0 || path_b.sign == 0 || sa == path_b.sign) break;
        for (int it = 0; it < 60 && distance(a, b) > 0.0; ++it) {
            TWState mid;
            for (int i = 0; i < 6; ++i) mid[i] = 0.5 * (a[i] + b[i]);
            if (mid == a || mid == b) break;
            const int s = integrate(p, rest, mid, xi_k, opt, false, escape).sign;
            if (s == sa) {
                a = mid;
            } else if (s != 0) {
                b = mid;
            } else {
                a = b = mid;
            }
        }
        path_a = integrate(p, rest, a, xi_k, opt, true, escape);
        path_b = integrate(p, rest, b, xi_k, opt, true, escape);
        xi0 = xi_k;
        if (path_a.sign == 0 && path_b.sign == 0) {
            // Neither escapes before xi_length: both sample sets cover the tail.
            for (const auto& s : path_a.samples) res.min_return = std::min(res.min_return, distance(s, rest));
            break;
        }
    }
    res.converged = excited && res.min_return < opt.return_tol;
    return res;
}

std::vector<SweepPoint> speed_curve(const TWParams& base, const std::vector<double>& nu, ShootOptions opt) {
    std::vector<SweepPoint> out;
    for (double v : nu) {
        SweepPoint pt{v, 0.0, false};
        try {
            const auto r = shoot_speed(base, v, opt);
            pt.c = r.c;
            pt.converged = r.converged;
            opt.c_guess = r.c;
            opt.scan_lo = 0.9;
            opt.scan_hi = 1.1;
            opt.scan_points = 9;
        } catch (const NoWaveError&) {
            pt.c = std::numeric_limits<double>::quiet_NaN();
        } catch (const RootFindError&) {
            pt.c = std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(pt);
    }
    return out;
}

}  // namespace spiny::tw
