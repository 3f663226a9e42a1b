#include "spiny/wavespeed.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "spiny/noise.hpp"

namespace spiny {

std::optional<double> detect_crossing(std::span<const double> trace, double dt, double theta) {
    if (trace.empty()) throw std::invalid_argument("empty trace");
    if (trace[0] >= theta) return 0.0;
    for (std::size_t k = 1; k < trace.size(); ++k) {
        if (trace[k] >= theta) {
            const double a = trace[k - 1];
            const double b = trace[k];
            const double frac = (theta - a) / (b - a);
            return (static_cast<double>(k - 1) + frac) * dt;
        }
    }
    return std::nullopt;
}

double measure_speed(double x1, double x2, double t1, double t2) {
    if (!(t2 > t1)) throw InvalidCrossingError("t2 must exceed t1");
    return (x2 - x1) / (t2 - t1);
}

bool check_propagation(std::span<const double> trace_x2, double theta) {
    return std::any_of(trace_x2.begin(), trace_x2.end(), [&](double v) { return v >= theta; });
}

bool check_sequential(std::span<const double> first_fire, std::span<const double> spine_x, double x_lo,
                      double x_hi) {
    double prev = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t s = 0; s < spine_x.size(); ++s) {
        if (spine_x[s] < x_lo || spine_x[s] > x_hi) continue;
        const double t = first_fire[s];
        if (std::isnan(t) || !(t > prev)) return false;
        prev = t;
        any = true;
    }
    return any;
}

bool check_sequential(std::span<const FireEvent> fire_log, std::span<const double> spine_x, double x_lo,
                      double x_hi) {
    std::vector<double> first(spine_x.size(), kNever);
    for (const auto& ev : fire_log) {
        auto& t = first[static_cast<std::size_t>(ev.spine)];
        if (std::isnan(t)) t = ev.t;
    }
    return check_sequential(first, spine_x, x_lo, x_hi);
}

double first_fire_spread(std::span<const double> first_fire, std::span<const double> spine_x, double x_lo,
                         double x_hi) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t s = 0; s < spine_x.size(); ++s) {
        if (spine_x[s] < x_lo || spine_x[s] > x_hi) continue;
        if (std::isnan(first_fire[s])) return kNever;
        lo = std::min(lo, first_fire[s]);
        hi = std::max(hi, first_fire[s]);
    }
    return hi >= lo ? hi - lo : kNever;
}

Reference deterministic_reference(const ModelConfig& cfg) {
    auto det = cfg;
    det.noise.mu = 0.0;
    det.noise.nu = 0.0;
    RunOptions opts;
    opts.noiseless_scheme = true;
    const auto run = simulate(det, 0, opts);
    Reference ref;
    ref.x1 = run.x1;
    ref.x2 = run.x2;
    ref.v_rest = run.v_rest;
    if (run.diverged) return ref;
    ref.peak = *std::max_element(run.trace_x2.begin(), run.trace_x2.end());
    ref.theta = ref.v_rest + cfg.measure.theta_frac * (ref.peak - ref.v_rest);
    const auto t1 = detect_crossing(run.trace_x1, run.dt, ref.theta);
    const auto t2 = detect_crossing(run.trace_x2, run.dt, ref.theta);
    if (!t1 || !t2 || !(*t2 > *t1)) return ref;
    ref.t1 = *t1;
    ref.t2 = *t2;
    ref.c_det = measure_speed(run.x1, run.x2, *t1, *t2);
    ref.propagated = ref.peak > ref.v_rest && check_sequential(run.first_fire, run.spine_x, run.x1, run.x2);
    return ref;
}

SpeedResult measure_realization(const RunResult& run, const Reference& ref) {
    SpeedResult out;
    if (run.diverged) {
        out.diverged = true;
        return out;
    }
    out.sequential = check_sequential(run.first_fire, run.spine_x, run.x1, run.x2);
    if (!check_propagation(run.trace_x2, ref.theta)) return out;
    const auto t1 = detect_crossing(run.trace_x1, run.dt, ref.theta);
    const auto t2 = detect_crossing(run.trace_x2, run.dt, ref.theta);
    if (!t1 || !t2) return out;
    out.t1 = *t1;
    out.t2 = *t2;
    try {
        out.c_noisy = measure_speed(run.x1, run.x2, *t1, *t2);
    } catch (const InvalidCrossingError&) {
        return out;
    }
    out.propagated = true;
    if (ref.c_det > 0.0) out.c_rescaled = out.c_noisy / ref.c_det;
    return out;
}

double sd_moments(std::span<const double> c) {
    if (c.empty()) return kNever;
    double s = 0.0, s2 = 0.0;
    for (double v : c) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(c.size());
    const double var = s2 / n - (s / n) * (s / n);
    return std::sqrt(std::max(0.0, var));
}

double sd_two_pass(std::span<const double> c) {
    if (c.empty()) return kNever;
    double mean = 0.0;
    for (double v : c) mean += v;
    mean /= static_cast<double>(c.size());
    double ss = 0.0;
    for (double v : c) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(c.size()));
}

EnsembleStats aggregate(std::vector<SpeedResult> results, double c_det) {
    EnsembleStats st;
    st.M = static_cast<int>(results.size());
    st.c_det = c_det;
    std::vector<double> c, raw;
    for (const auto& r : results) {
        if (!r.propagated) {
            ++st.n_failed;
        } else if (!r.sequential) {
            ++st.n_nonsequential;
        } else {
            c.push_back(r.c_rescaled);
            raw.push_back(r.c_noisy);
        }
    }
    st.n_valid = static_cast<int>(c.size());
    if (!c.empty()) {
        double s = 0.0, sr = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) {
            s += c[i];
            sr += raw[i];
        }
        st.mean_c = s / static_cast<double>(c.size());
        st.mean_c_noisy = sr / static_cast<double>(c.size());
        st.sd_c = sd_two_pass(c);
    }
    st.results = std::move(results);
    return st;
}

EnsembleStats ensemble_speed(const ModelConfig& cfg, int M, int workers) {
    return ensemble_speed(cfg, M, deterministic_reference(cfg), workers);
}

EnsembleStats ensemble_speed(const ModelConfig& cfg, int M, const Reference& ref, int workers) {
    if (M < 1) throw std::invalid_argument("ensemble needs M >= 1");
    std::vector<SpeedResult> results(static_cast<std::size_t>(M));
    std::atomic<int> next{0};
    const auto work = [&]() {
        for (int k = next++; k < M; k = next++) {
            RunOptions opts;
            if (ref.propagated) opts.stop_theta = ref.theta;
            auto r = measure_realization(simulate(cfg, static_cast<std::uint64_t>(k), opts), ref);
            r.realization_seed = derive_seed(cfg.noise.seed, static_cast<std::uint64_t>(k), 0);
            results[static_cast<std::size_t>(k)] = r;
        }
    };
    const int n = std::clamp(workers, 1, M);
    if (n == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(work);
    }
    return aggregate(std::move(results), ref.c_det);
}

}  // namespace spiny
