#include "spiny/noise.hpp"

#include <cmath>
#include <numbers>

namespace spiny {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t realization, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(master) ^ realization) ^ (stream * 0xd1b54a32d192ed03ULL));
}

OUState ou_step(OUState s, double dt, Rng& rng) {
    const double xi = rng.normal();
    s.K = s.K + s.beta * (s.theta_ou - s.K) * dt + s.sigma * std::sqrt(dt) * xi;
    return s;
}

double lambda_j(int j, double zeta, double L) {
    const double jj = static_cast<double>(j);
    return std::exp(-std::numbers::pi * jj * jj * zeta * zeta / (2.0 * L * L));
}

double correlation_fn(double x, double zeta) {
    return std::exp(-std::numbers::pi * x * x / (4.0 * zeta * zeta)) / (2.0 * zeta);
}

int default_truncation(double zeta, double L) {
    // lambda_J < 1e-8  <=>  J^2 > 2 L^2 ln(1e8) / (pi zeta^2)
    const double j = std::sqrt(2.0 * L * L * std::log(1e8) / (std::numbers::pi * zeta * zeta));
    int J = std::max(1, static_cast<int>(std::floor(j)));
    while (lambda_j(J, zeta, L) >= 1e-8) ++J;
    while (J > 1 && lambda_j(J - 1, zeta, L) < 1e-8) --J;
    return J;
}

QWiener::QWiener(std::vector<double> positions, double zeta, double L, int J)
    : n_(positions.size()), J_(J > 0 ? J : default_truncation(zeta, L)) {
    const auto modes = static_cast<std::size_t>(J_) + 1;
    eigen_.resize(modes);
    sqrt_eigen_.resize(modes);
    modes_.resize(modes * n_);
    b_.assign(modes, 0.0);
    db_.assign(modes, 0.0);
    for (std::size_t j = 0; j < modes; ++j) {
        // lambda_j is the mode amplitude; its square is the covariance
        // eigenvalue, which makes sum_j eigen_j e_j(x) e_j(y) equal F_c(x - y).
        sqrt_eigen_[j] = lambda_j(static_cast<int>(j), zeta, L);
        eigen_[j] = sqrt_eigen_[j] * sqrt_eigen_[j];
        for (std::size_t i = 0; i < n_; ++i) {
            modes_[j * n_ + i] = j == 0 ? std::sqrt(1.0 / L)
                                        : std::sqrt(2.0 / L) * std::cos(std::numbers::pi * j * positions[i] / L);
        }
    }
}

void QWiener::increment(double dt, Rng& rng, std::span<double> out) {
    const double sdt = std::sqrt(dt);
    for (std::size_t j = 0; j < db_.size(); ++j) {
        db_[j] = sdt * rng.normal();
        b_[j] += db_[j];
    }
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t j = 0; j < db_.size(); ++j) {
        const double w = sqrt_eigen_[j] * db_[j];
        const double* e = &modes_[j * n_];
        for (std::size_t i = 0; i < n_; ++i) out[i] += w * e[i];
    }
}

double QWiener::pointwise_variance_rate(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < eigen_.size(); ++j) {
        const double e = modes_[j * n_ + i];
        s += eigen_[j] * e * e;
    }
    return s;
}

std::vector<double> white_increment(std::size_t n, double dt, Rng& rng, bool shared, double scale) {
    std::vector<double> out(n);
    if (n == 0) return out;
    if (shared) {
        const double v = std::sqrt(dt) * rng.normal();
        std::fill(out.begin(), out.end(), v);
        return out;
    }
    const double s = scale * std::sqrt(dt);
    for (auto& v : out) v = s * rng.normal();
    return out;
}

std::vector<double> estimate_covariance(const std::vector<std::vector<double>>& samples) {
    if (samples.size() < 2) throw InsufficientDataError("covariance needs at least 2 samples");
    const std::size_t n = samples.front().size();
    const double m = static_cast<double>(samples.size());
    std::vector<double> mean(n, 0.0);
    for (const auto& s : samples) {
        if (s.size() != n) throw std::invalid_argument("samples have inconsistent lengths");
        for (std::size_t i = 0; i < n; ++i) mean[i] += s[i];
    }
    for (auto& v : mean) v /= m;
    std::vector<double> cov(n * n, 0.0);
    std::vector<double> d(n);
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < n; ++i) d[i] = s[i] - mean[i];
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = i; k < n; ++k) cov[i * n + k] += d[i] * d[k];
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i; k < n; ++k) {
            cov[i * n + k] /= (m - 1.0);
            cov[k * n + i] = cov[i * n + k];
        }
    }
    return cov;
}

NoiseSource::NoiseSource(const NoiseConfig& cfg, std::vector<double> positions, double L, double field_dx, Rng rng)
    : cfg_(cfg), n_(positions.size()), scale_(field_dx > 0.0 ? 1.0 / std::sqrt(field_dx) : 1.0), rng_(rng) {
    switch (cfg_.kind) {
        case NoiseKind::white: break;
        case NoiseKind::ou_temporal: {
            const std::size_t paths = cfg_.shared ? 1 : n_;
            ou_.resize(paths);
            // Start from the stationary law so the forcing has no transient.
            const double sd = cfg_.beta > 0.0 ? cfg_.sigma / std::sqrt(2.0 * cfg_.beta) : 0.0;
            for (auto& s : ou_) {
                s = OUState{cfg_.theta_ou + sd * rng_.normal(), cfg_.beta, cfg_.theta_ou, cfg_.sigma};
            }
            break;
        }
        case NoiseKind::q_wiener_spatial:
            qw_.emplace_back(std::move(positions), cfg_.zeta, L, cfg_.J);
            break;
    }
}

void NoiseSource::next(double dt, std::span<double> out) {
    switch (cfg_.kind) {
        case NoiseKind::white: {
            if (cfg_.shared) {
                const double v = std::sqrt(dt) * rng_.normal();
                std::fill(out.begin(), out.end(), v);
            } else {
                const double s = scale_ * std::sqrt(dt);
                for (auto& v : out) v = s * rng_.normal();
            }
            break;
        }
        case NoiseKind::ou_temporal: {
            if (cfg_.shared) {
                const double v = ou_.front().K * dt;
                std::fill(out.begin(), out.end(), v);
                ou_.front() = ou_step(ou_.front(), dt, rng_);
            } else {
                for (std::size_t i = 0; i < n_; ++i) {
                    out[i] = scale_ * ou_[i].K * dt;
                    ou_[i] = ou_step(ou_[i], dt, rng_);
                }
            }
            break;
        }
        case NoiseKind::q_wiener_spatial: qw_.front().increment(dt, rng_, out); break;
    }
}

}  // namespace spiny
