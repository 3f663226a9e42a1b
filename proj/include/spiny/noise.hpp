#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "spiny/config.hpp"

namespace spiny {

// Normal-variate stream with draw accounting. One instance per realization
// and noise target; streams are derived from (master seed, realization,
// stream id) so ensembles are reproducible independent of execution order.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double normal() {
        ++draws_;
        return dist_(engine_);
    }
    std::uint64_t draws() const { return draws_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
    std::uint64_t draws_ = 0;
};

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t realization, std::uint64_t stream);

inline Rng make_stream(std::uint64_t master, std::uint64_t realization, std::uint64_t stream) {
    return Rng(derive_seed(master, realization, stream));
}

struct OUState {
    double K = 0.0;
    double beta = 1.0;
    double theta_ou = 0.0;
    double sigma = 1.0;
};

// K' = K + beta (theta - K) dt + sigma sqrt(dt) xi
OUState ou_step(OUState s, double dt, Rng& rng);

// Mode weight exp(-pi j^2 zeta^2 / (2 L^2)). The field uses it as the
// amplitude lambda_j^{1/2}; the covariance eigenvalue is its square, which is
// what reproduces F_c on [0, L].
double lambda_j(int j, double zeta, double L);

// Spatial correlation kernel F_c(x) = exp(-pi x^2 / (4 zeta^2)) / (2 zeta).
double correlation_fn(double x, double zeta);

// Smallest J with lambda_J < 1e-8.
int default_truncation(double zeta, double L);

// Q-Wiener field with cosine eigenfunctions of the Neumann Laplacian on
// [0, L], sampled at fixed positions.
class QWiener {
public:
    QWiener(std::vector<double> positions, double zeta, double L, int J);

    // Advances every b_j by sqrt(dt) xi_j and writes the field increment
    // sum_j lambda_j e_j(x) db_j at each position.
    void increment(double dt, Rng& rng, std::span<double> out);

    int truncation() const { return J_; }
    // Covariance eigenvalue of mode j (square of lambda_j).
    double eigenvalue(int j) const { return eigen_[static_cast<std::size_t>(j)]; }
    // e_j evaluated at position i.
    double mode(int j, std::size_t i) const { return modes_[static_cast<std::size_t>(j) * n_ + i]; }
    std::span<const double> brownians() const { return b_; }
    std::size_t size() const { return n_; }

    // dt^-1 Var(dW(x_i)) = sum_j lambda_j e_j(x_i)^2.
    double pointwise_variance_rate(std::size_t i) const;

private:
    std::size_t n_;
    int J_;
    std::vector<double> eigen_;
    std::vector<double> sqrt_eigen_;
    std::vector<double> modes_;  // (J+1) x n, row-major by mode
    std::vector<double> b_;
    std::vector<double> db_;
};

// n independent N(0, dt * scale^2) samples, or n copies of one N(0, dt)
// sample when shared. For space-time white noise on a grid scale is 1/sqrt(dx).
std::vector<double> white_increment(std::size_t n, double dt, Rng& rng, bool shared = false, double scale = 1.0);

class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unbiased sample covariance, row-major n x n.
std::vector<double> estimate_covariance(const std::vector<std::vector<double>>& samples);

// Drives one noise target of a model. white and OU kinds are independent per
// point unless cfg.shared; grid fields (cable, BR gate field) scale the
// independent increments by 1/sqrt(dx). The OU kind forces with K(t) dt.
class NoiseSource {
public:
    NoiseSource(const NoiseConfig& cfg, std::vector<double> positions, double L, double field_dx, Rng rng);

    // Fills out with the increments for one step of length dt.
    void next(double dt, std::span<double> out);

    std::size_t size() const { return n_; }
    const Rng& rng() const { return rng_; }

private:
    NoiseConfig cfg_;
    std::size_t n_;
    double scale_;
    Rng rng_;
    std::vector<OUState> ou_;
    std::vector<QWiener> qw_;
};

}  // namespace spiny
