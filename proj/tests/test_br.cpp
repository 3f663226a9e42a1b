#include <doctest.h>

#include <cmath>

#include "spiny/br_model.hpp"
#include "spiny/wavespeed.hpp"

using namespace spiny;
using namespace spiny::br;

namespace {

ModelConfig br_config(const std::string& extra = {}) { return load_config("model = br\n" + extra); }

// Bisection root of alpha (1 - X) - beta X, independent of steady_gate.
double gate_root(Gate g, double U) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (gate_drift(g, mid, U) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("steady gates at -65 mV") {
    CHECK(steady_gate(Gate::m, -65.0) == doctest::Approx(0.0529).epsilon(1e-3));
    CHECK(steady_gate(Gate::h, -65.0) == doctest::Approx(0.5961).epsilon(1e-3));
    CHECK(steady_gate(Gate::n, -65.0) == doctest::Approx(0.3177).epsilon(1e-3));
    for (Gate g : {Gate::m, Gate::n, Gate::h}) {
        for (double U : {-90.0, -65.0, -40.0, -20.0, 10.0}) {
            CHECK(steady_gate(g, U) == doctest::Approx(gate_root(g, U)).epsilon(1e-10));
            CHECK(gate_drift(g, steady_gate(g, U), U) == doctest::Approx(0.0).scale(1.0));
        }
    }
}

TEST_CASE("rates are nonnegative and continuous at the removable points") {
    for (double U = -100.0; U <= 60.0; U += 0.01) {
        for (Gate g : {Gate::m, Gate::n, Gate::h}) {
            const auto r = hh_rates(g, U);
            CHECK(r.alpha >= 0.0);
            CHECK(r.beta >= 0.0);
        }
    }
    CHECK(hh_rates(Gate::m, -40.0).alpha == doctest::Approx(1.0));
    CHECK(hh_rates(Gate::m, -40.0 + 1e-6).alpha == doctest::Approx(1.0));
    CHECK(hh_rates(Gate::n, -55.0).alpha == doctest::Approx(0.1));
}

TEST_CASE("noise shapes") {
    CHECK(g_c(-65.0) == 0.0);
    CHECK(g_c(-60.0) == -5.0);
    CHECK(g_m(0.5) == 0.25);
    CHECK(g_m(-0.1) == 0.0);
    CHECK(g_m(1.1) == 0.0);
}

TEST_CASE("HH head is near balance at -65 mV") {
    const HHParams p;
    const double I = hh_current(p, -65.0, steady_gate(Gate::m, -65.0), steady_gate(Gate::n, -65.0),
                                steady_gate(Gate::h, -65.0));
    CHECK(std::abs(I) < 0.05);
    // Depolarised head: sodium drives inward current.
    CHECK(hh_current(p, -40.0, 0.5, 0.3177, 0.5961) > 0.0);
}

TEST_CASE("spine density") {
    const auto g = Grid::uniform(8.0, 81);
    ModelConfig cfg;
    cfg.phys.length = 8.0;
    cfg.phys.n_spines = 10;
    const auto sx = cfg.spine_positions();
    SUBCASE("kappa = 0 is uniform") {
        const auto d = spine_density(g.x, sx, 0.0, 4.0, 0.8);
        for (double v : d.values) CHECK(v == doctest::Approx(4.0));
    }
    SUBCASE("large kappa concentrates at spines") {
        const auto d = spine_density(g.x, sx, 1e4, 4.0, 0.8);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double dist = 1e9;
            for (double s : sx) dist = std::min(dist, std::abs(g.x[i] - s));
            if (dist < 1e-9) CHECK(d.values[i] == doctest::Approx(4.0));
            if (dist > 0.15) CHECK(d.values[i] < 1e-40);
        }
    }
    SUBCASE("rho_max at x_n for any kappa") {
        for (double kappa : {0.0, 10.0, 670.0, 1e4}) {
            const auto d = spine_density(sx, sx, kappa, 4.0, 0.8);
            for (double v : d.values) CHECK(v == doctest::Approx(4.0));
        }
    }
    SUBCASE("windows tile the cable without overlap") {
        const auto d = spine_density(g.x, sx, 0.0, 1.0, 0.8);
        for (double v : d.values) CHECK(v == 1.0);
    }
}

TEST_CASE("stimulate") {
    const auto g = Grid::uniform(10.0, 101);
    std::vector<double> V(g.size(), -64.0);
    stimulate(V, g.x, 0.0, 0.0, 3.0);
    for (double v : V) CHECK(v == -64.0);
    stimulate(V, g.x, 60.0, 0.0, 3.0);
    CHECK(V[30] == -4.0);
    CHECK(V[31] == -64.0);
}

TEST_CASE("rest state is an equilibrium") {
    const auto cfg = br_config();
    BrModel model(cfg, 0);
    const auto rest = model.rest();
    for (int k = 0; k < 200; ++k) model.step();
    double drift = 0.0;
    for (std::size_t i = 0; i < rest.size(); ++i) drift = std::max(drift, std::abs(model.state()[i] - rest[i]));
    CHECK(drift < 1e-8);
    CHECK(rest[0] == doctest::Approx(-64.3).epsilon(0.01));
}

TEST_CASE("deterministic BR wave") {
    const auto cfg = br_config();
    const auto ref = deterministic_reference(cfg);
    CHECK(ref.propagated);
    CHECK(ref.c_det > 0.3);
    CHECK(ref.c_det < 0.6);

    SUBCASE("sub-threshold stimulus decays") {
        const auto weak = br_config("stim_amplitude = 3\n");
        const auto r = deterministic_reference(weak);
        CHECK_FALSE(r.propagated);
        const auto run = simulate(weak, 0);
        CHECK_FALSE(check_propagation(run.trace_x2, ref.theta));
    }
}

TEST_CASE("without noise Euler-Maruyama and Heun are bit-identical") {
    const auto a = simulate(br_config("interpretation = ito\nt_final = 30\n"), 0);
    const auto b = simulate(br_config("interpretation = stratonovich\nt_final = 30\n"), 0);
    CHECK(a.final_state == b.final_state);
    CHECK(a.trace_x1 == b.trace_x1);
}

TEST_CASE("gates stay in [0, 1] under strong noise") {
    for (const char* kind : {"white", "ou_temporal", "q_wiener_spatial"}) {
        CAPTURE(kind);
        auto cfg = br_config(std::string("nu = 1\nmu = 0.2\nt_final = 20\nkind = ") + kind + "\n");
        BrModel model(cfg, 2);
        const std::size_t ns = model.site_nodes().size();
        for (int k = 0; k < 600; ++k) {
            model.step();
            for (auto blk : {model.m(), model.n(), model.h()}) {
                REQUIRE(blk.size() == ns);
                for (double v : blk) {
                    CHECK(v >= 0.0);
                    CHECK(v <= 1.0);
                }
            }
        }
    }
}

TEST_CASE("kappa = 0 reproduces the constant-density model") {
    auto cfg = br_config("kappa = 0\nt_final = 20\n");
    BrModel model(cfg, 0);
    for (double v : model.density().values) CHECK(v == cfg.br.rho_max);
    CHECK(model.site_nodes().size() == model.grid().size());
}
