#include <doctest.h>

#include <cmath>
#include <map>

#include "spiny/sds_model.hpp"
#include "spiny/wavespeed.hpp"

using namespace spiny;
using namespace spiny::sds;

namespace {

ModelConfig sds_config(const std::string& extra = {}) { return load_config("model = sds\n" + extra); }

}  // namespace

TEST_CASE("g_if") {
    CHECK(g_if(0.5) == 0.25);
    CHECK(g_if(1.2) == 0.0);
    CHECK(g_if(0.0) == 0.0);
    CHECK(g_if(-0.1) == 0.0);
}

TEST_CASE("if_drift") {
    CHECK(if_drift(0.0, 0.0, 1.0, 1.0, 2.0) == 0.0);
    CHECK(if_drift(0.25, 1.0, 1.0, 1.0, 2.0) == doctest::Approx(0.5));
    const double V = 0.7, c_hat = 1.3, r = 0.8, eps = 2.1;
    CHECK(if_drift(V / (c_hat * r * eps), V, c_hat, r, eps) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("fire_check") {
    FireRule rule{0.04, 40.0, ResetMode::subtract};
    SUBCASE("threshold is inclusive") {
        IFSpines s(1);
        s.U[0] = 0.04;
        CHECK(fire_check(s, 1.0, rule) == std::vector<int>{0});
        CHECK(s.U[0] == doctest::Approx(0.0).scale(1.0));
        CHECK(s.last_fire[0] == 1.0);
        REQUIRE(s.fire_log.size() == 1);
    }
    SUBCASE("just below threshold") {
        IFSpines s(1);
        s.U[0] = 0.04 - 1e-9;
        CHECK(fire_check(s, 1.0, rule).empty());
    }
    SUBCASE("refractory window blocks") {
        IFSpines s(1);
        s.last_fire[0] = 0.0;
        s.U[0] = 0.5;
        CHECK(fire_check(s, 39.9, rule).empty());
        CHECK(fire_check(s, 40.0, rule) == std::vector<int>{0});
        CHECK(s.U[0] == doctest::Approx(0.46));
    }
    SUBCASE("zero reset") {
        IFSpines s(2);
        s.U = {0.3, 0.01};
        rule.reset = ResetMode::zero;
        CHECK(fire_check(s, 2.0, rule) == std::vector<int>{0});
        CHECK(s.U[0] == 0.0);
        CHECK(s.U[1] == 0.01);
    }
}

TEST_CASE("pulse_value") {
    const std::vector<double> T{3.0};
    CHECK(pulse_value(4.0, T, 2.0, 2.0) == 2.0);
    CHECK(pulse_value(7.0, T, 2.0, 2.0) == 0.0);
    CHECK(pulse_value(2.9, T, 2.0, 2.0) == 0.0);
    CHECK(pulse_value(4.0, {}, 2.0, 2.0) == 0.0);
    // Overlapping pulses do not stack.
    CHECK(pulse_value(4.0, std::vector<double>{3.0, 3.5}, 2.0, 2.0) == 2.0);

    PulseTrain train(1);
    train.add(0, 0.0);
    train.add(0, 5.0);
    train.prune(6.0, 2.0);
    CHECK(train.active[0] == std::vector<double>{5.0});
}

TEST_CASE("deterministic SDS wave is saltatory and ordered") {
    const auto cfg = sds_config();
    const auto run = simulate(cfg, 0);
    CHECK_FALSE(run.diverged);
    CHECK(check_sequential(run.first_fire, run.spine_x, 0.0, cfg.phys.length));
    CHECK(check_sequential(run.fire_log, run.spine_x, run.x1, run.x2));
    // Voltage stays bounded and returns towards rest behind the front.
    for (double v : run.final_state) CHECK(std::isfinite(v));
    const auto ref = deterministic_reference(cfg);
    CHECK(ref.propagated);
    CHECK(ref.c_det > 0.0);
}

TEST_CASE("without noise Euler-Maruyama and Heun are bit-identical") {
    auto ito = sds_config("interpretation = ito\n");
    auto strat = sds_config("interpretation = stratonovich\n");
    const auto a = simulate(ito, 0), b = simulate(strat, 0);
    CHECK(a.final_state == b.final_state);
    CHECK(a.trace_x2 == b.trace_x2);
    CHECK(a.noise_draws == 0);
}

TEST_CASE("seeded runs reproduce exactly") {
    const auto cfg = sds_config("nu = 0.5\nseed = 42\n");
    const auto a = simulate(cfg, 3), b = simulate(cfg, 3), c = simulate(cfg, 4);
    CHECK(a.final_state == b.final_state);
    CHECK(a.noise_draws == b.noise_draws);
    CHECK(a.noise_draws > 0);
    CHECK(a.final_state != c.final_state);
}

TEST_CASE("spines respect the refractory spacing and stay in [0, 1]") {
    for (const char* kind : {"white", "ou_temporal", "q_wiener_spatial"}) {
        CAPTURE(kind);
        auto cfg = sds_config(std::string("tau_r = 5\nmu = 0.3\nnu = 1\nkind = ") + kind + "\n");
        SdsModel model(cfg, 1);
        model.force_fire(0);
        for (int k = 0; k < 2000; ++k) {
            model.step();
            for (double u : model.U()) {
                CHECK(u >= 0.0);
                CHECK(u <= 1.0);
            }
        }
        std::map<int, double> last;
        int refires = 0;
        for (const auto& e : model.spines().fire_log) {
            if (last.count(e.spine)) {
                CHECK(e.t - last[e.spine] >= cfg.phys.tau_r - 1e-12);
                ++refires;
            }
            last[e.spine] = e.t;
        }
        CHECK(refires > 0);
    }
}

TEST_CASE("cable target leaves spines noise-free between firings") {
    auto cfg = sds_config("target = cable\nmu = 0.2\n");
    SdsModel model(cfg, 0);
    model.step();
    // Cable nodes moved, the unforced spines only follow the cable.
    bool moved = false;
    for (double v : model.V()) moved = moved || v != 0.0;
    CHECK(moved);
    CHECK(model.noise_draws() == model.grid().size());
}
