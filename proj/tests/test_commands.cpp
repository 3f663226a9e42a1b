#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "spiny/commands.hpp"

using namespace spiny;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "spiny_cmd_tests";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("sibling_path") {
    CHECK(sibling_path("out/run.csv", "_fires.csv") == "out/run_fires.csv");
    CHECK(sibling_path("out.d/run", ".json") == "out.d/run.json");
}

TEST_CASE("resolve_spec applies overrides over the file") {
    const auto file = scratch("exp.cfg");
    std::ofstream(file) << "model = br\nnu = 0.1\n";
    ExperimentSpec spec;
    spec.config_path = file.string();
    spec.overrides = {"nu=0.2", " kappa = 10 "};
    spec.seed = 77;
    spec.realizations = 5;
    const auto cfg = resolve_spec(spec);
    CHECK(cfg.model == ModelKind::br);
    CHECK(cfg.noise.nu == 0.2);
    CHECK(cfg.br.kappa == 10.0);
    CHECK(cfg.noise.seed == 77);
    CHECK(cfg.realizations == 5);
    CHECK(cfg.disc.dt > 0.0);

    spec.overrides = {"nu"};
    CHECK_THROWS_AS(resolve_spec(spec), ValidationError);
}

TEST_CASE("config_json carries every key") {
    const auto cfg = load_config("nu_values = 0.1, 0.2\n");
    const auto j = nlohmann::json::parse(config_json(cfg));
    CHECK(j["model"] == "sds");
    CHECK(j["n_spines"] == 81);
    CHECK(j["nu_values"].size() == 2);
    CHECK(j["shared"] == false);
    std::istringstream lines(serialize_config(cfg));
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) n += line.find('=') != std::string::npos;
    CHECK(j.size() == n);
}

TEST_CASE("simulate writes field, fires, summary and sidecar") {
    ExperimentSpec spec;
    spec.command = Command::simulate;
    spec.output_path = scratch("sim.csv").string();
    std::ostringstream log;
    CHECK(run_command(spec, log) == kExitOk);
    CHECK(slurp(spec.output_path).rfind("t,x,V\n", 0) == 0);
    CHECK(slurp(sibling_path(spec.output_path, "_fires.csv")).rfind("spine_index,t\n0,0\n", 0) == 0);
    const auto summary = slurp(sibling_path(spec.output_path, "_summary.csv"));
    CHECK(summary.find("\n1,1,0,") != std::string::npos);
    CHECK(nlohmann::json::parse(slurp(sibling_path(spec.output_path, ".json")))["model"] == "sds");
}

TEST_CASE("exit codes") {
    std::ostringstream log;
    ExperimentSpec bad;
    bad.overrides = {"dt=-0.1"};
    bad.output_path = scratch("bad.csv").string();
    CHECK(run_command(bad, log) == kExitValidation);

    ExperimentSpec missing;
    missing.config_path = "/nonexistent/file.cfg";
    CHECK(run_command(missing, log) == kExitValidation);

    ExperimentSpec blowup;
    blowup.output_path = scratch("blowup.csv").string();
    blowup.overrides = {"model=br", "target=cable", "mu=1e200"};
    CHECK(run_command(blowup, log) == kExitDivergence);
}

TEST_CASE("sweep-noise rows and schema") {
    ExperimentSpec spec;
    spec.command = Command::sweep_noise;
    spec.output_path = scratch("sweep.csv").string();
    spec.overrides = {"nu_values=0, 0.5", "mu_values=", "realizations=4"};
    std::ostringstream log;
    REQUIRE(run_command(spec, log) == kExitOk);
    const auto csv = slurp(spec.output_path);
    CHECK(csv.rfind("nu,mean_c,sd_c,n_failed,n_nonsequential,M,model,target,noise_kind,interpretation\n", 0) == 0);
    CHECK(csv.find("\n0,1,0,0,0,4,sds,spines,white,ito\n") != std::string::npos);
}

TEST_CASE("sweep-kappa includes the kappa = 0 row") {
    auto cfg = load_config("model = br\nkappa_values = 0\nt_final = 130\n");
    const auto rows = sweep_kappa(cfg);
    REQUIRE(rows.size() == 1);
    const auto plain = deterministic_reference(load_config("model = br\n"));
    CHECK(rows[0].c_det == plain.c_det);
    CHECK(std::isnan(rows[0].diff));
    CHECK_THROWS_AS(sweep_kappa(load_config("model = sds\nkappa_values = 0\n")), ValidationError);
}

TEST_CASE("noise-test reports") {
    SUBCASE("OU beta = sigma = 1") {
        const auto rep = noise_test(load_config("kind = ou_temporal\nbeta = 1\nsigma = 1\n"), 100000);
        CHECK(rep.pass());
        CHECK(rep.lines[1].target == 0.5);
    }
    SUBCASE("Q-Wiener zeta = 1 on L = 30") {
        const auto rep = noise_test(load_config("kind = q_wiener_spatial\nzeta = 1\nlength = 30\nn_spines = 37\n"), 20000);
        CHECK(rep.pass());
    }
    SUBCASE("fixed seed reproduces the report; the dump has one f64 per value") {
        const auto cfg = load_config("kind = white\nseed = 3\n");
        const auto dump = scratch("w.bin");
        const auto a = noise_test(cfg, 1000, dump.string());
        const auto b = noise_test(cfg, 1000);
        REQUIRE(a.lines.size() == b.lines.size());
        for (std::size_t i = 0; i < a.lines.size(); ++i) CHECK(a.lines[i].value == b.lines[i].value);
        CHECK(fs::file_size(dump) == 1000 * 4 * sizeof(double));
    }
}
