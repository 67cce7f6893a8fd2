#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stopflow/cli_commands.hpp"
#include "stopflow/field_io.hpp"
#include "stopflow/run_config.hpp"

using namespace stopflow;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "stopflow_cli_test";

std::string write_config(const std::string& name, const Json& doc) {
    fs::create_directories(kWork);
    const fs::path p = kWork / name;
    std::ofstream out(p);
    out << doc.dump(2);
    return p.string();
}

Json small_benchmark(const std::string& outdir) {
    Json doc;
    doc["problem"] = {{"dim", 1},
                      {"box", Json::array({Json::array({-4.0, 4.0})})},
                      {"h", 1.0 / 32.0},
                      {"mu", {{"preset", "box"},
                              {"center", Json::array({0.0})},
                              {"halfwidth", Json::array({1.0})},
                              {"height", 2.0}}},
                      {"f", {{"mode", "constant"}, {"value", 1.0}}},
                      {"cost_type", "type1"}};
    doc["numerics"] = {{"dt", 1.0 / 64.0}, {"t_end", 16.0}, {"max_sweeps", 500000}};
    doc["output"] = {{"dir", (kWork / outdir).string()}};
    return doc;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("missing or malformed configs exit 2") {
    CHECK(cmd_solve("/nonexistent/config.json", std::nullopt) == 2);
    const std::string bad = write_config("bad.json", Json{{"problem", 5}});
    CHECK(cmd_solve(bad, std::nullopt) == 2);
    Json unknown = small_benchmark("unknown_key");
    unknown["problem"]["surprise"] = 1;
    CHECK(cmd_solve(write_config("unknown.json", unknown), std::nullopt) == 2);
}

TEST_CASE("solve writes artifacts; reruns with another config are refused") {
    fs::remove_all(kWork / "run1");
    const std::string cfg = write_config("run1.json", small_benchmark("run1"));
    REQUIRE(cmd_solve(cfg, std::nullopt) == 0);
    for (const char* name :
         {"w0.csv", "nu.csv", "E.csv", "s.csv", "manifest.json", "report.json"})
        CHECK(fs::exists(kWork / "run1" / name));

    Json rep = Json::parse(std::ifstream(kWork / "run1" / "report.json"));
    CHECK(rep["error"].is_null());
    CHECK(rep["mass_nu"].get<double>() == doctest::Approx(4.0).epsilon(1e-8));
    CHECK(rep["extinction_time"].get<double>() > 0.5);
    CHECK(rep.contains("cost_eulerian"));
    CHECK(rep.contains("config_hash"));

    // same out dir, different config: refused without clobbering
    Json other = small_benchmark("run1");
    other["numerics"]["dt"] = 1.0 / 32.0;
    CHECK(cmd_solve(write_config("run1b.json", other), std::nullopt) == 2);
    // identical config: fine
    CHECK(cmd_solve(cfg, std::nullopt) == 0);
}

TEST_CASE("solver failures exit 3 with the error name in the report") {
    fs::remove_all(kWork / "tiny");
    Json doc;
    doc["problem"] = {{"dim", 1},
                      {"box", Json::array({Json::array({-2.0, 2.0})})},
                      {"h", 1.0 / 32.0},
                      {"mu", {{"preset", "box"},
                              {"center", Json::array({0.0})},
                              {"halfwidth", Json::array({0.5})},
                              {"height", 6.0}}},
                      {"f", {{"mode", "constant"}, {"value", 1.0}}},
                      {"cost_type", "type1"}};
    doc["numerics"] = {{"dt", 1.0 / 64.0}, {"t_end", 2.0}};
    doc["output"] = {{"dir", (kWork / "tiny").string()}};
    CHECK(cmd_solve(write_config("tiny.json", doc), std::nullopt) == 3);
    Json rep = Json::parse(std::ifstream(kWork / "tiny" / "report.json"));
    CHECK(rep["error"].get<std::string>() == "DomainTooSmall");
}

TEST_CASE("simulate: zero barrier stops at once; reruns are byte-identical") {
    fs::remove_all(kWork / "mc0");
    fs::remove_all(kWork / "mc1");
    Json doc = small_benchmark("mc0");
    doc.erase("numerics");
    doc["barrier"] = {{"constant", 0.0}};
    doc["mc"] = {{"n_particles", 4000}, {"dt_mc", 1.0 / 512.0}, {"seed", 42}};
    const std::string cfg = write_config("mc0.json", doc);
    REQUIRE(cmd_simulate(cfg, std::nullopt, std::nullopt) == 0);

    // every particle stops at tau = 0
    std::ifstream ens(kWork / "mc0" / "ensemble.csv");
    std::string line;
    std::getline(ens, line); // header
    int rows = 0;
    while (std::getline(ens, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "0");
        ++rows;
    }
    CHECK(rows == 4000);

    Json doc2 = doc;
    doc2["output"]["dir"] = (kWork / "mc1").string();
    REQUIRE(cmd_simulate(write_config("mc1.json", doc2), std::nullopt, std::nullopt) == 0);
    CHECK(slurp(kWork / "mc0" / "nu_hat.csv") == slurp(kWork / "mc1" / "nu_hat.csv"));
    CHECK(slurp(kWork / "mc0" / "ensemble.csv") == slurp(kWork / "mc1" / "ensemble.csv"));

    // missing barrier artifact
    Json doc3 = small_benchmark("mc2");
    doc3.erase("numerics");
    doc3["solve_dir"] = (kWork / "no_such_dir").string();
    doc3["mc"] = {{"n_particles", 10}, {"dt_mc", 1.0 / 64.0}, {"seed", 1}};
    CHECK(cmd_simulate(write_config("mc2.json", doc3), std::nullopt, std::nullopt) == 2);
}

TEST_CASE("simulate against a solve directory produces a passing consistency report") {
    fs::remove_all(kWork / "solve_mc");
    fs::remove_all(kWork / "mc_full");
    Json solve_doc = small_benchmark("solve_mc");
    REQUIRE(cmd_solve(write_config("solve_mc.json", solve_doc), std::nullopt) == 0);

    Json doc = small_benchmark("mc_full");
    doc.erase("numerics");
    doc["solve_dir"] = (kWork / "solve_mc").string();
    doc["mc"] = {{"n_particles", 60000}, {"dt_mc", 1.0 / 256.0}, {"seed", 7}};
    REQUIRE(cmd_simulate(write_config("mc_full.json", doc), std::nullopt, std::nullopt) == 0);
    Json cons = Json::parse(std::ifstream(kWork / "mc_full" / "consistency.json"));
    CHECK(cons["pass"].get<bool>());
    CHECK(cons["l1_nu_hat_vs_nu"].get<double>() <= 0.08);
}

TEST_CASE("verify: unknown suite and adversarial pair exit 2") {
    CHECK(cmd_verify("nonsense", 1, 1, std::nullopt, std::nullopt) == 2);

    Json pair;
    pair["pair"] = {{"dim", 1},
                    {"box", Json::array({Json::array({-4.0, 4.0})})},
                    {"h", 1.0 / 32.0},
                    {"mu1", {{"preset", "box"},
                             {"center", Json::array({0.0})},
                             {"halfwidth", Json::array({1.0})},
                             {"height", 2.0}}},
                    {"mu2", {{"preset", "box"},
                             {"center", Json::array({0.5})},
                             {"halfwidth", Json::array({0.5})},
                             {"height", 1.0}}}};
    CHECK(cmd_verify("monotonicity", 1, 1, std::nullopt,
                     write_config("pair.json", pair)) == 2);
}

TEST_CASE("export: round trip and summary") {
    fs::create_directories(kWork);
    const GridSpec g = GridSpec::line(-1.0, 1.0, 17);
    DensityField d = DensityField::from_fn(g, [](double x, double) { return x * x; });
    const std::string in = (kWork / "export_in.csv").string();
    const std::string out = (kWork / "export_out.csv").string();
    write_field_csv(in, d);
    CHECK(cmd_export(in, out, true) == 0);
    CHECK(slurp(in) == slurp(out));
    CHECK(cmd_export((kWork / "missing.csv").string(), std::nullopt, false) == 2);
}
