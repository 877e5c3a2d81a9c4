#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "hsu/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
    static fs::path dir = [] {
        auto d = fs::temp_directory_path() / "hsu_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args) {
    const std::string cmd = std::string(HSU_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

std::map<std::string, std::string> read_report(const fs::path& p) {
    std::map<std::string, std::string> fields;
    std::ifstream f(p);
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) fields[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return fields;
}

const std::string kSceneArgs = "--p 3 --bands 50 --lines 14 --samples 14 --variants 4 --seed 7";

}  // namespace

TEST_CASE("generate is bitwise reproducible and thread-invariant") {
    const auto a = work_dir() / "gen_a";
    const auto b = work_dir() / "gen_b";
    const auto c = work_dir() / "gen_c";
    REQUIRE(run("generate " + kSceneArgs + " --output-dir " + a.string()) == 0);
    REQUIRE(run("generate " + kSceneArgs + " --output-dir " + b.string()) == 0);
    REQUIRE(run("generate " + kSceneArgs + " --threads 1 --output-dir " + c.string()) == 0);
    for (const char* name : {"cube.json", "cube.f32", "gt_abundances.csv", "gt_locals.f32"}) {
        CHECK(slurp(a / name) == slurp(b / name));
        CHECK(slurp(a / name) == slurp(c / name));
    }
}

TEST_CASE("unmix then eval produces the contract report keys") {
    const auto scene = work_dir() / "scene";
    REQUIRE(run("generate " + kSceneArgs + " --shadow-fraction 0.02 --output-dir " + scene.string()) == 0);

    const auto unmixed = work_dir() / "relmm_out";
    REQUIRE(run("unmix --input " + (scene / "cube.json").string() +
                " --method relmm --extract kmeans --p 3 --lambda-s 0.1 --lambda-s0 0.5 --seed 3" +
                " --output-dir " + unmixed.string()) == 0);
    for (const char* name : {"abundances.csv", "scalings.csv", "s0.csv", "objective_trace.csv",
                             "locals.json", "abundance_0.pgm", "scaling_2.pgm", "unmix_report.txt"})
        CHECK(fs::exists(unmixed / name));

    const auto report_path = work_dir() / "eval_report.txt";
    REQUIRE(run("eval --est-dir " + unmixed.string() + " --truth-dir " + scene.string() +
                " --output " + report_path.string()) == 0);
    const auto report = read_report(report_path);
    CHECK(report.count("armse") == 1);
    CHECK(report.count("mean_sam_deg") == 1);
    CHECK(report.count("recon_rmse") == 1);
    CHECK(std::stod(report.at("armse")) >= 0.0);
}

TEST_CASE("unmix is thread-invariant at the file level") {
    const auto scene = work_dir() / "scene_threads";
    REQUIRE(run("generate " + kSceneArgs + " --output-dir " + scene.string()) == 0);
    const auto one = work_dir() / "unmix_t1";
    const auto two = work_dir() / "unmix_t2";
    const std::string base = "unmix --input " + (scene / "cube.json").string() +
                             " --method elmm --extract kmeans --p 3 --lambda-s 0.1 --seed 5 ";
    REQUIRE(run(base + "--threads 1 --output-dir " + one.string()) == 0);
    REQUIRE(run(base + "--threads 2 --output-dir " + two.string()) == 0);
    for (const char* name : {"abundances.csv", "scalings.csv", "s0.csv", "locals.f32"})
        CHECK(slurp(one / name) == slurp(two / name));
}

TEST_CASE("end-to-end: kmeans + relmm beats vca + sclsu on a shadowed scene") {
    const auto scene = work_dir() / "scene_shadow";
    REQUIRE(run("generate --p 3 --bands 60 --lines 22 --samples 22 --variants 5 --seed 21"
                " --shadow-fraction 0.03 --output-dir " +
                scene.string()) == 0);

    const auto vca_out = work_dir() / "vca_sclsu";
    REQUIRE(run("unmix --input " + (scene / "cube.json").string() +
                " --method sclsu --extract vca --p 3 --seed 2 --output-dir " + vca_out.string()) == 0);
    const auto relmm_out = work_dir() / "kmeans_relmm";
    REQUIRE(run("unmix --input " + (scene / "cube.json").string() +
                " --method relmm --extract kmeans --p 3 --lambda-s 0.1 --lambda-s0 0.5 --seed 2" +
                " --output-dir " + relmm_out.string()) == 0);

    const auto vca_report = work_dir() / "vca_report.txt";
    const auto relmm_report = work_dir() / "relmm_report.txt";
    REQUIRE(run("eval --est-dir " + vca_out.string() + " --truth-dir " + scene.string() + " --output " +
                vca_report.string()) == 0);
    REQUIRE(run("eval --est-dir " + relmm_out.string() + " --truth-dir " + scene.string() +
                " --output " + relmm_report.string()) == 0);
    const double vca_armse = std::stod(read_report(vca_report).at("armse"));
    const double relmm_armse = std::stod(read_report(relmm_report).at("armse"));
    CHECK(relmm_armse < vca_armse);
}

TEST_CASE("eval can append sweep CSV rows") {
    const auto csv = work_dir() / "sweep.csv";
    fs::remove(csv);
    const auto scene = work_dir() / "scene";         // from the earlier test
    const auto unmixed = work_dir() / "relmm_out";   // from the earlier test
    REQUIRE(fs::exists(scene / "cube.json"));
    REQUIRE(run("eval --est-dir " + unmixed.string() + " --truth-dir " + scene.string() +
                " --csv " + csv.string() + " --label relmm") == 0);
    REQUIRE(run("eval --est-dir " + unmixed.string() + " --truth-dir " + scene.string() +
                " --csv " + csv.string() + " --label again") == 0);
    const std::string content = slurp(csv);
    CHECK(content.rfind("label,armse,mean_sam_deg,recon_rmse\n", 0) == 0);
    CHECK(content.find("\nrelmm,") != std::string::npos);
    CHECK(content.find("\nagain,") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
    CHECK(run("unmix --input /nonexistent/cube.json --method sclsu --p 3") == 1);
    CHECK(run("unmix --input /nonexistent/cube.json --method bogus --p 3") == 1);
    CHECK(run("idest") == 1);  // missing required --input
    const auto scene = work_dir() / "scene";
    CHECK(run("unmix --input " + (scene / "cube.json").string() + " --method elmm --p 3") == 1);
}

TEST_CASE("idest reports a dimension on a generated scene") {
    const auto scene = work_dir() / "scene";
    REQUIRE(fs::exists(scene / "cube.json"));
    const auto report_path = work_dir() / "id_report.txt";
    REQUIRE(run("idest --input " + (scene / "cube.json").string() + " --output " +
                report_path.string()) == 0);
    const auto report = read_report(report_path);
    REQUIRE(report.count("dimension") == 1);
    CHECK(std::stoi(report.at("dimension")) >= 1);
}

TEST_CASE("extract writes an endmember CSV") {
    const auto scene = work_dir() / "scene";
    const auto csv = work_dir() / "endmembers.csv";
    REQUIRE(run("extract --input " + (scene / "cube.json").string() + " --p 3 --extract kmeans" +
                " --seed 4 --output " + csv.string()) == 0);
    const hsu::Matrix refs = hsu::read_matrix_csv(csv);
    CHECK(refs.rows() == 50);
    CHECK(refs.cols() == 3);
}
