#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ks/cli.hpp"

using namespace ks;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("ks_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string write_config(const fs::path& dir, const std::string& body) {
    const fs::path p = dir / "run.ini";
    std::ofstream out(p);
    out << body;
    return p.string();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ostringstream g_err;

} // namespace

TEST_CASE("config parsing, overrides, canonical fingerprint") {
    RunConfig a = RunConfig::parse("[kernel]\nfamily = fractional\ns = 0.5\n[run]\nseed = 1\n");
    RunConfig b = RunConfig::parse("[run]\nseed = 1\n[kernel]\ns = 0.5\nfamily = fractional # c\n");
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.get("kernel", "family") == "fractional");
    CHECK(a.get_double("kernel", "s") == 0.5);

    a.apply_override("kernel.s=0.75");
    CHECK(a.get_double("kernel", "s") == 0.75);
    CHECK(a.fingerprint() != b.fingerprint());

    CHECK_THROWS_AS(RunConfig::parse("key = 1\n"), Error);          // key outside section
    CHECK_THROWS_AS(RunConfig::parse("[s]\nnokey\n"), Error);       // no equals
    CHECK_THROWS_AS(a.get("kernel", "missing"), Error);
    CHECK_THROWS_AS(a.apply_override("noseparator"), Error);
}

TEST_CASE("kernel-check task: pass and validation failure") {
    const fs::path dir = temp_dir("kcheck");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = fractional\ns = 0.5\ndimension = 2\n"
        "[output]\ndir = " + (dir / "out").string() + "\n");
    CHECK(run_task("kernel-check", cfg, {}, g_err) == 0);
    CHECK(fs::exists(dir / "out" / "kernel_check.csv"));
    CHECK(fs::exists(dir / "out" / "manifest.txt"));

    // s = 1.0 fails the integrability condition -> exit 2, near-origin named
    CHECK(run_task("kernel-check", cfg, {"kernel.s=1.0"}, g_err) == 2);
    const std::string csv = slurp(dir / "out" / "kernel_check.csv");
    CHECK(csv.find("near-origin") != std::string::npos);
}

TEST_CASE("exponent task emits the l_infinity class") {
    const fs::path dir = temp_dir("expo");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = log_corrected\ns0 = 0.5\nsigma = -1.0\ndimension = 2\n"
        "[task]\nr_min = 2e-7\npoints = 97\n"
        "[output]\ndir = " + (dir / "out").string() + "\n");
    CHECK(run_task("exponent", cfg, {}, g_err) == 0);
    const std::string csv = slurp(dir / "out" / "exponent.csv");
    CHECK(csv.find("Zero") != std::string::npos);
    CHECK(fs::exists(dir / "out" / "tail_slopes.csv"));

    CHECK(run_task("exponent", cfg, {"kernel.sigma=1.0"}, g_err) == 0);
    CHECK(slurp(dir / "out" / "exponent.csv").find("Infinite") != std::string::npos);
}

TEST_CASE("solve task is deterministic byte for byte") {
    const fs::path dir = temp_dir("solve");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = fractional\ns = 0.5\ndimension = 2\n"
        "[domain]\nshape = square\nsize = 1.0\nresolution = 9\n"
        "[task]\nname = solve\np = 3.0\nmethod = nehari\ngrad_tol = 1e-8\n"
        "[run]\nseed = 42\n"
        "[output]\ndir = " + (dir / "out1").string() + "\n");
    CHECK(run_task("solve", cfg, {}, g_err) == 0);
    CHECK(run_task("solve", cfg, {"output.dir=" + (dir / "out2").string()}, g_err) == 0);

    CHECK(slurp(dir / "out1" / "solution.csv") == slurp(dir / "out2" / "solution.csv"));
    CHECK(slurp(dir / "out1" / "run_summary.csv") == slurp(dir / "out2" / "run_summary.csv"));
    CHECK(!slurp(dir / "out1" / "solution.csv").empty());
}

TEST_CASE("solve rejects supercritical p without the override") {
    const fs::path dir = temp_dir("super");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = fractional\ns = 0.5\ndimension = 2\n"
        "[domain]\nresolution = 7\n"
        "[task]\np = 5.0\ngrad_tol = 1e-6\n"
        "[output]\ndir = " + (dir / "out").string() + "\n");
    CHECK(run_task("solve", cfg, {}, g_err) == 2);  // p >= 2*(s0_hi) = 4
    CHECK(run_task("solve", cfg, {"task.allow_supercritical=on"}, g_err) == 0);
}

TEST_CASE("assemble task caches and validates the fingerprint") {
    const fs::path dir = temp_dir("cache");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = fractional\ns = 0.5\ndimension = 2\n"
        "[domain]\nresolution = 7\n"
        "[run]\ncache = on\n"
        "[output]\ndir = " + (dir / "out").string() + "\n");
    CHECK(run_task("assemble", cfg, {}, g_err) == 0);
    const fs::path cache = dir / "out" / "cache";
    REQUIRE(fs::exists(cache));
    int files = 0;
    fs::path mtx;
    for (const auto& e : fs::directory_iterator(cache))
        if (e.path().extension() == ".mtx") {
            ++files;
            mtx = e.path();
        }
    CHECK(files == 1);

    // second run hits the cache and matches
    const std::string summary1 = slurp(dir / "out" / "assemble_summary.csv");
    CHECK(run_task("assemble", cfg, {}, g_err) == 0);
    CHECK(slurp(dir / "out" / "assemble_summary.csv") == summary1);

    // corrupt the cache payload: checksum must reject it
    {
        std::fstream f(mtx, std::ios::in | std::ios::out);
        f.seekp(-20, std::ios::end);
        f << "0";
    }
    CHECK(run_task("assemble", cfg, {}, g_err) == 2);
}

TEST_CASE("matrix cache round-trips and rejects stale fingerprints") {
    const GridPtr g = make_domain(DomainShape::square, 1.0, 5);
    const KernelSpec k = KernelSpec::fractional(0.5, 2);
    const AssemblyConfig acfg;
    const StiffnessMatrix S = assemble_stiffness(g, k, acfg);
    const fs::path dir = temp_dir("mtx");
    const std::string path = (dir / "m.mtx").string();
    save_matrix_cache(path, S);
    const StiffnessMatrix L = load_matrix_cache(path, S.fingerprint, g, acfg, k.describe());
    CHECK((L.A - S.A).cwiseAbs().maxCoeff() == 0.0);  // %.17g round-trip

    try {
        load_matrix_cache(path, "deadbeef", g, acfg, k.describe());
        FAIL("expected fingerprint mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == errc::cache_fingerprint_mismatch);
    }
}

TEST_CASE("sweep and probe tasks produce artifacts") {
    const fs::path dir = temp_dir("sweep");
    const std::string cfg = write_config(dir,
        "[kernel]\nfamily = fractional\ns = 0.5\ndimension = 2\n"
        "[domain]\nresolution = 9\n"
        "[task]\nresolutions = 5,9\nq_list = 1,2\nrho_cells = 2\nsamples = 3\n"
        "widths = 0.4,0.2\nq = 2\n"
        "[output]\ndir = " + (dir / "out").string() + "\n");
    CHECK(run_task("sweep", cfg, {}, g_err) == 0);
    CHECK(fs::exists(dir / "out" / "sweep.csv"));
    CHECK(fs::exists(dir / "out" / "plot_cq.csv"));

    CHECK(run_task("probe", cfg, {}, g_err) == 0);
    CHECK(fs::exists(dir / "out" / "compactness.csv"));
    CHECK(fs::exists(dir / "out" / "concentration.csv"));
    const std::string comp = slurp(dir / "out" / "compactness.csv");
    CHECK(comp.find(",0\n") == std::string::npos);  // no failing samples
}

TEST_CASE("unknown task and broken config exit with validation code") {
    const fs::path dir = temp_dir("bad");
    const std::string cfg = write_config(dir, "[kernel]\nfamily = fractional\ns = 0.5\n");
    CHECK(run_task("nonsense", cfg, {}, g_err) == 2);
    CHECK(run_task("kernel-check", (dir / "missing.ini").string(), {}, g_err) == 2);
    const std::string broken = write_config(dir, "[kernel\nfamily=fractional\n");
    CHECK(run_task("kernel-check", broken, {}, g_err) == 2);
}
