#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "triflow/ingest.hpp"
#include "triflow/reportio.hpp"
#include "triflow/solver.hpp"

using namespace triflow;
namespace fs = std::filesystem;

namespace {

const std::string kCli = TRIFLOW_CLI_PATH;
const std::string kFixtures = TRIFLOW_FIXTURE_DIR;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

fs::path scratch_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "triflow_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run_cli(const std::string& args) {
    const fs::path out = scratch_dir() / "stdout.txt";
    const fs::path err = scratch_dir() / "stderr.txt";
    const std::string cmd = kCli + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream o(out), e(err);
    std::ostringstream so, se;
    so << o.rdbuf();
    se << e.rdbuf();
    r.out = so.str();
    r.err = se.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("solve writes a solution file and exits 0 on convergence") {
    const fs::path sol = scratch_dir() / "case2.sol";
    RunResult r = run_cli("solve " + kFixtures + "/case2_bal.net --out " + sol.string());
    CHECK(r.exit_code == 0);
    const std::string text = slurp(sol);
    CHECK(text.find("bus sourcebus") != std::string::npos);
    CHECK(text.find("bus loadbus") != std::string::npos);
    CHECK(text.find("converged 1") != std::string::npos);
    CHECK(text.find("# manifest") != std::string::npos);
}

TEST_CASE("solve on a meshed network with the sweep method is an input error") {
    RunResult r = run_cli("solve " + kFixtures + "/case4_mesh.net --method sweep");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("radial") != std::string::npos);
}

TEST_CASE("unreachable tolerance exits 2") {
    RunResult r = run_cli("solve " + kFixtures + "/case3_unbal.net --tol 1e-30 --max-iter 1 --out " +
                          (scratch_dir() / "junk.sol").string());
    CHECK(r.exit_code == 2);
}

TEST_CASE("check: consistent solution exits 0, corrupted solution exits 3") {
    const fs::path sol = scratch_dir() / "check.sol";
    REQUIRE(run_cli("solve " + kFixtures + "/case2_bal.net --out " + sol.string()).exit_code == 0);
    CHECK(run_cli("check " + kFixtures + "/case2_bal.net " + sol.string()).exit_code == 0);

    // corrupt one voltage by 1e-3 pu through the library writer
    ParseResult pr = parse_native(slurp(kFixtures + "/case2_bal.net"));
    REQUIRE(pr.ok());
    Network pu = to_per_unit(*pr.network);
    IVState s = read_solution(slurp(sol), pu);
    s.v[1][0] += 1e-3;
    const fs::path bad = scratch_dir() / "check_bad.sol";
    {
        std::ofstream out(bad);
        out << write_solution(pu, s, SolveTrace{}, true,
                              RunManifest::make("x", "", "solve", ""));
    }
    RunResult r = run_cli("check " + kFixtures + "/case2_bal.net " + bad.string());
    CHECK(r.exit_code == 3);
    CHECK(r.out.find("verdict inconsistent") != std::string::npos);
}

TEST_CASE("check honours the TRIFLOW_PROFILE environment variable") {
    const fs::path sol = scratch_dir() / "profile.sol";
    REQUIRE(run_cli("solve " + kFixtures + "/case2_bal.net --out " + sol.string()).exit_code == 0);
    RunResult r = run_cli("check " + kFixtures + "/case2_bal.net " + sol.string());
    CHECK(r.exit_code == 0);
    const std::string cmd = "TRIFLOW_PROFILE=nonsense " + kCli + " check " + kFixtures +
                            "/case2_bal.net " + sol.string() + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 1);
}

TEST_CASE("lift emits rank and psd summaries") {
    const fs::path sol = scratch_dir() / "lift.sol";
    REQUIRE(run_cli("solve " + kFixtures + "/case2_bal.net --out " + sol.string()).exit_code == 0);
    const fs::path lifted = scratch_dir() / "lift.out";
    RunResult r = run_cli("lift " + kFixtures + "/case2_bal.net " + sol.string() + " --out " +
                          lifted.string());
    CHECK(r.exit_code == 0);
    const std::string text = slurp(lifted);
    CHECK(text.find("summary worst_rank") != std::string::npos);
    // rank residuals of an exact lift stay tiny
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.rfind("summary", 0) == 0) {
            std::istringstream ls(line);
            std::string word;
            double worst_rank = 1.0, worst_psd = 1.0;
            ls >> word >> word >> worst_rank >> word >> worst_psd;
            CHECK(worst_rank < 1e-10);
            CHECK(worst_psd < 1e-10);
        }
    }
}

TEST_CASE("lift with a mismatched solution is an input error") {
    const fs::path sol = scratch_dir() / "mismatch.sol";
    REQUIRE(run_cli("solve " + kFixtures + "/case2_bal.net --out " + sol.string()).exit_code == 0);
    RunResult r = run_cli("lift " + kFixtures + "/case3_unbal.net " + sol.string());
    CHECK(r.exit_code == 1);
}

TEST_CASE("export writes the conic file plus sidecar deterministically") {
    const fs::path out1 = scratch_dir() / "case2a.dat-s";
    const fs::path out2 = scratch_dir() / "case2b.dat-s";
    CHECK(run_cli("export " + kFixtures + "/case2_bal.net --out " + out1.string()).exit_code == 0);
    CHECK(run_cli("export " + kFixtures + "/case2_bal.net --out " + out2.string()).exit_code == 0);
    CHECK(slurp(out1) == slurp(out2));
    CHECK(fs::exists(out1.string() + ".map"));
    // two psd blocks declared for the two-bus fixture
    std::istringstream is(slurp(out1));
    std::string line;
    int noncomment = 0;
    int positive_blocks = 0;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '*') continue;
        ++noncomment;
        if (noncomment == 3) {
            std::istringstream bs(line);
            int v;
            while (bs >> v)
                if (v > 0) ++positive_blocks;
            break;
        }
    }
    CHECK(positive_blocks == 2);
}

TEST_CASE("export of a meshed network with the branch-flow relaxation fails") {
    RunResult r = run_cli("export " + kFixtures + "/case4_mesh.net --relaxation bfm");
    CHECK(r.exit_code == 1);
    RunResult bim = run_cli("export " + kFixtures + "/case4_mesh.net --relaxation bim --out " +
                            (scratch_dir() / "mesh.dat-s").string());
    CHECK(bim.exit_code == 0);
}

TEST_CASE("convert: dss to native preserves the solved voltages") {
    const fs::path native = scratch_dir() / "feeder_min.net";
    RunResult conv = run_cli("convert " + kFixtures + "/feeder_min.dss --from dss --to native --out " +
                             native.string());
    REQUIRE(conv.exit_code == 0);

    ParseResult from_dss = parse_dss_subset(slurp(kFixtures + "/feeder_min.dss"));
    REQUIRE(from_dss.ok());
    ParseResult from_native = parse_native(slurp(native));
    REQUIRE_MESSAGE(from_native.ok(), from_native.diagnostics_text());

    SolveResult a = solve_newton(*from_dss.network);
    SolveResult b = solve_newton(*from_native.network);
    REQUIRE(a.converged);
    REQUIRE(b.converged);
    for (std::size_t k = 0; k < a.state.v.size(); ++k)
        for (int p = 0; p < a.state.v[k].size(); ++p)
            CHECK(std::abs(a.state.v[k][p] - b.state.v[k][p]) < 1e-10 * 230.94);
}

TEST_CASE("convert: unsupported dss elements carry a line number") {
    RunResult r = run_cli("convert " + kFixtures + "/feeder_unsupported.dss --from dss --to native");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("line 2") != std::string::npos);
    CHECK(r.err.find("unsupported element") != std::string::npos);
}

TEST_CASE("convert: native to native is idempotent") {
    const fs::path once = scratch_dir() / "idem1.net";
    const fs::path twice = scratch_dir() / "idem2.net";
    REQUIRE(run_cli("convert " + kFixtures + "/case3_unbal.net --out " + once.string()).exit_code == 0);
    REQUIRE(run_cli("convert " + once.string() + " --out " + twice.string()).exit_code == 0);
    CHECK(slurp(once) == slurp(twice));
}

TEST_CASE("re-running solve reproduces the payload bytes") {
    const fs::path s1 = scratch_dir() / "repro1.sol";
    const fs::path s2 = scratch_dir() / "repro2.sol";
    REQUIRE(run_cli("solve " + kFixtures + "/case3_unbal.net --out " + s1.string()).exit_code == 0);
    REQUIRE(run_cli("solve " + kFixtures + "/case3_unbal.net --out " + s2.string()).exit_code == 0);
    CHECK(reproducible_payload(slurp(s1)) == reproducible_payload(slurp(s2)));
}

TEST_CASE("solve reads dss input directly and honours the sweep method") {
    const fs::path sol_newton = scratch_dir() / "dss_newton.sol";
    const fs::path sol_sweep = scratch_dir() / "dss_sweep.sol";
    CHECK(run_cli("solve " + kFixtures + "/feeder_min.dss --out " + sol_newton.string()).exit_code == 0);
    CHECK(run_cli("solve " + kFixtures + "/feeder_min.dss --format dss --method sweep --out " +
                  sol_sweep.string())
              .exit_code == 0);
    // both methods report the same load-bus voltage in the files
    ParseResult pr = parse_dss_subset(slurp(kFixtures + "/feeder_min.dss"));
    REQUIRE(pr.ok());
    Network pu = to_per_unit(*pr.network);
    IVState a = read_solution(slurp(sol_newton), pu);
    IVState b = read_solution(slurp(sol_sweep), pu);
    for (std::size_t k = 0; k < a.v.size(); ++k)
        for (int p = 0; p < a.v[k].size(); ++p) CHECK(std::abs(a.v[k][p] - b.v[k][p]) < 1e-8);
}

TEST_CASE("bad input paths and unreadable files exit 1") {
    CHECK(run_cli("solve /nonexistent/net.net").exit_code == 1);
    CHECK(run_cli("check " + kFixtures + "/case2_bal.net /nonexistent.sol").exit_code == 1);
}
