// triflow: three-wire unbalanced power flow, formulation cross-checks
// and SDP relaxation export.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "triflow/bounds.hpp"
#include "triflow/feasibility.hpp"
#include "triflow/ingest.hpp"
#include "triflow/manifest.hpp"
#include "triflow/reportio.hpp"
#include "triflow/residuals.hpp"
#include "triflow/sdpexport.hpp"
#include "triflow/solver.hpp"

namespace {

using namespace triflow;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInconsistent = 3;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::input, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spill(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::input, "cannot write " + path);
    out << content;
}

std::string guess_format(const std::string& path, const std::string& requested) {
    if (!requested.empty()) return requested;
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".dss") return "dss";
    return "native";
}

Network load_network(const std::string& path, const std::string& format, double frequency) {
    const std::string text = slurp(path);
    ParseResult result;
    if (format == "dss") {
        DssOptions opts;
        opts.frequency = frequency;
        result = parse_dss_subset(text, opts);
    } else {
        result = parse_native(text);
    }
    for (const auto& d : result.diagnostics)
        if (d.severity == ParseDiagnostic::Severity::warning)
            std::cerr << "warning line " << d.line << ": " << d.message << "\n";
    if (!result.ok())
        throw Error(ErrorKind::input, path + ":\n" + result.diagnostics_text());
    return std::move(*result.network);
}

ToleranceProfile resolve_profile(const std::string& flag_value) {
    std::string name = flag_value;
    if (name.empty()) {
        if (const char* env = std::getenv("TRIFLOW_PROFILE")) name = env;
    }
    auto profile = ToleranceProfile::named(name);
    if (!profile) throw Error(ErrorKind::input, "unknown tolerance profile '" + name + "'");
    return *profile;
}

int run_solve(const std::string& input, const std::string& format, const std::string& method,
              double tol, int max_iter, double frequency, const std::string& out) {
    const Network net = load_network(input, guess_format(input, format), frequency);
    SolveOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    SolveResult result =
        method == "sweep" ? solve_sweep(net, opts) : solve_newton(net, opts);

    std::ostringstream optstr;
    optstr << "--method " << method << " --tol " << tol << " --max-iter " << max_iter;
    const RunManifest manifest =
        RunManifest::make(input, slurp(input), "solve", optstr.str());
    const std::string text =
        write_solution(net, result.state, result.trace, result.converged, manifest);
    if (out.empty())
        std::cout << text;
    else
        spill(out, text);

    for (std::size_t k = 0; k < result.trace.residual_norms.size(); ++k)
        std::cerr << "trace " << k << " " << result.trace.residual_norms[k] << "\n";
    std::cerr << "solve: " << (result.converged ? "converged" : "did not converge") << " in "
              << result.trace.iterations() << " iterations";
    if (!result.trace.residual_norms.empty())
        std::cerr << ", residual " << result.trace.residual_norms.back();
    std::cerr << "\n";
    return result.converged ? kExitOk : kExitNumerical;
}

int run_check(const std::string& input, const std::string& solution, const std::string& format,
              const std::string& profile_name, double frequency, const std::string& out) {
    const Network net = load_network(input, guess_format(input, format), frequency);
    const Network pu = net.unit_system == UnitSystem::si ? to_per_unit(net) : net;
    const IVState state = read_solution(slurp(solution), pu);
    const ToleranceProfile profile = resolve_profile(profile_name);

    const ConsistencyReport report = cross_validate(pu, state, profile);
    const RunManifest manifest = RunManifest::make(input, slurp(input), "check", profile_name);
    const std::string text = write_report(report, manifest);
    if (out.empty())
        std::cout << text;
    else
        spill(out, text);
    return report.consistent ? kExitOk : kExitInconsistent;
}

int run_lift(const std::string& input, const std::string& solution, const std::string& format,
             double frequency, const std::string& out) {
    const Network net = load_network(input, guess_format(input, format), frequency);
    const Network pu = net.unit_system == UnitSystem::si ? to_per_unit(net) : net;
    const IVState state = read_solution(slurp(solution), pu);
    const LiftedState lifted = lift(pu, state);
    const RunManifest manifest = RunManifest::make(input, slurp(input), "lift", "");
    const std::string text = write_lifted_file(pu, lifted, manifest);
    if (out.empty())
        std::cout << text;
    else
        spill(out, text);
    return kExitOk;
}

int run_export(const std::string& input, const std::string& format, const std::string& relaxation,
               const std::string& objective_name, double frequency, const std::string& out) {
    const Network net = load_network(input, guess_format(input, format), frequency);
    const SdpObjective objective = objective_name == "min_losses"
                                       ? SdpObjective::min_losses
                                       : SdpObjective::min_total_injection;
    const ConicProblem problem =
        relaxation == "bim" ? build_bim_sdp(net, objective) : build_bfm_sdp(net, objective);
    // Conic exports stay byte-reproducible, so the embedded manifest
    // carries no timestamp line.
    const RunManifest manifest = RunManifest::make(
        input, slurp(input), "export", "--relaxation " + relaxation + " --objective " + objective_name);
    const std::string stamp = "* manifest input=" + manifest.input_path +
                              " sha256=" + manifest.content_sha256 + " command=export options=\"" +
                              manifest.options + "\" version=" + manifest.version + "\n";
    const std::string sdpa = stamp + write_sdpa(problem);
    std::string map = write_index_map(problem);
    map.insert(map.find('\n') + 1, "# manifest input=" + manifest.input_path +
                                       " sha256=" + manifest.content_sha256 +
                                       " version=" + manifest.version + "\n");
    if (out.empty()) {
        std::cout << sdpa;
    } else {
        spill(out, sdpa);
        spill(out + ".map", map);
    }
    std::cerr << "export: " << problem.blocks.size() << " psd blocks, " << problem.rows.size()
              << " rows (" << problem.count_equalities() << " eq, " << problem.count_inequalities()
              << " ineq), " << problem.vars.size() << " variables\n";
    return kExitOk;
}

int run_convert(const std::string& input, const std::string& from, const std::string& to,
                double frequency, const std::string& out) {
    if (to != "native") throw Error(ErrorKind::input, "only --to native is supported");
    const Network net = load_network(input, guess_format(input, from), frequency);
    const std::string text = write_native(net);
    if (out.empty())
        std::cout << text;
    else
        spill(out, text);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-wire unbalanced power flow toolkit"};
    app.require_subcommand(1);

    std::string input, solution, out, format, method = "newton", profile, relaxation = "bfm";
    std::string objective = "min_total_injection", from, to = "native";
    double tol = 1e-10, frequency = 50.0;
    int max_iter = 50;

    CLI::App* solve = app.add_subcommand("solve", "solve unbalanced power flow");
    solve->add_option("input", input)->required();
    solve->add_option("--format", format)->check(CLI::IsMember({"native", "dss"}));
    solve->add_option("--method", method)->check(CLI::IsMember({"newton", "sweep"}));
    solve->add_option("--tol", tol);
    solve->add_option("--max-iter", max_iter);
    solve->add_option("--frequency", frequency);
    solve->add_option("--out", out);

    CLI::App* check = app.add_subcommand("check", "cross-validate a solution across formulations");
    check->add_option("input", input)->required();
    check->add_option("solution", solution)->required();
    check->add_option("--format", format)->check(CLI::IsMember({"native", "dss"}));
    check->add_option("--profile", profile);
    check->add_option("--frequency", frequency);
    check->add_option("--out", out);

    CLI::App* lift_cmd = app.add_subcommand("lift", "lift a solution into the SDP variable space");
    lift_cmd->add_option("input", input)->required();
    lift_cmd->add_option("solution", solution)->required();
    lift_cmd->add_option("--format", format)->check(CLI::IsMember({"native", "dss"}));
    lift_cmd->add_option("--frequency", frequency);
    lift_cmd->add_option("--out", out);

    CLI::App* export_cmd = app.add_subcommand("export", "emit the rank-dropped SDP relaxation");
    export_cmd->add_option("input", input)->required();
    export_cmd->add_option("--format", format)->check(CLI::IsMember({"native", "dss"}));
    export_cmd->add_option("--relaxation", relaxation)->check(CLI::IsMember({"bfm", "bim"}));
    export_cmd->add_option("--objective", objective)
        ->check(CLI::IsMember({"min_total_injection", "min_losses"}));
    export_cmd->add_option("--frequency", frequency);
    export_cmd->add_option("--out", out);

    CLI::App* convert = app.add_subcommand("convert", "convert between network formats");
    convert->add_option("input", input)->required();
    convert->add_option("--from", from)->check(CLI::IsMember({"native", "dss"}));
    convert->add_option("--to", to)->check(CLI::IsMember({"native"}));
    convert->add_option("--frequency", frequency);
    convert->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    }

    try {
        if (solve->parsed()) return run_solve(input, format, method, tol, max_iter, frequency, out);
        if (check->parsed()) return run_check(input, solution, format, profile, frequency, out);
        if (lift_cmd->parsed()) return run_lift(input, solution, format, frequency, out);
        if (export_cmd->parsed())
            return run_export(input, format, relaxation, objective, frequency, out);
        if (convert->parsed()) return run_convert(input, from, to, frequency, out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::input ? kExitInput : kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
