// lpcurv: solve | verify | export | spectrum
//
// Exit codes: 0 success, 2 bad input, 3 solver failure, 4 failed validation.
// LPCURV_LOG sets the log level (trace, debug, info, warn, error, off); logs go to stderr.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lpcurv/lpcurv.hpp"

namespace {

using namespace lpcurv;
using io::json;

constexpr int exit_ok = 0;
constexpr int exit_parse = 2;
constexpr int exit_solve = 3;
constexpr int exit_validation = 4;

int exit_code_for(const Error& e) {
    if (e.is_solve_failure()) return exit_solve;
    if (e.kind() == ErrorKind::LemmaViolated) return exit_validation;
    return exit_parse;
}

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("lpcurv");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::warn);
    if (const char* lvl = std::getenv("LPCURV_LOG")) {
        const auto level = spdlog::level::from_str(lvl);
        if (level == spdlog::level::off && std::string(lvl) != "off")
            spdlog::warn("LPCURV_LOG='{}' not recognized, keeping 'warn'", lvl);
        else
            spdlog::set_level(level);
    }
}

std::pair<int, int> parse_grid(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw Error(ErrorKind::ParseError, "grid must look like 64x128");
    return {io::detail::to_int(std::string_view(text).substr(0, x)), io::detail::to_int(std::string_view(text).substr(x + 1))};
}

/// Residual tolerance a verified solution must meet, relative to max(s^{p-1} f).
constexpr double verify_residual_tol = 1e-8;

bool passes(const EstimateReport& rep, bool guarantee_regime) {
    const bool residual_ok = rep.main_residual <= verify_residual_tol;
    const bool bounds_ok = !guarantee_regime || rep.bounds_pass();
    return residual_ok && rep.lemmas_pass() && bounds_ok;
}

json verdict(const EstimateReport& rep, bool guarantee_regime) {
    return {{"residual", rep.main_residual},
            {"residual_tol", verify_residual_tol},
            {"lemmas_pass", rep.lemmas_pass()},
            {"bounds_pass", rep.bounds_pass()},
            {"guarantee_regime", guarantee_regime},
            {"pass", passes(rep, guarantee_regime)}};
}

struct SolveArgs {
    std::string problem;
    int n = 2;
    int k = 1;
    double p = 1.5;
    std::string f = "preset:one";
    std::string grid = "64x128";
    bool force = false;
    std::string out = "solution.json";
    double outer_tol = 0.0;
    double damping = 0.0;
};

int run_solve(const SolveArgs& a, const CLI::App& cmd) {
    io::ProblemFile pf;
    if (!a.problem.empty()) pf = io::read_problem(a.problem);
    // explicit flags override the problem file
    if (a.problem.empty() || cmd.count("--n")) pf.n = a.n;
    if (a.problem.empty() || cmd.count("--k")) pf.k = a.k;
    if (a.problem.empty() || cmd.count("--p")) pf.p = a.p;
    if (a.problem.empty() || cmd.count("--f")) pf.f = io::DensitySpec::parse(a.f);
    if (a.problem.empty() || cmd.count("--grid")) std::tie(pf.n_theta, pf.n_phi) = parse_grid(a.grid);
    if (cmd.count("--force")) pf.force = a.force;
    if (cmd.count("--outer-tol")) pf.solver.outer_tol = a.outer_tol;
    if (cmd.count("--damping")) pf.solver.damping = a.damping;
    pf.solver.validate();

    const auto grid = pf.make_grid();
    const auto spec = pf.make_spec(grid);
    spdlog::info("solving n={} k={} p={} f={} on {}x{}", pf.n, pf.k, pf.p, pf.f.to_string(), pf.n_theta, pf.n_phi);
    const auto sol = solve_main(spec, pf.solver);
    io::write_solution(a.out, pf, sol);
    const json v = verdict(sol.diagnostics, spec.guarantee_regime);
    std::cout << json{{"out", a.out}, {"r", sol.diagnostics.r}, {"R", sol.diagnostics.R}, {"verdict", v}}.dump(2) << "\n";
    return v["pass"].get<bool>() ? exit_ok : exit_validation;
}

int run_verify(const std::string& path) {
    const auto sf = io::read_solution(path);
    const auto grid = sf.problem.make_grid();
    const auto spec = sf.problem.make_spec(grid);
    const auto s = io::field_from(grid, sf.s);
    if (!s.all_finite()) throw Error(ErrorKind::ParseError, "solution contains non-finite values");
    const auto rep = full_report(s, spec);
    const json v = verdict(rep, spec.guarantee_regime);
    std::cout << json{{"file", path}, {"report", io::report_to_json(rep)}, {"verdict", v}}.dump(2) << "\n";
    return v["pass"].get<bool>() ? exit_ok : exit_validation;
}

int run_export(const std::string& path, const std::string& format, std::string out) {
    const auto sf = io::read_solution(path);
    const auto grid = sf.problem.make_grid();
    const auto spec = sf.problem.make_spec(grid);
    const auto s = io::field_from(grid, sf.s);
    if (out.empty()) out = path.substr(0, path.rfind('.')) + "." + format;
    std::ofstream os(out);
    if (!os) throw Error(ErrorKind::InvalidArgument, "cannot write '" + out + "'");
    if (format == "obj")
        io::write_obj(os, io::embed_mesh(s));
    else
        io::write_csv(os, s, spec);
    std::cout << out << "\n";
    return exit_ok;
}

int run_spectrum(double q, const std::string& grid_text, int lmax, const std::string& out) {
    const auto [nt, np] = parse_grid(grid_text);
    const auto grid = SphericalGrid::create(nt, np);
    const auto rep = model_spectrum_check(grid, q, lmax);
    std::ostringstream table;
    table << "l,analytic,measured,abs_error,eigen_residual\n";
    for (const auto& r : rep.rows)
        table << fmt::format("{},{},{},{},{}\n", r.l, r.analytic, r.measured, r.max_error, r.eigen_residual);
    if (!out.empty()) io::write_text_file(out, table.str());
    std::cout << table.str();
    std::cout << fmt::format("# eigenvalues above one: {} (leading {})\n", rep.count_above_one, rep.leading);
    return rep.count_above_one == 1 && rep.max_error <= 1e-8 ? exit_ok : exit_validation;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Solver and estimate checker for the prescribed L_p curvature equation on the 2-sphere"};
    app.require_subcommand(1);

    SolveArgs sa;
    auto* solve = app.add_subcommand("solve", "solve and write a solution file");
    solve->add_option("--problem", sa.problem, "problem JSON file")->check(CLI::ExistingFile);
    solve->add_option("--n", sa.n, "sphere dimension (2)");
    solve->add_option("--k", sa.k, "curvature order, 1 <= k < n");
    solve->add_option("--p", sa.p, "exponent p");
    solve->add_option("--f", sa.f, "density: preset:one | harmonics:[(l,m,a),...] | manufactured:ellipsoid(a,b,c)");
    solve->add_option("--grid", sa.grid, "n_theta x n_phi, e.g. 64x128");
    solve->add_flag("--force", sa.force, "allow p outside 1 < p < k+1");
    solve->add_option("--out", sa.out, "solution file");
    solve->add_option("--outer-tol", sa.outer_tol, "fixed-point tolerance");
    solve->add_option("--damping", sa.damping, "Picard weight in (0, 1]");

    std::string verify_path;
    auto* verify = app.add_subcommand("verify", "recompute residual and estimates from a solution file");
    verify->add_option("solution", verify_path, "solution JSON")->required();

    std::string export_path, export_format = "obj", export_out;
    auto* exp = app.add_subcommand("export", "write an OBJ mesh or CSV table");
    exp->add_option("solution", export_path, "solution JSON")->required();
    exp->add_option("--format", export_format, "obj or csv")->check(CLI::IsMember({"obj", "csv"}));
    exp->add_option("--out", export_out, "output path");

    double q = 1.5;
    std::string spec_grid = "16x32", spec_out;
    int spec_lmax = 4;
    auto* spectrum = app.add_subcommand("spectrum", "eigenvalues of the linearized fixed-point map at t = 0");
    spectrum->add_option("--q", q, "exponent q = (p-1)/k + 1");
    spectrum->add_option("--grid", spec_grid, "n_theta x n_phi");
    spectrum->add_option("--lmax", spec_lmax, "largest degree tabulated");
    spectrum->add_option("--out", spec_out, "CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_parse;
    }

    try {
        if (*solve) return run_solve(sa, *solve);
        if (*verify) return run_verify(verify_path);
        if (*exp) return run_export(export_path, export_format, export_out);
        if (*spectrum) return run_spectrum(q, spec_grid, spec_lmax, spec_out);
    } catch (const Error& e) {
        std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << e.what() << "\n";
        return exit_solve;
    }
    return exit_parse;
}
