#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include "lpcurv/bodies.hpp"
#include "lpcurv/convex_geom.hpp"
#include "lpcurv/errors.hpp"
#include "lpcurv/homotopy.hpp"
#include "lpcurv/pde_core.hpp"
#include "lpcurv/sphere_grid.hpp"
#include "lpcurv/validators.hpp"

namespace lpcurv::io {

using json = nlohmann::json;

inline constexpr int problem_major_version = 1;
inline constexpr int solution_major_version = 1;
inline constexpr const char* format_version = "1.0";
inline constexpr const char* csv_header = "theta,phi,s,lambda1,lambda2,residual";

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double to_double(std::string_view s) {
    s = trim(s);
    double x = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw Error(ErrorKind::ParseError, "not a number: '" + std::string(s) + "'");
    return x;
}

inline int to_int(std::string_view s) {
    s = trim(s);
    int x = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw Error(ErrorKind::ParseError, "not an integer: '" + std::string(s) + "'");
    return x;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline std::string_view strip_enclosing(std::string_view s, char open, char close) {
    s = trim(s);
    if (s.size() < 2 || s.front() != open || s.back() != close)
        throw Error(ErrorKind::ParseError, std::string("expected '") + open + "...'" + close + "' in '" + std::string(s) + "'");
    return s.substr(1, s.size() - 2);
}

}  // namespace detail

struct HarmonicTerm {
    int l = 0;
    int m = 0;  ///< m >= 0: cos(mφ) harmonic; m < 0: sin(|m|φ)
    double a = 0.0;
};

/// Density description. Harmonics mean f = 1 + Σ a Y_lm with real harmonics normalized to
/// ∫ Y^2 = 4π.
struct DensitySpec {
    enum class Kind { Preset, Harmonics, Manufactured };
    Kind kind = Kind::Preset;
    std::string preset = "one";
    std::vector<HarmonicTerm> terms;
    Ellipsoid body;

    static DensitySpec parse(std::string_view text) {
        using namespace detail;
        text = trim(text);
        DensitySpec d;
        const auto colon = text.find(':');
        const std::string_view head = trim(text.substr(0, colon));
        const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : trim(text.substr(colon + 1));
        if (head == "preset" || (colon == std::string_view::npos && head == "one")) {
            d.kind = Kind::Preset;
            d.preset = std::string(colon == std::string_view::npos ? head : rest);
            if (d.preset != "one") throw Error(ErrorKind::ParseError, "unknown preset '" + d.preset + "'");
        } else if (head == "harmonics") {
            d.kind = Kind::Harmonics;
            const auto inner = trim(strip_enclosing(rest, '[', ']'));
            if (!inner.empty()) {
                // split on the commas between ')' and '('
                std::size_t depth = 0, start = 0;
                for (std::size_t i = 0; i <= inner.size(); ++i) {
                    if (i < inner.size() && inner[i] == '(') ++depth;
                    if (i < inner.size() && inner[i] == ')') --depth;
                    if (i == inner.size() || (inner[i] == ',' && depth == 0)) {
                        const auto parts = split(strip_enclosing(inner.substr(start, i - start), '(', ')'), ',');
                        if (parts.size() != 3) throw Error(ErrorKind::ParseError, "harmonic term needs (l, m, a)");
                        d.terms.push_back({to_int(parts[0]), to_int(parts[1]), to_double(parts[2])});
                        start = i + 1;
                    }
                }
            }
        } else if (head == "manufactured") {
            d.kind = Kind::Manufactured;
            if (!rest.starts_with("ellipsoid")) throw Error(ErrorKind::ParseError, "manufactured body must be ellipsoid(a,b,c)");
            const auto parts = split(strip_enclosing(rest.substr(9), '(', ')'), ',');
            if (parts.size() != 3) throw Error(ErrorKind::ParseError, "ellipsoid needs three semi-axes");
            d.body.axes = {to_double(parts[0]), to_double(parts[1]), to_double(parts[2])};
        } else {
            throw Error(ErrorKind::ParseError, "unknown density '" + std::string(text) + "'");
        }
        d.check();
        return d;
    }

    void check() const {
        if (kind == Kind::Harmonics) {
            for (const auto& t : terms) {
                if (t.l < 0 || std::abs(t.m) > t.l)
                    throw Error(ErrorKind::ParseError, fmt::format("invalid harmonic index (l, m) = ({}, {})", t.l, t.m));
                if (t.l % 2 != 0)
                    throw Error(ErrorKind::ParseError, fmt::format("odd degree l = {} would make f non-even", t.l));
                if (!std::isfinite(t.a)) throw Error(ErrorKind::ParseError, "non-finite harmonic coefficient");
            }
        }
        if (kind == Kind::Manufactured && !(body.axes.minCoeff() > 0.0 && body.axes.allFinite()))
            throw Error(ErrorKind::ParseError, "ellipsoid semi-axes must be positive");
    }

    std::string to_string() const {
        switch (kind) {
            case Kind::Preset: return "preset:" + preset;
            case Kind::Harmonics: {
                std::string s = "harmonics:[";
                for (std::size_t i = 0; i < terms.size(); ++i)
                    s += fmt::format("{}({},{},{})", i ? "," : "", terms[i].l, terms[i].m, terms[i].a);
                return s + "]";
            }
            case Kind::Manufactured:
                return fmt::format("manufactured:ellipsoid({},{},{})", body.axes[0], body.axes[1], body.axes[2]);
        }
        return {};
    }

    /// Nodal values of f. Throws InvalidArgument if f is not positive on the grid.
    ScalarField evaluate(const GridPtr& grid, double p, int k) const {
        ScalarField f(grid, 1.0);
        if (kind == Kind::Harmonics) {
            auto c = SpectralCoeffs::zero(grid->lmax());
            const double norm = std::sqrt(4.0 * std::numbers::pi);
            for (const auto& t : terms) {
                if (t.l > grid->lmax())
                    throw Error(ErrorKind::ParseError, fmt::format("degree {} exceeds the grid's lmax {}", t.l, grid->lmax()));
                (t.m >= 0 ? c.cos(t.l, t.m) : c.sin(t.l, -t.m)) += norm * t.a;
            }
            c.cos(0, 0) += norm;
            f = synthesize(grid, c);
        } else if (kind == Kind::Manufactured) {
            f = body.manufactured_density(grid, p, k);
        }
        if (!(f.min() > 0.0))
            throw Error(ErrorKind::InvalidArgument, fmt::format("density is not positive on the grid (min = {})", f.min()));
        return symmetrize_even(f);
    }
};

inline void to_json(json& j, const DensitySpec& d) {
    switch (d.kind) {
        case DensitySpec::Kind::Preset: j = {{"preset", d.preset}}; break;
        case DensitySpec::Kind::Harmonics: {
            json terms = json::array();
            for (const auto& t : d.terms) terms.push_back({t.l, t.m, t.a});
            j = {{"harmonics", terms}};
            break;
        }
        case DensitySpec::Kind::Manufactured:
            j = {{"manufactured", {{"ellipsoid", {d.body.axes[0], d.body.axes[1], d.body.axes[2]}}}}};
            break;
    }
}

inline void from_json(const json& j, DensitySpec& d) {
    if (j.is_string()) {
        d = DensitySpec::parse(j.get<std::string>());
        return;
    }
    d = DensitySpec{};
    if (j.contains("preset")) {
        d.kind = DensitySpec::Kind::Preset;
        d.preset = j.at("preset").get<std::string>();
        if (d.preset != "one") throw Error(ErrorKind::ParseError, "unknown preset '" + d.preset + "'");
    } else if (j.contains("harmonics")) {
        d.kind = DensitySpec::Kind::Harmonics;
        for (const auto& t : j.at("harmonics")) {
            if (!t.is_array() || t.size() != 3) throw Error(ErrorKind::ParseError, "harmonic term needs [l, m, a]");
            d.terms.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<double>()});
        }
    } else if (j.contains("manufactured")) {
        d.kind = DensitySpec::Kind::Manufactured;
        const auto& ax = j.at("manufactured").at("ellipsoid");
        if (!ax.is_array() || ax.size() != 3) throw Error(ErrorKind::ParseError, "ellipsoid needs three semi-axes");
        d.body.axes = {ax[0].get<double>(), ax[1].get<double>(), ax[2].get<double>()};
    } else {
        throw Error(ErrorKind::ParseError, "density needs one of preset, harmonics, manufactured");
    }
    d.check();
}

/// Everything needed to reproduce a solve.
struct ProblemFile {
    int n = 2;
    int k = 1;
    double p = 1.5;
    DensitySpec f;
    int n_theta = 64;
    int n_phi = 128;
    HomotopyConfig solver;
    bool force = false;

    GridPtr make_grid() const { return SphericalGrid::create(n_theta, n_phi); }

    ProblemSpec make_spec(const GridPtr& grid) const {
        if (n != 2) throw Error(ErrorKind::InvalidArgument, "only n = 2 is supported");
        return ProblemSpec::create(f.evaluate(grid, p, k), k, p, force);
    }
};

inline json solver_to_json(const HomotopyConfig& c) {
    return {{"initial_t_step", c.initial_t_step}, {"min_t_step", c.min_t_step},   {"damping", c.damping},
            {"outer_tol", c.outer_tol},           {"intermediate_tol", c.intermediate_tol},
            {"max_outer_iters", c.max_outer_iters}, {"max_newton_iters", c.max_newton_iters},
            {"newton_tol", c.inner.newton_tol},   {"inner_min_step", c.inner.min_step}};
}

inline HomotopyConfig solver_from_json(const json& j) {
    HomotopyConfig c;
    c.initial_t_step = j.value("initial_t_step", c.initial_t_step);
    c.min_t_step = j.value("min_t_step", c.min_t_step);
    c.damping = j.value("damping", c.damping);
    c.outer_tol = j.value("outer_tol", c.outer_tol);
    c.intermediate_tol = j.value("intermediate_tol", c.intermediate_tol);
    c.max_outer_iters = j.value("max_outer_iters", c.max_outer_iters);
    c.max_newton_iters = j.value("max_newton_iters", c.max_newton_iters);
    c.inner.newton_tol = j.value("newton_tol", c.inner.newton_tol);
    c.inner.min_step = j.value("inner_min_step", c.inner.min_step);
    c.validate();
    return c;
}

inline int major_version(const json& j, std::string_view expected_format) {
    if (!j.is_object() || j.value("format", "") != expected_format)
        throw Error(ErrorKind::ParseError, "not a " + std::string(expected_format) + " file");
    const auto v = j.value("version", "");
    const auto dot = v.find('.');
    return detail::to_int(std::string_view(v).substr(0, dot));
}

inline json problem_to_json(const ProblemFile& pf) {
    json f;
    to_json(f, pf.f);
    return {{"format", "lpcurv-problem"},
            {"version", format_version},
            {"n", pf.n},
            {"k", pf.k},
            {"p", pf.p},
            {"f", f},
            {"grid", {{"n_theta", pf.n_theta}, {"n_phi", pf.n_phi}}},
            {"solver", solver_to_json(pf.solver)},
            {"force", pf.force}};
}

inline ProblemFile problem_from_json(const json& j) {
    try {
        if (major_version(j, "lpcurv-problem") != problem_major_version)
            throw Error(ErrorKind::ParseError, "unsupported problem format version " + j.value("version", ""));
        ProblemFile pf;
        pf.n = j.value("n", 2);
        pf.k = j.value("k", 1);
        pf.p = j.at("p").get<double>();
        from_json(j.at("f"), pf.f);
        if (j.contains("grid")) {
            pf.n_theta = j.at("grid").at("n_theta").get<int>();
            pf.n_phi = j.at("grid").at("n_phi").get<int>();
        }
        if (j.contains("solver")) pf.solver = solver_from_json(j.at("solver"));
        pf.force = j.value("force", false);
        return pf;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, path + ": " + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorKind::InvalidArgument, "write failed for '" + path + "'");
}

inline ProblemFile read_problem(const std::string& path) { return problem_from_json(read_json_file(path)); }

inline json report_to_json(const EstimateReport& r) {
    json beta = json::array();
    for (const auto& [g, b] : r.beta_measured) beta.push_back({{"gamma", g}, {"beta", b}});
    return {{"R", r.R},
            {"r", r.r},
            {"c0_bounds",
             {{"constant", r.c0.constant},
              {"upper_ok", r.c0.upper_ok},
              {"lower_ok", r.c0.lower_ok},
              {"upper_slack", r.c0.upper_slack},
              {"lower_slack", r.c0.lower_slack}}},
            {"chou_wang",
             {{"ok", r.chou_wang_ok},
              {"branch", r.chou_wang.branch},
              {"margin", r.chou_wang.margin},
              {"ratio", r.chou_wang.ratio},
              {"max_radius", r.chou_wang.max_radius},
              {"note", r.chou_wang_note}}},
            {"beta_measured", beta},
            {"convexity_margin", r.convexity_margin},
            {"sigma1_max", r.sigma1_max},
            {"newton_maclaurin",
             {{"ok", r.newton_maclaurin.ok},
              {"min_slack", r.newton_maclaurin.min_slack},
              {"constant", r.newton_maclaurin.constant}}},
            {"evenness_defect", r.evenness_defect},
            {"main_residual", r.main_residual},
            {"norms", {{"c0", r.c0_norm}, {"c1", r.c1_norm}, {"c2", r.c2_norm}}},
            {"max_laplacian", r.max_laplacian},
            {"interpolation_ok", r.interpolation_ok},
            {"lemmas_pass", r.lemmas_pass()},
            {"bounds_pass", r.bounds_pass()}};
}

inline json trace_summary(const SolveTrace& t) {
    json residuals = json::array();
    for (const auto& o : t.outer)
        residuals.push_back({{"t", o.t}, {"iteration", o.iteration}, {"residual", o.fixed_point_residual}, {"newton", o.newton}});
    return {{"inner_steps", t.steps.size()},
            {"newton_iterations", t.total_newton_iterations()},
            {"outer_iterations", t.outer.size()},
            {"outer", residuals}};
}

/// Solution file contents as read back.
struct SolutionFile {
    ProblemFile problem;
    std::vector<double> s;
    double residual = 0.0;
    json report;
    json trace;
};

inline json solution_to_json(const ProblemFile& pf, const Solution& sol) {
    const auto& g = *sol.s.grid();
    return {{"format", "lpcurv-solution"},
            {"version", format_version},
            {"problem", problem_to_json(pf)},
            {"grid", {{"n_theta", g.n_theta()}, {"n_phi", g.n_phi()}, {"scheme", SphericalGrid::scheme}}},
            {"s", std::vector<double>(sol.s.values().begin(), sol.s.values().end())},
            {"residual", sol.diagnostics.main_residual},
            {"fixed_point_residual", sol.fixed_point_residual},
            {"report", report_to_json(sol.diagnostics)},
            {"trace", trace_summary(sol.trace)}};
}

inline SolutionFile solution_from_json(const json& j) {
    try {
        if (major_version(j, "lpcurv-solution") != solution_major_version)
            throw Error(ErrorKind::ParseError, "unsupported solution format version " + j.value("version", ""));
        SolutionFile sf;
        sf.problem = problem_from_json(j.at("problem"));
        sf.problem.n_theta = j.at("grid").at("n_theta").get<int>();
        sf.problem.n_phi = j.at("grid").at("n_phi").get<int>();
        sf.s = j.at("s").get<std::vector<double>>();
        if (sf.s.size() != static_cast<std::size_t>(sf.problem.n_theta) * sf.problem.n_phi)
            throw Error(ErrorKind::ParseError, "s has " + std::to_string(sf.s.size()) + " values, grid needs " +
                                                   std::to_string(sf.problem.n_theta * sf.problem.n_phi));
        sf.residual = j.value("residual", std::numeric_limits<double>::quiet_NaN());
        sf.report = j.value("report", json::object());
        sf.trace = j.value("trace", json::object());
        return sf;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ParseError, e.what());
    }
}

inline void write_solution(const std::string& path, const ProblemFile& pf, const Solution& sol) {
    write_text_file(path, solution_to_json(pf, sol).dump(1) + "\n");
}

inline SolutionFile read_solution(const std::string& path) { return solution_from_json(read_json_file(path)); }

inline ScalarField field_from(const GridPtr& grid, const std::vector<double>& values) {
    return {grid, Eigen::Map<const Eigen::ArrayXd>(values.data(), static_cast<Eigen::Index>(values.size()))};
}

struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;  ///< zero-based, counter-clockwise seen from outside
};

/// Embedded surface x ↦ s x + ∇s on the grid nodes plus the two poles, triangulated from the
/// grid's quadrilaterals with fans at the poles.
inline Mesh embed_mesh(const ScalarField& s) {
    const auto& g = *s.grid();
    Mesh mesh;
    mesh.vertices = embed(s);
    const auto c = analyze(s);
    for (const double theta : {0.0, std::numbers::pi}) {
        const auto [val, grad] = g.transform().evaluate(c, theta, 0.0);
        const double ct = std::cos(theta);
        const Eigen::Vector3d x(0.0, 0.0, ct), e_theta(ct, 0.0, 0.0), e_phi(0.0, 1.0, 0.0);
        mesh.vertices.push_back(val * x + grad[0] * e_theta + grad[1] * e_phi);
    }
    const int nt = g.n_theta(), np = g.n_phi();
    const int north = nt * np, south = north + 1;
    auto id = [&](int j, int m) { return static_cast<int>(g.index(j, m % np)); };
    for (int m = 0; m < np; ++m) {
        mesh.faces.push_back({north, id(0, m), id(0, m + 1)});
        for (int j = 0; j + 1 < nt; ++j) {
            mesh.faces.push_back({id(j, m), id(j + 1, m), id(j + 1, m + 1)});
            mesh.faces.push_back({id(j, m), id(j + 1, m + 1), id(j, m + 1)});
        }
        mesh.faces.push_back({id(nt - 1, m), south, id(nt - 1, m + 1)});
    }
    return mesh;
}

inline void write_obj(std::ostream& out, const Mesh& mesh) {
    out << "# lpcurv embedded support function\n";
    for (const auto& v : mesh.vertices) out << fmt::format("v {} {} {}\n", v[0], v[1], v[2]);
    for (const auto& f : mesh.faces) out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
}

/// One row per node: θ, φ, s, principal radii, raw main-equation residual (NaN off the cone).
inline void write_csv(std::ostream& out, const ScalarField& s, const ProblemSpec& spec) {
    const auto& g = *s.grid();
    const auto radii = principal_radii(tau_field(s));
    Eigen::ArrayXd res = Eigen::ArrayXd::Constant(s.size(), std::numeric_limits<double>::quiet_NaN());
    if (radii.lambda1.minCoeff() > 0.0) res = main_residual(s, spec).values();
    out << csv_header << "\n";
    for (Eigen::Index i = 0; i < s.size(); ++i)
        out << fmt::format("{},{},{},{},{},{}\n", g.theta(g.ring(i)), g.phi(g.column(i)), s[i], radii.lambda1[i],
                           radii.lambda2[i], res[i]);
}

}  // namespace lpcurv::io
