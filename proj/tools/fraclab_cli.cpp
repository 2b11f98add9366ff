// fraclab: command-line front end for the experiment runner.
//
//   fraclab verify --config run.json --out results/
//   fraclab report --config run.json --out results/ --jobs 4
//   fraclab eigs|solve|extend --config run.json --out results/

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"

#include "fraclab/runner.hpp"

namespace fs = std::filesystem;
using namespace fraclab;

namespace {

struct Common {
    std::string config;
    std::string out = "fraclab_out";
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON run specification")->required();
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "override the configured seed");
    cmd->add_option("--jobs", c.jobs, "worker threads");
}

RunConfig prepare(const Common& c) {
    RunConfig cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.jobs) cfg.jobs = *c.jobs;
    validate(cfg);
    fs::create_directories(c.out);
    return cfg;
}

void print_summary(const RunReport& rep) {
    for (const auto& r : rep.records) {
        const char* tag = r.skipped ? "SKIP" : r.pass ? "PASS" : (r.hard ? "FAIL" : "info");
        std::cout << std::left << std::setw(5) << tag << ' ' << std::setw(17) << r.check << " s="
                  << std::setw(5) << (r.s ? std::to_string(*r.s).substr(0, 4) : "-") << " level=" << r.mesh_level
                  << " n=" << std::setw(4) << r.n << " value=" << std::setprecision(6) << r.empirical_constant;
        if (!r.note.empty()) std::cout << "  (" << r.note << ')';
        std::cout << '\n';
    }
    for (const auto& t : rep.trends) {
        std::cout << (t.pass ? "PASS " : (t.hard ? "FAIL " : "info ")) << "trend " << t.check << ' ' << t.metric
                  << " [" << t.rule << "]\n";
    }
    std::cout << (rep.pass() ? "all checks passed" : std::to_string(rep.hard_failures()) + " hard failure(s)")
              << " in " << std::setprecision(3) << rep.seconds << " s\n";
}

int run_checks(const Common& c, bool full) {
    RunConfig cfg = prepare(c);
    if (full) cfg.checks = known_checks();
    const RunReport rep = run(cfg);
    emit(rep, c.out);
    print_summary(rep);
    return rep.exit_code();
}

void write_field(const std::string& path, const GridFunction& f) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "x,y,value\n";
    out.precision(17);
    for (int k = 0; k < f.grid->size(); ++k) {
        const Point p = f.grid->coords(k);
        out << p[0] << ',' << p[1] << ',' << f[k] << '\n';
    }
}

int cmd_eigs(const Common& c, int modes) {
    const RunConfig cfg = prepare(c);
    std::ofstream out(c.out + "/eigenvalues.csv");
    out << "mesh_level,n,k,lambda\n";
    out.precision(17);
    for (std::size_t l = 0; l < cfg.ladder.size(); ++l) {
        const auto g = build_grid(level_spec(cfg, cfg.ladder[l].n));
        const auto b = eigendecompose(assemble(partition_boundary(g, cfg.dirichlet)));
        for (int k = 0; k < std::min(modes, b->count()); ++k) {
            out << l << ',' << cfg.ladder[l].n << ',' << k + 1 << ',' << b->eigenvalues()[k] << '\n';
        }
        std::cout << "level " << l << ": lambda1 = " << std::setprecision(10) << b->lambda1()
                  << ", residual = " << b->max_relative_residual() << '\n';
    }
    return 0;
}

int cmd_solve(const Common& c) {
    const RunConfig cfg = prepare(c);
    const auto& lv = cfg.ladder.back();
    const auto g = build_grid(level_spec(cfg, lv.n));
    const auto b = eigendecompose(assemble(partition_boundary(g, cfg.dirichlet)));
    const GridFunction f = reference_bump(cfg, g);
    for (double s : cfg.s) {
        const std::string tag = std::to_string(s).substr(0, 4);
        write_field(c.out + "/u_s" + tag + ".csv", frac_solve(*b, f, s));
        write_field(c.out + "/v_s" + tag + ".csv", frac_solve(*b, GridFunction::constant(g, cfg.constant_rhs), s));
    }
    write_field(c.out + "/f.csv", f);
    std::cout << "wrote solutions for " << cfg.s.size() << " value(s) of s to " << c.out << '\n';
    return 0;
}

int cmd_extend(const Common& c) {
    const RunConfig cfg = prepare(c);
    const auto& lv = cfg.ladder.back();
    const auto g = build_grid(level_spec(cfg, lv.n));
    const auto b = eigendecompose(assemble(partition_boundary(g, cfg.dirichlet)));
    const GridFunction f = reference_bump(cfg, g);
    for (double s : cfg.s) {
        const auto cyl = build_cylinder(*b, s, lv.levels, lv.height, lv.beta);
        const ExtensionField U = extend_neumann(cyl, f, CgOptions{cfg.tol.cg, 20000});
        const std::string tag = std::to_string(s).substr(0, 4);
        U.write_csv(c.out + "/extension_s" + tag + ".csv");
        const GridFunction ref = frac_solve(*b, f, s);
        const double err = (U.trace().values - ref.values).cwiseAbs().maxCoeff() / ref.max_abs();
        std::cout << "s=" << tag << " cg_iterations=" << U.cg_iterations << " energy=" << energy(U)
                  << " trace_vs_spectral=" << err << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fraclab: spectral fractional Laplacian with mixed boundary conditions"};
    app.require_subcommand(1);

    Common common;
    int modes = 10;
    auto* eigs = app.add_subcommand("eigs", "eigenvalues of the mixed Laplacian along the ladder");
    add_common(eigs, common);
    eigs->add_option("--modes", modes, "number of eigenvalues to write");
    auto* solve = app.add_subcommand("solve", "fractional solves on the finest mesh");
    add_common(solve, common);
    auto* extend = app.add_subcommand("extend", "extension problem on the finest mesh");
    add_common(extend, common);
    auto* verify = app.add_subcommand("verify", "run every check");
    add_common(verify, common);
    auto* report = app.add_subcommand("report", "run the configured checks");
    add_common(report, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*eigs) return cmd_eigs(common, modes);
        if (*solve) return cmd_solve(common);
        if (*extend) return cmd_extend(common);
        if (*verify) return run_checks(common, true);
        if (*report) return run_checks(common, false);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
