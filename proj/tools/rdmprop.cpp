// rdmprop: command-line front end for ground-truth runs, contraction
// tensors, delay propagation of the 1RDM, sweeps and validation suites.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rdm/ground_truth.hpp"
#include "rdm/harness.hpp"
#include "rdm/system_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rdm;

namespace {

struct Common {
    std::string system;
    double dt = 0.008268;
    Index steps = 20000;
    Index ell = 0;
    Index stride = 1;
    double rtol = 1e-12;
    std::string mode = "constrained";
    std::string out;
    unsigned seed = 1;
};

void write_json(const json& j, const std::string& path)
{
    if (!fs::path(path).parent_path().empty())
        fs::create_directories(fs::path(path).parent_path());
    std::ofstream f(path);
    if (!f)
        throw ValidationError("cannot write " + path);
    f << j.dump(2) << "\n";
}

void require_out(const Common& c)
{
    if (c.out.empty())
        throw ValidationError("--out is required");
}

RunParams run_params(const Common& c)
{
    RunParams p;
    p.dt = c.dt;
    p.n_steps = c.steps;
    p.delay.ell = c.ell;
    p.delay.stride = c.stride;
    p.delay.r_tol = c.rtol;
    p.mode = c.mode == "raw" ? PropagationMode::Raw : PropagationMode::Constrained;
    return p;
}

json matrix_series_json(const std::vector<CMatrix>& qs)
{
    json out = json::array();
    for (const auto& q : qs)
        out.push_back(matrix_to_json(q));
    return out;
}

int cmd_gen_system(const Common& c, Index n_c, int k, const SyntheticOptions& opts)
{
    require_out(c);
    CiSystem s = generate_synthetic_system(n_c, k, c.seed, opts);
    if (!fs::path(c.out).parent_path().empty())
        fs::create_directories(fs::path(c.out).parent_path());
    save_system(s, c.out);
    return 0;
}

int cmd_ground_truth(const Common& c)
{
    require_out(c);
    CiSystem s = load_system(c.system);
    BTensor b = build_B(s);
    GroundTruthRun run = propagate_coefficients(s, c.dt, c.steps);
    fs::create_directories(c.out);
    write_coefficients_csv(run, (fs::path(c.out) / "coefficients.csv").string());
    auto q = reduced_density_series(run, b);
    json jq;
    jq["dt"] = c.dt;
    jq["q"] = matrix_series_json(q);
    write_json(jq, (fs::path(c.out) / "q_true.json").string());

    double drift = 0.0, trace_err = 0.0, norm_err = 0.0;
    for (const auto& d : eigenvalue_drift(q))
        drift = std::max(drift, d.maxCoeff());
    for (const auto& m : q)
        trace_err = std::max(trace_err, std::abs(m.trace() - static_cast<double>(s.n_electrons)));
    for (const auto& a : run.a)
        norm_err = std::max(norm_err, std::abs(a.norm() - 1.0));
    json summary;
    summary["dt"] = c.dt;
    summary["n_steps"] = c.steps;
    summary["final_time"] = c.dt * static_cast<double>(c.steps);
    summary["max_norm_error"] = norm_err;
    summary["max_trace_error"] = trace_err;
    summary["max_eigenvalue_drift"] = drift;
    json zeros = json::array();
    for (auto [i, j] : detect_zero_pattern(run))
        zeros.push_back({i + 1, j + 1});
    summary["proposed_zero_pairs"] = zeros;
    write_json(summary, (fs::path(c.out) / "summary.json").string());
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_build_b(const Common& c)
{
    require_out(c);
    CiSystem s = load_system(c.system);
    BTensor b = build_B(s);
    json j;
    j["n_configs"] = s.n_configs();
    j["n_orbitals"] = s.n_orbitals;
    j["b_tilde"] = matrix_to_json(b.matricized());
    j["printed"] = matrix_to_json(b.export_printed());
    j["trace_contraction_defect"] = trace_contraction_defect(b, s.n_electrons);
    write_json(j, c.out);
    return 0;
}

int cmd_propagate(const Common& c)
{
    require_out(c);
    CiSystem s = load_system(c.system);
    ExperimentConfig cfg;
    cfg.run = run_params(c);
    cfg.out_dir = c.out;
    MetricsReport rep = run_experiment(s, cfg);
    std::cout << summary_json(rep).dump(2) << "\n";
    return 0;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::vector<double>& values,
              double total_time, int workers)
{
    require_out(c);
    CiSystem s = load_system(c.system);
    ExperimentConfig cfg;
    cfg.run = run_params(c);
    cfg.out_dir = c.out;
    cfg.values = values;
    cfg.total_time = total_time;
    cfg.workers = workers;
    if (axis == "ell")
        cfg.axis = ExperimentConfig::Axis::Ell;
    else if (axis == "stride")
        cfg.axis = ExperimentConfig::Axis::Stride;
    else if (axis == "dt")
        cfg.axis = ExperimentConfig::Axis::Dt;
    else
        cfg.axis = ExperimentConfig::Axis::None;
    auto rows = sweep(s, cfg);
    for (const auto& r : rows)
        std::printf("ell=%lld k=%lld dt=%.6g memory=%.6g rmse=%.6e residual=%.3e min_rank=%lld "
                    "max_cond=%.3e\n",
                    static_cast<long long>(r.ell), static_cast<long long>(r.k), r.dt,
                    r.total_memory, r.rmse, r.final_residual, static_cast<long long>(r.min_rank),
                    r.max_cond);
    return 0;
}

int cmd_validate(const Common& c, int k)
{
    OneElectronReport rep = validate_appendix_c(k, c.steps, c.dt, c.seed);
    json j;
    j["k"] = rep.k;
    j["steps"] = rep.steps;
    if (rep.printed_matrix_error >= 0.0)
        j["printed_matrix_error"] = rep.printed_matrix_error;
    j["bbplus_identity"] = rep.identities.bbplus_identity;
    j["general_pinv"] = rep.identities.general_pinv;
    j["general_forward"] = rep.identities.general_forward;
    j["trace_two_pinv"] = rep.identities.trace_two_pinv;
    j["trace_two_forward"] = rep.identities.trace_two_forward;
    j["memoryless_identity_c"] = rep.memoryless_identity_c;
    j["memoryless_random_c"] = rep.memoryless_random_c;
    if (!c.out.empty())
        write_json(j, c.out);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_mz(const Common& c, Index n, Index m, bool diagonal, MemoryWindow window)
{
    if (m < 1 || m >= n)
        throw ValidationError("mz-compare: need 1 <= m < n");
    std::mt19937_64 rng(c.seed);
    CMatrix a;
    if (diagonal) {
        std::uniform_real_distribution<double> ud(0.0, 2.0 * 3.14159265358979323846);
        a = CMatrix::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            a(i, i) = std::polar(1.0, ud(rng));
    } else {
        a = random_unitary(n, rng);
    }
    CMatrix r = random_unitary(n, rng).topRows(m);
    CVector z0 = random_unitary(n, rng).col(0);
    Index ell = c.ell > 0 ? c.ell : (n + m - 1) / m;
    MzCompareReport rep = mz_compare(a, r, z0, c.steps, ell, window, c.rtol);
    json j = mz_report_json(rep);
    j["ell"] = ell;
    if (!c.out.empty())
        write_json(j, c.out);
    std::printf("delay_error=%.3e mz_error=%.3e mz_diverged=%s\n", rep.delay_error, rep.mz_error,
                rep.mz_diverged ? "true" : "false");
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Delay-embedding propagation of 1-electron reduced density matrices"};
    app.require_subcommand(1);
    Common c;

    auto add_system = [&](CLI::App* s) {
        s->add_option("--system", c.system, "System JSON file")->required();
    };
    auto add_time = [&](CLI::App* s) {
        s->add_option("--dt", c.dt, "Time step (a.u.)")->check(CLI::PositiveNumber);
        s->add_option("--steps", c.steps, "Number of time steps")->check(CLI::PositiveNumber);
    };
    auto add_delay = [&](CLI::App* s) {
        s->add_option("--ell", c.ell, "Memory blocks beyond the current one")
            ->check(CLI::NonNegativeNumber);
        s->add_option("--stride", c.stride, "Stride k between memory blocks")
            ->check(CLI::PositiveNumber);
        s->add_option("--rtol", c.rtol, "Relative singular value cutoff")
            ->check(CLI::NonNegativeNumber);
        s->add_option("--mode", c.mode, "constrained or raw")
            ->check(CLI::IsMember({"constrained", "raw"}));
    };

    auto* gen = app.add_subcommand("gen-system", "Write a random two-electron system file");
    Index gen_nc = 4;
    int gen_k = 2;
    SyntheticOptions gen_opts;
    gen->add_option("--nc", gen_nc, "Number of configurations")->check(CLI::PositiveNumber);
    gen->add_option("--k", gen_k, "Number of spatial orbitals")->check(CLI::PositiveNumber);
    gen->add_option("--seed", c.seed, "Random seed");
    gen->add_option("--energy-scale", gen_opts.energy_scale, "Width of the H0 spectrum");
    gen->add_option("--dipole-scale", gen_opts.dipole_scale, "Scale of M_dip");
    gen->add_flag("--zero-diag-dipole", gen_opts.zero_diag_dipole, "Zero the M_dip diagonal");
    gen->add_option("--amplitude", gen_opts.field.amplitude, "Field amplitude");
    gen->add_option("--omega", gen_opts.field.omega, "Field frequency");
    gen->add_option("--cycles", gen_opts.field.cycles, "Field cycles before cutoff");
    gen->add_option("--out", c.out, "Output system file")->required();

    auto* gt = app.add_subcommand("ground-truth", "Propagate CI coefficients and reduce to Q");
    add_system(gt);
    add_time(gt);
    gt->add_option("--out", c.out, "Output directory")->required();

    auto* bb = app.add_subcommand("build-b", "Write the contraction matrix of a system");
    add_system(bb);
    bb->add_option("--out", c.out, "Output JSON file")->required();

    auto* prop = app.add_subcommand("propagate", "Delay propagation of Q against ground truth");
    add_system(prop);
    add_time(prop);
    add_delay(prop);
    prop->add_option("--out", c.out, "Output directory")->required();

    auto* sw = app.add_subcommand("sweep", "Run a parameter sweep");
    std::string axis = "ell";
    std::vector<double> values;
    double total_time = 165.36;
    int workers = 1;
    add_system(sw);
    add_time(sw);
    add_delay(sw);
    sw->add_option("--axis", axis, "ell, stride, dt or none")
        ->check(CLI::IsMember({"ell", "stride", "dt", "none"}));
    sw->add_option("--values", values, "Values along the axis")->delimiter(',');
    sw->add_option("--total-time", total_time, "n_steps * dt held fixed in a dt sweep");
    sw->add_option("--workers", workers, "Concurrent sweep points")->check(CLI::PositiveNumber);
    sw->add_option("--out", c.out, "Output directory")->required();

    auto* val = app.add_subcommand("validate-one-electron",
                                   "Check the memoryless scheme on a non-interacting system");
    int val_k = 2;
    Index val_steps = 1000;
    val->add_option("--k", val_k, "Orbitals (2 or 4)")->check(CLI::IsMember({2, 4}));
    val->add_option("--dt", c.dt, "Time step (a.u.)")->check(CLI::PositiveNumber);
    val->add_option("--steps", val_steps, "Number of time steps")->check(CLI::PositiveNumber);
    val->add_option("--seed", c.seed, "Random seed");
    val->add_option("--out", c.out, "Output JSON file");

    auto* mz = app.add_subcommand("mz-compare", "Delay scheme versus memory-kernel propagation");
    Index mz_n = 6, mz_m = 2;
    bool mz_diag = false;
    Index mz_terms = -1;
    mz->add_option("--n", mz_n, "State dimension")->check(CLI::PositiveNumber);
    mz->add_option("--m", mz_m, "Observed dimension")->check(CLI::PositiveNumber);
    mz->add_flag("--diagonal", mz_diag, "Diagonal unitary propagator");
    bool mz_half = false;
    auto* terms_opt = mz->add_option("--memory-terms", mz_terms, "Keep only this many memory terms");
    mz->add_flag("--memory-half", mz_half, "Keep only the newest half of the memory terms")
        ->excludes(terms_opt);
    mz->add_option("--ell", c.ell, "Delay blocks (default: enough for full rank)");
    Index mz_steps = 200;
    mz->add_option("--steps", mz_steps, "Steps")->check(CLI::PositiveNumber);
    mz->add_option("--rtol", c.rtol, "Relative singular value cutoff");
    mz->add_option("--seed", c.seed, "Random seed");
    mz->add_option("--out", c.out, "Output JSON file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*gen)
            return cmd_gen_system(c, gen_nc, gen_k, gen_opts);
        if (*gt)
            return cmd_ground_truth(c);
        if (*bb)
            return cmd_build_b(c);
        if (*prop)
            return cmd_propagate(c);
        if (*sw)
            return cmd_sweep(c, axis, values, total_time, workers);
        if (*val) {
            c.steps = val_steps;
            return cmd_validate(c, val_k);
        }
        if (*mz) {
            c.steps = mz_steps;
            MemoryWindow window;
            if (mz_half)
                window = MemoryWindow::newest_half();
            else if (mz_terms >= 0)
                window = MemoryWindow::newest(mz_terms);
            return cmd_mz(c, mz_n, mz_m, mz_diag, window);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
