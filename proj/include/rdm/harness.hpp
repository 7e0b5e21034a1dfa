/*
 * Experiment driver: ground truth, warm start, delay propagation of Q,
 * error metrics, parameter sweeps, the one-electron validation suite, the
 * memory-kernel comparison and synthetic system generation.
 */
#pragma once

#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "rdm/ci_model.hpp"
#include "rdm/constraint_prop.hpp"
#include "rdm/delay_core.hpp"

namespace rdm {

/// sqrt( 1/K^2 * 1/(n-l) * sum_{j=l+1..n} |model_j - truth_j|_F^2 ), where
/// both series hold Q(0) ... Q(n).
double rmse(const std::vector<CMatrix>& model, const std::vector<CMatrix>& truth, Index ell);

/// 1/K^2 * sum_{ij} |model_ij - truth_ij|.
double mae(const CMatrix& model, const CMatrix& truth);

struct RunParams {
    double dt = 0.008268;
    Index n_steps = 20000;
    DelayConfig delay;
    PropagationMode mode = PropagationMode::Constrained;
};

struct MetricsReport {
    RunParams params;
    double rmse = 0.0;
    double total_memory = 0.0;  ///< k * l * dt
    std::vector<double> mae_series;  ///< per propagated step
    std::vector<StepRecord> steps;
    std::vector<double> max_eigen_drift;  ///< of the model Q, per step from 0
    double seconds_per_step = 0.0;
    double max_mae = 0.0;
    double final_residual = 0.0;
    Index min_rank = 0;
    double max_cond = 0.0;
    double max_trace_error = 0.0;  ///< max |tr Q - N| over propagated steps
    std::vector<CMatrix> q_model;  ///< Q(0) ... Q(n)
};

/// Exact reference data shared by runs on one (system, dt, n_steps).
struct Reference {
    double dt = 0.0;
    std::vector<CMatrix> u;       ///< U(0) ... U(n-1)
    std::vector<CMatrix> q_true;  ///< Q(0) ... Q(n)
};

Reference make_reference(const CiSystem& system, const BTensor& b, double dt, Index n_steps);

/// Warm start from the reference for t <= k l, then propagate to n_steps.
MetricsReport run_on_reference(const CiSystem& system, const BTensor& b, const Reference& ref,
                               const RunParams& params);

struct ExperimentConfig {
    std::string system_path;
    RunParams run;
    enum class Axis { None, Ell, Stride, Dt } axis = Axis::None;
    std::vector<double> values;
    /// For a dt sweep: hold n_steps * dt at this value.
    double total_time = 165.36;
    std::string out_dir;
    unsigned seed = 0;
    int workers = 1;
};

/// One run; writes <out>/steps.csv and <out>/summary.json when out_dir is set.
MetricsReport run_experiment(const CiSystem& system, const ExperimentConfig& cfg);

/// Per-step diagnostics: t, residual, effective_rank, condition_number,
/// trace_Q, hermiticity_defect.
void write_steps_csv(const MetricsReport& report, const std::string& path);
nlohmann::json summary_json(const MetricsReport& report);

struct SweepRow {
    Index ell = 0;
    Index k = 1;
    double dt = 0.0;
    double total_memory = 0.0;
    double rmse = 0.0;
    double max_mae = 0.0;
    double final_residual = 0.0;
    Index min_rank = 0;
    double max_cond = 0.0;
    double seconds_per_step = 0.0;
};

SweepRow sweep_row(const MetricsReport& report);

/// Runs every point of cfg.axis x cfg.values, up to cfg.workers at once.
/// Writes <out>/sweep.csv when out_dir is set.
std::vector<SweepRow> sweep(const CiSystem& system, const ExperimentConfig& cfg);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

struct OneElectronReport {
    int k = 0;
    double printed_matrix_error = -1.0;  ///< K = 2 only; negative if not run
    BplusReport identities;
    double memoryless_identity_c = 0.0;  ///< max |Q_scheme - Q_LvN|, C = I
    double memoryless_random_c = 0.0;    ///< the same with a random unitary C
    Index steps = 0;
};

/// Printed layout of the K = 2, C = I contraction matrix, 16 x 4.
CMatrix printed_one_electron_matrix();

/// Memoryless scheme versus direct K x K Liouville-von Neumann evolution,
/// starting from a(0) = e_1: max entrywise |Q_scheme - Q_LvN| over all steps.
double one_electron_lvn_deviation(const OneElectronSystem& sys, double dt, Index steps);

OneElectronReport validate_appendix_c(int k, Index steps = 1000, double dt = 0.008268,
                                      unsigned seed = 11);

struct MzCompareReport {
    double delay_error = 0.0;  ///< max |y - y_direct|
    double mz_error = 0.0;
    bool mz_diverged = false;
    Index mz_diverged_at = -1;
    std::vector<CVector> direct;
    std::vector<CVector> delay;
    std::vector<CVector> mz;
};

/// Fixed unitary a, reduction r, initial state z0; delay scheme with ell
/// (stride 1) against the memory-kernel form with an optional memory window.
MzCompareReport mz_compare(const CMatrix& a, const CMatrix& r, const CVector& z0, Index steps,
                           Index ell, MemoryWindow window = MemoryWindow::all(),
                           double r_tol = 1e-12);

nlohmann::json mz_report_json(const MzCompareReport& rep);

struct SyntheticOptions {
    double energy_scale = 1.0;  ///< H0 diagonal uniform in [0, energy_scale], sorted
    double dipole_scale = 1.0;  ///< M_dip entries standard complex normal times this
    bool zero_diag_dipole = false;
    bool real_dipole = false;
    FieldProfile field;
};

/// N = 2 electrons on K orbitals.  n_c = K^2 uses opposite-spin pairs;
/// otherwise n_c <= C(2K, 2) uses the first n_c determinants in
/// lexicographic order.  Random unitary C.
CiSystem generate_synthetic_system(Index n_c, int k, unsigned seed,
                                   const SyntheticOptions& opts = {});

CMatrix random_unitary(Index n, std::mt19937_64& rng);
CMatrix random_hermitian(Index n, std::mt19937_64& rng);

}  // namespace rdm
