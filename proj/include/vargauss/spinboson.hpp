#pragma once

#include "vargauss/flow.hpp"

#include <string>
#include <vector>

namespace vg {

// Two-level system coupled to an Ohmic bath of n_modes oscillators on a uniform grid
// eps_k = omega_c k / N, g_k = sqrt(2 alpha omega_c eps_k / N).
struct OhmicBathSpec {
    int n_modes = 200;
    double omega_c = 1.0;
    double alpha = 0.0;
    double delta = 0.1;  // tunnelling splitting

    Vec eps() const;
    Vec couplings() const;
    void validate() const;
};

enum class SpinBosonFrame { Parity, Polaron };

SpinBosonFrame spin_boson_frame_from_string(const std::string& s);
const char* spin_boson_frame_name(SpinBosonFrame f);

// Energy of the even-parity sector in the parity frame and its gradients
// (h_Delta = 2 dE/dDelta, h_b = 4 dE/dGamma).
double sb_energy_parity(const BosonGaussian& st, const OhmicBathSpec& bath);
std::pair<Vec, Mat> sb_gradients_parity(const BosonGaussian& st, const OhmicBathSpec& bath);

// Energy in the polaron frame with Delta_R = 0 and the spin pinned to the even-sector values.
double sb_energy_polaron(const Mat& gamma, const Vec& lambda, const OhmicBathSpec& bath);

class SpinBosonParityModel : public ModelFunctional {
public:
    explicit SpinBosonParityModel(OhmicBathSpec bath);
    int n_modes() const override { return bath_.n_modes; }
    ModelEval evaluate(const VariationalState& st, FlowMode mode) const override;
    double energy(const VariationalState& st) const override;
    std::vector<std::string> observable_names() const override;
    std::vector<double> observables(const VariationalState& st) const override;
    const OhmicBathSpec& bath() const { return bath_; }

private:
    OhmicBathSpec bath_;
    Vec eps_, g_;
};

class SpinBosonPolaronModel : public ModelFunctional {
public:
    explicit SpinBosonPolaronModel(OhmicBathSpec bath);
    int n_modes() const override { return bath_.n_modes; }
    int n_params() const override { return 2 * bath_.n_modes; }
    bool pin_delta() const override { return true; }
    ModelEval evaluate(const VariationalState& st, FlowMode mode) const override;
    double energy(const VariationalState& st) const override;
    std::vector<std::string> observable_names() const override;
    std::vector<double> observables(const VariationalState& st) const override;
    const OhmicBathSpec& bath() const { return bath_; }

private:
    OhmicBathSpec bath_;
    Vec eps_, g_;
};

// lambda = sigma Delta_R / 2 maps a parity-frame state onto the polaron frame.
Vec lambda_from_parity(const Vec& delta_r);

// Residual energy variance of the projected evolution, y = lambda^T Gamma lambda.
double energy_variance(double delta, double y);

struct SpinBosonObservables {
    double energy = 0.0;
    double m_x = 1.0;  // -<sigma_x> = exp(-2 y)
    double y = 0.0;
    double n_perp = 0.0;
    Vec s_x;  // <x_k^2> - 1 in the polaron frame
};

SpinBosonObservables sb_observables(const Mat& gamma, const Vec& lambda, const OhmicBathSpec& bath);
// Observables of a converged or running state in either frame.
SpinBosonObservables sb_observables(const VariationalState& st, SpinBosonFrame frame, const OhmicBathSpec& bath);

VariationalState sb_vacuum_state(const OhmicBathSpec& bath, SpinBosonFrame frame);

struct SpinBosonGround {
    SpinBosonFrame frame = SpinBosonFrame::Parity;
    double energy = 0.0;
    Vec lambda;  // polaron-frame displacement, mapped from Delta_R in the parity frame
    Mat gamma;
    SpinBosonObservables obs;
    bool converged = false;
    double rhs_norm = 0.0;
    long steps = 0;
    bool monotone = true;
    double max_purity = 0.0;
    std::string message;
    // |h_Delta| residual of the parity fixed-point equation (parity frame only)
    double fixed_point_residual = 0.0;
};

// Majorize-minimize sweeps in the polaron frame. The overlap factor -(Delta/2) e^{-2y} is concave in y,
// so replacing it by its tangent bounds E from above; lambda and Gamma are then minimized in closed
// form against the bound, which makes E non-increasing sweep by sweep.
struct PolaronScf {
    Vec lambda;
    Mat gamma;
    double energy = 0.0;
    int sweeps = 0;
    bool converged = false;
};
// Stops when no entry of lambda or Gamma moves by more than step_tol in a sweep.
PolaronScf sb_polaron_scf(const OhmicBathSpec& bath, double step_tol = 1e-10, int max_sweeps = 5000);

// Imaginary-time ground state. With scf_start the polaron-frame flow starts from the
// majorize-minimize state instead of the vacuum and certifies it as a fixed point.
SpinBosonGround sb_ground(const OhmicBathSpec& bath, SpinBosonFrame frame, const FlowConfig& cfg,
                          bool scf_start = false);

struct SpinBosonQuench {
    std::vector<double> times;
    std::vector<double> m_x;
    std::vector<double> n_perp;
    std::vector<double> energy;
    std::vector<Vec> lambda;  // only filled when requested
    double max_energy_drift = 0.0;
    double max_purity = 0.0;
    long steps = 0;
};

// Structured: fixed-step RK4 on (lambda, Gamma) using the diagonal-plus-rank-one form of h, O(N^2)
// per stage; the step is halved until both the energy drift and the purity residual meet their bounds.
// Generic: the Lie-group flow integrator shared with the other models, O(N^3) per stage.
enum class QuenchEngine { Structured, Generic };
const char* quench_engine_name(QuenchEngine e);
QuenchEngine quench_engine_from_string(const std::string& s);

// Real-time evolution in the polaron frame from Gamma = I and lambda0 (empty = 0, i.e. |->|0>),
// sampled every cfg.dt.
SpinBosonQuench sb_quench(const OhmicBathSpec& bath, const FlowConfig& cfg, bool keep_lambda = false,
                          QuenchEngine engine = QuenchEngine::Structured, const Vec& lambda0 = Vec());

// Anisotropic Kondo model mapped on the spin-boson model at gamma = 1.
struct KondoSpec {
    double j_perp = 0.1;
    double j_par = 0.2;
    int n_modes = 100;
    double omega_c = 1.0;

    double alpha() const;
    double cutoff_length() const;
    double delta() const;
    OhmicBathSpec bath() const;
    void validate() const;
};

// Short-distance cutoff l_c solving psi(N+1) + gamma_E = -ln(1 - exp(-omega_c l_c / N)).
double kondo_cutoff_solve(int n_modes, double omega_c);
double kondo_cutoff_residual(int n_modes, double omega_c, double lc);

// rho_spin^+(x) for a polaron-frame lambda; rho^- = -rho^+.
Vec kondo_spin_density(const Vec& lambda, const KondoSpec& kondo, const Vec& xs);

// Mean of rho_spin^+ over 0 <= x <= x_near on a fine grid.
double kondo_near_polarization(const Vec& lambda, const KondoSpec& kondo, double x_near);

struct KondoQuench {
    std::vector<double> times;
    Vec xs;
    std::vector<Vec> rho;          // rho_spin^+(x) per time
    std::vector<double> near;      // near-impurity polarization per time
    std::vector<double> m_x;
    double max_energy_drift = 0.0;
    long steps = 0;
};

// Polaron-frame image of the unperturbed Fermi sea: lambda_{p,q} = -1/sqrt(2 n_q), lambda_x = 0,
// the displacement at which every spin-density Fourier component vanishes.
Vec kondo_fermi_sea_lambda(const KondoSpec& kondo);

// Quench from |->|FS> sampled every cfg.dt.
KondoQuench kondo_quench(const KondoSpec& kondo, const FlowConfig& cfg, const Vec& xs, double x_near);

// Sign pattern of the near-impurity polarization between an early and a late time window.
struct SignPattern {
    int early_sign = 0;
    int late_sign = 0;
    bool sign_change = false;
};
SignPattern classify_sign_pattern(const std::vector<double>& times, const std::vector<double>& near,
                                  double early_from, double early_to, double late_from);

}  // namespace vg
