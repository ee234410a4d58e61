#pragma once

#include "vargauss/flow.hpp"

#include <string>
#include <vector>

namespace vg {

// Holstein model on a periodic L_x x L_y lattice at chemical potential mu (grand canonical),
// nearest-neighbour hopping -t0, Einstein phonons omega0 and local coupling g.
struct LatticeSpec {
    int lx = 6;
    int ly = 6;
    double t0 = 1.0;
    double omega0 = 10.0;
    double g = 5.0;
    double mu = -5.0;

    int n_sites() const { return lx * ly; }
    int site(int x, int y) const;
    // t_nm; a direction of length 2 contributes two bonds, a direction of length 1 none
    Mat hopping() const;
    // e^{i Q_pi j} on every site
    Vec stagger() const;
    void validate() const;
};

// State layout: boson = phonon Gaussian over N sites; params = lambda_r indexed by the displacement
// r = n - m (site index of r); fermion = P_ab = <psi_a^dagger psi_b> with psi = (c_up, c_down^dagger),
// a real symmetric projector of rank N.
class LatticeHolsteinModel : public ModelFunctional {
public:
    explicit LatticeHolsteinModel(LatticeSpec spec, double lambda_mass = 1.0);
    int n_modes() const override { return spec_.n_sites(); }
    int n_params() const override { return spec_.n_sites(); }
    int fermion_dim() const override { return 2 * spec_.n_sites(); }
    ModelEval evaluate(const VariationalState& st, FlowMode mode) const override;
    double energy(const VariationalState& st) const override;
    std::vector<std::string> observable_names() const override;
    std::vector<double> observables(const VariationalState& st) const override;
    const LatticeSpec& spec() const { return spec_; }

    // dE/dlambda_r
    Vec lambda_gradient(const VariationalState& st) const;

private:
    struct Bond {
        int n, m;
        double t;
    };
    ModelEval eval_impl(const VariationalState& st, bool gradients, Vec* dlambda) const;
    Mat lambda_matrix(const Vec& lam) const;  // Lambda_{l m} = lambda_{r(l - m)}
    Vec reduce(const Mat& dLambda) const;     // sum over pairs with the same displacement
    LatticeSpec spec_;
    double lambda_mass_;
    std::vector<Bond> bonds_;
    std::vector<int> diff_;  // diff_[l * N + m] = r(l - m)
};

double lattice_energy(const VariationalState& st, const LatticeSpec& spec);

struct LatticeGradients {
    Vec h_delta;   // 2 dE/dDelta
    Mat h_b;       // 4 dE/dGamma_b
    Mat h_f;       // dE/dP
    Vec d_lambda;  // dE/dlambda_r
};
LatticeGradients lattice_gradients(const VariationalState& st, const LatticeSpec& spec);

// Imaginary-time rates of lambda_r.
Vec lambda_flow_step(const VariationalState& st, const LatticeSpec& spec, double lambda_mass = 1.0);

// Max-norm residual of the p-sector projection that becomes a constraint when lambda^x = 0.
double constraint_residual(const VariationalState& st, const LatticeSpec& spec);

struct PhaseObservables {
    double energy = 0.0;
    double n_sigma = 0.0;      // density per spin
    double gap = 0.0;          // sum_k Delta_k / N
    double rho_s = 0.0;        // staggered density per spin
    double d0 = 0.0;           // uniform displacement <x_j>
    double ds = 0.0;           // staggered displacement
    Vec gap_k;                 // Delta_k on the momentum grid (site ordering)
    Vec gap_k_direct;          // Delta_k from the Fourier transform of V_nm <c c>
    Vec lambda_q;              // lambda_q on the momentum grid
    Vec gamma_q_xx;            // (Gamma_b,q)_xx
    double translation_residual = 0.0;  // max |Gamma_b,nm - f(n - m)|
    double constraint = 0.0;
    std::string phase;
};

PhaseObservables cdw_observables(const VariationalState& st, const LatticeSpec& spec);

// CDW iff |rho_s| > 1e-3 and |Delta| < 1e-3, SC for the converse.
std::string classify_phase(double rho_s, double gap, double threshold = 1e-3);

enum class LatticeSeed { CDW, SC };
const char* lattice_seed_name(LatticeSeed s);

VariationalState lattice_initial_state(const LatticeSpec& spec, LatticeSeed seed, double amplitude = 1e-2);

struct LatticeGround {
    PhaseObservables obs;
    VariationalState state;
    LatticeSeed seed = LatticeSeed::SC;
    bool converged = false;
    bool monotone = true;
    double rhs_norm = 0.0;
    long steps = 0;
    double max_purity = 0.0;
    std::vector<double> seed_energies;  // final energy per seed, in the order tried
    std::string message;
};

// Multi-start ground state: CDW- and SC-seeded flows, lowest energy wins.
LatticeGround lattice_ground(const LatticeSpec& spec, const FlowConfig& cfg,
                             const std::vector<LatticeSeed>& seeds = {LatticeSeed::CDW, LatticeSeed::SC});

struct PhaseScanRow {
    double mu = 0.0;
    double g = 0.0;
    LatticeGround ground;
};

std::vector<PhaseScanRow> phase_scan(const LatticeSpec& base, const std::vector<double>& mus,
                                     const std::vector<double>& gs, const FlowConfig& cfg);

}  // namespace vg
