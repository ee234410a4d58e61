#pragma once

#include "vargauss/flow.hpp"

#include <string>
#include <vector>

namespace vg {

enum class PolaronKind { Holstein, SSH };

PolaronKind polaron_kind_from_string(const std::string& s);
const char* polaron_kind_name(PolaronKind k);

// Single electron on a periodic chain with nearest-neighbour hopping -t0 and Einstein phonons,
// in the co-moving frame at total momentum k = 2 pi k_index / n_sites.
struct PolaronSpec {
    PolaronKind kind = PolaronKind::Holstein;
    int n_sites = 8;
    double t0 = 1.0;
    double omega0 = 0.5;
    double g = 0.0;
    int k_index = 0;

    double k() const;
    double q(int j) const;  // phonon momentum of mode j, mapped to (-pi, pi]
    void validate() const;
};

class PolaronModel : public ModelFunctional {
public:
    explicit PolaronModel(PolaronSpec spec);
    int n_modes() const override { return spec_.n_sites; }
    ModelEval evaluate(const VariationalState& st, FlowMode mode) const override;
    double energy(const VariationalState& st) const override;
    std::vector<std::string> observable_names() const override;
    std::vector<double> observables(const VariationalState& st) const override;
    const PolaronSpec& spec() const { return spec_; }

private:
    ModelEval eval_impl(const BosonGaussian& st, bool with_gradients) const;
    PolaronSpec spec_;
    Vec beta_plus_, beta_minus_, beta_zero_;
    std::vector<CVec> coupling_;  // one coupling vector per hop offset l, paired with its phases
    std::vector<const Vec*> coupling_beta_;
};

double polaron_energy(const BosonGaussian& st, const PolaronSpec& spec);
// h_Delta = 2 dE/dDelta, h_b = 4 dE/dGamma
std::pair<Vec, Mat> polaron_gradients(const BosonGaussian& st, const PolaronSpec& spec);

// |<0|Psi>|^2 for the phonon Gaussian
double quasiparticle_weight(const BosonGaussian& st);
double phonon_number(const BosonGaussian& st);

VariationalState polaron_initial_state(const PolaronSpec& spec, std::uint64_t seed, double delta_scale = 1e-3);

struct DispersionRow {
    int k_index = 0;
    double k = 0.0;
    double energy = 0.0;
    double z = 0.0;
    double phonons = 0.0;
    bool converged = false;
    double rhs_norm = 0.0;
    int starts = 0;
    std::string message;
    BosonGaussian state;
};

struct PolaronGroundResult {
    DispersionRow row;
    Trajectory trajectory;  // trajectory of the best start
};

// Imaginary-time ground state at one momentum; extra starts use larger seeded perturbations.
PolaronGroundResult polaron_ground(const PolaronSpec& spec, const FlowConfig& cfg, std::uint64_t seed,
                                   int n_starts = 1);

struct DispersionResult {
    std::vector<DispersionRow> rows;
    int argmin = -1;  // position in rows
};

DispersionResult dispersion_scan(PolaronSpec spec, const std::vector<int>& k_indices, const FlowConfig& cfg,
                                 std::uint64_t seed, int n_starts = 1);

struct RealSpaceProfile {
    Vec x;       // <x_j>
    Vec p;       // <p_j>
    Mat cov_x;   // <dx_i dx_j>
};

// Phonon configuration around the electron placed at site 0.
RealSpaceProfile realspace_profile(const BosonGaussian& st, const PolaronSpec& spec);

// Real-time retarded Green function from the phonon vacuum and its spectral function.
struct GreenFunction {
    std::vector<double> times;
    std::vector<cplx> g;            // G_R(t) with Delta_b taken at time t
    std::vector<cplx> g_static;     // same with Delta_b = 0, kept for comparison
    double max_lambda_asymmetry = 0.0;
    double max_abs_g = 0.0;
    double max_energy_drift = 0.0;
    double max_purity = 0.0;
};

GreenFunction polaron_green(const PolaronSpec& spec, const FlowConfig& cfg);

// A(w) = -(1/pi) Im int_0^tmax G(t) e^{i w t - eta t} dt on a uniform time grid; G is taken
// piecewise linear between samples and integrated exactly against the exponential.
Vec spectral_function(const std::vector<double>& times, const std::vector<cplx>& g, double eta, const Vec& omegas);

// Positions of local maxima of a sampled curve above a relative height threshold.
std::vector<double> find_peaks(const Vec& omegas, const Vec& a, double rel_height = 1e-3);

}  // namespace vg
