#pragma once

#include "vargauss/gaussian.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vg {

enum class FlowMode { Imaginary, Real };
enum class Integrator { RK4, RK45 };

struct FlowConfig {
    FlowMode mode = FlowMode::Imaginary;
    Integrator integrator = Integrator::RK4;
    double dt = 0.05;              // step (imaginary) or sampling interval (real)
    double t_max = 200.0;
    double fixed_point_tol = 1e-10;
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    int record_stride = 1;
    int repurify_every = 0;        // 0 = assert purity and abort on drift
    double purity_tol = 1e-6;
    double energy_guard = 1e-9;    // relative energy rise tolerated per imaginary step
    double min_dt = 1e-8;
    long max_steps = 5000000;
};

// Bundle of Gaussian part, transformation parameters and an optional fermionic
// projector (real symmetric, P^2 = P).
struct VariationalState {
    BosonGaussian boson;
    Vec params;
    Mat fermion;

    int n_modes() const { return boson.n; }
};

struct ModelEval {
    double energy = 0.0;
    Vec h_delta;       // 2 dE/dDelta
    Mat h_b;           // 4 dE/dGamma (symmetric)
    Mat g_fermion;     // dE/dP (symmetric), empty if no fermions
    Vec param_rates;   // rates of the transformation parameters for the requested mode
    Vec extra_rates;   // rates of auxiliary tracked quantities (do not enter E)
    Vec delta_shift;       // additive term in dDelta from the transformation parameters (empty = none)
    Mat gamma_generator;   // additive term in X, where dGamma = X Gamma + Gamma X^T (empty = none)
};

class ModelFunctional {
public:
    virtual ~ModelFunctional() = default;
    virtual int n_modes() const = 0;
    virtual int n_params() const { return 0; }
    virtual int n_extra() const { return 0; }
    virtual int fermion_dim() const { return 0; }
    virtual bool pin_delta() const { return false; }
    virtual ModelEval evaluate(const VariationalState& st, FlowMode mode) const = 0;
    virtual double energy(const VariationalState& st) const { return evaluate(st, FlowMode::Imaginary).energy; }
    virtual std::vector<std::string> observable_names() const { return {}; }
    virtual std::vector<double> observables(const VariationalState&) const { return {}; }
    virtual bool supports_real_time() const { return fermion_dim() == 0; }
};

struct StepDiagnostics {
    double purity = 0.0;
    double rhs_norm = 0.0;
    int rejected = 0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<double> energies;
    std::vector<VariationalState> states;
    std::vector<Vec> extras;
    std::vector<std::vector<double>> observables;
    std::vector<std::string> observable_names;
    std::vector<StepDiagnostics> diagnostics;
    bool converged = false;
    bool monotone = true;
    double max_energy_drift = 0.0;
    double max_purity = 0.0;
    double final_rhs_norm = 0.0;
    long steps = 0;
    long rejected_steps = 0;
    std::string message;

    const VariationalState& final_state() const { return states.back(); }
};

// Tangent direction at a point: plain rates for Delta, parameters and auxiliaries, and
// generators X (dGamma = X Gamma + Gamma X^T) and Y (dP = Y P + P Y^T).
struct FlowGenerator {
    double energy = 0.0;
    Vec flat;
    Mat xb;
    Mat xf;
};

// Flattened view of a ModelFunctional used by the integrators. Covariances are advanced only by
// congruences with Cayley transforms of the generators, which keeps Gamma symplectic and P a
// projector to rounding error.
class GaussianFlowSystem {
public:
    GaussianFlowSystem(const ModelFunctional& model, FlowMode mode);

    FlowGenerator generator(const Vec& y) const;
    Vec flat_part(const Vec& y) const;
    // Point reached from y0 by flat increment df and algebra elements ub, uf.
    Vec advance(const Vec& y0, const Vec& df, const Mat& ub, const Mat& uf) const;

    Vec pack(const VariationalState& st, const Vec& extra) const;
    VariationalState unpack(const Vec& y) const;
    Vec unpack_extra(const Vec& y) const;
    Vec rhs(const Vec& y) const;
    Vec rhs(const Vec& y, double& energy) const;
    Vec rates(const Vec& y, const FlowGenerator& g) const;
    double energy(const Vec& y) const;
    double purity(const Vec& y) const;
    void repurify(Vec& y) const;
    void symmetrize(Vec& y) const;
    int size() const { return size_; }
    FlowMode mode() const { return mode_; }
    const ModelFunctional& model() const { return model_; }

private:
    const ModelFunctional& model_;
    FlowMode mode_;
    int n_, np_, ne_, nf_, size_;
    Mat sigma_;
};

Trajectory flow_imaginary(const VariationalState& init, const ModelFunctional& model, const FlowConfig& cfg);
Trajectory flow_real(const VariationalState& init, const ModelFunctional& model, const FlowConfig& cfg,
                     const Vec& extra0 = Vec());

// Gradient consistency of a model against central differences of its energy.
struct GradientCheck {
    double delta_err = 0.0;
    double gamma_err = 0.0;
    double fermion_err = 0.0;
    double max_rel() const;
};
GradientCheck gradient_check(const ModelFunctional& model, const VariationalState& st, double step = 1e-5);

// Random pure state near a given one, for property tests and multi-start.
VariationalState perturb_state(const VariationalState& st, double delta_scale, double squeeze_scale,
                               std::mt19937_64& rng);

struct FluctuationProblem {
    CMat gram;
    CMat hmat;
};

struct FluctuationSpectrum {
    Vec mu;         // eigenvalues of L = G^{-1/2} M G^{-1/2} on the deflated subspace
    CMat eta;       // orthonormal eigenvectors in the deflated basis (columns)
    CMat basis;     // map from the deflated basis back to the tangent vectors, G^{-1/2}
    CMat overlap;   // <Psi_k | eigenvector lambda>, rows k over the original tangent vectors
};

FluctuationSpectrum linearize(const FluctuationProblem& problem, double deflate_tol = 1e-10);

// Z_k(omega) = sum_lambda |<k|lambda>|^2 L_eta(omega - mu_lambda), with the weights taken from
// the normalized tangent vector k.
Vec spectral_weight(const FluctuationSpectrum& spec, int k, const Vec& omegas, double eta);

}  // namespace vg
