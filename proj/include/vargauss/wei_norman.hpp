#pragma once

#include "vargauss/flow.hpp"

namespace vg {

// Wraps a model so that a real-time flow started from the vacuum also carries the Wei-Norman
// phase theta0 (complex) and the pair-creation matrix Lambda1 (complex symmetric) as extra
// transformation parameters. Layout appended to the inner parameters:
// [Re theta0, Im theta0, Re Lambda1 (n*n, column-major), Im Lambda1 (n*n)].
class WeiNormanTracker : public ModelFunctional {
public:
    explicit WeiNormanTracker(const ModelFunctional& inner, double blowup = 1e6);
    int n_modes() const override { return inner_.n_modes(); }
    int n_params() const override;
    int n_extra() const override { return inner_.n_extra(); }
    int fermion_dim() const override { return inner_.fermion_dim(); }
    bool pin_delta() const override { return inner_.pin_delta(); }
    ModelEval evaluate(const VariationalState& st, FlowMode mode) const override;
    double energy(const VariationalState& st) const override;
    std::vector<std::string> observable_names() const override { return inner_.observable_names(); }
    std::vector<double> observables(const VariationalState& st) const override;
    bool supports_real_time() const override { return inner_.supports_real_time(); }

    VariationalState attach(const VariationalState& st) const;  // zero theta0 and Lambda1 appended
    cplx theta0(const VariationalState& st) const;
    CMat lambda1(const VariationalState& st) const;
    // G_R(t) = -i e^{i theta0} e^{-|Delta_b|^2/2} e^{Delta_b^dag Lambda1 Delta_b^*}
    cplx green(const VariationalState& st, bool use_displacement = true) const;

private:
    VariationalState inner_state(const VariationalState& st) const;
    const ModelFunctional& inner_;
    double blowup_;
};

// Quadratic-form blocks of h_b in the b, b^dagger basis: (1/2) W_b^dag h_b W_b = [[w, v], [v^*, w^*]].
void quadratic_blocks(const Mat& h_b, CMat& w, CMat& v);

}  // namespace vg
