#include "vargauss/wei_norman.hpp"

#include <sstream>

namespace vg {

namespace {
const cplx I1(0.0, 1.0);
}

void quadratic_blocks(const Mat& h, CMat& w, CMat& v)
{
    const Eigen::Index n = h.rows() / 2;
    const Mat hxx = h.topLeftCorner(n, n), hxp = h.topRightCorner(n, n);
    const Mat hpx = h.bottomLeftCorner(n, n), hpp = h.bottomRightCorner(n, n);
    w = 0.5 * ((hxx + hpp).cast<cplx>() + I1 * (hpx - hxp).cast<cplx>());
    v = 0.5 * ((hxx - hpp).cast<cplx>() + I1 * (hxp + hpx).cast<cplx>());
}

WeiNormanTracker::WeiNormanTracker(const ModelFunctional& inner, double blowup) : inner_(inner), blowup_(blowup) {}

int WeiNormanTracker::n_params() const
{
    const int n = inner_.n_modes();
    return inner_.n_params() + 2 + 2 * n * n;
}

VariationalState WeiNormanTracker::inner_state(const VariationalState& st) const
{
    VariationalState s;
    s.boson = st.boson;
    s.params = st.params.head(inner_.n_params());
    s.fermion = st.fermion;
    return s;
}

VariationalState WeiNormanTracker::attach(const VariationalState& st) const
{
    VariationalState s = st;
    s.params = Vec::Zero(n_params());
    s.params.head(inner_.n_params()) = st.params;
    return s;
}

cplx WeiNormanTracker::theta0(const VariationalState& st) const
{
    const int o = inner_.n_params();
    return {st.params(o), st.params(o + 1)};
}

CMat WeiNormanTracker::lambda1(const VariationalState& st) const
{
    const int n = inner_.n_modes();
    const int o = inner_.n_params() + 2;
    const Mat re = Eigen::Map<const Mat>(st.params.data() + o, n, n);
    const Mat im = Eigen::Map<const Mat>(st.params.data() + o + n * n, n, n);
    return re.cast<cplx>() + I1 * im.cast<cplx>();
}

double WeiNormanTracker::energy(const VariationalState& st) const { return inner_.energy(inner_state(st)); }

std::vector<double> WeiNormanTracker::observables(const VariationalState& st) const
{
    return inner_.observables(inner_state(st));
}

ModelEval WeiNormanTracker::evaluate(const VariationalState& st, FlowMode mode) const
{
    const int n = inner_.n_modes();
    const int np_in = inner_.n_params();
    ModelEval ev = inner_.evaluate(inner_state(st), mode);
    Vec rates = Vec::Zero(n_params());
    if (np_in > 0) rates.head(np_in) = ev.param_rates;
    if (mode == FlowMode::Real) {
        const CMat L = lambda1(st);
        const double lmax = L.size() ? L.cwiseAbs().maxCoeff() : 0.0;
        if (!(lmax <= blowup_)) {
            std::ostringstream os;
            os << "Wei-Norman pair matrix diverged, max |Lambda1| = " << lmax;
            throw Error(ErrorKind::RiccatiBlowup, os.str());
        }
        CMat w, v;
        quadratic_blocks(ev.h_b, w, v);
        const Vec& d = st.boson.delta;
        const double dE = ev.energy - 0.25 * d.dot(ev.h_delta) - 0.25 * (ev.h_b.cwiseProduct(st.boson.gamma)).sum();
        const cplx th_dot = -dE - 0.5 * w.trace() - (v.conjugate().cwiseProduct(L)).sum();
        CMat l_dot = -I1 * (0.5 * v + w * L + L * w.transpose() + 2.0 * L * v.conjugate() * L);
        l_dot = (0.5 * (l_dot + l_dot.transpose())).eval();
        rates(np_in) = th_dot.real();
        rates(np_in + 1) = th_dot.imag();
        const Mat re = l_dot.real(), im = l_dot.imag();
        rates.segment(np_in + 2, n * n) = Eigen::Map<const Vec>(re.data(), n * n);
        rates.segment(np_in + 2 + n * n, n * n) = Eigen::Map<const Vec>(im.data(), n * n);
    }
    ev.param_rates = rates;
    return ev;
}

cplx WeiNormanTracker::green(const VariationalState& st, bool use_displacement) const
{
    const cplx th = theta0(st);
    cplx expo = I1 * th;
    if (use_displacement) {
        const int n = inner_.n_modes();
        const CVec db = 0.5 * (st.boson.delta.head(n).cast<cplx>() + I1 * st.boson.delta.tail(n).cast<cplx>());
        const CVec dc = db.conjugate();
        expo += -0.5 * db.squaredNorm() + (dc.transpose() * lambda1(st) * dc)(0, 0);
    }
    return -I1 * std::exp(expo);
}

}  // namespace vg
