#pragma once

#include "vargauss/lattice_holstein.hpp"
#include "vargauss/numerics.hpp"
#include "vargauss/polaron.hpp"
#include "vargauss/spinboson.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vg {

// Occupation basis of n_modes bosons with per-mode cap and total-number cap, in lexicographic
// order, with O(modes * cap) ranking.
class BosonBasis {
public:
    BosonBasis(int n_modes, int per_mode_cap, int total_cap);
    long size() const { return size_; }
    int n_modes() const { return n_; }
    long rank(const std::vector<int>& occ) const;
    void unrank(long idx, std::vector<int>& occ) const;

private:
    long count(int modes, int budget) const;  // states of `modes` modes with total <= budget
    int n_, cap_, total_;
    long size_;
    std::vector<long> table_;  // (modes+1) x (total+1)
};

using MatVec = std::function<void(const CVec& in, CVec& out)>;

struct LanczosResult {
    double e0 = 0.0;
    int iterations = 0;
    bool converged = false;
    CVec vector;  // filled when requested
};

// Lowest eigenvalue of a Hermitian operator; deterministic start vector.
LanczosResult lanczos_ground(const MatVec& h, long dim, int max_iter = 600, double tol = 1e-12,
                             bool want_vector = false);

// psi(t) sampled on the grid for a time-independent Hermitian operator (short Krylov steps).
std::vector<CVec> krylov_evolve(const MatVec& h, const CVec& psi0, const std::vector<double>& times,
                                int krylov_dim = 30, double tol = 1e-12);

struct EDResult {
    double e0 = 0.0;
    long dim = 0;
    int n_max = 0;
    int iterations = 0;
    bool converged = false;
};

struct CertifiedEnergy {
    double e0 = 0.0;        // at n_max + 4
    double e0_lower_cap = 0.0;  // at n_max
    long dim = 0;
    int n_max = 0;
    bool certified = false;  // |E(n_max+4) - E(n_max)| < 1e-6 |E|
    bool from_cache = false;
};

enum class Truncation { PerMode, Total };

constexpr long kMaxOracleDim = 20000000;

// Hbar_k of the polaron models on a truncated phonon Fock space in the momentum basis.
MatVec polaron_hamiltonian(const PolaronSpec& spec, const BosonBasis& basis);
BosonBasis polaron_basis(const PolaronSpec& spec, int n_max, Truncation trunc);
EDResult ed_polaron(const PolaronSpec& spec, int n_max, Truncation trunc);
CertifiedEnergy ed_polaron_certified(const PolaronSpec& spec, int n_max, Truncation trunc,
                                     const std::string& cache_dir = "");
// -i <0| exp(-i Hbar_k t) |0> on the phonon vacuum
std::vector<cplx> ed_polaron_green(const PolaronSpec& spec, int n_max, Truncation trunc,
                                   const std::vector<double>& times);

// Spin-boson model in the even parity sector. The sector states (|up,n> + (-1)^N |down,n>)/sqrt(2)
// reduce H = -(Delta/2) sigma_x + sum eps b^dag b + (sigma_z/2) sum g (b + b^dag) to the boson operator
// sum eps b^dag b + (1/2) sum g (b + b^dag) - (Delta/2) (-1)^N.
MatVec spin_boson_hamiltonian(const OhmicBathSpec& bath, const BosonBasis& basis);
BosonBasis spin_boson_basis(const OhmicBathSpec& bath, int n_max, Truncation trunc);
EDResult ed_spin_boson(const OhmicBathSpec& bath, int n_max, Truncation trunc);
CertifiedEnergy ed_spin_boson_certified(const OhmicBathSpec& bath, int n_max, Truncation trunc,
                                        const std::string& cache_dir = "");

// Holstein lattice on a few sites: spinful fermions (occupation bitmask, orbital index
// spin * N + site) times phonons with a per-mode cutoff, grand canonical at the spec's mu.
struct LatticeToySpace {
    int n_sites = 0;
    BosonBasis phonons;
    long fermion_states = 0;
    long size() const { return fermion_states * phonons.size(); }
};
LatticeToySpace lattice_toy_space(const LatticeSpec& spec, int n_max);
MatVec lattice_toy_hamiltonian(const LatticeSpec& spec, const LatticeToySpace& space);
EDResult ed_lattice_toy(const LatticeSpec& spec, int n_max);
CertifiedEnergy ed_lattice_toy_certified(const LatticeSpec& spec, int n_max, const std::string& cache_dir = "");

// Exact evolution of a boson-only state: overlap <psi0|psi(t)>, total number and <b_j + b_j^dag>.
struct EvolveSeries {
    std::vector<double> times;
    std::vector<cplx> overlap;
    std::vector<double> number;
    std::vector<Vec> x;
    std::vector<double> norm;
};
EvolveSeries ed_evolve(const MatVec& h, const BosonBasis& basis, const CVec& psi0, const std::vector<double>& times);

// Disk cache of scalar oracle results keyed by a hash of a canonical description.
std::string oracle_cache_dir(const std::string& requested);
std::uint64_t fnv1a64(const std::string& s);
bool cache_lookup(const std::string& dir, const std::string& key, std::vector<double>& values);
void cache_store(const std::string& dir, const std::string& key, const std::vector<double>& values);

}  // namespace vg
