#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "cqed/integrate.hpp"
#include "cqed/layout.hpp"
#include "cqed/model.hpp"

namespace cqed {

using Mat = Eigen::MatrixXcd;

struct truncation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SpinMode {
    double delta;
    double g;
};

/// Truncated product space of up to four spins and one bosonic mode.
/// Kronecker ordering: spins in index order first, the cavity factor last,
/// so basis index = (spin bits, spin 0 most significant) * (cutoff+1) + fock.
struct HilbertConfig {
    PhysicalParams params;
    std::vector<SpinMode> spins;
    int photon_cutoff = 16;

    int n_spins() const { return static_cast<int>(spins.size()); }
    int dim() const { return (1 << n_spins()) * (photon_cutoff + 1); }
    void validate() const;
};

/// Dense master-equation reference for few spins.
///
/// Operator tokens for expectation(): "a", "ad", and "sp<j>", "sm<j>",
/// "sz<j>" with j a spin index; a product spec is read left to right.
class QuantumOracle {
  public:
    explicit QuantumOracle(HilbertConfig cfg);

    const HilbertConfig& config() const { return cfg_; }
    const Mat& hamiltonian() const { return h_; }

    Mat liouvillian_apply(const Mat& rho) const;

    /// Adaptive integration of the master equation, sampled at t_grid.
    /// Checks trace/Hermiticity preservation and Fock-cutoff adequacy
    /// (top-level population < 1e-8, else truncation_error).
    std::vector<Mat> evolve_density(const Mat& rho0, const std::vector<double>& t_grid,
                                    const IntegratorConfig& cfg = {}) const;

    const Mat& op(const std::string& token) const;
    cplx expectation(const Mat& rho, const std::vector<std::string>& spec) const;

    /// All spins down, cavity vacuum.
    Mat vacuum() const;
    /// Permutation exchanging spins p and q.
    Mat swap_operator(int p, int q) const;

  private:
    HilbertConfig cfg_;
    Mat h_;
    std::vector<Mat> collapse_;  // lindblad jump operators with rate prefactors
    mutable std::map<std::string, Mat> cache_;
};

struct EquationResidual {
    Family family;
    int mu = -1, nu = -1;
    double residual = 0.0;
};

struct VerifyReport {
    std::vector<EquationResidual> residuals;
    std::vector<std::string> skipped;  // equations with no realizable spin pair

    double max_residual() const;
    std::string to_csv() const;
};

/// Validates every coefficient of the tracked moment equations against the
/// exact Liouvillian: each tracked d<O>/dt is re-derived as Tr(O L(rho)) and
/// compared with the equation right-hand side evaluated on moments taken
/// exactly from rho, with all closures bypassed.
///
/// cluster_sizes assigns the oracle's spins, in order, to clusters of
/// identical (delta, g); sizes of 1 or 2 are supported. rho is symmetrized
/// within each two-spin cluster first. Intra-cluster pair equations with
/// fewer than two member spins are reported as skipped.
VerifyReport verify_eom(const QuantumOracle& oracle, const Mat& rho, CumulantOrder order,
                        const std::vector<int>& cluster_sizes);

}  // namespace cqed
