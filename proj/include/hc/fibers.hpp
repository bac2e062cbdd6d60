#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <complex>
#include <utility>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/errors.hpp>
#include <hc/fem.hpp>
#include <hc/homogenization.hpp>

namespace hc {
namespace fibers {

using homogenization::HomogenizedMatrix;

// Fibers are labelled by theta in the half-open dual cell: kappa = eps*theta
// reduced into [0,2pi)^2 before any assembly.
inline Vec2 reduce_quasimomentum(double eps, const Vec2 &theta) {
    const double two_pi = 2.0 * M_PI;
    Vec2 kappa;
    for (int d = 0; d < 2; ++d) {
        kappa[d] = std::fmod(eps * theta[d], two_pi);
        if (kappa[d] < 0) kappa[d] += two_pi;
    }
    return kappa;
}

namespace detail {

inline SpMatR restrict_rows_cols(const SpMatR &A, const std::vector<int> &idx) {
    std::vector<int> where(A.rows(), -1);
    for (std::size_t i = 0; i < idx.size(); ++i) where[idx[i]] = static_cast<int>(i);
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMatR::InnerIterator it(A, k); it; ++it)
            if (where[it.row()] >= 0 && where[it.col()] >= 0)
                trips.emplace_back(where[it.row()], where[it.col()], it.value());
    SpMatR out(static_cast<int>(idx.size()), static_cast<int>(idx.size()));
    out.setFromTriplets(trips.begin(), trips.end());
    out.makeCompressed();
    return out;
}

inline MatC restrict_rows_cols_dense(const SpMatC &A, const std::vector<int> &idx) {
    std::vector<int> where(A.rows(), -1);
    for (std::size_t i = 0; i < idx.size(); ++i) where[idx[i]] = static_cast<int>(i);
    MatC out = MatC::Zero(idx.size(), idx.size());
    for (int k = 0; k < A.outerSize(); ++k)
        for (SpMatC::InnerIterator it(A, k); it; ++it)
            if (where[it.row()] >= 0 && where[it.col()] >= 0)
                out(where[it.row()], where[it.col()]) = it.value();
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Fine fiber resolvent: (eps^-2 K(A1,kappa) + K(A0,kappa) + M) u = M F.
// The system dominates M, so the resolvent is an L^2 contraction.
// ---------------------------------------------------------------------------

class FineFiber {
public:
    FineFiber(const CellModel &model, const fem::NormContext &norms, double eps, const Vec2 &theta)
        : m_M(&norms.M()), m_eps(eps), m_theta(theta) {
        const Vec2 kappa = reduce_quasimomentum(eps, theta);
        m_system = SpMatC(fem::assemble_shifted_stiffness(model, model.coefficients.a1, kappa) / (eps * eps));
        m_system += fem::assemble_shifted_stiffness(model, model.coefficients.a0, kappa);
        m_system += norms.M().cast<Cplx>();
        m_llt.compute(m_system);
        if (m_llt.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "fine fiber factorization failed");
    }

    VecC solve(const VecC &F) const { return apply_system_inverse((*m_M) * F); }

    VecC apply_system_inverse(const VecC &rhs) const {
        VecC u = m_llt.solve(rhs);
        if (m_llt.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "fine fiber solve failed");
        return u;
    }

    // Adjoint of the resolvent map in the plain (unweighted) pairing: M sys^-1.
    VecC apply_adjoint(const VecC &x) const { return (*m_M) * apply_system_inverse(x); }

    const SpMatC &system() const { return m_system; }
    double eps() const { return m_eps; }
    const Vec2 &theta() const { return m_theta; }

private:
    const SpMatR *m_M;
    double m_eps;
    Vec2 m_theta;
    SpMatC m_system;
    Eigen::SimplicialLLT<SpMatC> m_llt;
};

// ---------------------------------------------------------------------------
// The subspace L = {c + u, u supported on the inclusion} and its projection.
// ---------------------------------------------------------------------------

/*! L^2-orthogonal projection onto L, computed from the explicit basis
//  {1, interior nodal functions} by a normal-equation solve with the Gram
//  matrix [[1, m^T], [m, M_int]]. Idempotent and M-self-adjoint by
//  construction.
*/
class PfProjector {
public:
    PfProjector(const CellModel &model, const fem::NormContext &norms)
        : m_model(&model), m_norms(&norms) {
        const auto &idx = model.interior_nodes;
        const int ni = static_cast<int>(idx.size());
        const VecR m_full = norms.M() * VecR::Ones(model.n_nodes());
        MatR gram(ni + 1, ni + 1);
        gram(0, 0) = m_full.sum(); // total cell volume, equals 1
        for (int i = 0; i < ni; ++i) {
            gram(0, i + 1) = gram(i + 1, 0) = m_full[idx[i]];
            for (int j = 0; j < ni; ++j) gram(i + 1, j + 1) = norms.M().coeff(idx[i], idx[j]);
        }
        m_gram_ldlt = gram.ldlt();
    }

    // Coefficients (c, v) of the projection in the L basis.
    VecC coefficients(const VecC &F) const {
        const auto &idx = m_model->interior_nodes;
        const VecC MF = m_norms->M() * F;
        VecC rhs(idx.size() + 1);
        rhs[0] = MF.sum();
        for (std::size_t i = 0; i < idx.size(); ++i) rhs[i + 1] = MF[idx[i]];
        VecC c(rhs.size());
        c.real() = m_gram_ldlt.solve(rhs.real().eval());
        c.imag() = m_gram_ldlt.solve(rhs.imag().eval());
        return c;
    }

    VecC operator()(const VecC &F) const {
        const VecC c = coefficients(F);
        VecC out = VecC::Constant(m_model->n_nodes(), c[0]);
        const auto &idx = m_model->interior_nodes;
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] += c[i + 1];
        return out;
    }

private:
    const CellModel *m_model;
    const fem::NormContext *m_norms;
    Eigen::LDLT<MatR> m_gram_ldlt;
};

inline VecC project_Pf(const CellModel &model, const fem::NormContext &norms, const VecC &F) {
    return PfProjector(model, norms)(F);
}

// ---------------------------------------------------------------------------
// Homogenized fiber resolvent on C x H^1_0(Q0).
//
// Unknowns (c, v) with v on interior dofs; the block system is
//   [ A^hom theta.theta + 1   m^T      ] [c]   [ <F, 1>    ]
//   [ m                       S + M_int] [v] = [ (M F)_int ]
// where S is the kappa-shifted inclusion stiffness (kappa = eps*theta), or the
// plain one for the zero_eps limit variant. The right-hand side only pairs F
// against the basis of L, so it coincides with the projected-input route
// <P_f F, .> exactly; the identification map is the zero-extension plus
// constant.
// ---------------------------------------------------------------------------

class HomFiber {
public:
    HomFiber(const CellModel &model, const fem::NormContext &norms, const HomogenizedMatrix &hom,
             double eps, const Vec2 &theta, bool zero_eps)
        : m_model(&model), m_norms(&norms), m_eps(eps), m_theta(theta), m_zero_eps(zero_eps) {
        const auto &idx = model.interior_nodes;
        const int ni = static_cast<int>(idx.size());
        const Vec2 kappa = zero_eps ? Vec2(Vec2::Zero()) : reduce_quasimomentum(eps, theta);
        m_ahom_tt = hom.theta_energy(theta);

        const SpMatC Ksoft = fem::assemble_shifted_stiffness(model, model.coefficients.a0, kappa);
        m_S = detail::restrict_rows_cols_dense(Ksoft, idx);

        const VecR m_full = norms.M() * VecR::Ones(model.n_nodes());
        m_m0.resize(ni);
        for (int i = 0; i < ni; ++i) m_m0[i] = m_full[idx[i]];
        m_Mint = detail::restrict_rows_cols(norms.M(), idx);

        MatC H(ni + 1, ni + 1);
        H(0, 0) = m_ahom_tt + 1.0;
        for (int i = 0; i < ni; ++i) {
            H(0, i + 1) = m_m0[i];
            H(i + 1, 0) = m_m0[i];
            for (int j = 0; j < ni; ++j) H(i + 1, j + 1) = m_S(i, j);
        }
        H.bottomRightCorner(ni, ni) += MatC(m_Mint);
        m_H = H;
        m_ldlt = H.ldlt();
    }

    std::pair<Cplx, VecC> solve_pair(const VecC &F) const {
        const auto &idx = m_model->interior_nodes;
        const VecC MF = m_norms->M() * F;
        VecC rhs(idx.size() + 1);
        rhs[0] = MF.sum();
        for (std::size_t i = 0; i < idx.size(); ++i) rhs[i + 1] = MF[idx[i]];
        const VecC sol = m_ldlt.solve(rhs);
        return {sol[0], sol.tail(idx.size())};
    }

    // Identified field I(c, v) = c + zero-extension of v.
    VecC apply(const VecC &F) const {
        auto [c, v] = solve_pair(F);
        VecC out = VecC::Constant(m_model->n_nodes(), c);
        const auto &idx = m_model->interior_nodes;
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] += v[i];
        return out;
    }

    // Adjoint of apply in the plain pairing: M E H^-1 E^H (H Hermitian).
    VecC apply_adjoint(const VecC &x) const {
        const auto &idx = m_model->interior_nodes;
        VecC rhs(idx.size() + 1);
        rhs[0] = x.sum();
        for (std::size_t i = 0; i < idx.size(); ++i) rhs[i + 1] = x[idx[i]];
        const VecC sol = m_ldlt.solve(rhs);
        VecC out = VecC::Constant(m_model->n_nodes(), sol[0]);
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] += sol[i + 1];
        return m_norms->M() * out;
    }

    double ahom_tt() const { return m_ahom_tt; }
    const MatC &block_matrix() const { return m_H; }
    const MatC &soft_stiffness() const { return m_S; }          // S(kappa), interior block
    const SpMatR &interior_mass() const { return m_Mint; }
    const VecR &interior_masses() const { return m_m0; }        // (M 1)_int
    const Eigen::LDLT<MatC> &factorization() const { return m_ldlt; }

private:
    const CellModel *m_model;
    const fem::NormContext *m_norms;
    double m_eps;
    Vec2 m_theta;
    bool m_zero_eps;
    double m_ahom_tt = 0;
    VecR m_m0;
    MatC m_S, m_H;
    SpMatR m_Mint;
    Eigen::LDLT<MatC> m_ldlt;
};

// ---------------------------------------------------------------------------
// Outer operator: Dirichlet resolvent on the inclusion, zero-extended. The
// operator itself carries no quasimomentum; the kappa argument documents the
// fiber it serves.
// ---------------------------------------------------------------------------

class InclusionDirichlet {
public:
    InclusionDirichlet(const CellModel &model, const fem::NormContext &norms)
        : m_model(&model), m_norms(&norms) {
        if (model.interior_nodes.empty()) fail(ErrorCode::EmptyInclusion, "no interior inclusion dofs");
        const SpMatR K0 = fem::assemble_stiffness(model, model.coefficients.a0);
        const SpMatR sys = detail::restrict_rows_cols(K0, model.interior_nodes) +
                           detail::restrict_rows_cols(norms.M(), model.interior_nodes);
        m_llt.compute(sys);
        if (m_llt.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "inclusion Dirichlet factorization failed");
    }

    // Interior solve of (K0 + M)_int w = g for an interior functional g.
    VecC solve_interior(const VecC &g) const {
        VecC w(g.size());
        w.real() = m_llt.solve(g.real().eval());
        w.imag() = m_llt.solve(g.imag().eval());
        return w;
    }

    VecC restrict_functional(const VecC &full) const {
        const auto &idx = m_model->interior_nodes;
        VecC g(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) g[i] = full[idx[i]];
        return g;
    }

    VecC extend(const VecC &w) const {
        VecC out = VecC::Zero(m_model->n_nodes());
        const auto &idx = m_model->interior_nodes;
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = w[i];
        return out;
    }

    // (B0 + I)^-1 P0 F, zero-extended to the cell.
    VecC apply(const VecC &F) const {
        return extend(solve_interior(restrict_functional(m_norms->M() * F)));
    }

    // Adjoint of apply in the plain pairing: M E S^-1 E^T.
    VecC apply_adjoint(const VecC &x) const {
        return m_norms->M() * extend(solve_interior(restrict_functional(x)));
    }

private:
    const CellModel *m_model;
    const fem::NormContext *m_norms;
    Eigen::SimplicialLLT<SpMatR> m_llt;
};

inline VecC outer_resolvent(const CellModel &model, const fem::NormContext &norms,
                            const Vec2 & /*kappa*/, const VecC &F) {
    return InclusionDirichlet(model, norms).apply(F);
}

// ---------------------------------------------------------------------------
// Finite-torus Gelfand transform.
//
// The torus holds M_cells x M_cells copies of the cell at eps = 1/M_cells;
// quasimomenta are theta_k = 2 pi k / (eps M_cells), k in {0..M_cells-1}^2, so
// eps theta_k sweeps the dual cell. The transform is the per-node DFT across
// cells with the extra nodal phase exp(-i eps theta_k . y); it is unitary in
// the trapezoidal (lumped-mass) L^2 norm, which on this uniform grid is the
// scaled Euclidean norm.
// ---------------------------------------------------------------------------

struct TorusSample {
    int M_cells = 1;
    int n = 1;
    VecC values; // cell-major: index = (cy*M_cells + cx)*n*n + node_id

    int cells() const { return M_cells * M_cells; }
    int dofs_per_cell() const { return n * n; }
};

struct FiberedField {
    int M_cells = 1;
    int n = 1;
    std::vector<VecC> fibers;  // one coefficient field per quasimomentum
    std::vector<Vec2> thetas;  // matching rescaled quasimomenta
};

inline FiberedField gelfand_forward(const TorusSample &sample) {
    const int M = sample.M_cells, nn = sample.dofs_per_cell();
    const double eps = 1.0 / M;
    FiberedField out;
    out.M_cells = M;
    out.n = sample.n;
    out.fibers.assign(sample.cells(), VecC::Zero(nn));
    out.thetas.resize(sample.cells());

    for (int ky = 0; ky < M; ++ky)
        for (int kx = 0; kx < M; ++kx) {
            const int k = ky * M + kx;
            const Vec2 theta(2.0 * M_PI * kx / (eps * M), 2.0 * M_PI * ky / (eps * M));
            out.thetas[k] = theta;
            VecC &g = out.fibers[k];
            for (int cy = 0; cy < M; ++cy)
                for (int cx = 0; cx < M; ++cx) {
                    const int cell = cy * M + cx;
                    const Cplx cell_phase = std::polar(1.0, -2.0 * M_PI * (kx * cx + ky * cy) / double(M));
                    for (int i = 0; i < nn; ++i) {
                        const double yx = (i % sample.n) / double(sample.n);
                        const double yy = (i / sample.n) / double(sample.n);
                        const Cplx node_phase = std::polar(1.0, -eps * (theta[0] * yx + theta[1] * yy));
                        g[i] += sample.values[cell * nn + i] * cell_phase * node_phase;
                    }
                }
            g /= double(M);
        }
    return out;
}

inline TorusSample gelfand_inverse(const FiberedField &field) {
    const int M = field.M_cells, nn = field.n * field.n;
    const double eps = 1.0 / M;
    TorusSample out;
    out.M_cells = M;
    out.n = field.n;
    out.values = VecC::Zero(static_cast<Eigen::Index>(M) * M * nn);
    for (int cy = 0; cy < M; ++cy)
        for (int cx = 0; cx < M; ++cx) {
            const int cell = cy * M + cx;
            for (int ky = 0; ky < M; ++ky)
                for (int kx = 0; kx < M; ++kx) {
                    const int k = ky * M + kx;
                    const Vec2 &theta = field.thetas[k];
                    const Cplx cell_phase = std::polar(1.0, 2.0 * M_PI * (kx * cx + ky * cy) / double(M));
                    for (int i = 0; i < nn; ++i) {
                        const double yx = (i % field.n) / double(field.n);
                        const double yy = (i / field.n) / double(field.n);
                        const Cplx node_phase = std::polar(1.0, eps * (theta[0] * yx + theta[1] * yy));
                        out.values[cell * nn + i] += field.fibers[k][i] * cell_phase * node_phase / double(M);
                    }
                }
        }
    return out;
}

} // namespace fibers
} // namespace hc
