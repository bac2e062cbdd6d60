#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/errors.hpp>
#include <hc/fem.hpp>

namespace hc {
namespace homogenization {

// ---------------------------------------------------------------------------
// Unit-cell solutions and the homogenized matrix.
// ---------------------------------------------------------------------------

struct CellSolutions {
    VecR N1, N2; // kernel-complement representatives, real at zero quasimomentum
    const VecR &operator[](int k) const { return k == 0 ? N1 : N2; }
};

/*! Solves the degenerate unit-cell problems
//    K(A1,0) N_k = -(rhs of the k-th column divergence),  N_k in V^perp(0).
//  The right-hand side is orthogonal to constants (partition of unity) and to
//  the interior indicators (their supports carry A1 = 0), so the solvability
//  assertion can only fire on an internal inconsistency.
*/
inline CellSolutions solve_cell_problems(const CellModel &model, const fem::NormContext &norms) {
    const fem::DegenerateSolver solver = fem::make_stiff_solver(model, norms, Vec2::Zero());
    CellSolutions cells;
    for (int k = 0; k < 2; ++k) {
        const VecR rhs = -fem::assemble_gradient_rhs(model, model.coefficients.a1, k);
        const VecC Nk = solver.solve(rhs.cast<Cplx>());
        (k == 0 ? cells.N1 : cells.N2) = Nk.real();
    }
    return cells;
}

struct HomogenizedMatrix {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    double theta_energy(const Vec2 &theta) const { return theta.dot(A * theta); }
};

/*! (A^hom)_{kl} = int_Q A1 (e_k + grad N_k) . (e_l + grad N_l), by direct
//  Gauss-point evaluation of the corrected gradients. Exact for the bilinear
//  correctors; symmetry holds by construction and positive definiteness is
//  checked (a failure indicates a geometry the validator should have caught).
*/
inline HomogenizedMatrix compute_Ahom(const CellModel &model, const CellSolutions &cells) {
    const double h = model.h(), h2 = h * h;
    const int n = model.n();
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            const Tensor2 &a1 = model.coefficients.a1[model.element_id(ex, ey)];
            if (a1.isZero(0.0)) continue;
            const auto nodes = fem::element_nodes(model, ex, ey);
            for (const auto &q : fem::quad_rule()) {
                Eigen::Matrix2d G = Eigen::Matrix2d::Identity(); // columns e_k + grad N_k
                for (int i = 0; i < 4; ++i) {
                    const Vec2 gi = q.dphi[i] / h;
                    G.col(0) += cells.N1[nodes[i]] * gi;
                    G.col(1) += cells.N2[nodes[i]] * gi;
                }
                A += q.w * h2 * G.transpose() * a1 * G;
            }
        }
    A = ((A + A.transpose()) / 2.0).eval(); // symmetrize roundoff
    HomogenizedMatrix hom{A};
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(A);
    if (eig.eigenvalues().minCoeff() <= 0)
        fail(ErrorCode::NotPositiveDefinite, "homogenized matrix is not positive definite");
    return hom;
}

// ---------------------------------------------------------------------------
// Inner-expansion correctors at |theta| <= 1.
// ---------------------------------------------------------------------------

struct CorrectorSet {
    Vec2 theta;
    Cplx c0 = 0;   // leading constant on the stiff phase
    VecC v0;       // leading soft-inclusion profile, supported on interior dofs
    VecC u0;       // identified field c0 + extension of v0
    VecC u1;       // i (N_1 theta_1 + N_2 theta_2) c0, kernel-complement representative
    VecC Rtheta;   // second corrector from the degenerate solve
    VecC Ftheta;   // its right-hand-side functional
};

namespace detail {

// Leading-order inner system on (c, v): the limit form with plain gradients,
//   (A^hom theta.theta + 1) c + m^T v   = <F, 1>
//   m c + (K(A0,0) + M)_int v          = (M F)_int.
struct InnerSystem {
    std::vector<int> idx;
    Eigen::LDLT<MatR> solver;
    VecR m0;   // (M 1) restricted to interior dofs
    double total_mass = 1.0;

    InnerSystem(const CellModel &model, const fem::NormContext &norms, double ahom_tt) {
        idx = model.interior_nodes;
        const int ni = static_cast<int>(idx.size());
        const VecR m_full = norms.M() * VecR::Ones(model.n_nodes());
        m0.resize(ni);
        for (int i = 0; i < ni; ++i) m0[i] = m_full[idx[i]];
        const SpMatR K0 = fem::assemble_stiffness(model, model.coefficients.a0);
        MatR H(ni + 1, ni + 1);
        H(0, 0) = ahom_tt + 1.0;
        for (int i = 0; i < ni; ++i) {
            H(0, i + 1) = H(i + 1, 0) = m0[i];
            for (int j = 0; j < ni; ++j) H(i + 1, j + 1) = K0.coeff(idx[i], idx[j]) + norms.M().coeff(idx[i], idx[j]);
        }
        solver = H.ldlt();
    }

    // Returns (c, v_interior) for data F given as a dof vector.
    std::pair<Cplx, VecC> solve(const fem::NormContext &norms, const VecC &F) const {
        const VecC MF = norms.M() * F;
        VecC rhs(idx.size() + 1);
        rhs[0] = MF.sum();
        for (std::size_t i = 0; i < idx.size(); ++i) rhs[i + 1] = MF[idx[i]];
        VecC sol(rhs.size());
        sol.real() = solver.solve(rhs.real().eval());
        sol.imag() = solver.solve(rhs.imag().eval());
        return {sol[0], sol.tail(idx.size())};
    }
};

} // namespace detail

/*! Builds the full corrector family for one (theta, F):
//  the leading pair (c0, v0) from the limit inner system, the first corrector
//  u1 = i sum_j N_j theta_j c0, the order-zero residual functional F_theta
//  assembled weakly,
//    <F_theta, phi> = <F,phi> + i((C^T - C) u1, phi)_{A1 theta}
//                     - (K(A0,0) u0, phi) - c0 (W(A1,theta) 1, phi) - (M u0, phi),
//  and the second corrector R_theta solving the degenerate problem with it.
//  Solvability of F_theta against the kernel holds by construction; it is
//  asserted at 1e-8 relative as an internal-consistency check.
*/
class InnerCorrectorBuilder {
public:
    InnerCorrectorBuilder(const CellModel &model, const fem::NormContext &norms,
                          const HomogenizedMatrix &hom, const CellSolutions &cells)
        : m_model(model), m_norms(norms), m_hom(hom), m_cells(cells),
          m_stiff_solver(fem::make_stiff_solver(model, norms, Vec2::Zero(), 1e-8)),
          m_K0(fem::assemble_stiffness(model, model.coefficients.a0)) {}

    CorrectorSet build(const Vec2 &theta, const VecC &F) const {
        const int N = m_model.n_nodes();
        CorrectorSet out;
        out.theta = theta;

        detail::InnerSystem inner(m_model, m_norms, m_hom.theta_energy(theta));
        auto [c0, v_int] = inner.solve(m_norms, F);
        out.c0 = c0;
        out.v0 = VecC::Zero(N);
        for (std::size_t i = 0; i < m_model.interior_nodes.size(); ++i)
            out.v0[m_model.interior_nodes[i]] = v_int[i];
        out.u0 = out.v0;
        out.u0.array() += c0;

        out.u1 = Cplx(0, 1) * c0 * (theta[0] * m_cells.N1 + theta[1] * m_cells.N2).cast<Cplx>();

        const SpMatR C1 = fem::assemble_convection(m_model, m_model.coefficients.a1, theta);
        const SpMatR W1 = fem::assemble_weighted_mass(m_model, m_model.coefficients.a1, theta);
        out.Ftheta = (m_norms.M() * F).eval();
        out.Ftheta += Cplx(0, 1) * (C1.transpose() * out.u1 - C1 * out.u1);
        out.Ftheta -= m_K0 * out.u0;
        out.Ftheta -= c0 * (W1 * VecC::Ones(N));
        out.Ftheta -= m_norms.M() * out.u0;

        out.Rtheta = m_stiff_solver.solve(out.Ftheta);
        return out;
    }

private:
    const CellModel &m_model;
    const fem::NormContext &m_norms;
    HomogenizedMatrix m_hom;
    const CellSolutions &m_cells;
    fem::DegenerateSolver m_stiff_solver;
    SpMatR m_K0;
};

inline CorrectorSet build_inner_corrector(const CellModel &model, const fem::NormContext &norms,
                                          const HomogenizedMatrix &hom, const CellSolutions &cells,
                                          const Vec2 &theta, const VecC &F) {
    return InnerCorrectorBuilder(model, norms, hom, cells).build(theta, F);
}

/*! Assembles the first-order residual functional
//    F1 = eps T1 + eps^2 T2 + eps^3 T3 + eps^4 T4
//  with the four tails of the expansion (first-order transport of R, the
//  zero-order operator applied to u1 and R, and the theta.A0 theta mass terms)
//  and returns its dual norm. All derivative terms are taken weakly; bilinear
//  elements have no strong second derivatives.
*/
inline double case1_residual(const CellModel &model, const fem::NormContext &norms,
                             const CorrectorSet &cs, double eps) {
    const Vec2 theta = cs.theta;
    const SpMatR C1 = fem::assemble_convection(model, model.coefficients.a1, theta);
    const SpMatR C0 = fem::assemble_convection(model, model.coefficients.a0, theta);
    const SpMatR W1 = fem::assemble_weighted_mass(model, model.coefficients.a1, theta);
    const SpMatR W0 = fem::assemble_weighted_mass(model, model.coefficients.a0, theta);
    const SpMatR K0 = fem::assemble_stiffness(model, model.coefficients.a0);
    const SpMatR &M = norms.M();
    const Cplx I(0, 1);

    auto transport1 = [&](const VecC &g) { return (I * (C1.transpose() * g - C1 * g)).eval(); };
    auto transport0 = [&](const VecC &g) { return (I * (C0.transpose() * g - C0 * g)).eval(); };
    auto zero_order = [&](const VecC &g) { return (-(K0 * g) - W1 * g - M * g).eval(); };

    const VecC T1 = transport1(cs.Rtheta) + zero_order(cs.u1) + transport0(cs.u0);
    const VecC T2 = zero_order(cs.Rtheta) + transport0(cs.u1) - W0 * cs.u0;
    const VecC T3 = transport0(cs.Rtheta) - W0 * cs.u1;
    const VecC T4 = -(W0 * cs.Rtheta);

    const VecC F1 = eps * T1 + eps * eps * T2 + eps * eps * eps * T3 + eps * eps * eps * eps * T4;
    return norms.hminus1(F1);
}

} // namespace homogenization
} // namespace hc
