#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/errors.hpp>

namespace hc {

using Cplx = std::complex<double>;
using VecR = Eigen::VectorXd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using MatC = Eigen::MatrixXcd;
using SpMatR = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<Cplx>;
using Vec2 = Eigen::Vector2d;

namespace fem {

// ---------------------------------------------------------------------------
// Bilinear quadrilateral reference data, 2x2 Gauss rule.
//
// All integrands appearing below (products of bilinear shapes and their
// gradients against elementwise-constant tensors) have degree at most two per
// axis, so the rule integrates them exactly; there is no quadrature error
// anywhere in the assembly.
// ---------------------------------------------------------------------------

struct QuadPoint {
    double w;                       // weight on the unit square
    std::array<double, 4> phi;      // shape values
    std::array<Vec2, 4> dphi;       // reference gradients
};

inline const std::array<QuadPoint, 4> &quad_rule() {
    static const std::array<QuadPoint, 4> rule = [] {
        std::array<QuadPoint, 4> r{};
        const double g0 = 0.5 - 0.5 / std::sqrt(3.0), g1 = 0.5 + 0.5 / std::sqrt(3.0);
        const double pts[2] = {g0, g1};
        int q = 0;
        for (double eta : pts)
            for (double xi : pts) {
                QuadPoint &p = r[q++];
                p.w = 0.25;
                p.phi = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
                p.dphi = {Vec2{-(1 - eta), -(1 - xi)}, Vec2{1 - eta, -xi},
                          Vec2{eta, xi}, Vec2{-eta, 1 - xi}};
            }
        return r;
    }();
    return rule;
}

// Element corner nodes, counterclockwise from the lower-left one, and the
// per-corner wrap offsets used by the Bloch-phase assembly below.
inline std::array<int, 4> element_nodes(const CellModel &model, int ex, int ey) {
    return {model.node_id(ex, ey), model.node_id(ex + 1, ey),
            model.node_id(ex + 1, ey + 1), model.node_id(ex, ey + 1)};
}

inline std::array<Cplx, 4> element_phases(const CellModel &model, int ex, int ey, const Vec2 &kappa) {
    const int n = model.n();
    std::array<Cplx, 4> p;
    const int dx[4] = {0, 1, 1, 0}, dy[4] = {0, 0, 1, 1};
    for (int a = 0; a < 4; ++a) {
        double arg = 0;
        if (ex + dx[a] == n) arg += kappa[0];
        if (ey + dy[a] == n) arg += kappa[1];
        p[a] = std::polar(1.0, arg);
    }
    return p;
}

namespace detail {

template <typename Scalar, typename LocalFn>
Eigen::SparseMatrix<Scalar> assemble(const CellModel &model, LocalFn &&local) {
    using Trip = Eigen::Triplet<Scalar>;
    std::vector<Trip> trips;
    const int n = model.n();
    trips.reserve(static_cast<std::size_t>(16) * n * n);
    Eigen::Matrix<Scalar, 4, 4> loc;
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            const auto nodes = element_nodes(model, ex, ey);
            local(ex, ey, loc);
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    trips.emplace_back(nodes[a], nodes[b], loc(a, b));
        }
    Eigen::SparseMatrix<Scalar> mat(model.n_nodes(), model.n_nodes());
    mat.setFromTriplets(trips.begin(), trips.end());
    mat.makeCompressed();
    return mat;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Periodic assembly, quasimomentum-shifted convention:
//   K(A,kappa)[i,j] = int_Q A (grad + i kappa) phi_j . conj((grad + i kappa) phi_i).
// ---------------------------------------------------------------------------

inline SpMatC assemble_shifted_stiffness(const CellModel &model, const std::vector<Tensor2> &A,
                                         const Vec2 &kappa) {
    const double h = model.h(), h2 = h * h;
    return detail::assemble<Cplx>(model, [&](int ex, int ey, Eigen::Matrix4cd &loc) {
        const Tensor2 &a = A[model.element_id(ex, ey)];
        const Vec2 ak = a * kappa;
        const double kak = kappa.dot(ak);
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i) {
                const Vec2 gi = q.dphi[i] / h;
                for (int j = 0; j < 4; ++j) {
                    const Vec2 gj = q.dphi[j] / h;
                    const double re = gi.dot(a * gj) + kak * q.phi[i] * q.phi[j];
                    const double im = q.phi[j] * ak.dot(gi) - q.phi[i] * ak.dot(gj);
                    loc(i, j) += q.w * h2 * Cplx(re, im);
                }
            }
    });
}

inline SpMatR assemble_stiffness(const CellModel &model, const std::vector<Tensor2> &A) {
    // Physical gradients carry 1/h each; the h^2 element area cancels them.
    return detail::assemble<double>(model, [&](int ex, int ey, Eigen::Matrix4d &loc) {
        const Tensor2 &a = A[model.element_id(ex, ey)];
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * q.dphi[i].dot(a * q.dphi[j]);
    });
}

inline SpMatR assemble_mass(const CellModel &model) {
    const double h2 = model.h() * model.h();
    return detail::assemble<double>(model, [&](int, int, Eigen::Matrix4d &loc) {
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * h2 * q.phi[i] * q.phi[j];
    });
}

// Weighted mass W(A,theta)[i,j] = int (theta . A theta) phi_i phi_j.
inline SpMatR assemble_weighted_mass(const CellModel &model, const std::vector<Tensor2> &A,
                                     const Vec2 &theta) {
    const double h2 = model.h() * model.h();
    return detail::assemble<double>(model, [&](int ex, int ey, Eigen::Matrix4d &loc) {
        const double s = theta.dot(A[model.element_id(ex, ey)] * theta);
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * h2 * s * q.phi[i] * q.phi[j];
    });
}

// Convection-type coupling C(A,theta)[i,j] = int phi_j (A theta) . grad phi_i.
// The weak image of the first-order operator i(div(A theta .) + theta . A grad)
// acting on a dof vector g is then i (C^T - C) g.
inline SpMatR assemble_convection(const CellModel &model, const std::vector<Tensor2> &A,
                                  const Vec2 &theta) {
    const double h = model.h(), h2 = h * h;
    return detail::assemble<double>(model, [&](int ex, int ey, Eigen::Matrix4d &loc) {
        const Vec2 at = A[model.element_id(ex, ey)] * theta;
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * h2 * q.phi[j] * at.dot(q.dphi[i] / h);
    });
}

// rhs[i] = int (A e_k) . grad phi_i, the unit-cell problem data.
inline VecR assemble_gradient_rhs(const CellModel &model, const std::vector<Tensor2> &A, int k) {
    const double h = model.h(), h2 = h * h;
    VecR rhs = VecR::Zero(model.n_nodes());
    const int n = model.n();
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            const Vec2 aek = A[model.element_id(ex, ey)].col(k);
            const auto nodes = element_nodes(model, ex, ey);
            for (const QuadPoint &q : quad_rule())
                for (int i = 0; i < 4; ++i)
                    rhs[nodes[i]] += q.w * h2 * aek.dot(q.dphi[i] / h);
        }
    return rhs;
}

// ---------------------------------------------------------------------------
// Bloch-phase ("twisted") assembly: plain gradients, but wrap-around element
// contributions carry the quasiperiodic phases exp(i kappa_j). Restricted to
// interior-Q0 dofs these matrices coincide exactly with the plain periodic
// ones, which is what makes the outer-expansion recursion consistent with the
// kappa-independent Dirichlet solve on the inclusion.
// ---------------------------------------------------------------------------

inline SpMatC assemble_bloch_stiffness(const CellModel &model, const std::vector<Tensor2> &A,
                                       const Vec2 &kappa) {
    const double h = model.h(), h2 = h * h;
    return detail::assemble<Cplx>(model, [&](int ex, int ey, Eigen::Matrix4cd &loc) {
        const Tensor2 &a = A[model.element_id(ex, ey)];
        const auto p = element_phases(model, ex, ey, kappa);
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i) {
                const Vec2 gi = q.dphi[i] / h;
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * h2 * gi.dot(a * (q.dphi[j] / h)) * std::conj(p[i]) * p[j];
            }
    });
}

inline SpMatC assemble_bloch_mass(const CellModel &model, const Vec2 &kappa) {
    const double h2 = model.h() * model.h();
    return detail::assemble<Cplx>(model, [&](int ex, int ey, Eigen::Matrix4cd &loc) {
        const auto p = element_phases(model, ex, ey, kappa);
        loc.setZero();
        for (const QuadPoint &q : quad_rule())
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j)
                    loc(i, j) += q.w * h2 * q.phi[i] * q.phi[j] * std::conj(p[i]) * p[j];
    });
}

// Independent evaluation of the shifted energy int A |(grad + i kappa) v_h|^2
// by direct Gauss-point sampling; the dual route for the assembly tests.
inline double shifted_energy(const CellModel &model, const std::vector<Tensor2> &A, const Vec2 &kappa,
                             const VecC &v) {
    const double h = model.h(), h2 = h * h;
    const int n = model.n();
    double total = 0;
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            const Tensor2 &a = A[model.element_id(ex, ey)];
            const auto nodes = element_nodes(model, ex, ey);
            for (const QuadPoint &q : quad_rule()) {
                Eigen::Vector2cd z = Eigen::Vector2cd::Zero();
                for (int i = 0; i < 4; ++i) {
                    const Vec2 gi = q.dphi[i] / h;
                    z[0] += v[nodes[i]] * Cplx(gi[0], kappa[0] * q.phi[i]);
                    z[1] += v[nodes[i]] * Cplx(gi[1], kappa[1] * q.phi[i]);
                }
                total += q.w * h2 * ((a.cast<Cplx>() * z).dot(z)).real();
            }
        }
    return total;
}

inline std::vector<Tensor2> identity_field(const CellModel &model) {
    return constant_field(model.n(), 1.0);
}

// Elementwise A^T A, the coefficient of the flux-norm form |A (grad + ik) v|^2.
inline std::vector<Tensor2> squared_field(const std::vector<Tensor2> &A) {
    std::vector<Tensor2> out(A.size());
    for (std::size_t e = 0; e < A.size(); ++e) out[e] = A[e].transpose() * A[e];
    return out;
}

// ---------------------------------------------------------------------------
// Discrete norms. The H^1 matrix S = K_Delta + M is the fixed inner product
// for kernel projections; the dual norm is realized through one S-solve.
// ---------------------------------------------------------------------------

class NormContext {
public:
    explicit NormContext(const CellModel &model)
        : m_M(assemble_mass(model)),
          m_S(assemble_stiffness(model, identity_field(model)) + assemble_mass(model)) {
        m_Sllt.compute(m_S);
        m_Mllt.compute(m_M);
        if (m_Sllt.info() != Eigen::Success || m_Mllt.info() != Eigen::Success)
            fail(ErrorCode::SolverFailure, "norm-context factorization failed");
    }

    const SpMatR &M() const { return m_M; }
    const SpMatR &S() const { return m_S; }

    VecC solve_S(const VecC &rhs) const { return solve(m_Sllt, rhs); }
    VecC solve_M(const VecC &rhs) const { return solve(m_Mllt, rhs); }

    double l2(const VecC &v) const { return std::sqrt(std::max(0.0, (v.adjoint() * (m_M * v))[0].real())); }
    double h1(const VecC &v) const { return std::sqrt(std::max(0.0, (v.adjoint() * (m_S * v))[0].real())); }

    // F is a functional in dof coordinates; ||F||_{H^-1}^2 = F^* (K_Delta+M)^{-1} F.
    double hminus1(const VecC &F) const {
        const VecC z = solve_S(F);
        return std::sqrt(std::max(0.0, (F.adjoint() * z)[0].real()));
    }

private:
    static VecC solve(const Eigen::SimplicialLLT<SpMatR> &llt, const VecC &rhs) {
        VecC out(rhs.size());
        out.real() = llt.solve(rhs.real().eval());
        out.imag() = llt.solve(rhs.imag().eval());
        return out;
    }

    SpMatR m_M, m_S;
    Eigen::SimplicialLLT<SpMatR> m_Sllt, m_Mllt;
};

// ---------------------------------------------------------------------------
// Kernel of the degenerate stiff form at quasimomentum kappa.
//
// A bilinear function with vanishing stiff energy on an element is constant
// there (gradient terms) and, under a nonzero shift, must vanish; propagating
// across the connected stiff phase leaves exactly the interior-Q0 nodal
// indicators, plus the global constant when kappa = 0 (mod 2pi). The basis is
// therefore written down from the masks, never computed numerically.
// ---------------------------------------------------------------------------

struct KernelBasis {
    Vec2 kappa;
    bool has_constant = false;
    std::vector<int> indicator_nodes;
    int n_nodes = 0;

    int dimension() const { return (has_constant ? 1 : 0) + static_cast<int>(indicator_nodes.size()); }

    MatR dense() const {
        MatR B = MatR::Zero(n_nodes, dimension());
        int c = 0;
        if (has_constant) B.col(c++).setOnes();
        for (int node : indicator_nodes) B(node, c++) = 1.0;
        return B;
    }
};

inline bool is_zero_quasimomentum(const Vec2 &kappa) {
    const double two_pi = 2.0 * M_PI;
    for (int d = 0; d < 2; ++d) {
        double r = std::fmod(kappa[d], two_pi);
        if (r < 0) r += two_pi;
        if (std::min(r, two_pi - r) > 1e-12) return false;
    }
    return true;
}

inline KernelBasis kernel_basis(const CellModel &model, const Vec2 &kappa) {
    KernelBasis kb;
    kb.kappa = kappa;
    kb.n_nodes = model.n_nodes();
    kb.has_constant = is_zero_quasimomentum(kappa);
    kb.indicator_nodes = model.interior_nodes;
    return kb;
}

// H^1-orthogonal projection onto the complement of the kernel span.
class ComplementProjector {
public:
    ComplementProjector(const NormContext &norms, const KernelBasis &kb)
        : m_B(kb.dense()), m_SB(norms.S() * m_B) {
        if (m_B.cols() > 0) m_gram = (m_B.transpose() * m_SB).ldlt();
    }

    // Coefficients of the kernel component of w in the basis columns.
    VecC kernel_coefficients(const VecC &w) const {
        if (m_B.cols() == 0) return VecC::Zero(0);
        VecC y(m_B.cols());
        y.real() = m_gram.solve(m_SB.transpose() * w.real().eval());
        y.imag() = m_gram.solve(m_SB.transpose() * w.imag().eval());
        return y;
    }

    VecC kernel_part(const VecC &w) const {
        if (m_B.cols() == 0) return VecC::Zero(w.size());
        return m_B * kernel_coefficients(w);
    }

    VecC operator()(const VecC &w) const { return w - kernel_part(w); }

private:
    MatR m_B, m_SB;
    Eigen::LDLT<MatR> m_gram;
};

inline VecC project_complement(const CellModel &model, const NormContext &norms, const Vec2 &kappa,
                               const VecC &w) {
    return ComplementProjector(norms, kernel_basis(model, kappa))(w);
}

// ---------------------------------------------------------------------------
// Degenerate solve: unique w in the kernel complement with K w = G there.
// Realized as the saddle system [K, S B; B^T S, 0] so the multiplier pins the
// kernel coefficients (in the S inner product) to zero.
// ---------------------------------------------------------------------------

class DegenerateSolver {
public:
    /*! @param K  singular Hermitian stiffness (shifted or Bloch picture)
    //  @param S  Hermitian positive definite H^1 matrix of the same picture
    //  @param kb symbolic kernel basis of K
    //  @param solvability_tol relative compatibility tolerance on |<G, phi>| */
    DegenerateSolver(const SpMatC &K, const SpMatC &S, const KernelBasis &kb,
                     double solvability_tol = 1e-10)
        : m_N(static_cast<int>(K.rows())), m_m(kb.dimension()), m_tol(solvability_tol),
          m_B(kb.dense()) {
        const MatC SB = S * m_B.cast<Cplx>();
        std::vector<Eigen::Triplet<Cplx>> trips;
        trips.reserve(K.nonZeros() + static_cast<std::size_t>(2 * m_N) * m_m);
        double op_scale = 0;
        for (int k = 0; k < K.outerSize(); ++k)
            for (SpMatC::InnerIterator it(K, k); it; ++it) {
                op_scale = std::max(op_scale, std::abs(it.value()));
                trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
            }
        // Loads whose kernel pairing sits at the machine floor of the operator
        // scale are assembly noise on an analytically compatible rhs, not an
        // incompatibility; the floor gates the solvability throw below.
        m_noise_floor = 64.0 * std::numeric_limits<double>::epsilon() * op_scale *
                        std::sqrt(static_cast<double>(m_N));
        for (int c = 0; c < m_m; ++c)
            for (int r = 0; r < m_N; ++r)
                if (SB(r, c) != Cplx(0, 0)) {
                    trips.emplace_back(r, m_N + c, SB(r, c));
                    trips.emplace_back(m_N + c, r, std::conj(SB(r, c)));
                }
        SpMatC saddle(m_N + m_m, m_N + m_m);
        saddle.setFromTriplets(trips.begin(), trips.end());
        saddle.makeCompressed();
        m_lu.compute(saddle);
        if (m_lu.info() != Eigen::Success)
            fail(ErrorCode::SolverFailure, "degenerate saddle factorization failed");
    }

    double solvability_residual(const VecC &G) const {
        const double gnorm = G.norm();
        if (gnorm == 0 || m_m == 0) return 0;
        double worst = 0;
        for (int c = 0; c < m_m; ++c) {
            const double pairing = std::abs(m_B.col(c).cast<Cplx>().dot(G));
            worst = std::max(worst, pairing / (gnorm * m_B.col(c).norm()));
        }
        return worst;
    }

    // Largest |<G, b>| over unit kernel vectors b: the absolute size of the
    // incompatible component, comparable against the operator noise floor.
    double incompatible_component(const VecC &G) const {
        double worst = 0;
        for (int c = 0; c < m_m; ++c)
            worst = std::max(worst, std::abs(m_B.col(c).cast<Cplx>().dot(G)) / m_B.col(c).norm());
        return worst;
    }

    VecC solve(const VecC &G) const {
        const double res = solvability_residual(G);
        if (res > m_tol && incompatible_component(G) > m_noise_floor)
            fail(ErrorCode::SolvabilityViolated,
                 "compatibility residual " + std::to_string(res) + " exceeds tolerance");
        VecC rhs = VecC::Zero(m_N + m_m);
        rhs.head(m_N) = G;
        const VecC x = m_lu.solve(rhs);
        if (m_lu.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "degenerate solve failed");
        return x.head(m_N);
    }

private:
    int m_N, m_m;
    double m_tol;
    double m_noise_floor = 0;
    MatR m_B;
    Eigen::SparseLU<SpMatC> m_lu;
};

// Shifted-picture degenerate solver for the stiff coefficient.
inline DegenerateSolver make_stiff_solver(const CellModel &model, const NormContext &norms,
                                          const Vec2 &kappa, double solvability_tol = 1e-10) {
    return DegenerateSolver(assemble_shifted_stiffness(model, model.coefficients.a1, kappa),
                            norms.S().cast<Cplx>(), kernel_basis(model, kappa), solvability_tol);
}

inline VecC solve_degenerate(const CellModel &model, const NormContext &norms, const Vec2 &kappa,
                             const VecC &G, double solvability_tol = 1e-10) {
    return make_stiff_solver(model, norms, kappa, solvability_tol).solve(G);
}

// ---------------------------------------------------------------------------
// Discrete Poincare-type constant
//   C*(kappa) = max over w orthogonal to V(kappa) of ||w||_H1^2 / ||A1 (grad + i kappa) w||^2,
// via the generalized eigenproblem on an explicit complement basis.
// ---------------------------------------------------------------------------

inline double poincare_constant(const CellModel &model, const NormContext &norms, const Vec2 &kappa) {
    const KernelBasis kb = kernel_basis(model, kappa);
    const int N = model.n_nodes(), m = kb.dimension();
    if (m >= N) fail(ErrorCode::EigenFailure, "kernel exhausts the space");

    MatR Z;
    if (m == 0) {
        Z = MatR::Identity(N, N);
    } else {
        // Complement of the kernel in the S inner product: null space of (S B)^T.
        const MatR C = norms.S() * kb.dense();
        Eigen::HouseholderQR<MatR> qr(C);
        const MatR Q = qr.householderQ() * MatR::Identity(N, N);
        Z = Q.rightCols(N - m);
    }

    const MatR num = Z.transpose() * (norms.S() * Z).eval();
    const SpMatC flux = assemble_shifted_stiffness(model, squared_field(model.coefficients.a1), kappa);
    const MatC den = Z.cast<Cplx>().adjoint() * (flux * Z.cast<Cplx>()).eval();

    Eigen::LLT<MatC> llt(den);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::EigenFailure, "flux form not positive definite on the complement");
    const MatC L = llt.matrixL();
    MatC T = L.triangularView<Eigen::Lower>().solve(num.cast<Cplx>());
    T = L.triangularView<Eigen::Lower>().solve(T.adjoint().eval()).adjoint();
    Eigen::SelfAdjointEigenSolver<MatC> eig(T, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "Poincare eigensolve failed");
    return eig.eigenvalues().maxCoeff();
}

} // namespace fem
} // namespace hc
