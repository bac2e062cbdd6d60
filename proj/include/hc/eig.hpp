#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <hc/errors.hpp>
#include <hc/fem.hpp>

namespace hc {
namespace eig {

// ---------------------------------------------------------------------------
// Dense Hermitian pencils A x = lambda B x with B positive definite.
// ---------------------------------------------------------------------------

struct PencilEigs {
    VecR values; // ascending
    MatC vectors; // columns, normalized x^H B x = 1
};

inline PencilEigs hermitian_pencil_eigs(const MatC &A, const MatC &B) {
    Eigen::LLT<MatC> llt(B);
    if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "pencil metric is not positive definite");
    const MatC L = llt.matrixL();
    MatC T = L.triangularView<Eigen::Lower>().solve(A);
    T = L.triangularView<Eigen::Lower>().solve(T.adjoint().eval()).adjoint();
    Eigen::SelfAdjointEigenSolver<MatC> eig(T);
    if (eig.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "dense Hermitian eigensolve failed");
    PencilEigs out;
    out.values = eig.eigenvalues();
    out.vectors = L.adjoint().triangularView<Eigen::Upper>().solve(eig.eigenvectors());
    return out;
}

struct PencilEigsR {
    VecR values;
    MatR vectors;
};

inline PencilEigsR symmetric_pencil_eigs(const MatR &A, const MatR &B) {
    Eigen::GeneralizedSelfAdjointEigenSolver<MatR> eig(A, B);
    if (eig.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "dense symmetric pencil eigensolve failed");
    return {eig.eigenvalues(), eig.eigenvectors()};
}

// ---------------------------------------------------------------------------
// Lanczos in the mass inner product <u,v> = u^H M v, for operators that are
// self-adjoint with respect to it. Full reorthogonalization, deterministic
// start vector; tolerance and iteration cap follow the estimator defaults.
// ---------------------------------------------------------------------------

struct LanczosOptions {
    double tol = 1e-8;      // relative residual target
    double abs_tol = 0.0;   // absolute floor, for operators that are themselves tiny
    int max_iter = 500;
    std::uint64_t seed = 0x2545F4914F6CDD1DULL;
};

struct LanczosResult {
    double extreme = 0;   // largest-magnitude Ritz value
    double largest = 0;   // largest Ritz value
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline VecC lanczos_start(int N, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VecC v(N);
    for (int i = 0; i < N; ++i) v[i] = Cplx(dist(rng), dist(rng));
    return v;
}

} // namespace detail

/*! Largest-magnitude eigenvalue of an M-self-adjoint operator.
//  @param apply  y = Op(x) on dof vectors
//  @param M      sparse Hermitian positive definite metric
//  Throws EigenFailure when the residual bound has not met tol at the cap. */
template <class Op>
LanczosResult lanczos_extreme_eigenvalue(Op &&apply, const SpMatR &M, const LanczosOptions &opt = {}) {
    const int N = static_cast<int>(M.rows());
    std::vector<VecC> basis;
    std::vector<double> alpha, beta;

    VecC v = detail::lanczos_start(N, opt.seed);
    {
        const double nrm = std::sqrt(std::max(0.0, (v.adjoint() * (M * v))[0].real()));
        v /= nrm;
    }
    basis.push_back(v);

    LanczosResult result;
    const int cap = std::min(opt.max_iter, N);
    for (int k = 0; k < cap; ++k) {
        VecC w = apply(basis[k]);
        const VecC Mw0 = M * w;
        const double a = (basis[k].adjoint() * Mw0)[0].real();
        alpha.push_back(a);
        w -= a * basis[k];
        if (k > 0) w -= beta[k - 1] * basis[k - 1];
        // Full reorthogonalization in the M inner product.
        for (const VecC &u : basis) {
            const Cplx c = (u.adjoint() * (M * w))[0];
            w -= c * u;
        }
        const double b = std::sqrt(std::max(0.0, (w.adjoint() * (M * w))[0].real()));

        // Ritz values of the current tridiagonal section.
        const int m = static_cast<int>(alpha.size());
        MatR T = MatR::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            T(i, i) = alpha[i];
            if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<MatR> eig(T);
        int idx = 0;
        eig.eigenvalues().cwiseAbs().maxCoeff(&idx);
        const double theta = eig.eigenvalues()[idx];
        const double residual = b * std::abs(eig.eigenvectors()(m - 1, idx));
        result.extreme = theta;
        result.largest = eig.eigenvalues().maxCoeff();
        result.iterations = m;
        if (residual <= std::max(opt.tol * std::abs(theta), opt.abs_tol)) {
            result.converged = true;
            return result;
        }
        if (b < 1e-14) { // exhausted an invariant subspace
            result.converged = true;
            return result;
        }
        beta.push_back(b);
        basis.push_back(w / b);
    }
    fail(ErrorCode::EigenFailure, "Lanczos did not converge within the iteration cap");
}

/*! Lowest m eigenvalues of the Hermitian pencil (A, M), A >= 0, via
//  shift-invert at -1: Lanczos on (A+M)^{-1} M, which is M-self-adjoint with
//  eigenvalues mu = 1/(lambda+1). */
inline VecR lanczos_lowest_pencil(const SpMatC &A, const SpMatR &M, int m,
                                  const LanczosOptions &opt = {}) {
    const int N = static_cast<int>(M.rows());
    if (m > N) fail(ErrorCode::EigenFailure, "more eigenvalues requested than the dimension");
    SpMatC shifted = A + M.cast<Cplx>();
    Eigen::SparseLU<SpMatC> lu(shifted);
    if (lu.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "shift-invert factorization failed");

    std::vector<VecC> basis;
    std::vector<double> alpha, beta;
    VecC v = detail::lanczos_start(N, opt.seed);
    v /= std::sqrt(std::max(0.0, (v.adjoint() * (M * v))[0].real()));
    basis.push_back(v);

    const int cap = std::min(std::max(opt.max_iter, 4 * m + 20), N);
    for (int k = 0; k < cap; ++k) {
        VecC w = lu.solve((M * basis[k]).eval());
        const double a = (basis[k].adjoint() * (M * w))[0].real();
        alpha.push_back(a);
        w -= a * basis[k];
        if (k > 0) w -= beta[k - 1] * basis[k - 1];
        for (const VecC &u : basis) {
            const Cplx c = (u.adjoint() * (M * w))[0];
            w -= c * u;
        }
        const double b = std::sqrt(std::max(0.0, (w.adjoint() * (M * w))[0].real()));

        const int sz = static_cast<int>(alpha.size());
        if (sz >= m) {
            MatR T = MatR::Zero(sz, sz);
            for (int i = 0; i < sz; ++i) {
                T(i, i) = alpha[i];
                if (i + 1 < sz) T(i, i + 1) = T(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<MatR> eig(T);
            // Top m Ritz values of the inverted operator approximate the m
            // lowest pencil eigenvalues.
            bool ok = b < 1e-14;
            if (!ok) {
                ok = true;
                for (int j = 0; j < m; ++j) {
                    const int idx = sz - 1 - j;
                    const double mu = eig.eigenvalues()[idx];
                    const double residual = b * std::abs(eig.eigenvectors()(sz - 1, idx));
                    if (residual > std::max(opt.tol * std::abs(mu), opt.abs_tol)) {
                        ok = false;
                        break;
                    }
                }
            }
            if (ok || k + 1 == cap) {
                if (!ok) fail(ErrorCode::EigenFailure, "shift-invert Lanczos did not converge");
                VecR lambdas(m);
                for (int j = 0; j < m; ++j) {
                    const double mu = eig.eigenvalues()[sz - 1 - j];
                    if (mu <= 0) fail(ErrorCode::EigenFailure, "nonpositive shift-invert Ritz value");
                    lambdas[j] = 1.0 / mu - 1.0;
                }
                std::sort(lambdas.data(), lambdas.data() + m);
                return lambdas;
            }
        }
        if (b < 1e-14) fail(ErrorCode::EigenFailure, "Lanczos space exhausted before convergence");
        beta.push_back(b);
        basis.push_back(w / b);
    }
    fail(ErrorCode::EigenFailure, "shift-invert Lanczos did not converge");
}

} // namespace eig
} // namespace hc
