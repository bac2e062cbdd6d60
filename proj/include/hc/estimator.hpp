#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/eig.hpp>
#include <hc/errors.hpp>
#include <hc/fem.hpp>
#include <hc/fibers.hpp>
#include <hc/homogenization.hpp>
#include <hc/parallel.hpp>

namespace hc {
namespace estimator {

using homogenization::HomogenizedMatrix;

// ---------------------------------------------------------------------------
// Quasimomentum grids with region tags.
// ---------------------------------------------------------------------------

enum class Region { inner, transition, outer };

inline const char *region_name(Region r) {
    switch (r) {
        case Region::inner: return "inner";
        case Region::transition: return "transition";
        default: return "outer";
    }
}

inline Region classify_theta(double eps, const Vec2 &theta) {
    const double r = theta.norm();
    if (r <= 1.0) return Region::inner;
    if (r < 1.0 / std::sqrt(eps)) return Region::transition;
    return Region::outer;
}

struct ThetaGrid {
    double eps = 1;
    std::vector<Vec2> thetas;
    std::vector<Region> regions;

    std::size_t size() const { return thetas.size(); }

    // Appends one radius along each sampling direction.
    void add_radius(double r) {
        if (r <= 0) fail(ErrorCode::ConfigError, "radius must be positive");
        const std::array<Vec2, 3> dirs = {Vec2(1, 0), Vec2(0, 1),
                                          Vec2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))};
        for (const Vec2 &dir : dirs) {
            thetas.push_back(dir * r);
            regions.push_back(classify_theta(eps, thetas.back()));
        }
    }

    /*! theta = 0 plus log-spaced radii from 0.05 to 1 along each direction:
    //  the quasimomentum ball where the eps-dependent and eps-frozen
    //  homogenized fibers are compared.
    */
    static ThetaGrid unit(double eps, int radii_per_direction = 40) {
        if (eps <= 0 || eps > 1) fail(ErrorCode::ConfigError, "eps out of range");
        if (radii_per_direction < 2) fail(ErrorCode::ConfigError, "need at least two radii");
        ThetaGrid grid;
        grid.eps = eps;
        grid.thetas.push_back(Vec2::Zero());
        grid.regions.push_back(Region::inner);
        const std::array<Vec2, 3> dirs = {Vec2(1, 0), Vec2(0, 1),
                                          Vec2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))};
        for (const Vec2 &dir : dirs)
            for (int j = 0; j < radii_per_direction; ++j) {
                const double t = double(j) / (radii_per_direction - 1);
                grid.thetas.push_back(dir * (0.05 * std::pow(1.0 / 0.05, t)));
                grid.regions.push_back(Region::inner);
            }
        return grid;
    }

    /*! theta = 0 plus radii_per_direction radii along each axis and the
    //  diagonal, reaching the dual-cell boundary (eps theta up to pi per
    //  component). Half the radii are log-spaced from 0.05 outward, half
    //  accumulate geometrically at the boundary, where the approximation
    //  quality switches regime.
    */
    static ThetaGrid build(double eps, int radii_per_direction = 40) {
        if (eps <= 0 || eps > 1) fail(ErrorCode::ConfigError, "eps out of range");
        if (radii_per_direction < 2) fail(ErrorCode::ConfigError, "need at least two radii");
        ThetaGrid grid;
        grid.eps = eps;
        grid.thetas.push_back(Vec2::Zero());

        const std::array<Vec2, 3> dirs = {Vec2(1, 0), Vec2(0, 1),
                                          Vec2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))};
        const std::array<double, 3> r_max = {M_PI / eps, M_PI / eps, std::sqrt(2.0) * M_PI / eps};

        const int m1 = radii_per_direction / 2;
        const int m2 = radii_per_direction - m1;
        for (int d = 0; d < 3; ++d) {
            const double rb = r_max[d];
            for (int j = 0; j < m1; ++j) {
                const double t = (m1 == 1) ? 0.0 : double(j) / (m1 - 1);
                grid.thetas.push_back(dirs[d] * (0.05 * std::pow(0.45 * rb / 0.05, t)));
            }
            for (int j = 0; j < m2; ++j) {
                const double t = (m2 == 1) ? 1.0 : double(j) / (m2 - 1);
                grid.thetas.push_back(dirs[d] * (rb * (1.0 - 0.5 * std::pow(2e-3, t))));
            }
        }
        grid.regions.reserve(grid.thetas.size());
        for (const Vec2 &th : grid.thetas) grid.regions.push_back(classify_theta(eps, th));
        return grid;
    }
};

// ---------------------------------------------------------------------------
// Fiberwise operator-norm distances in the discrete L^2 (M-weighted) metric.
// ---------------------------------------------------------------------------

inline eig::LanczosOptions distance_options(std::uint64_t seed = 0) {
    eig::LanczosOptions opt;
    opt.tol = 1e-8;
    opt.abs_tol = 1e-13; // distances at machine scale need no relative digits
    opt.max_iter = 500;
    if (seed) opt.seed = seed;
    return opt;
}

/*! ||fine resolvent - identified homogenized resolvent|| as maps on L^2(Q).
//  The difference is M-self-adjoint, so the norm is the extreme eigenvalue of
//  an M-inner-product Lanczos iteration.
*/
inline double fiber_distance(const CellModel &model, const fem::NormContext &norms,
                             const HomogenizedMatrix &hom, double eps, const Vec2 &theta,
                             const eig::LanczosOptions &opt = distance_options()) {
    const fibers::FineFiber fine(model, norms, eps, theta);
    const fibers::HomFiber target(model, norms, hom, eps, theta, /*zero_eps=*/false);
    auto apply = [&](const VecC &x) { return VecC(fine.solve(x) - target.apply(x)); };
    return std::abs(eig::lanczos_extreme_eigenvalue(apply, norms.M(), opt).extreme);
}

/*! ||homogenized fiber resolvent (eps) - homogenized fiber resolvent (0)||:
//  both maps factor through the same finite basis of L, so the norm reduces
//  to a dense Hermitian eigenproblem R^H (H_eps^-1 - H_0^-1) R with the
//  Cholesky factor R of the basis Gram matrix.
*/
inline double hom_closeness_distance(const CellModel &model, const fem::NormContext &norms,
                                     const HomogenizedMatrix &hom, double eps, const Vec2 &theta) {
    const fibers::HomFiber with_eps(model, norms, hom, eps, theta, false);
    const fibers::HomFiber zero_eps(model, norms, hom, eps, theta, true);
    const int m = static_cast<int>(with_eps.block_matrix().rows());

    const MatC eye = MatC::Identity(m, m);
    const MatC delta = with_eps.factorization().solve(eye) - zero_eps.factorization().solve(eye);

    MatR gram(m, m);
    gram(0, 0) = 1.0;
    const VecR &m0 = with_eps.interior_masses();
    gram.block(0, 1, 1, m - 1) = m0.transpose();
    gram.block(1, 0, m - 1, 1) = m0;
    gram.bottomRightCorner(m - 1, m - 1) = MatR(with_eps.interior_mass());

    const Eigen::LLT<MatR> llt(gram);
    if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "basis Gram matrix not SPD");
    const MatR L = llt.matrixL();
    const MatC T = L.transpose() * delta * L;
    const Eigen::SelfAdjointEigenSolver<MatC> eig(T);
    if (eig.info() != Eigen::Success) fail(ErrorCode::EigenFailure, "closeness eigensolve failed");
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

/*! Distance from the fine fiber to the composite matching: below the cut
//  |theta| < eps^(alpha-1) the zero-eps homogenized fiber (M-self-adjoint
//  difference), above it the phase-conjugated inclusion Dirichlet resolvent.
//  The latter does not commute with the consistent mass matrix, so its
//  distance comes from the largest singular value via Lanczos on D*D.
*/
inline double naive_fiber_distance(const CellModel &model, const fem::NormContext &norms,
                                   const HomogenizedMatrix &hom,
                                   const fibers::InclusionDirichlet &dirichlet, double eps,
                                   const Vec2 &theta, double alpha,
                                   const eig::LanczosOptions &opt = distance_options()) {
    const fibers::FineFiber fine(model, norms, eps, theta);
    if (theta.norm() < std::pow(eps, alpha - 1.0)) {
        const fibers::HomFiber target(model, norms, hom, eps, theta, /*zero_eps=*/true);
        auto apply = [&](const VecC &x) { return VecC(fine.solve(x) - target.apply(x)); };
        return std::abs(eig::lanczos_extreme_eigenvalue(apply, norms.M(), opt).extreme);
    }

    const Vec2 kappa = fibers::reduce_quasimomentum(eps, theta);
    VecC phase(model.n_nodes());
    for (int i = 0; i < model.n_nodes(); ++i)
        phase[i] = std::polar(1.0, kappa.dot(model.node_coord(i)));
    auto forward = [&](const VecC &x) {
        return VecC(fine.solve(x) - phase.conjugate().cwiseProduct(dirichlet.apply(phase.cwiseProduct(x))));
    };
    auto adjoint = [&](const VecC &x) {
        return VecC(fine.apply_adjoint(x) -
                    phase.conjugate().cwiseProduct(dirichlet.apply_adjoint(phase.cwiseProduct(x))));
    };
    auto normal = [&](const VecC &x) {
        return norms.solve_M(adjoint(norms.M() * forward(x)));
    };
    const double top = eig::lanczos_extreme_eigenvalue(normal, norms.M(), opt).largest;
    return std::sqrt(std::max(0.0, top));
}

// ---------------------------------------------------------------------------
// Sweeps over theta grids.
// ---------------------------------------------------------------------------

struct SweepRow {
    Vec2 theta;
    Region region;
    double distance = 0;
};

struct SweepReport {
    double eps = 1;
    std::vector<SweepRow> rows;
    double sup = 0;
    std::array<double, 3> region_sup = {0, 0, 0}; // indexed by Region

    void finalize() {
        sup = 0;
        region_sup = {0, 0, 0};
        for (const auto &row : rows) {
            sup = std::max(sup, row.distance);
            auto &slot = region_sup[static_cast<int>(row.region)];
            slot = std::max(slot, row.distance);
        }
    }
};

inline SweepReport sweep(const CellModel &model, const fem::NormContext &norms,
                         const HomogenizedMatrix &hom, double eps, const ThetaGrid &grid,
                         int threads = 1, const eig::LanczosOptions &opt = distance_options()) {
    SweepReport report;
    report.eps = eps;
    report.rows.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), threads, [&](int i) {
        report.rows[i].theta = grid.thetas[i];
        report.rows[i].region = grid.regions[i];
        report.rows[i].distance = fiber_distance(model, norms, hom, eps, grid.thetas[i], opt);
    });
    report.finalize();
    return report;
}

inline SweepReport naive_matching_sweep(const CellModel &model, const fem::NormContext &norms,
                                        const HomogenizedMatrix &hom, double eps,
                                        const ThetaGrid &grid, double alpha, int threads = 1,
                                        const eig::LanczosOptions &opt = distance_options()) {
    if (alpha <= 0 || alpha >= 1) fail(ErrorCode::ConfigError, "alpha must lie in (0,1)");
    const fibers::InclusionDirichlet dirichlet(model, norms);
    SweepReport report;
    report.eps = eps;
    report.rows.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), threads, [&](int i) {
        report.rows[i].theta = grid.thetas[i];
        report.rows[i].region = grid.regions[i];
        report.rows[i].distance =
            naive_fiber_distance(model, norms, hom, dirichlet, eps, grid.thetas[i], alpha, opt);
    });
    report.finalize();
    return report;
}

inline SweepReport hom_closeness_sweep(const CellModel &model, const fem::NormContext &norms,
                                       const HomogenizedMatrix &hom, double eps,
                                       const ThetaGrid &grid, int threads = 1) {
    SweepReport report;
    report.eps = eps;
    report.rows.resize(grid.size());
    parallel_for(static_cast<int>(grid.size()), threads, [&](int i) {
        report.rows[i].theta = grid.thetas[i];
        report.rows[i].region = grid.regions[i];
        report.rows[i].distance = hom_closeness_distance(model, norms, hom, eps, grid.thetas[i]);
    });
    report.finalize();
    return report;
}

// ---------------------------------------------------------------------------
// Outer (quasiperiodic) expansion order check.
// ---------------------------------------------------------------------------

/*! Solves the quasiperiodic fine problem at fixed kappa directly and against
//  the expansion U^N = sum_{n<=N} eps^{2n} w^(n): w^(0) is the inclusion
//  Dirichlet solve; each next order solves the degenerate stiff problem with
//  right-hand side -(K0+M)w^(n), its kernel component fixed by the interior
//  solvability of the following order. Returns the H^1 norm of the error.
//  All matrices carry wrap-around phases; interior rows coincide with the
//  plain ones, which the kernel fixes rely on.
*/
inline double outer_expansion_check(const CellModel &model, const fem::NormContext &norms,
                                    const Vec2 &kappa, double eps, int N, const VecC &F,
                                    double solvability_tol = 1e-10) {
    if (fem::is_zero_quasimomentum(kappa)) fail(ErrorCode::ConfigError, "outer expansion needs kappa != 0");
    if (N < 0) fail(ErrorCode::ConfigError, "expansion order must be nonnegative");

    const SpMatC K1 = fem::assemble_bloch_stiffness(model, model.coefficients.a1, kappa);
    const SpMatC K0 = fem::assemble_bloch_stiffness(model, model.coefficients.a0, kappa);
    const SpMatC Mt = fem::assemble_bloch_mass(model, kappa);
    const SpMatC low = K0 + Mt;

    // Direct quasiperiodic solve.
    SpMatC sys = SpMatC(K1 / (eps * eps)) + low;
    Eigen::SimplicialLLT<SpMatC> llt(sys);
    if (llt.info() != Eigen::Success) fail(ErrorCode::SolverFailure, "quasiperiodic factorization failed");
    const VecC rhs = Mt * F;
    const VecC w_exact = llt.solve(rhs);

    const fem::KernelBasis kb = fem::kernel_basis(model, kappa);
    const fem::DegenerateSolver stiff(K1, norms.S().cast<Cplx>(), kb, solvability_tol);
    const fibers::InclusionDirichlet dirichlet(model, norms);

    // w^(0): V-component forced by the leading-order solvability.
    VecC w = dirichlet.extend(dirichlet.solve_interior(dirichlet.restrict_functional(rhs)));
    VecC total = w;
    double scale = 1.0;
    for (int n = 0; n < N; ++n) {
        const VecC b = (n == 0 ? VecC(rhs - low * w) : VecC(-low * w));
        VecC w_next = stiff.solve(b);
        const VecC fix =
            dirichlet.solve_interior(VecC(-dirichlet.restrict_functional(low * w_next)));
        w_next += dirichlet.extend(fix);
        w = w_next;
        scale *= eps * eps;
        total += scale * w;
    }

    const VecC err = w_exact - total;
    const SpMatC H1 = fem::assemble_bloch_stiffness(model, fem::identity_field(model), kappa) + Mt;
    return std::sqrt(std::max(0.0, (err.adjoint() * (H1 * err))[0].real()));
}

// ---------------------------------------------------------------------------
// Rate fitting.
// ---------------------------------------------------------------------------

struct RateFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
};

/*! Least-squares slope of log(value) against log(eps) with R^2. */
inline RateFit fit_rate(const std::vector<std::pair<double, double>> &pairs) {
    if (pairs.size() < 4) fail(ErrorCode::DegenerateFit, "rate fit needs at least four points");
    const int n = static_cast<int>(pairs.size());
    VecR x(n), y(n);
    for (int i = 0; i < n; ++i) {
        if (pairs[i].first <= 0 || pairs[i].second <= 0)
            fail(ErrorCode::DegenerateFit, "rate fit needs positive data");
        x[i] = std::log(pairs[i].first);
        y[i] = std::log(pairs[i].second);
    }
    const double xm = x.mean(), ym = y.mean();
    const double sxx = (x.array() - xm).square().sum();
    const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
    if (sxx < 1e-30) fail(ErrorCode::DegenerateFit, "rate fit abscissae coincide");
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    const double ss_tot = (y.array() - ym).square().sum();
    const double ss_res = (y.array() - (fit.intercept + fit.slope * x.array())).square().sum();
    fit.r2 = (ss_tot < 1e-30) ? 0.0 : 1.0 - ss_res / ss_tot;
    return fit;
}

} // namespace estimator
} // namespace hc
