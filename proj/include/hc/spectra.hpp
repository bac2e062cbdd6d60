#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/eig.hpp>
#include <hc/errors.hpp>
#include <hc/fem.hpp>
#include <hc/fibers.hpp>
#include <hc/homogenization.hpp>

namespace hc {
namespace spectra {

// ---------------------------------------------------------------------------
// Dirichlet eigendata of the inclusion operator -div(A0 grad) on H^1_0(Q0).
// ---------------------------------------------------------------------------

struct DirichletEigendata {
    VecR values;    // ascending
    MatR vectors;   // columns, M-orthonormal on interior dofs
    VecR weights;   // b_j = (m0^T phi_j)^2, m0_i = integral of the hat at node i
    double inclusion_area = 0;
    double weight_sum = 0;  // complete-basis total sum_all b_j, independent of truncation
};

/*! Lowest J eigenpairs of the interior pencil (K0, M) by a dense generalized
//  eigensolve, together with the coupling weights b_j against the constant
//  function. J < 0 keeps everything. The weights obey the Bessel bound
//  sum(b_j) <= |Q0| strictly at any mesh resolution, since the constant is
//  not attainable with zero boundary values.
*/
inline DirichletEigendata dirichlet_eigs(const CellModel &model, const fem::NormContext &norms,
                                         int J = -1) {
    const auto &idx = model.interior_nodes;
    if (idx.empty()) fail(ErrorCode::EmptyInclusion, "no interior inclusion dofs");
    const int ni = static_cast<int>(idx.size());
    if (J < 0) J = ni;
    if (J == 0 || J > ni) fail(ErrorCode::ConfigError, "eigenpair count out of range");
    const SpMatR K0 = fem::assemble_stiffness(model, model.coefficients.a0);
    const MatR K = MatR(fibers::detail::restrict_rows_cols(K0, idx));
    const MatR M = MatR(fibers::detail::restrict_rows_cols(norms.M(), idx));

    const eig::PencilEigsR sol = eig::symmetric_pencil_eigs(K, M);

    DirichletEigendata out;
    out.inclusion_area = model.soft_area();

    const VecR m_full = norms.M() * VecR::Ones(model.n_nodes());
    VecR m0(ni);
    for (int i = 0; i < ni; ++i) m0[i] = m_full[idx[i]];
    // Complete-basis total before truncation: by Parseval in the pencil it
    // equals m0^T M^-1 m0 and stays below |Q0|, since the constant function is
    // not attainable with zero boundary values.
    const VecR couplings = sol.vectors.transpose() * m0;
    const VecR all_weights = couplings.array().square();
    out.weight_sum = all_weights.sum();
    if (out.weight_sum > out.inclusion_area * (1.0 + 1e-10))
        fail(ErrorCode::EigenFailure, "coupling weights exceed the inclusion area");

    out.values = sol.values.head(J);
    out.vectors = sol.vectors.leftCols(J);
    out.weights = all_weights.head(J);
    return out;
}

// ---------------------------------------------------------------------------
// Spectral function beta(lambda) = lambda (1 + lambda sum_j b_j / (l_j - lambda)).
// ---------------------------------------------------------------------------

struct BetaFunction {
    VecR poles;              // leading J Dirichlet eigenvalues
    VecR weights;            // matching coupling weights
    double area = 0;         // |Q0|
    double next_pole = std::numeric_limits<double>::infinity();
    double weight_remainder = 0; // spectral mass carried by the omitted poles
};

/*! Truncates eigendata to its leading J poles. The tail remainder is the
//  weight carried by the omitted eigenpairs of the same discrete pencil,
//  weight_sum - sum_{j<J} b_j, so it vanishes once J reaches the full interior
//  dof count. Anchoring the remainder to |Q0| instead would freeze in the
//  O(h) quadrature defect of the mesh -- a discretization error, controlled
//  separately by eigendata refinement -- and the truncation bound could never
//  pass a tight threshold.
*/
inline BetaFunction make_beta(const DirichletEigendata &eigs, int J) {
    const int total = static_cast<int>(eigs.values.size());
    if (J <= 0 || J > total) fail(ErrorCode::ConfigError, "beta truncation out of range");
    BetaFunction beta;
    beta.poles = eigs.values.head(J);
    beta.weights = eigs.weights.head(J);
    beta.area = eigs.inclusion_area;
    // Every omitted pole sits at or above the last kept one, which anchors
    // the tail bound below it.
    beta.next_pole = beta.poles[J - 1];
    beta.weight_remainder = std::max(0.0, eigs.weight_sum - beta.weights.sum());
    return beta;
}

/*! Evaluates beta. Only poles carrying weight above weight_tol are singular;
//  evaluation closer than pole_tol (relative) to one of them is refused.
*/
inline double beta_eval(const BetaFunction &beta, double lambda, double pole_tol = 1e-9,
                        double weight_tol = 1e-10) {
    double s = 0;
    for (int j = 0; j < beta.poles.size(); ++j) {
        if (beta.weights[j] <= weight_tol) continue;
        if (std::abs(lambda - beta.poles[j]) < pole_tol * beta.poles[j])
            fail(ErrorCode::PoleProximity, "beta evaluated too close to a weighted pole");
        s += beta.weights[j] / (beta.poles[j] - lambda);
    }
    return lambda * (1.0 + lambda * s);
}

// Half-width bound on the effect of the omitted poles at this lambda:
// |tail| <= lambda^2 (next_pole - lambda)^-1 (area - sum of kept weights).
inline double tail_halfwidth(const BetaFunction &beta, double lambda) {
    if (!std::isfinite(beta.next_pole)) return 0.0;
    if (lambda >= beta.next_pole) return std::numeric_limits<double>::infinity();
    return lambda * lambda / (beta.next_pole - lambda) * beta.weight_remainder;
}

// ---------------------------------------------------------------------------
// Closed interval unions on the real line.
// ---------------------------------------------------------------------------

struct IntervalUnion {
    std::vector<std::array<double, 2>> intervals; // normalized: disjoint, ascending

    void add(double a, double b) { intervals.push_back({std::min(a, b), std::max(a, b)}); }

    void normalize(double merge_tol = 0.0) {
        if (intervals.empty()) return;
        std::sort(intervals.begin(), intervals.end());
        std::vector<std::array<double, 2>> merged;
        merged.push_back(intervals.front());
        for (std::size_t i = 1; i < intervals.size(); ++i) {
            if (intervals[i][0] <= merged.back()[1] + merge_tol)
                merged.back()[1] = std::max(merged.back()[1], intervals[i][1]);
            else
                merged.push_back(intervals[i]);
        }
        intervals = std::move(merged);
    }

    bool contains(double x, double tol = 0.0) const {
        for (const auto &iv : intervals)
            if (x >= iv[0] - tol && x <= iv[1] + tol) return true;
        return false;
    }

    double distance(double x) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto &iv : intervals) {
            if (x < iv[0]) d = std::min(d, iv[0] - x);
            else if (x > iv[1]) d = std::min(d, x - iv[1]);
            else return 0.0;
        }
        return d;
    }

    IntervalUnion clipped(double lo, double hi) const {
        IntervalUnion out;
        for (const auto &iv : intervals) {
            const double a = std::max(iv[0], lo), b = std::min(iv[1], hi);
            if (a <= b) out.add(a, b);
        }
        out.normalize();
        return out;
    }

    double total_measure() const {
        double s = 0;
        for (const auto &iv : intervals) s += iv[1] - iv[0];
        return s;
    }

    bool empty() const { return intervals.empty(); }
};

// ---------------------------------------------------------------------------
// Limit spectrum {beta >= 0} united with the Dirichlet eigenvalues.
// ---------------------------------------------------------------------------

namespace detail {

// beta / lambda; strictly increasing between weighted poles for lambda > 0.
inline double beta_over_lambda(const BetaFunction &beta, double lambda, double weight_tol) {
    double s = 0;
    for (int j = 0; j < beta.poles.size(); ++j) {
        if (beta.weights[j] <= weight_tol) continue;
        s += beta.weights[j] / (beta.poles[j] - lambda);
    }
    return 1.0 + lambda * s;
}

inline double band_onset(const BetaFunction &beta, double lo, double hi, double weight_tol) {
    // Unique zero of beta/lambda in (lo, hi): -inf at lo+, +inf at hi-.
    const double pad = 1e-12 * hi;
    double a = lo + pad, b = hi - pad;
    if (beta_over_lambda(beta, a, weight_tol) >= 0) return a;
    for (int it = 0; it < 200 && (b - a) > 1e-14 * hi; ++it) {
        const double m = 0.5 * (a + b);
        (beta_over_lambda(beta, m, weight_tol) < 0 ? a : b) = m;
    }
    return 0.5 * (a + b);
}

} // namespace detail

/*! Assembles the limit set on [0, lambda_max]: the closure of {beta >= 0}
//  plus every Dirichlet eigenvalue. On each interval between consecutive
//  weighted poles beta/lambda increases from -inf to +inf, so each band is
//  [zero, pole]; zero-weight eigenvalues enter as points and are absorbed by
//  normalization when a band covers them. Band edges must sit where the
//  truncated sum is still trustworthy, otherwise the truncation is rejected.
*/
inline IntervalUnion limit_spectrum(const BetaFunction &beta, double lambda_max,
                                    double edge_tail_tol = 1e-3, double weight_tol = 1e-10) {
    std::vector<double> weighted;
    for (int j = 0; j < beta.poles.size(); ++j)
        if (beta.weights[j] > weight_tol) weighted.push_back(beta.poles[j]);
    if (weighted.empty()) fail(ErrorCode::EmptySet, "no weighted poles below the truncation");
    if (lambda_max >= beta.next_pole)
        fail(ErrorCode::TailBoundTooLarge, "window reaches beyond the truncated poles");

    std::vector<double> edges;
    IntervalUnion out;
    // beta > 0 on (0, first weighted pole).
    out.add(0.0, std::min(weighted[0], lambda_max));
    edges.push_back(out.intervals.back()[1]);

    for (std::size_t k = 1; k < weighted.size() && weighted[k - 1] < lambda_max; ++k) {
        const double z = detail::band_onset(beta, weighted[k - 1], weighted[k], weight_tol);
        if (z > lambda_max) break;
        out.add(z, std::min(weighted[k], lambda_max));
        edges.push_back(z);
        edges.push_back(out.intervals.back()[1]);
    }
    if (weighted.back() < lambda_max) {
        // Past the last weighted pole below the window edge: one more onset
        // against the window (beta/lambda still increasing up to next_pole).
        const double hi = std::min(beta.next_pole, 4.0 * lambda_max);
        const double z = detail::band_onset(beta, weighted.back(), hi, weight_tol);
        if (z <= lambda_max) {
            out.add(z, lambda_max);
            edges.push_back(z);
        }
    }

    for (double e : edges)
        if (tail_halfwidth(beta, e) > edge_tail_tol)
            fail(ErrorCode::TailBoundTooLarge, "omitted-pole bound too large at a band edge");

    for (int j = 0; j < beta.poles.size(); ++j)
        if (beta.weights[j] <= weight_tol && beta.poles[j] <= lambda_max)
            out.add(beta.poles[j], beta.poles[j]);

    out.normalize();
    return out;
}

// ---------------------------------------------------------------------------
// Hausdorff distance between two interval unions.
// ---------------------------------------------------------------------------

namespace detail {

inline double one_sided_hausdorff(const IntervalUnion &A, const IntervalUnion &B) {
    // dist(.,B) restricted to A attains its maximum at an endpoint of A or at
    // a gap midpoint of B lying inside A.
    double d = 0;
    for (const auto &iv : A.intervals) {
        d = std::max(d, B.distance(iv[0]));
        d = std::max(d, B.distance(iv[1]));
    }
    for (std::size_t i = 1; i < B.intervals.size(); ++i) {
        const double mid = 0.5 * (B.intervals[i - 1][1] + B.intervals[i][0]);
        if (A.contains(mid)) d = std::max(d, B.distance(mid));
    }
    return d;
}

} // namespace detail

inline double hausdorff_distance(const IntervalUnion &A, const IntervalUnion &B) {
    if (A.empty() || B.empty()) fail(ErrorCode::EmptySet, "Hausdorff distance of an empty set");
    return std::max(detail::one_sided_hausdorff(A, B), detail::one_sided_hausdorff(B, A));
}

// ---------------------------------------------------------------------------
// Low Bloch bands of the fine operator over a quasimomentum grid.
// ---------------------------------------------------------------------------

struct BlochSpectrum {
    std::vector<Vec2> thetas;
    MatR bands; // n_bands x n_theta, ascending per column

    IntervalUnion as_points() const {
        IntervalUnion u;
        for (int j = 0; j < bands.cols(); ++j)
            for (int i = 0; i < bands.rows(); ++i) u.add(bands(i, j), bands(i, j));
        u.normalize();
        return u;
    }
};

/*! Pooling grid for band diagrams: `count` quasimomenta, identical at every
//  eps so that sampling holes cancel out of Hausdorff trends. One point sits
//  at theta = 0 (the fiber kernel pins the spectrum bottom exactly); per
//  direction (two axes and the diagonal), radii spaced uniformly in
//  |theta|^2 up to the coverage radius r_cov, staggered across directions,
//  tile the window [0, a r_cov^2] evenly through the quadratic dispersion;
//  the remaining radii form a geometric ladder above r_cov that resolves the
//  saturation of the first band toward the inclusion resonance. Radii beyond
//  the zone edge alias to interior quasimomenta, which only adds valid
//  spectrum samples.
*/
inline std::vector<Vec2> bloch_theta_grid(int count, double r_cov) {
    if (count < 4 || r_cov <= 0) fail(ErrorCode::ConfigError, "bad Bloch grid request");
    const std::array<Vec2, 3> dirs = {Vec2(1, 0), Vec2(0, 1),
                                      Vec2(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0))};
    std::vector<Vec2> grid;
    grid.reserve(static_cast<std::size_t>(count));
    grid.push_back(Vec2::Zero());
    const int rest = count - 1;
    const int n_cov = std::max(1, (rest + 2) / 4);
    for (int d = 0; d < 3; ++d) {
        const int per_dir = rest / 3 + (d < rest % 3 ? 1 : 0);
        for (int k = 0; k < std::min(n_cov, per_dir); ++k) {
            const double u = (k + (d + 1) / 3.0) / n_cov;
            grid.push_back(dirs[d] * (r_cov * std::sqrt(u)));
        }
        for (int k = n_cov; k < per_dir; ++k) {
            const int rung = d + 3 * (k - n_cov); // interleaved global ladder
            grid.push_back(dirs[d] * (r_cov * std::pow(2.0, (rung + 1) / 3.0)));
        }
    }
    return grid;
}

/*! Lowest n_bands eigenvalues of the fine fiber pencil at every theta in the
//  grid, by shift-inverted Lanczos on (A + M)^-1 M.
*/
inline BlochSpectrum bloch_spectrum(const CellModel &model, const fem::NormContext &norms,
                                    double eps, const std::vector<Vec2> &thetas, int n_bands,
                                    const eig::LanczosOptions &opt = {}) {
    BlochSpectrum out;
    out.thetas = thetas;
    out.bands.resize(n_bands, static_cast<Eigen::Index>(thetas.size()));
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        const Vec2 kappa = fibers::reduce_quasimomentum(eps, thetas[t]);
        SpMatC A = SpMatC(fem::assemble_shifted_stiffness(model, model.coefficients.a1, kappa) / (eps * eps));
        A += fem::assemble_shifted_stiffness(model, model.coefficients.a0, kappa);
        const VecR lows = eig::lanczos_lowest_pencil(A, norms.M(), n_bands, opt);
        out.bands.col(t) = lows;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dispersion identity for the homogenized fiber.
// ---------------------------------------------------------------------------

/*! Cross-checks the homogenized fiber eigenvalues against the scalar
//  dispersion relation: with (mu_j, psi_j) the interior pencil eigenpairs at
//  this quasimomentum, every eigenvalue lambda of the block pencil whose
//  eigenvector carries the constant must satisfy
//      ahom theta.theta = lambda (1 + lambda sum_j |m0^H psi_j|^2/(mu_j - lambda)).
//  Returns the largest relative defect across qualifying eigenvalues.
//  Eigenvalues pinned to a pole (relative gap under 1e-4) are excluded: the
//  pole term makes the identity ill-conditioned there, with sensitivity
//  growing like the inverse square of the gap.
*/
inline double eigen_identity_check(const CellModel &model, const fem::NormContext &norms,
                                   const homogenization::HomogenizedMatrix &hom, double eps,
                                   const Vec2 &theta) {
    const fibers::HomFiber fiber(model, norms, hom, eps, theta, /*zero_eps=*/false);
    const int ni = static_cast<int>(model.interior_nodes.size());
    const double a = fiber.ahom_tt();
    const VecR &m0 = fiber.interior_masses();
    const MatC Mint = MatC(fiber.interior_mass());

    MatC B = MatC::Zero(ni + 1, ni + 1);
    B(0, 0) = a;
    B.bottomRightCorner(ni, ni) = fiber.soft_stiffness();
    MatC G = MatC::Zero(ni + 1, ni + 1);
    G(0, 0) = 1.0;
    G.block(0, 1, 1, ni) = m0.transpose().cast<Cplx>();
    G.block(1, 0, ni, 1) = m0.cast<Cplx>();
    G.bottomRightCorner(ni, ni) = Mint;

    const eig::PencilEigs block = eig::hermitian_pencil_eigs(B, G);
    const eig::PencilEigs inner = eig::hermitian_pencil_eigs(fiber.soft_stiffness(), Mint);
    const VecR pole_weights = (inner.vectors.adjoint() * m0.cast<Cplx>()).cwiseAbs2();

    double worst = 0;
    for (int k = 0; k < block.values.size(); ++k) {
        const double lambda = block.values[k];
        if (std::abs(block.vectors(0, k)) < 1e-6) continue; // pure inner mode, no dispersion
        double s = 0;
        bool near_pole = false;
        for (int j = 0; j < inner.values.size(); ++j) {
            if (std::abs(inner.values[j] - lambda) < 1e-4 * std::abs(inner.values[j])) { near_pole = true; break; }
            s += pole_weights[j] / (inner.values[j] - lambda);
        }
        if (near_pole) continue;
        const double rhs = lambda * (1.0 + lambda * s);
        worst = std::max(worst, std::abs(a - rhs) / (1.0 + std::abs(a)));
    }
    return worst;
}

} // namespace spectra
} // namespace hc
