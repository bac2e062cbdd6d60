#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <hc/cell_model.hpp>
#include <hc/errors.hpp>
#include <hc/fem.hpp>
#include <hc/fibers.hpp>
#include <hc/homogenization.hpp>

namespace hc {
namespace oracles {

// Version stamp for fixture files generated from these closed forms.
inline constexpr const char *fixture_version = "1";

// ---------------------------------------------------------------------------
// Laminate closed forms.
// ---------------------------------------------------------------------------

struct LaminateSpec {
    double a_minus = 1;
    double a_plus = 1;
    double fraction = 0.5; // volume fraction of a_minus
    int axis = 0;          // layering axis (normal direction)
};

/*! Effective tensor of a two-phase scalar laminate: harmonic mean along the
//  layer normal, arithmetic mean across.
*/
inline Tensor2 laminate_Ahom(const LaminateSpec &spec) {
    if (spec.a_minus <= 0 || spec.a_plus <= 0 || spec.fraction <= 0 || spec.fraction >= 1)
        fail(ErrorCode::ConfigError, "invalid laminate data");
    const double f = spec.fraction;
    const double harmonic = 1.0 / (f / spec.a_minus + (1.0 - f) / spec.a_plus);
    const double arithmetic = f * spec.a_minus + (1.0 - f) * spec.a_plus;
    Tensor2 A = Tensor2::Zero();
    A(spec.axis, spec.axis) = harmonic;
    A(1 - spec.axis, 1 - spec.axis) = arithmetic;
    return A;
}

// Piecewise slopes of the 1D corrector along the normal: dN/dy = a_h/a - 1 on
// each phase (zero-mean periodic sawtooth).
inline std::pair<double, double> laminate_corrector_slopes(const LaminateSpec &spec) {
    const double ah = laminate_Ahom(spec)(spec.axis, spec.axis);
    return {ah / spec.a_minus - 1.0, ah / spec.a_plus - 1.0};
}

// ---------------------------------------------------------------------------
// Separable eigendata of the Dirichlet Laplacian on a square of side l.
// ---------------------------------------------------------------------------

struct SquareInclusionEigs {
    VecR values;                            // ascending
    VecR weights;                           // (integral of the normalized mode)^2
    std::vector<std::pair<int, int>> modes; // (m, n) per entry
};

/*! lambda_mn = (pi^2/l^2)(m^2+n^2) with mass-normalized products of sines;
//  the squared integral is 64 l^2 / (pi^4 m^2 n^2) for odd m,n and zero
//  otherwise (odd symmetry kills even indices).
*/
inline SquareInclusionEigs square_inclusion_eigs(double side, int J) {
    if (side <= 0 || J <= 0) fail(ErrorCode::ConfigError, "invalid square-inclusion request");
    // Enumerate enough (m,n) that the lowest J survive sorting.
    int reach = 2;
    while (reach * reach < 2 * J + 8) ++reach;
    struct Entry {
        double value, weight;
        int m, n;
    };
    std::vector<Entry> entries;
    for (int m = 1; m <= reach; ++m)
        for (int n = 1; n <= reach; ++n) {
            Entry e;
            e.value = M_PI * M_PI / (side * side) * (m * m + n * n);
            const bool odd = (m % 2 == 1) && (n % 2 == 1);
            e.weight = odd ? 64.0 * side * side / (std::pow(M_PI, 4) * m * m * n * n) : 0.0;
            e.m = m;
            e.n = n;
            entries.push_back(e);
        }
    std::sort(entries.begin(), entries.end(), [](const Entry &a, const Entry &b) {
        if (a.value != b.value) return a.value < b.value;
        return std::make_pair(a.m, a.n) < std::make_pair(b.m, b.n);
    });
    SquareInclusionEigs out;
    out.values.resize(J);
    out.weights.resize(J);
    for (int j = 0; j < J; ++j) {
        out.values[j] = entries[j].value;
        out.weights[j] = entries[j].weight;
        out.modes.emplace_back(entries[j].m, entries[j].n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Brute-force dense fiber resolvents (small n only).
// ---------------------------------------------------------------------------

struct DenseFiberPair {
    MatC fine;        // fine resolvent as a dense matrix on dof space
    MatC homogenized; // identified homogenized resolvent
};

/*! Materializes both resolvents column by column. Quadratic in the dof count;
//  intended for n <= 8 cross-checks only.
*/
inline DenseFiberPair brute_force_fiber(const CellModel &model, const fem::NormContext &norms,
                                        const homogenization::HomogenizedMatrix &hom, double eps,
                                        const Vec2 &theta) {
    const int N = model.n_nodes();
    const fibers::FineFiber fine(model, norms, eps, theta);
    const fibers::HomFiber target(model, norms, hom, eps, theta, /*zero_eps=*/false);
    DenseFiberPair out;
    out.fine.resize(N, N);
    out.homogenized.resize(N, N);
    VecC e = VecC::Zero(N);
    for (int j = 0; j < N; ++j) {
        e[j] = 1.0;
        out.fine.col(j) = fine.solve(e);
        out.homogenized.col(j) = target.apply(e);
        e[j] = 0.0;
    }
    return out;
}

/*! L^2(M) operator norm of a dense map by whitening with the Cholesky factor
//  of M and taking the largest singular value.
*/
inline double dense_operator_norm(const fem::NormContext &norms, const MatC &D) {
    const MatR M = MatR(norms.M());
    const Eigen::LLT<MatR> llt(M);
    if (llt.info() != Eigen::Success) fail(ErrorCode::NotPositiveDefinite, "mass matrix not SPD");
    const MatR L = llt.matrixL();
    const MatR LinvT =
        L.transpose().triangularView<Eigen::Upper>().solve(MatR::Identity(M.rows(), M.cols()));
    const MatC whitened = L.transpose().cast<Cplx>() * D * LinvT.cast<Cplx>();
    return whitened.bdcSvd().singularValues()[0];
}

} // namespace oracles
} // namespace hc
