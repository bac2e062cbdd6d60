#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include <hc/errors.hpp>

namespace hc {

using Tensor2 = Eigen::Matrix2d;

// Axis-aligned soft inclusion (a1,b1)x(a2,b2) in unit-cell coordinates.
struct InclusionBox {
    double a1 = 0, b1 = 0, a2 = 0, b2 = 0;
};

/*! Unit cell discretization parameters.
//  The cell Q = [0,1)^2 is split into n x n square elements of side h = 1/n.
//  The inclusion, when present, must close strictly inside (0,1)^2 and its
//  edges must lie on grid lines so the two-phase coefficient is elementwise
//  constant and assembly is exact.
*/
struct CellGeometry {
    int n = 32;
    std::optional<InclusionBox> inclusion; // empty: classical case, Q0 = {}
};

// Per-element coefficient tensors, element index e = ey*n + ex.
// a1 is the stiff-phase tensor (zeroed on soft elements by build_cell),
// a0 the regular one; nu is the ellipticity floor both are checked against.
struct CoefficientSpec {
    std::vector<Tensor2> a1;
    std::vector<Tensor2> a0;
    double nu = 1.0;
};

/*! Validated two-phase unit cell.
//  Element masks and the interior-node list are the combinatorial source of
//  truth for every kernel-space construction downstream: the discrete kernel
//  bases are built from these sets symbolically, never from numerical ranks.
*/
struct CellModel {
    CellGeometry geometry;
    CoefficientSpec coefficients;
    std::vector<std::uint8_t> soft_element; // 1 on Q0 elements
    std::vector<int> interior_nodes;        // nodes whose four adjacent elements are all soft

    int n() const { return geometry.n; }
    double h() const { return 1.0 / geometry.n; }
    int n_elements() const { return geometry.n * geometry.n; }
    int n_nodes() const { return geometry.n * geometry.n; }

    int element_id(int ex, int ey) const { return ey * geometry.n + ex; }
    int node_id(int ix, int iy) const {
        const int n = geometry.n;
        return ((iy % n + n) % n) * n + ((ix % n + n) % n);
    }
    Eigen::Vector2d node_coord(int id) const {
        const int n = geometry.n;
        return {(id % n) * h(), (id / n) * h()};
    }
    bool is_soft(int ex, int ey) const { return soft_element[element_id(ex, ey)] != 0; }
    double soft_area() const {
        if (!geometry.inclusion) return 0.0;
        const auto &b = *geometry.inclusion;
        return (b.b1 - b.a1) * (b.b2 - b.a2);
    }
};

// Periodic 4-connectivity flood fill over the stiff elements. Exposed for the
// translation-symmetry property test.
inline bool periodic_stiff_connected(const std::vector<std::uint8_t> &soft, int n) {
    std::vector<std::uint8_t> seen(soft.size(), 0);
    int start = -1, stiff_count = 0;
    for (int e = 0; e < n * n; ++e)
        if (!soft[e]) {
            if (start < 0) start = e;
            ++stiff_count;
        }
    if (stiff_count == 0) return false;
    std::vector<int> stack{start};
    seen[start] = 1;
    int visited = 0;
    while (!stack.empty()) {
        const int e = stack.back();
        stack.pop_back();
        ++visited;
        const int ex = e % n, ey = e / n;
        const int nb[4] = {((ex + 1) % n) + ey * n, ((ex + n - 1) % n) + ey * n,
                           ex + ((ey + 1) % n) * n, ex + ((ey + n - 1) % n) * n};
        for (int f : nb)
            if (!soft[f] && !seen[f]) {
                seen[f] = 1;
                stack.push_back(f);
            }
    }
    return visited == stiff_count;
}

namespace detail {

inline bool is_grid_aligned(double x, int n, int &index) {
    const double t = x * n;
    index = static_cast<int>(std::lround(t));
    return std::abs(t - index) <= 1e-9 * n;
}

inline void check_tensor_floor(const Tensor2 &a, double nu, const char *name) {
    if (!a.allFinite()) fail(ErrorCode::EllipticityViolated, std::string(name) + " has non-finite entries");
    if (a(0, 1) != a(1, 0)) fail(ErrorCode::EllipticityViolated, std::string(name) + " is not exactly symmetric");
    // Smallest eigenvalue of a symmetric 2x2.
    const double tr = a.trace(), det = a.determinant();
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
    if (tr / 2.0 - disc < nu - 1e-12)
        fail(ErrorCode::EllipticityViolated, std::string(name) + " falls below the ellipticity floor");
}

} // namespace detail

/*! Validates geometry and coefficients and derives the phase masks.
//  Throws:
//    InclusionTouchesBoundary  when the inclusion closure is not strictly inside (0,1)^2,
//    MisalignedInclusion       when an inclusion edge misses the grid lines,
//    EllipticityViolated       when a tensor is asymmetric, non-finite, or below nu,
//    StiffDisconnected         when Q1 is not periodically edge-connected.
*/
inline CellModel build_cell(const CellGeometry &geometry, const CoefficientSpec &coefficients) {
    const int n = geometry.n;
    if (n < 2) fail(ErrorCode::ConfigError, "resolution must be at least 2");
    const int ne = n * n;
    if (static_cast<int>(coefficients.a1.size()) != ne || static_cast<int>(coefficients.a0.size()) != ne)
        fail(ErrorCode::ConfigError, "coefficient fields must have one tensor per element");
    if (!(coefficients.nu > 0)) fail(ErrorCode::EllipticityViolated, "ellipticity floor must be positive");

    CellModel model;
    model.geometry = geometry;
    model.coefficients = coefficients;
    model.soft_element.assign(ne, 0);

    int ia1 = 0, ib1 = 0, ia2 = 0, ib2 = 0;
    if (geometry.inclusion) {
        const auto &box = *geometry.inclusion;
        if (!(box.a1 < box.b1 && box.a2 < box.b2))
            fail(ErrorCode::ConfigError, "inclusion box is empty or inverted");
        if (!(box.a1 > 0 && box.a2 > 0 && box.b1 < 1 && box.b2 < 1))
            fail(ErrorCode::InclusionTouchesBoundary, "inclusion closure must lie strictly inside (0,1)^2");
        if (!detail::is_grid_aligned(box.a1, n, ia1) || !detail::is_grid_aligned(box.b1, n, ib1) ||
            !detail::is_grid_aligned(box.a2, n, ia2) || !detail::is_grid_aligned(box.b2, n, ib2))
            fail(ErrorCode::MisalignedInclusion, "inclusion edges must coincide with grid lines");
        for (int ey = ia2; ey < ib2; ++ey)
            for (int ex = ia1; ex < ib1; ++ex)
                model.soft_element[model.element_id(ex, ey)] = 1;
    }

    for (int e = 0; e < ne; ++e) {
        detail::check_tensor_floor(coefficients.a0[e], coefficients.nu, "a0");
        if (model.soft_element[e]) {
            model.coefficients.a1[e].setZero(); // a1 vanishes on the soft phase by definition
        } else {
            detail::check_tensor_floor(coefficients.a1[e], coefficients.nu, "a1");
        }
    }

    if (geometry.inclusion && !periodic_stiff_connected(model.soft_element, n))
        fail(ErrorCode::StiffDisconnected, "stiff phase is not periodically connected");

    // Interior nodes: all four adjacent elements soft. With a single box these
    // are exactly the strictly interior grid nodes of the box.
    if (geometry.inclusion) {
        for (int iy = ia2 + 1; iy < ib2; ++iy)
            for (int ix = ia1 + 1; ix < ib1; ++ix)
                model.interior_nodes.push_back(model.node_id(ix, iy));
    }
    return model;
}

// Convenience constructors for the coefficient fields.

inline std::vector<Tensor2> constant_field(int n, double value) {
    return std::vector<Tensor2>(static_cast<std::size_t>(n) * n, value * Tensor2::Identity());
}

inline std::vector<Tensor2> constant_field(int n, const Tensor2 &value) {
    return std::vector<Tensor2>(static_cast<std::size_t>(n) * n, value);
}

// Scalar laminate a(y_axis) in {a_minus on [0,fraction), a_plus on [fraction,1)}.
inline std::vector<Tensor2> laminate_field(int n, double a_minus, double a_plus, double fraction, int axis) {
    std::vector<Tensor2> field(static_cast<std::size_t>(n) * n);
    int cut = 0;
    if (!detail::is_grid_aligned(fraction, n, cut))
        fail(ErrorCode::MisalignedInclusion, "laminate volume fraction must be grid aligned");
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            const int layer = (axis == 0) ? ex : ey;
            field[ey * n + ex] = (layer < cut ? a_minus : a_plus) * Tensor2::Identity();
        }
    return field;
}

// The default double-porosity model used throughout the tests: unit tensors,
// soft box (0.25,0.75)^2.
inline CellModel default_model(int n = 32) {
    CellGeometry g;
    g.n = n;
    g.inclusion = InclusionBox{0.25, 0.75, 0.25, 0.75};
    CoefficientSpec c;
    c.a1 = constant_field(n, 1.0);
    c.a0 = constant_field(n, 1.0);
    c.nu = 1.0;
    return build_cell(g, c);
}

// Classical non-degenerate model: no inclusion, laminate {1,4} at half
// fraction so the correctors are nontrivial.
inline CellModel classical_model(int n = 32) {
    CellGeometry g;
    g.n = n;
    CoefficientSpec c;
    c.a1 = laminate_field(n, 1.0, 4.0, 0.5, 0);
    c.a0 = constant_field(n, 1.0);
    c.nu = 1.0;
    return build_cell(g, c);
}

// Constant-coefficient model: no inclusion, unit tensors everywhere.
inline CellModel constant_model(int n = 32) {
    CellGeometry g;
    g.n = n;
    CoefficientSpec c;
    c.a1 = constant_field(n, 1.0);
    c.a0 = constant_field(n, 1.0);
    c.nu = 1.0;
    return build_cell(g, c);
}

} // namespace hc
