#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include <hc/fibers.hpp>

using namespace hc;

namespace {

VecC random_complex(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VecC v(n);
    for (int i = 0; i < n; ++i) v[i] = Cplx(dist(rng), dist(rng));
    return v;
}

struct Setup {
    CellModel model;
    fem::NormContext norms;
    homogenization::CellSolutions cells;
    homogenization::HomogenizedMatrix hom;

    explicit Setup(int n)
        : model(default_model(n)), norms(model),
          cells(homogenization::solve_cell_problems(model, norms)),
          hom(homogenization::compute_Ahom(model, cells)) {}
};

} // namespace

TEST_CASE("quasimomentum reduction is periodic and lands in the dual cell", "[fibers]") {
    const double eps = 0.25;
    const Vec2 theta(3.0, -2.0);
    const Vec2 kappa = fibers::reduce_quasimomentum(eps, theta);
    REQUIRE(kappa[0] >= 0.0);
    REQUIRE(kappa[0] < 2 * M_PI);
    REQUIRE(kappa[1] >= 0.0);
    REQUIRE(kappa[1] < 2 * M_PI);

    const Vec2 shifted = fibers::reduce_quasimomentum(eps, theta + Vec2(2 * M_PI / eps, 0));
    REQUIRE((kappa - shifted).norm() < 1e-12);
}

TEST_CASE("both fiber resolvents fix the constant at theta zero", "[fibers]") {
    // At kappa = 0 the stiff forms annihilate constants, so (system) 1 = M 1
    // and the resolvent returns the input exactly; same for the block route.
    const Setup s(8);
    const VecC ones = VecC::Ones(s.model.n_nodes());

    const fibers::FineFiber fine(s.model, s.norms, 0.25, Vec2::Zero());
    REQUIRE((fine.solve(ones) - ones).norm() < 1e-10);

    const fibers::HomFiber homf(s.model, s.norms, s.hom, 0.25, Vec2::Zero(), false);
    REQUIRE((homf.apply(ones) - ones).norm() < 1e-10);

    auto [c, v] = homf.solve_pair(ones);
    REQUIRE(std::abs(c - Cplx(1.0, 0.0)) < 1e-12);
    REQUIRE(v.norm() < 1e-12);
}

TEST_CASE("fine fiber resolvent is an L2 contraction", "[fibers]") {
    const Setup s(8);
    const VecC F = random_complex(s.model.n_nodes(), 17);
    for (double eps : {0.5, 0.125})
        for (const Vec2 &theta : {Vec2(0.5, 0.25), Vec2(3.0, 1.0)}) {
            const fibers::FineFiber fine(s.model, s.norms, eps, theta);
            REQUIRE(s.norms.l2(fine.solve(F)) <= s.norms.l2(F) * (1.0 + 1e-10));
        }
}

TEST_CASE("subspace projector is idempotent and mass-self-adjoint", "[fibers]") {
    const Setup s(8);
    const fibers::PfProjector P(s.model, s.norms);

    const VecC x = random_complex(s.model.n_nodes(), 23);
    const VecC y = random_complex(s.model.n_nodes(), 29);

    const VecC Px = P(x);
    REQUIRE((P(Px) - Px).norm() < 1e-12 * (1.0 + Px.norm()));

    const Cplx left = (P(x).adjoint() * (s.norms.M().cast<Cplx>() * y))[0];
    const Cplx right = (x.adjoint() * (s.norms.M().cast<Cplx>() * P(y)))[0];
    REQUIRE(std::abs(left - right) < 1e-12 * (1.0 + std::abs(left)));

    // Elements of L are fixed points: constants and interior indicators.
    const VecC ones = VecC::Ones(s.model.n_nodes());
    REQUIRE((P(ones) - ones).norm() < 1e-11);
    VecC indicator = VecC::Zero(s.model.n_nodes());
    indicator[s.model.interior_nodes[4]] = 1.0;
    REQUIRE((P(indicator) - indicator).norm() < 1e-11);
}

TEST_CASE("block right-hand side equals the projected-input route", "[fibers]") {
    // The block system pairs F only against the basis of L, so feeding P_f F
    // must give the identical answer.
    const Setup s(8);
    const fibers::PfProjector P(s.model, s.norms);
    const fibers::HomFiber homf(s.model, s.norms, s.hom, 0.25, Vec2(0.7, 0.3), false);

    const VecC F = random_complex(s.model.n_nodes(), 31);
    const VecC direct = homf.apply(F);
    const VecC projected = homf.apply(P(F));
    REQUIRE((direct - projected).norm() < 1e-11 * (1.0 + direct.norm()));
}

TEST_CASE("fiber operators match their advertised adjoints", "[fibers]") {
    // adjoint(x)^H y = x^H apply(y) in the plain pairing; the Lanczos routes
    // for the non-self-adjoint distances depend on these identities.
    const Setup s(8);
    const VecC x = random_complex(s.model.n_nodes(), 37);
    const VecC y = random_complex(s.model.n_nodes(), 41);

    auto check = [&](auto &&op) {
        const Cplx left = (op.apply_adjoint(x).adjoint() * y)[0];
        const Cplx right = (x.adjoint() * op.apply(y))[0];
        REQUIRE(std::abs(left - right) < 1e-11 * (1.0 + std::abs(left)));
    };

    const fibers::HomFiber homf(s.model, s.norms, s.hom, 0.25, Vec2(0.7, 0.3), false);
    check(homf);
    const fibers::InclusionDirichlet dirichlet(s.model, s.norms);
    check(dirichlet);

    const fibers::FineFiber fine(s.model, s.norms, 0.25, Vec2(0.7, 0.3));
    const Cplx left = (fine.apply_adjoint(x).adjoint() * y)[0];
    const Cplx right = (x.adjoint() * fine.solve(y))[0];
    REQUIRE(std::abs(left - right) < 1e-11 * (1.0 + std::abs(left)));
}

TEST_CASE("zero-eps fiber drops the quasimomentum from the soft block", "[fibers]") {
    const Setup s(8);
    const Vec2 theta(0.9, 0.4);
    // At eps with eps*theta = 0 mod 2pi both variants agree; otherwise the
    // soft blocks differ.
    const fibers::HomFiber frozen(s.model, s.norms, s.hom, 0.25, theta, true);
    const fibers::HomFiber moving(s.model, s.norms, s.hom, 0.25, theta, false);
    REQUIRE((frozen.soft_stiffness() - moving.soft_stiffness()).norm() > 1e-6);

    const fibers::HomFiber at_zero(s.model, s.norms, s.hom, 0.25, Vec2::Zero(), false);
    const fibers::HomFiber at_zero_frozen(s.model, s.norms, s.hom, 0.25, Vec2::Zero(), true);
    REQUIRE((at_zero.soft_stiffness() - at_zero_frozen.soft_stiffness()).norm() < 1e-14);
}

TEST_CASE("inclusion Dirichlet resolvent is supported on the inclusion", "[fibers]") {
    const Setup s(8);
    const fibers::InclusionDirichlet dirichlet(s.model, s.norms);
    const VecC F = random_complex(s.model.n_nodes(), 43);
    const VecC u = dirichlet.apply(F);
    for (int i = 0; i < s.model.n_nodes(); ++i) {
        const bool interior = std::find(s.model.interior_nodes.begin(),
                                        s.model.interior_nodes.end(), i) !=
                               s.model.interior_nodes.end();
        if (!interior) REQUIRE(std::abs(u[i]) == 0.0);
    }
    REQUIRE(u.norm() > 0);
    REQUIRE((fibers::outer_resolvent(s.model, s.norms, Vec2(1, 1), F) - u).norm() == 0.0);

    const CellModel classical = classical_model(8);
    const fem::NormContext cnorms(classical);
    REQUIRE_THROWS_AS(fibers::InclusionDirichlet(classical, cnorms), Error);
}

TEST_CASE("Gelfand transform round-trips and preserves the lumped norm", "[fibers]") {
    const int M = 4, n = 8;
    fibers::TorusSample sample;
    sample.M_cells = M;
    sample.n = n;
    sample.values = random_complex(M * M * n * n, 47);

    const fibers::FiberedField field = fibers::gelfand_forward(sample);
    REQUIRE(static_cast<int>(field.fibers.size()) == M * M);
    REQUIRE(field.thetas[0].norm() == 0.0);

    // Parseval: the per-node DFT with unimodular nodal phases is unitary in
    // the lumped (diagonal) metric, hence in the plain Euclidean sum.
    double torus_sq = sample.values.squaredNorm();
    double fiber_sq = 0;
    for (const VecC &g : field.fibers) fiber_sq += g.squaredNorm();
    REQUIRE(fiber_sq == Catch::Approx(torus_sq).epsilon(1e-12));

    const fibers::TorusSample back = fibers::gelfand_inverse(field);
    REQUIRE((back.values - sample.values).norm() < 1e-12 * sample.values.norm());
}

TEST_CASE("Gelfand quasimomenta sweep the dual cell", "[fibers]") {
    fibers::TorusSample sample;
    sample.M_cells = 4;
    sample.n = 2;
    sample.values = VecC::Ones(4 * 4 * 4);
    const fibers::FiberedField field = fibers::gelfand_forward(sample);
    const double eps = 0.25;
    for (const Vec2 &theta : field.thetas) {
        const Vec2 kappa = eps * theta;
        REQUIRE(kappa[0] >= -1e-12);
        REQUIRE(kappa[0] < 2 * M_PI);
        REQUIRE(kappa[1] >= -1e-12);
        REQUIRE(kappa[1] < 2 * M_PI);
    }
}
