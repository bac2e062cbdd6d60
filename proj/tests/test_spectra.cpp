#include <catch2/catch_amalgamated.hpp>

#include <hc/oracles.hpp>
#include <hc/spectra.hpp>

using namespace hc;

namespace {

struct EigSetup {
    CellModel model;
    fem::NormContext norms;
    spectra::DirichletEigendata eigs;

    explicit EigSetup(int n)
        : model(default_model(n)), norms(model), eigs(spectra::dirichlet_eigs(model, norms)) {}
};

// Truncation order used by the spectrum pipeline: smallest J >= floor whose
// next pole clears the window with a tail bound at most tail_tol there.
int adaptive_J(const spectra::DirichletEigendata &eigs, int floor, double lambda_max,
               double tail_tol) {
    const int ni = static_cast<int>(eigs.values.size());
    double partial = 0;
    for (int k = 0; k < ni; ++k) {
        partial += eigs.weights[k];
        if (k + 1 < floor) continue;
        const double pole = eigs.values[k];
        if (pole <= lambda_max) continue;
        const double rem = std::max(0.0, eigs.weight_sum - partial);
        if (lambda_max * lambda_max / (pole - lambda_max) * rem <= tail_tol) return k + 1;
    }
    return ni;
}

} // namespace

TEST_CASE("Dirichlet eigendata converges to the square-inclusion oracle", "[spectra]") {
    // Separable closed forms on the side-1/2 square; conforming elements
    // approach them from above at O(h^2).
    const auto oracle = oracles::square_inclusion_eigs(0.5, 6);
    REQUIRE(oracle.values[0] == Catch::Approx(8 * M_PI * M_PI).epsilon(1e-13));
    REQUIRE(oracle.weights[0] == Catch::Approx(16.0 / std::pow(M_PI, 4)).epsilon(1e-13));

    const EigSetup coarse(16), fine(32);

    const double err16 = coarse.eigs.values[0] - oracle.values[0];
    const double err32 = fine.eigs.values[0] - oracle.values[0];
    REQUIRE(err16 > 0);
    REQUIRE(err32 > 0);
    REQUIRE(err16 / err32 > 3.0);
    REQUIRE(err16 / err32 < 5.5);

    const double werr16 = std::abs(coarse.eigs.weights[0] - oracle.weights[0]);
    const double werr32 = std::abs(fine.eigs.weights[0] - oracle.weights[0]);
    REQUIRE(werr32 < 2e-5);
    REQUIRE(werr16 < 1e-4);

    // Even-index modes carry no weight; the (1,2)/(2,1) pair sits at 20 pi^2.
    REQUIRE(coarse.eigs.weights[1] < 1e-10);
    REQUIRE(coarse.eigs.weights[2] < 1e-10);
    REQUIRE(coarse.eigs.values[1] == Catch::Approx(20 * M_PI * M_PI).epsilon(0.05));

    // The (1,3)/(3,1) cluster splits arbitrarily but its weight sum is fixed.
    double cluster = 0;
    const double target = 40 * M_PI * M_PI;
    for (int j = 0; j < fine.eigs.values.size(); ++j)
        if (std::abs(fine.eigs.values[j] - target) < 0.05 * target) cluster += fine.eigs.weights[j];
    REQUIRE(cluster == Catch::Approx(2 * 16.0 / (9 * std::pow(M_PI, 4))).margin(3e-4));
}

TEST_CASE("Dirichlet eigendata is ordered, normalized, and Bessel-bounded", "[spectra]") {
    const EigSetup s(16);
    const int ni = static_cast<int>(s.model.interior_nodes.size());
    REQUIRE(s.eigs.values.size() == ni);

    for (int j = 1; j < ni; ++j) REQUIRE(s.eigs.values[j] >= s.eigs.values[j - 1]);

    const MatR Mint = MatR(fibers::detail::restrict_rows_cols(s.norms.M(), s.model.interior_nodes));
    const MatR gram = s.eigs.vectors.transpose() * Mint * s.eigs.vectors;
    REQUIRE((gram - MatR::Identity(ni, ni)).cwiseAbs().maxCoeff() < 1e-10);

    // Complete-basis coupling total stays strictly below the inclusion area.
    REQUIRE(s.eigs.weight_sum < s.eigs.inclusion_area);
    REQUIRE(s.eigs.weight_sum > 0.9 * 16.0 / std::pow(M_PI, 4));

    REQUIRE_THROWS_AS(spectra::dirichlet_eigs(s.model, s.norms, ni + 1), Error);
    const CellModel classical = classical_model(8);
    const fem::NormContext cnorms(classical);
    REQUIRE_THROWS_AS(spectra::dirichlet_eigs(classical, cnorms), Error);
}

TEST_CASE("beta truncation books the omitted weight as the remainder", "[spectra]") {
    const EigSetup s(16);
    const int ni = static_cast<int>(s.eigs.values.size());

    const auto beta8 = spectra::make_beta(s.eigs, 8);
    REQUIRE(beta8.poles.size() == 8);
    REQUIRE(beta8.next_pole == s.eigs.values[7]);
    REQUIRE(beta8.weight_remainder ==
            Catch::Approx(s.eigs.weight_sum - s.eigs.weights.head(8).sum()).margin(1e-14));
    REQUIRE(beta8.weight_remainder >= 0);

    // Keeping the whole pencil leaves nothing in the tail.
    const auto full = spectra::make_beta(s.eigs, ni);
    REQUIRE(full.weight_remainder == 0.0);
    REQUIRE(spectra::tail_halfwidth(full, 0.9 * full.next_pole) == 0.0);

    REQUIRE_THROWS_AS(spectra::make_beta(s.eigs, 0), Error);
    REQUIRE_THROWS_AS(spectra::make_beta(s.eigs, ni + 1), Error);

    // The bound blows up at and beyond the first omitted pole.
    REQUIRE(std::isinf(spectra::tail_halfwidth(beta8, beta8.next_pole)));
    REQUIRE(spectra::tail_halfwidth(beta8, 0.5 * beta8.next_pole) <
            spectra::tail_halfwidth(beta8, 0.9 * beta8.next_pole));
}

TEST_CASE("beta vanishes at zero and flips sign across the first pole", "[spectra]") {
    const EigSetup s(16);
    const auto beta = spectra::make_beta(s.eigs, 8);
    const double l0 = beta.poles[0];

    REQUIRE(spectra::beta_eval(beta, 0.0) == 0.0);
    REQUIRE(spectra::beta_eval(beta, l0 * (1 - 1e-3)) > 0);
    REQUIRE(spectra::beta_eval(beta, l0 * (1 + 1e-3)) < 0);
    REQUIRE_THROWS_AS(spectra::beta_eval(beta, l0 * (1 + 1e-10)), Error);

    // Slope one at the origin: beta(lambda) ~ lambda for small lambda.
    REQUIRE(spectra::beta_eval(beta, 1e-4) == Catch::Approx(1e-4).epsilon(1e-2));
}

TEST_CASE("interval unions normalize, clip, and measure", "[spectra]") {
    spectra::IntervalUnion u;
    u.add(2.0, 3.0);
    u.add(0.0, 1.0);
    u.add(0.5, 1.5); // overlaps the first
    u.normalize();
    REQUIRE(u.intervals.size() == 2);
    REQUIRE(u.intervals[0][0] == 0.0);
    REQUIRE(u.intervals[0][1] == 1.5);
    REQUIRE(u.contains(1.2));
    REQUIRE_FALSE(u.contains(1.7));
    REQUIRE(u.distance(1.75) == Catch::Approx(0.25));
    REQUIRE(u.distance(2.5) == 0.0);
    REQUIRE(u.total_measure() == Catch::Approx(2.5));

    const auto clipped = u.clipped(1.0, 2.5);
    REQUIRE(clipped.intervals.size() == 2);
    REQUIRE(clipped.intervals[0][0] == 1.0);
    REQUIRE(clipped.intervals[1][1] == 2.5);
}

TEST_CASE("Hausdorff distance on interval unions", "[spectra]") {
    spectra::IntervalUnion a, b, c;
    a.add(0, 1);
    b.add(0, 2);
    c.add(0, 1);
    c.add(1.5, 2.0);
    a.normalize();
    b.normalize();
    c.normalize();

    REQUIRE(spectra::hausdorff_distance(a, a) == 0.0);
    REQUIRE(spectra::hausdorff_distance(a, b) == Catch::Approx(1.0));
    // Gap midpoint of c inside b realizes the reverse distance.
    REQUIRE(spectra::hausdorff_distance(b, c) == Catch::Approx(0.25));

    spectra::IntervalUnion empty;
    REQUIRE_THROWS_AS(spectra::hausdorff_distance(a, empty), Error);
}

TEST_CASE("limit spectrum bands follow the pole-zero structure", "[spectra]") {
    // Synthetic beta with a heavy first pole, a zero-weight pole below the
    // second band onset, and a clean tail.
    spectra::BetaFunction beta;
    beta.poles = VecR(3);
    beta.poles << 10.0, 15.0, 40.0;
    beta.weights = VecR(3);
    beta.weights << 2.0, 0.0, 0.2;
    beta.area = 0.25;
    beta.next_pole = 1000.0;
    beta.weight_remainder = 0.0;

    const auto limit = spectra::limit_spectrum(beta, 50.0);
    REQUIRE(limit.intervals.size() == 3);
    // Band 1 fills [0, first weighted pole].
    REQUIRE(limit.intervals[0][0] == 0.0);
    REQUIRE(limit.intervals[0][1] == Catch::Approx(10.0));
    // The zero-weight pole is an isolated point below the band-2 onset.
    REQUIRE(limit.intervals[1][0] == Catch::Approx(15.0));
    REQUIRE(limit.intervals[1][1] == Catch::Approx(15.0));
    // Band 2 onset is the unique zero of beta/lambda in (10, 40).
    const double z = limit.intervals[2][0];
    REQUIRE(z > 15.0);
    REQUIRE(z < 40.0);
    REQUIRE(std::abs(spectra::beta_eval(beta, z)) < 1e-6 * z * z);
    REQUIRE(limit.intervals[2][1] == Catch::Approx(40.0));

    // Window past the truncation is rejected.
    REQUIRE_THROWS_AS(spectra::limit_spectrum(beta, 2000.0), Error);

    // A fat remainder poisons the band edges.
    beta.weight_remainder = 1.0;
    beta.next_pole = 60.0;
    REQUIRE_THROWS_AS(spectra::limit_spectrum(beta, 50.0), Error);

    // No weighted poles at all: nothing to anchor the set.
    beta.weights.setZero();
    beta.weight_remainder = 0.0;
    beta.next_pole = 1000.0;
    REQUIRE_THROWS_AS(spectra::limit_spectrum(beta, 50.0), Error);
}

TEST_CASE("limit spectrum of the cell model opens a gap above the first pole", "[spectra]") {
    const EigSetup s(16);
    const int J = adaptive_J(s.eigs, 8, 90.0, 1e-4);
    const auto beta = spectra::make_beta(s.eigs, J);
    const auto limit = spectra::limit_spectrum(beta, 90.0);

    const double l0 = s.eigs.values[0];
    REQUIRE(limit.intervals[0][0] == 0.0);
    REQUIRE(limit.intervals[0][1] == Catch::Approx(l0));
    REQUIRE(limit.contains(0.5 * l0));
    REQUIRE(limit.distance(l0 + 5.0) > 1.0); // open gap above the first band

    // Inside the first spectral gap the set has pole/endpoint edges only, so
    // doubling the truncation changes nothing.
    const int J2 = std::min(2 * J, static_cast<int>(s.eigs.values.size()));
    const auto limit2 = spectra::limit_spectrum(spectra::make_beta(s.eigs, J2), 90.0);
    REQUIRE(spectra::hausdorff_distance(limit, limit2) < 1e-12);
}

TEST_CASE("windows cutting the second band move slightly under J-doubling", "[spectra]") {
    // The band-2 onset shifts by about tail/beta' under truncation; with the
    // 1e-4 tail gate that is a 1e-5-scale motion.
    const EigSetup s(16);
    const int J = adaptive_J(s.eigs, 8, 150.0, 1e-4);
    const int J2 = std::min(2 * J, static_cast<int>(s.eigs.values.size()));
    const auto limit = spectra::limit_spectrum(spectra::make_beta(s.eigs, J), 150.0);
    const auto limit2 = spectra::limit_spectrum(spectra::make_beta(s.eigs, J2), 150.0);
    REQUIRE(spectra::hausdorff_distance(limit, limit2) < 1e-3);
}

TEST_CASE("Bloch pooling grid is eps-independent by construction", "[spectra]") {
    const auto grid = spectra::bloch_theta_grid(24, 16.0);
    REQUIRE(grid.size() == 24);
    REQUIRE(grid[0].norm() == 0.0);
    double r_max = 0;
    for (const Vec2 &t : grid) r_max = std::max(r_max, t.norm());
    REQUIRE(r_max >= 16.0);

    REQUIRE_THROWS_AS(spectra::bloch_theta_grid(3, 16.0), Error);
    REQUIRE_THROWS_AS(spectra::bloch_theta_grid(24, 0.0), Error);
}

TEST_CASE("Bloch bands are ascending and pinned at theta zero", "[spectra]") {
    const CellModel model = default_model(8);
    const fem::NormContext norms(model);
    const std::vector<Vec2> thetas = {Vec2(0, 0), Vec2(1, 0), Vec2(1 + 2 * M_PI / 0.25, 0)};
    const auto bloch = spectra::bloch_spectrum(model, norms, 0.25, thetas, 3);

    REQUIRE(bloch.bands.rows() == 3);
    REQUIRE(bloch.bands.cols() == 3);
    // Fiber kernel at kappa = 0: the bottom of the spectrum is exactly zero.
    REQUIRE(std::abs(bloch.bands(0, 0)) < 1e-6);
    for (int c = 0; c < 3; ++c)
        for (int r = 1; r < 3; ++r) REQUIRE(bloch.bands(r, c) >= bloch.bands(r - 1, c));
    // Radii beyond the zone edge alias to the same fiber.
    REQUIRE((bloch.bands.col(1) - bloch.bands.col(2)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("homogenized fiber eigenvalues satisfy the dispersion identity", "[spectra]") {
    const CellModel model = default_model(8);
    const fem::NormContext norms(model);
    const auto cells = homogenization::solve_cell_problems(model, norms);
    const auto hom = homogenization::compute_Ahom(model, cells);
    REQUIRE(spectra::eigen_identity_check(model, norms, hom, 0.5, Vec2(0.5, 0.25)) < 1e-6);
    REQUIRE(spectra::eigen_identity_check(model, norms, hom, 0.25, Vec2(1.5, 0.5)) < 1e-6);
}
