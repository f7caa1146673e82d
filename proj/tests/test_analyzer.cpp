#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mfb/analyzer.hpp"

using namespace mfb;

namespace {

SolutionState exact_state_m1(const ProblemSpec& spec, double b) {
    const RadialGrid& g = *spec.grid;
    Eigen::VectorXd v(g.size());
    for (int j = 0; j < g.size(); ++j)
        v[j] = std::log((1.0 + b) / (1.0 + b * g.r()[j] * g.r()[j]));
    const double lambda = 4.0 * b / ((1.0 + b) * (1.0 + b));
    return newton_solve({spec.grid, v, +1}, lambda, spec, 1e-12);
}

AnalyzerOptions opts_c2() {
    AnalyzerOptions o;
    o.threshold_c = 2.0;  // above the single-bubble plateau sup w = 1
    return o;
}

}  // namespace

TEST_CASE("single concentrating state: one point, right scale, right mass") {
    ProblemSpec spec = make_problem(1, 96, 1.0, 8.0);
    GreenFunctionBall G = build_green(Dimension(1), 1.0);
    const double b = 1e6;
    SolutionState s = exact_state_m1(spec, b);
    ConcentrationReport rep = analyze_state(s, G, opts_c2());

    REQUIRE(rep.N == 1);
    CHECK(rep.extraction_complete);
    CHECK_FALSE(rep.inconsistent);
    const ConcentrationPoint& p = rep.points[0];
    double r = 0.0;
    for (double c : p.location) r += c * c;
    CHECK(std::sqrt(r) < 1e-12);                       // concentrates at the center
    CHECK(p.scale == Catch::Approx(1.0 / std::sqrt(b)).epsilon(1e-6));
    CHECK(rep.quantization_residual == Catch::Approx(1.0 / (1.0 + b)).epsilon(1e-2));
    CHECK(p.local_mass / (4.0 * pi) == Catch::Approx(1.0).margin(0.02));
    CHECK(p.profile_dev < 1e-2);
    CHECK(rep.green_limit_dev < 5e-3);
    CHECK(rep.min_boundary_ratio == Catch::Approx(std::sqrt(b)).epsilon(1e-4));
    CHECK(rep.collar_mass < 0.01);
    // the plateau of w on a single bubble
    CHECK(rep.a5_sup == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("default threshold sits below the plateau and splits a single bubble") {
    // Documented behavior: the domain-scaled default (2R/e)^{2m} ~ 0.54 is
    // below the scale-invariant plateau sup w = 1, so production configs pass
    // an explicit threshold_c = 2.0 for bubble counting.
    ProblemSpec spec = make_problem(1, 96, 1.0, 8.0);
    GreenFunctionBall G = build_green(Dimension(1), 1.0);
    SolutionState s = exact_state_m1(spec, 1e6);
    AnalyzerOptions odef;  // threshold_c = 0 -> default
    CHECK(default_threshold_c(Dimension(1), 1.0) < 1.0);
    ConcentrationReport rep = analyze_state(s, G, odef);
    CHECK(rep.N >= 2);
    ConcentrationReport rep2 = analyze_state(s, G, opts_c2());
    CHECK(rep2.N == 1);
}

TEST_CASE("flat field keeps only the seed point, ties break to the first sample") {
    auto grid = std::make_shared<RadialGrid>(Dimension(1), 96, 1.0, 8.0);
    SampledField f = SampledField::from_radial({grid, Eigen::VectorXd::Zero(96), +1});
    ExtractionResult ex = extract_points_detailed(f, 1.0, 8);
    REQUIRE(ex.points.size() == 1);
    CHECK(ex.points[0].location[0] == 0.0);  // r = 0 is sample index 0
    CHECK(ex.points[0].scale == 2.0);        // mu = 2 e^{-0}
    CHECK(ex.a5_sup == Catch::Approx(1.0).margin(1e-13));  // w = r^2 peaks at r = R

    // a threshold below sup w adds the boundary maximizer and then stops
    ExtractionResult ex2 = extract_points_detailed(f, 0.5, 8);
    REQUIRE(ex2.points.size() == 2);
    CHECK(ex2.points[1].location[0] == Catch::Approx(1.0).margin(1e-14));
    CHECK(ex2.a5_sup <= 0.5);

    CHECK_THROWS_AS(extract_points_detailed(f, 0.0, 8), std::invalid_argument);
    CHECK_THROWS_AS(extract_points_detailed(f, 1.0, 0), std::invalid_argument);
}

TEST_CASE("manufactured two-bubble field on a cartesian table") {
    const double s = 60.0, h = 1.0 / 600.0;
    const std::vector<double> c1 = {-0.85, -0.85}, c2 = {0.85, 0.85};
    std::vector<Bubble> bubbles = {Bubble{s, c1}, Bubble{s, c2}};
    SampledField f = sample_cartesian2d(
        [&](double x, double y) { return superpose_bubbles(bubbles, {x, y}, 1); }, -1.0, -1.0,
        1201, 1201, h);

    ExtractionResult ex = extract_points_detailed(f, 2.0, 8);
    REQUIRE(ex.points.size() == 2);
    CHECK(ex.complete);
    // both peaks land on grid points; ties break row-major so c1 seeds
    CHECK(std::abs(ex.points[0].location[0] - c1[0]) < 1e-12);
    CHECK(std::abs(ex.points[0].location[1] - c1[1]) < 1e-12);
    CHECK(std::abs(ex.points[1].location[0] - c2[0]) <= h);
    CHECK(std::abs(ex.points[1].location[1] - c2[1]) <= h);
    CHECK(ex.points[0].scale == Catch::Approx(1.0 / s).epsilon(1e-3));
    CHECK(ex.min_separation_margin >= -1e-3);  // nonnegative up to sampling slack
    CHECK(ex.a5_sup == Catch::Approx(1.0).margin(0.1));
    REQUIRE(ex.points[0].separation_ratios.size() == 1);
    CHECK(ex.points[0].separation_ratios[0] ==
          Catch::Approx(1.7 * std::sqrt(2.0) * s).epsilon(1e-2));

    // per-bubble masses quantize: each ~ |S^2|, together ~ 2 Lambda_1
    const double m1_ = local_mass(f, ex.points[0], 50.0);
    const double m2_ = local_mass(f, ex.points[1], 50.0);
    CHECK(std::abs(m1_ - 4.0 * pi) / (4.0 * pi) < 0.05);
    CHECK(std::abs(m2_ - 4.0 * pi) / (4.0 * pi) < 0.05);
    CHECK(std::abs(m1_ + m2_ - 8.0 * pi) / (8.0 * pi) < 0.05);

    for (const ConcentrationPoint& p : ex.points)
        CHECK(rescaled_profile_dev(f, p, 5.0) < 0.02);

    BoundaryDiagnostics bd = boundary_diagnostics(f, ex.points, 0.05);
    CHECK(bd.min_boundary_ratio == Catch::Approx(0.15 * s).epsilon(1e-3));

    // starving max_points flags the extraction incomplete
    ExtractionResult capped = extract_points_detailed(f, 2.0, 1);
    CHECK_FALSE(capped.complete);
    CHECK(capped.points.size() == 1);
    CHECK(capped.a5_sup > 2.0);
}

TEST_CASE("near-boundary bubble is flagged by the diagnostics") {
    const double s = 50.0, h = 0.005;  // mu = 0.02, center 2 mu from the wall
    std::vector<Bubble> one = {Bubble{s, {-0.96, 0.0}}};
    SampledField f = sample_cartesian2d(
        [&](double x, double y) { return superpose_bubbles(one, {x, y}, 1); }, -1.0, -1.0, 401,
        401, h);
    ExtractionResult ex = extract_points_detailed(f, 2.0, 8);
    REQUIRE(ex.points.size() == 1);
    CHECK(std::abs(ex.points[0].location[0] + 0.96) < 1e-12);
    BoundaryDiagnostics bd = boundary_diagnostics(f, ex.points, 0.1);
    CHECK(bd.min_boundary_ratio == Catch::Approx(2.0).epsilon(1e-3));
    CHECK(bd.collar_mass > 1.0);  // most of the bubble sits in the collar
    // window for the profile comparison exits the domain: r_cmp mu > 2 mu
    CHECK_THROWS_AS(rescaled_profile_dev(f, ex.points[0], 5.0), std::domain_error);
}

TEST_CASE("profile deviation: exact bubble matches, wrong scale does not") {
    ProblemSpec spec = make_problem(1, 96, 1.0, 8.0);
    SolutionState st = exact_state_m1(spec, 1e4);
    auto [u_hat, alpha] = normalize(st);
    (void)alpha;
    SampledField f = SampledField::from_radial(std::move(u_hat));
    ExtractionResult ex = extract_points_detailed(f, 2.0, 8);
    REQUIRE(ex.points.size() == 1);
    // for the exact branch, u_hat(mu t) + log mu == eta0(t) identically
    CHECK(rescaled_profile_dev(f, ex.points[0], 5.0) < 1e-6);

    ConcentrationPoint wrong = ex.points[0];
    wrong.scale *= 2.0;
    CHECK(rescaled_profile_dev(f, wrong, 5.0) > 0.3);
    CHECK_THROWS_AS(rescaled_profile_dev(f, ex.points[0], -1.0), std::invalid_argument);

    // a wide state has mu ~ 0.3: the 5 mu window exits the unit disk
    SolutionState wide = exact_state_m1(spec, 10.0);
    auto [w_hat, wa] = normalize(wide);
    (void)wa;
    SampledField fw = SampledField::from_radial(std::move(w_hat));
    ExtractionResult exw = extract_points_detailed(fw, 2.0, 8);
    CHECK_THROWS_AS(rescaled_profile_dev(fw, exw.points[0], 5.0), std::domain_error);
    // analyze_state converts that into a NaN instead of failing
    GreenFunctionBall G = build_green(Dimension(1), 1.0);
    ConcentrationReport rep = analyze_state(wide, G, opts_c2());
    CHECK(std::isnan(rep.points[0].profile_dev));
}

TEST_CASE("local mass: radial quadrature and guards") {
    ProblemSpec spec = make_problem(1, 96, 1.0, 8.0);
    SolutionState st = exact_state_m1(spec, 1e4);
    auto [u_hat, alpha] = normalize(st);
    (void)alpha;
    SampledField f = SampledField::from_radial(std::move(u_hat));
    ExtractionResult ex = extract_points_detailed(f, 2.0, 8);
    REQUIRE(ex.points.size() == 1);
    const double lm = local_mass(f, ex.points[0], 50.0);
    // closed form: 4 pi K^2/(1+K^2) at K = 50
    CHECK(lm == Catch::Approx(4.0 * pi * 2500.0 / 2501.0).epsilon(1e-4));
    CHECK(std::abs(lm - 4.0 * pi) / (4.0 * pi) < 0.02);
    CHECK(lm <= st.rho + 1e-9);  // local mass cannot exceed the total
    CHECK_THROWS_AS(local_mass(f, ex.points[0], 0.5), std::invalid_argument);
    CHECK_THROWS_AS(f.ball_mass_exp({0.5}, 0.1), std::invalid_argument);  // off-center
}

TEST_CASE("green limit deviation: exact multiple of G gives zero") {
    auto grid = std::make_shared<RadialGrid>(Dimension(1), 96, 1.0, 8.0);
    GreenFunctionBall G = build_green(Dimension(1), 1.0);
    Eigen::VectorXd v(grid->size());
    for (int j = 0; j < grid->size(); ++j) v[j] = 4.0 * pi * G.value(grid->r()[j]);
    SolutionState s;
    s.u = {grid, v, +1};
    s.rho = 4.0 * pi;
    ConcentrationReport rep;
    rep.N = 1;
    CHECK(green_limit_dev(s, rep, G, 0.3, 0.9) < 1e-12);

    // wrong multiplicity is loudly visible
    ConcentrationReport rep2;
    rep2.N = 2;
    CHECK(green_limit_dev(s, rep2, G, 0.3, 0.9) > 1.0);

    // an annulus between two adjacent nodes exercises the midpoint fallback
    int ja = -1;
    for (int j = 0; j + 1 < grid->size(); ++j)
        if (grid->r()[j] < 0.6 && grid->r()[j + 1] > 0.3) {
            ja = j;
            break;
        }
    REQUIRE(ja >= 0);
    const double ra = grid->r()[ja + 1], rb = grid->r()[ja];  // ra < rb adjacent
    const double r1 = ra + 0.4 * (rb - ra), r2 = ra + 0.6 * (rb - ra);
    CHECK(green_limit_dev(s, rep, G, r1, r2) < 1e-8);

    CHECK_THROWS_AS(green_limit_dev(s, rep, G, 0.0, 0.9), std::invalid_argument);
    CHECK_THROWS_AS(green_limit_dev(s, rep, G, 0.3, 1.5), std::invalid_argument);
}

TEST_CASE("quantization residual decreases along the exact family") {
    ProblemSpec spec = make_problem(1, 96, 1.0, 8.0);
    GreenFunctionBall G = build_green(Dimension(1), 1.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double b : {1e2, 1e4, 1e6}) {
        SolutionState s = exact_state_m1(spec, b);
        ConcentrationReport rep = analyze_state(s, G, opts_c2());
        REQUIRE(rep.N == 1);
        CHECK(rep.quantization_residual == Catch::Approx(1.0 / (1.0 + b)).epsilon(1e-2));
        CHECK(rep.quantization_residual < prev);
        prev = rep.quantization_residual;
    }
}

TEST_CASE("sampled-field backends: interpolation and guards") {
    SampledField f = sample_cartesian2d(
        [](double x, double y) { return 2.0 + 3.0 * x - y + 0.5 * x * y; }, -1.0, -1.0, 41, 41,
        0.05);
    // bilinear interpolation reproduces a bilinear function exactly
    for (auto [x, y] : std::vector<std::pair<double, double>>{{0.013, -0.4}, {0.91, 0.77}}) {
        CHECK(f.eval({x, y}) ==
              Catch::Approx(2.0 + 3.0 * x - y + 0.5 * x * y).margin(1e-13));
    }
    CHECK(f.boundary_distance({0.9, 0.0}) == Catch::Approx(0.1).margin(1e-12));
    CHECK_THROWS_AS(SampledField::from_cartesian2d(0, 0, 1, 5, 0.1, Eigen::MatrixXd::Zero(5, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(SampledField::from_cartesian2d(0, 0, 3, 2, -0.1, Eigen::MatrixXd::Zero(2, 3)),
                    std::invalid_argument);

    // superposition: a single bubble is unchanged; far bubbles do not interact
    Bubble b1{10.0, {0.3, 0.0}}, b2{10.0, {-0.6, 0.1}};
    CHECK(superpose_bubbles({b1}, {0.2, 0.1}, 2) ==
          Catch::Approx(bubble_eval(b1, {0.2, 0.1})).margin(1e-14));
    CHECK(superpose_bubbles({b1, b2}, {0.3, 0.0}, 1) ==
          Catch::Approx(bubble_eval(b1, {0.3, 0.0})).margin(1e-3));
    CHECK_THROWS_AS(superpose_bubbles({}, {0.0, 0.0}, 1), std::invalid_argument);
}
