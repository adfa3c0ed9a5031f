#include <catch2/catch_amalgamated.hpp>

#include "gazetime/geometry.hpp"

using namespace gazetime;
using Catch::Approx;

TEST_CASE("vergence from depth matches the worked conversions") {
    // 0.4 m at the 59 mm minimum IPD pins the 8.4-degree vergence ceiling
    CHECK(vergence_from_depth(0.4, ObserverGeometry(0.059)) == Approx(8.4355).margin(5e-3));
    // direct evaluation of 2*atan(0.0315 / 1.0) in degrees
    CHECK(vergence_from_depth(1.0, ObserverGeometry(0.063)) == Approx(3.6084).margin(5e-4));
    // parallel gaze in the far limit
    CHECK(vergence_from_depth(1e9, ObserverGeometry(0.063)) == Approx(0.0).margin(1e-6));
}

TEST_CASE("depth from vergence inverts the conversion") {
    const ObserverGeometry g(0.059);
    CHECK(depth_from_vergence(8.4355, g) == Approx(0.400).margin(5e-4));
    CHECK(depth_from_vergence(3.6084, ObserverGeometry(0.063)) == Approx(1.000).margin(5e-4));
    for (double d : {0.1, 0.4, 1.0, 3.0, 10.0, 100.0}) {
        CHECK(depth_from_vergence(vergence_from_depth(d, g), g) ==
              Approx(d).epsilon(1e-9));
    }
}

TEST_CASE("vergence conversions are monotone") {
    const ObserverGeometry g(0.063);
    double prev = vergence_from_depth(0.1, g);
    for (double d = 0.2; d <= 20.0; d += 0.1) {
        const double v = vergence_from_depth(d, g);
        CHECK(v < prev);
        prev = v;
    }
    // increasing in IPD at fixed depth
    CHECK(vergence_from_depth(1.0, ObserverGeometry(0.050)) <
          vergence_from_depth(1.0, ObserverGeometry(0.080)));
}

TEST_CASE("vergence depth derivative matches finite differences") {
    const ObserverGeometry g(0.063);
    for (double d : {0.4, 1.0, 2.5, 10.0}) {
        const double h = 1e-6 * d;
        const double fd = (vergence_from_depth(d + h, g) - vergence_from_depth(d - h, g)) / (2 * h);
        CHECK(vergence_depth_derivative(d, g) == Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("conversion domain errors") {
    const ObserverGeometry g(0.063);
    CHECK_THROWS_AS(vergence_from_depth(0.0, g), ValidationError);
    CHECK_THROWS_AS(vergence_from_depth(-1.0, g), ValidationError);
    CHECK_THROWS_AS(depth_from_vergence(0.0, g), ValidationError);
    CHECK_THROWS_AS(ObserverGeometry(0.049), ValidationError);
    CHECK_THROWS_AS(ObserverGeometry(0.081), ValidationError);
}

TEST_CASE("eye angles from gaze coordinates") {
    auto [l1, r1] = eyes_from_gaze({8.0, 0.0});
    CHECK(l1 == Approx(4.0));
    CHECK(r1 == Approx(-4.0));
    auto [l2, r2] = eyes_from_gaze({0.0, 10.0});
    CHECK(l2 == Approx(10.0));
    CHECK(r2 == Approx(10.0));
    auto [l3, r3] = eyes_from_gaze({6.0, -3.0});  // solves the 2x2 system
    CHECK(l3 == Approx(0.0));
    CHECK(r3 == Approx(-6.0));
}

TEST_CASE("gaze from eye angles and round trip") {
    const auto p1 = gaze_from_eyes(4.0, -4.0);
    CHECK(p1.vergence_deg == Approx(8.0));
    CHECK(p1.saccade_deg == Approx(0.0));
    const auto p2 = gaze_from_eyes(10.0, 10.0);
    CHECK(p2.vergence_deg == Approx(0.0));
    CHECK(p2.saccade_deg == Approx(10.0));
    const auto p3 = gaze_from_eyes(0.0, -6.0);
    CHECK(p3.vergence_deg == Approx(6.0));
    CHECK(p3.saccade_deg == Approx(-3.0));
    CHECK_THROWS_AS(gaze_from_eyes(-1.0, 1.0), ValidationError);

    for (double v : {0.0, 2.1, 8.4}) {
        for (double s : {-12.0, 0.0, 7.5}) {
            const auto [l, r] = eyes_from_gaze({v, s});
            const auto back = gaze_from_eyes(l, r);
            CHECK(back.vergence_deg == Approx(v).margin(1e-12));
            CHECK(back.saccade_deg == Approx(s).margin(1e-12));
        }
    }
}

TEST_CASE("displacement is component-wise subtraction") {
    const auto d = displacement({8.4, 0.0}, {4.2, 8.0});
    CHECK(d.d_vergence_deg == Approx(-4.2));
    CHECK(d.d_saccade_deg == Approx(8.0));
    const auto z = displacement({3.0, 1.0}, {3.0, 1.0});
    CHECK(z.d_vergence_deg == 0.0);
    CHECK(z.d_saccade_deg == 0.0);
    const auto d2 = displacement({4.2, -6.0}, {8.4, 6.0});
    CHECK(d2.d_vergence_deg == Approx(4.2));
    CHECK(d2.d_saccade_deg == Approx(12.0));
}

TEST_CASE("gaze point rejects negative vergence") {
    CHECK_THROWS_AS(GazePoint(-0.1, 0.0), ValidationError);
    CHECK_NOTHROW(GazePoint(0.0, -5.0));
}
