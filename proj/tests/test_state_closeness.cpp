#include <catch2/catch_amalgamated.hpp>

#include <qsdp/state_closeness.hpp>

#include "support/oracles.hpp"
#include "support/random.hpp"

#include <cmath>

using namespace qsdp;

namespace {

Dataset pauli_tomography(const Matrix& rho) {
    return {MeasurementRecord(HermitianOperator(sigma_x()),
                              (sigma_x().adjoint() * rho).trace().real()),
            MeasurementRecord(HermitianOperator(sigma_y()),
                              (sigma_y().adjoint() * rho).trace().real()),
            MeasurementRecord(HermitianOperator(sigma_z()),
                              (sigma_z().adjoint() * rho).trace().real())};
}

DensityOperator ket0() {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = 1.0;
    return DensityOperator(m);
}

}  // namespace

TEST_CASE("root fidelity program matches trivial closed cases") {
    auto gen = testsupport::rng(2024);
    SECTION("every state has unit fidelity with itself") {
        for (int trial = 0; trial < 5; ++trial) {
            const DensityOperator rho(testsupport::rand_density(2, gen));
            CHECK(sqrt_fidelity(rho, rho) == Catch::Approx(1.0).margin(1e-6));
        }
    }
    SECTION("orthogonal pure states have zero fidelity") {
        Matrix m1 = Matrix::Zero(2, 2);
        m1(1, 1) = 1.0;
        CHECK(sqrt_fidelity(ket0(), DensityOperator(m1)) == Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("maximally mixed against a pure state") {
        CHECK(sqrt_fidelity(DensityOperator(Matrix(0.5 * Matrix::Identity(2, 2))), ket0()) ==
              Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
    }
    SECTION("dimension mismatch is rejected") {
        CHECK_THROWS_AS(
            sqrt_fidelity(ket0(), DensityOperator(Matrix(Matrix::Identity(3, 3) / 3.0))),
            std::invalid_argument);
    }
}

TEST_CASE("root fidelity program agrees with the spectral formula") {
    auto gen = testsupport::rng(7878);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = trial < 20 ? 2 : 3;
        const Matrix rho = testsupport::rand_density(d, gen);
        const Matrix sigma = testsupport::rand_density(d, gen);
        const double sdp = sqrt_fidelity(DensityOperator(rho), DensityOperator(sigma));
        const double oracle = testsupport::sqrt_fidelity_closed(rho, sigma);
        CHECK(std::abs(sdp - oracle) <= 1e-6);
        const double swapped = sqrt_fidelity(DensityOperator(sigma), DensityOperator(rho));
        CHECK(std::abs(sdp - swapped) <= 1e-6);
    }
}

TEST_CASE("closest-state trace distance over the feasible set") {
    SECTION("data consistent with the target itself reaches zero") {
        auto gen = testsupport::rng(11);
        const Matrix sigma = testsupport::rand_density(2, gen);
        auto res = min_trace_distance(pauli_tomography(sigma), DensityOperator(sigma));
        CHECK(res.value <= 1e-6);
        CHECK(res.quantity_kind == QuantityKind::TraceDistance);
    }
    SECTION("a forced plus state against the computational basis") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 1.0)};
        auto res = min_trace_distance(data, ket0());
        CHECK(res.value == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
    }
    SECTION("an equatorial constraint leaves distance one half") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_z()), 0.0)};
        auto res = min_trace_distance(data, ket0());
        CHECK(res.value == Catch::Approx(0.5).margin(1e-6));
        CHECK(std::abs((sigma_z().adjoint() * res.state.matrix()).trace().real()) <= 1e-5);
    }
    SECTION("infeasible data raises with the certificate attached") {
        Dataset bad = {MeasurementRecord(HermitianOperator(sigma_x()), 0.9),
                       MeasurementRecord(HermitianOperator(sigma_y()), 0.5)};
        try {
            min_trace_distance(bad, ket0());
            FAIL("expected InfeasibleData");
        } catch (const InfeasibleData& e) {
            CHECK(verify_certificate(e.certificate, bad).valid);
        }
    }
}

TEST_CASE("unique feasible states reduce the distance program to arithmetic") {
    auto gen = testsupport::rng(97);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix rho = testsupport::rand_density(2, gen);
        const Matrix sigma = testsupport::rand_density(2, gen);
        auto res = min_trace_distance(pauli_tomography(rho), DensityOperator(sigma));
        CHECK(std::abs(res.value - testsupport::trace_distance_closed(rho, sigma)) <= 1e-7);
    }
}

TEST_CASE("overlap range against a pure target") {
    SECTION("data forcing the target itself pins the range at one") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_z()), 1.0)};
        auto [lo, hi] = fidelity_pure_range(data, ket0());
        CHECK(lo.value == Catch::Approx(1.0).margin(1e-6));
        CHECK(hi.value == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("an unconstrained polar axis spans the full range") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.0)};
        auto [lo, hi] = fidelity_pure_range(data, ket0());
        CHECK(lo.value == Catch::Approx(0.0).margin(1e-6));
        CHECK(hi.value == Catch::Approx(1.0).margin(1e-6));
        CHECK(lo.value <= hi.value);
        // achieving states actually deliver the claimed overlap
        CHECK((ket0().matrix().adjoint() * lo.state.matrix()).trace().real() ==
              Catch::Approx(lo.value).margin(1e-5));
        CHECK((ket0().matrix().adjoint() * hi.state.matrix()).trace().real() ==
              Catch::Approx(hi.value).margin(1e-5));
    }
    SECTION("complete data collapses the range to a point") {
        auto gen = testsupport::rng(55);
        const Matrix rho = testsupport::rand_density(2, gen);
        auto [lo, hi] = fidelity_pure_range(pauli_tomography(rho), ket0());
        const double overlap = (ket0().matrix().adjoint() * rho).trace().real();
        CHECK(lo.value == Catch::Approx(overlap).margin(1e-6));
        CHECK(hi.value == Catch::Approx(overlap).margin(1e-6));
    }
    SECTION("mixed targets are rejected") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.0)};
        CHECK_THROWS_AS(
            fidelity_pure_range(data, DensityOperator(Matrix(0.5 * Matrix::Identity(2, 2)))),
            TargetNotPure);
    }
}

TEST_CASE("best root fidelity over the feasible set") {
    SECTION("a target compatible with the data is reachable exactly") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_z()), 0.0)};
        auto res = max_sqrt_fidelity(data, DensityOperator(Matrix(0.5 * Matrix::Identity(2, 2))));
        CHECK(res.value == Catch::Approx(1.0).margin(1e-6));
    }
    SECTION("a forced plus state against a computational target") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 1.0)};
        auto res = max_sqrt_fidelity(data, ket0());
        CHECK(res.value == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-5));
    }
    SECTION("the reported state delivers the reported value") {
        auto gen = testsupport::rng(303);
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.3)};
        const DensityOperator target(testsupport::rand_density(2, gen));
        auto res = max_sqrt_fidelity(data, target);
        CHECK(std::abs(res.value - sqrt_fidelity(res.state, target)) <= 1e-5);
    }
}

TEST_CASE("reachable range of an unmeasured observable") {
    SECTION("one equatorial mean bounds the polar one") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.6)};
        auto [lo, hi] = property_range(data, HermitianOperator(sigma_z()));
        CHECK(lo.value == Catch::Approx(-0.8).margin(1e-6));
        CHECK(hi.value == Catch::Approx(0.8).margin(1e-6));
        CHECK(lo.quantity_kind == QuantityKind::PropertyMin);
        CHECK(hi.quantity_kind == QuantityKind::PropertyMax);
        // sampled feasible states stay inside the reported range
        auto gen = testsupport::rng(21);
        std::uniform_real_distribution<double> angle(0.0, 2 * 3.14159265358979);
        for (int trial = 0; trial < 10; ++trial) {
            const double a = angle(gen), r = 0.79;
            const Matrix rho =
                bloch_to_state({0.6, r * std::cos(a) * 0.99, r * std::sin(a) * 0.99}).matrix();
            const double v = (sigma_z().adjoint() * rho).trace().real();
            CHECK(v >= lo.value - 1e-6);
            CHECK(v <= hi.value + 1e-6);
        }
    }
    SECTION("no data at all: the range is the spectrum hull") {
        Matrix h = Matrix::Zero(3, 3);
        h(1, 1) = 1.0;
        h(2, 2) = 2.0;
        auto [lo, hi] = property_range(Dataset{}, HermitianOperator(h));
        CHECK(lo.value == Catch::Approx(0.0).margin(1e-6));
        CHECK(hi.value == Catch::Approx(2.0).margin(1e-6));
    }
    SECTION("complete data gives a single expectation value") {
        auto gen = testsupport::rng(66);
        const Matrix rho = testsupport::rand_density(2, gen);
        const Matrix obs = testsupport::rand_hermitian(2, gen);
        auto [lo, hi] = property_range(pauli_tomography(rho), HermitianOperator(obs));
        const double expect = (obs.adjoint() * rho).trace().real();
        CHECK(lo.value == Catch::Approx(expect).margin(1e-6));
        CHECK(hi.value == Catch::Approx(expect).margin(1e-6));
    }
    SECTION("infeasible data raises instead of returning infinities") {
        Dataset bad = {MeasurementRecord(HermitianOperator(sigma_x()), 2.0)};
        CHECK_THROWS_AS(property_range(bad, HermitianOperator(sigma_z())), InfeasibleData);
    }
}

TEST_CASE("distance and fidelity optima respect the standard sandwich") {
    auto gen = testsupport::rng(1444);
    for (int trial = 0; trial < 5; ++trial) {
        std::uniform_real_distribution<double> mean(-0.6, 0.6);
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), mean(gen))};
        const DensityOperator target(testsupport::rand_density(2, gen));
        const double t_min = min_trace_distance(data, target).value;
        const double f_max = max_sqrt_fidelity(data, target).value;
        CHECK(1.0 - f_max <= t_min + 1e-5);
    }
}

TEST_CASE("root fidelity is concave in the first argument") {
    auto gen = testsupport::rng(888);
    std::uniform_real_distribution<double> unit(0.05, 0.95);
    for (int trial = 0; trial < 8; ++trial) {
        const Matrix r0 = testsupport::rand_density(2, gen);
        const Matrix r1 = testsupport::rand_density(2, gen);
        const DensityOperator sigma(testsupport::rand_density(2, gen));
        const double q = unit(gen);
        const Matrix mix = q * r0 + (1 - q) * r1;
        const double lhs = sqrt_fidelity(DensityOperator(mix), sigma);
        const double rhs = q * sqrt_fidelity(DensityOperator(r0), sigma) +
                           (1 - q) * sqrt_fidelity(DensityOperator(r1), sigma);
        CHECK(lhs >= rhs - 1e-6);
    }
}
