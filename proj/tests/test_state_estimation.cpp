#include <catch2/catch_amalgamated.hpp>

#include <qsdp/state_estimation.hpp>

#include "support/oracles.hpp"
#include "support/random.hpp"

#include <cmath>

using namespace qsdp;

namespace {

Dataset pauli_xy(double mx, double my) {
    return {MeasurementRecord(HermitianOperator(sigma_x()), mx),
            MeasurementRecord(HermitianOperator(sigma_y()), my)};
}

Dataset pauli_xyz(double mx, double my, double mz) {
    return {MeasurementRecord(HermitianOperator(sigma_x()), mx),
            MeasurementRecord(HermitianOperator(sigma_y()), my),
            MeasurementRecord(HermitianOperator(sigma_z()), mz)};
}

double expectation(const DensityOperator& rho, const Matrix& obs) {
    return (obs.adjoint() * rho.matrix()).trace().real();
}

}  // namespace

TEST_CASE("overlong Bloch vector data is infeasible with the textbook certificate") {
    const Dataset data = pauli_xy(0.9, 0.5);
    auto out = feasibility(data);
    REQUIRE(out.verdict == Verdict::Infeasible);
    REQUIRE(out.certificate.has_value());

    auto chk = verify_certificate(*out.certificate, data);
    CHECK(chk.valid);
    CHECK(chk.beta > 0);
    CHECK(chk.lambda_max_w <= 1e-9);

    // canonical construction: t = m/||m||_1, z = -||t||_2
    const double n1 = 1.4, n2 = std::sqrt(1.06);
    CHECK(out.certificate->t[0] == Catch::Approx(0.9 / n1).margin(1e-9));
    CHECK(out.certificate->t[1] == Catch::Approx(0.5 / n1).margin(1e-9));
    CHECK(out.certificate->z == Catch::Approx(-n2 / n1).margin(1e-9));
    CHECK(chk.beta == Catch::Approx((1.06 - n2) / n1).margin(1e-9));
}

TEST_CASE("zero and boundary data are feasible with the expected witnesses") {
    SECTION("vanishing means admit the maximally mixed state") {
        auto out = feasibility(pauli_xy(0.0, 0.0));
        REQUIRE(out.verdict == Verdict::Feasible);
        REQUIRE(out.state.has_value());
        CHECK(std::abs(expectation(*out.state, sigma_x())) <= 1e-6);
        CHECK(std::abs(expectation(*out.state, sigma_y())) <= 1e-6);
        CHECK(std::abs(expectation(*out.state, sigma_z())) <= 1e-3);  // analytic center
        CHECK(std::abs((out.state->matrix() - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff()) <=
              1e-3);
    }
    SECTION("unit-norm means force the unique pure state") {
        auto out = feasibility(pauli_xy(0.6, 0.8));
        REQUIRE(out.verdict == Verdict::Feasible);
        REQUIRE(out.state.has_value());
        const Matrix expected = bloch_to_state({0.6, 0.8, 0.0}).matrix();
        CHECK((out.state->matrix() - expected).cwiseAbs().maxCoeff() <= 1e-4);
    }
}

TEST_CASE("interval data is judged against the boxes, not the centers") {
    SECTION("wide enough intervals rescue the overlong point") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.9, 0.2),
                        MeasurementRecord(HermitianOperator(sigma_y()), 0.5, 0.2)};
        auto out = feasibility_intervals(data);
        REQUIRE(out.verdict == Verdict::Feasible);
        REQUIRE(out.state.has_value());
        CHECK(expectation(*out.state, sigma_x()) >= 0.7 - 1e-6);
        CHECK(expectation(*out.state, sigma_x()) <= 1.1 + 1e-6);
        CHECK(expectation(*out.state, sigma_y()) >= 0.3 - 1e-6);
        CHECK(expectation(*out.state, sigma_y()) <= 0.7 + 1e-6);
    }
    SECTION("zero-width intervals reduce to exact feasibility") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.9, 0.0),
                        MeasurementRecord(HermitianOperator(sigma_y()), 0.5, 0.0)};
        auto out = feasibility_intervals(data);
        REQUIRE(out.verdict == Verdict::Infeasible);
        REQUIRE(out.certificate.has_value());
        CHECK(verify_certificate(*out.certificate, data).valid);
    }
    SECTION("intervals covering the full Pauli range are always satisfiable") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 0.9, 2.0),
                        MeasurementRecord(HermitianOperator(sigma_y()), 0.5, 2.0),
                        MeasurementRecord(HermitianOperator(sigma_z()), -0.7, 2.0)};
        CHECK(feasibility_intervals(data).verdict == Verdict::Feasible);
    }
    SECTION("records without widths are rejected") {
        CHECK_THROWS_AS(feasibility_intervals(pauli_xy(0.1, 0.1)), std::invalid_argument);
    }
}

TEST_CASE("worst-deviation relaxation reaches the analytic optimum") {
    SECTION("overlong data: best uniform shrink toward the disk") {
        auto out = relax_linf(pauli_xy(0.9, 0.5));
        REQUIRE(out.delta_star.has_value());
        // minimize delta with (0.9-delta)^2 + (0.5-delta)^2 = 1
        const double expected = (2.8 - std::sqrt(7.36)) / 4.0;
        CHECK(*out.delta_star == Catch::Approx(expected).margin(1e-7));
        CHECK(out.verdict == Verdict::Infeasible);
        REQUIRE(out.state.has_value());
        for (size_t x = 0; x < 2; ++x) {
            const Matrix obs = x == 0 ? sigma_x() : sigma_y();
            const double target = x == 0 ? 0.9 : 0.5;
            CHECK(std::abs(expectation(*out.state, obs) - target) <= *out.delta_star + 1e-6);
        }
        REQUIRE(out.certificate.has_value());
        CHECK(verify_certificate(*out.certificate, pauli_xy(0.9, 0.5)).valid);
    }
    SECTION("conflicting repeats of one observable split the difference") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 1.0),
                        MeasurementRecord(HermitianOperator(sigma_x()), -1.0)};
        auto out = relax_linf(data);
        CHECK(*out.delta_star == Catch::Approx(1.0).margin(1e-7));
        CHECK(std::abs(expectation(*out.state, sigma_x())) <= 1e-5);
    }
    SECTION("consistent data yields a vanishing optimum and a Feasible verdict") {
        auto out = relax_linf(pauli_xy(0.3, 0.2));
        CHECK(*out.delta_star <= 1e-8);
        CHECK(out.verdict == Verdict::Feasible);
        CHECK_FALSE(out.certificate.has_value());
    }
}

TEST_CASE("total-deviation relaxation reaches the analytic optimum") {
    SECTION("overlong data: cheapest exit moves one coordinate") {
        auto out = relax_l1(pauli_xy(0.9, 0.5));
        // half of min over the disk of |r_x-0.9| + |r_y-0.5|: shrink r_x only
        const double expected = 0.5 * (0.9 - std::sqrt(0.75));
        CHECK(*out.delta_star == Catch::Approx(expected).margin(1e-6));
        CHECK(out.verdict == Verdict::Infeasible);
        REQUIRE(out.certificate.has_value());
        CHECK(verify_certificate(*out.certificate, pauli_xy(0.9, 0.5)).valid);
    }
    SECTION("a single clipped mean") {
        Dataset data = {MeasurementRecord(HermitianOperator(sigma_x()), 1.5)};
        auto out = relax_l1(data);
        CHECK(*out.delta_star == Catch::Approx(0.25).margin(1e-7));
    }
    SECTION("consistent data vanishes") {
        auto out = relax_l1(pauli_xy(0.3, -0.4));
        CHECK(*out.delta_star <= 1e-8);
        CHECK(out.verdict == Verdict::Feasible);
    }
}

TEST_CASE("certificate extraction: canonical witness or explicit refusal") {
    SECTION("three saturated Pauli means") {
        const Dataset data = pauli_xyz(1.0, 1.0, 1.0);
        auto cert = extract_certificate(data);
        auto chk = verify_certificate(cert, data);
        CHECK(chk.valid);
        // canonical: t = (1,1,1)/3, z = -1/sqrt(3), beta = (3 - sqrt(3))/3
        CHECK(chk.beta == Catch::Approx((3.0 - std::sqrt(3.0)) / 3.0).margin(1e-9));
    }
    SECTION("feasible data refuses extraction") {
        CHECK_THROWS_AS(extract_certificate(pauli_xy(0.3, 0.2)), CertificateUnavailable);
    }
}

TEST_CASE("certificates are portable arithmetic objects") {
    const Dataset data = pauli_xy(0.9, 0.5);
    const auto cert = extract_certificate(data);

    SECTION("the zero certificate proves nothing") {
        InfeasibilityCertificate zero;
        zero.z = 0.0;
        zero.t = {0.0, 0.0};
        auto chk = verify_certificate(zero, data);
        CHECK(chk.beta == 0.0);
        CHECK_FALSE(chk.valid);
    }
    SECTION("reuse on data deeper inside the separated half-space") {
        auto chk = verify_certificate(cert, pauli_xy(0.95, 0.55));
        CHECK(chk.valid);  // same witness, even larger beta
    }
    SECTION("reuse on feasible data fails the beta test") {
        auto chk = verify_certificate(cert, pauli_xy(0.0, 0.0));
        CHECK(chk.beta < 0);
        CHECK_FALSE(chk.valid);
    }
    SECTION("weak duality: no state beats the separating hyperplane") {
        auto gen = testsupport::rng(5150);
        double worst = -std::numeric_limits<double>::infinity();
        for (int trial = 0; trial < 1000; ++trial) {
            const Matrix rho = testsupport::rand_density(2, gen);
            double v = cert.z;
            for (size_t x = 0; x < data.size(); ++x)
                v += cert.t[x] * (data[x].observable.matrix().adjoint() * rho).trace().real();
            worst = std::max(worst, v);
        }
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("verdicts follow the Bloch ball geometry") {
    auto gen = testsupport::rng(31337);
    std::uniform_real_distribution<double> coord(-1.2, 1.2);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const double mx = coord(gen), my = coord(gen);
        const double norm = std::hypot(mx, my);
        if (std::abs(norm - 1.0) <= 1e-6) continue;
        auto out = feasibility(pauli_xy(mx, my));
        REQUIRE(out.verdict == (norm <= 1.0 ? Verdict::Feasible : Verdict::Infeasible));
        ++checked;
    }
    for (int trial = 0; trial < 60; ++trial) {
        const double mx = coord(gen), my = coord(gen), mz = coord(gen);
        const double norm = std::sqrt(mx * mx + my * my + mz * mz);
        if (std::abs(norm - 1.0) <= 1e-6) continue;
        auto out = feasibility(pauli_xyz(mx, my, mz));
        REQUIRE(out.verdict == (norm <= 1.0 ? Verdict::Feasible : Verdict::Infeasible));
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("appending a record never decreases the worst deviation") {
    auto gen = testsupport::rng(640);
    std::uniform_real_distribution<double> mean(-1.5, 1.5);
    for (int trial = 0; trial < 15; ++trial) {
        Dataset data;
        const int base = 2 + static_cast<int>(gen() % 2);
        for (int x = 0; x < base; ++x)
            data.emplace_back(HermitianOperator(testsupport::rand_hermitian(2, gen)), mean(gen));
        const double before = *relax_linf(data).delta_star;
        data.emplace_back(HermitianOperator(testsupport::rand_hermitian(2, gen)), mean(gen));
        const double after = *relax_linf(data).delta_star;
        CHECK(after >= before - 1e-8);
    }
}

TEST_CASE("the set of reachable data vectors is convex") {
    const double l1[] = {0.25, 0.5, 0.75};
    for (double lam : l1) {
        const double mx = lam * 0.6, my = (1 - lam) * 0.7;
        CHECK(feasibility(pauli_xy(mx, my)).verdict == Verdict::Feasible);
    }
}

TEST_CASE("malformed datasets are rejected") {
    CHECK_THROWS_AS(feasibility(Dataset{}), std::invalid_argument);
    Dataset mixed = {MeasurementRecord(HermitianOperator(sigma_x()), 0.1),
                     MeasurementRecord(HermitianOperator(Matrix::Identity(3, 3)), 1.0)};
    CHECK_THROWS_AS(feasibility(mixed), std::invalid_argument);
    CHECK_THROWS_AS(MeasurementRecord(HermitianOperator(sigma_x()), 0.0, -0.1),
                    std::invalid_argument);
}
