#include <catch2/catch_amalgamated.hpp>

#include <qsdp/cli.hpp>

#include <fstream>
#include <string>

using namespace qsdp;
using cli::json;

namespace {

json problem(const std::string& task, json payload) {
    return json{{"schema", 1}, {"task", task}, {"payload", std::move(payload)}};
}

json pauli_x() { return json::array({{0, 1}, {1, 0}}); }
json pauli_y() {
    return json::array({{0, json::array({0, -1})}, {json::array({0, 1}), 0}});
}
json pauli_z() { return json::array({{1, 0}, {0, -1}}); }

json rec(json obs, double mean) {
    return json{{"observable", std::move(obs)}, {"mean", mean}};
}

json rec(json obs, double mean, double hw) {
    json r = rec(std::move(obs), mean);
    r["half_width"] = hw;
    return r;
}

json bell_matrix() {
    return json::array({{0.5, 0, 0, 0.5}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0.5, 0, 0, 0.5}});
}

json ket000_spec_payload() {
    // product state |000><000|: marginals are |00><00| on every pair
    json m = json::array();
    for (int r = 0; r < 4; ++r) {
        json row = json::array();
        for (int c = 0; c < 4; ++c) row.push_back(r == 0 && c == 0 ? 1 : 0);
        m.push_back(row);
    }
    return json{{"shape", {2, 2, 2}},
                {"targets", {{"XY", m}, {"XZ", m}, {"YZ", m}}}};
}

json bell_bell_payload() {
    return json{{"shape", {2, 2, 2}}, {"targets", {{"XY", bell_matrix()}, {"YZ", bell_matrix()}}}};
}

json load_file(const std::string& name) {
    std::ifstream in(std::string(QSDP_PROBLEMS_DIR) + "/" + name);
    REQUIRE(in.good());
    return json::parse(in);
}

std::string first_error(const json& root) {
    auto errs = cli::validate_problem(root);
    REQUIRE_FALSE(errs.empty());
    return errs.front();
}

}  // namespace

TEST_CASE("problem files are validated with field-level errors") {
    // a well-formed problem validates cleanly and validation never solves
    CHECK(cli::validate_problem(problem("feasibility", {{"dataset", {rec(pauli_x(), 0.3)}}}))
              .empty());

    CHECK_THAT(first_error(json::array()), Catch::Matchers::ContainsSubstring("JSON object"));
    CHECK_THAT(first_error(json{{"task", "feasibility"}, {"payload", json::object()}}),
               Catch::Matchers::ContainsSubstring("schema"));
    CHECK_THAT(first_error(json{{"schema", 2}, {"task", "feasibility"},
                                {"payload", json::object()}}),
               Catch::Matchers::ContainsSubstring("unsupported version"));
    CHECK_THAT(first_error(json{{"schema", 1}, {"task", "solve-everything"},
                                {"payload", json::object()}}),
               Catch::Matchers::ContainsSubstring("task"));

    // dataset-level mistakes are reported with their location
    CHECK_THAT(first_error(problem("feasibility", json::object())),
               Catch::Matchers::ContainsSubstring("missing required field 'dataset'"));
    CHECK_THAT(first_error(problem("feasibility",
                                   {{"dataset", {json{{"observable", {{0, 1}, {0, 0}}},
                                                      {"mean", 0.0}}}}})),
               Catch::Matchers::ContainsSubstring("not Hermitian at entry (0, 1)"));
    CHECK_THAT(first_error(problem("feasibility",
                                   {{"dataset", {json{{"observable", {{0, 1}, {1}}},
                                                      {"mean", 0.0}}}}})),
               Catch::Matchers::ContainsSubstring("equal length"));
    CHECK_THAT(first_error(problem("feasibility",
                                   {{"dataset", {json{{"observable", {{"x", 1}, {1, 0}}},
                                                      {"mean", 0.0}}}}})),
               Catch::Matchers::ContainsSubstring("[re, im]"));
    {
        json two_dims = problem(
            "feasibility",
            {{"dataset", {rec(pauli_x(), 0.1),
                          rec(json::array({{1, 0, 0}, {0, 0, 0}, {0, 0, -1}}), 0.2)}}});
        CHECK_THAT(first_error(two_dims),
                   Catch::Matchers::ContainsSubstring("records 0 and 1"));
    }
    CHECK_THAT(first_error(problem("intervals", {{"dataset", {rec(pauli_x(), 0.3)}}})),
               Catch::Matchers::ContainsSubstring("half_width"));

    // marginal payload mistakes
    {
        json bad = bell_bell_payload();
        bad["targets"]["QQ"] = bell_matrix();
        CHECK_THAT(first_error(problem("marginal", bad)),
                   Catch::Matchers::ContainsSubstring("targets.QQ"));
    }
    {
        json bad = bell_bell_payload();
        bad["shape"] = {2, 2, 3};
        CHECK_THAT(first_error(problem("marginal", bad)),
                   Catch::Matchers::ContainsSubstring("does not match the subsystem pair"));
    }
    {
        json bad = bell_bell_payload();
        bad["eps"] = -0.5;
        CHECK_THAT(first_error(problem("marginal-eps", bad)),
                   Catch::Matchers::ContainsSubstring("nonnegative"));
    }
    CHECK_THAT(first_error(problem("verify-certificate",
                                   {{"dataset", {rec(pauli_x(), 0.9)}},
                                    {"certificate", {{"z", -1.0}, {"t", {0.5, 0.5}}}}})),
               Catch::Matchers::ContainsSubstring("one weight per dataset record"));
}

TEST_CASE("exit codes separate solved, infeasible, and error outcomes") {
    cli::RunOptions opt;
    opt.recheck = true;

    SECTION("reproducible data exits 0 with a witness") {
        auto out = cli::run_problem(
            problem("feasibility", {{"dataset", {rec(pauli_x(), 0.3), rec(pauli_z(), 0.4)}}}),
            opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("verdict") == "Feasible");
        CHECK(out.report.contains("witness"));
        CHECK(out.report.at("recheck").at("passed").get<bool>());
        CHECK(out.report.at("diagnostics").at("status") == "Optimal");
    }

    SECTION("irreproducible data exits 2 with a checkable certificate") {
        auto out = cli::run_problem(
            problem("feasibility", {{"dataset", {rec(pauli_x(), 0.9), rec(pauli_y(), 0.5)}}}),
            opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("verdict") == "Infeasible");
        REQUIRE(out.report.contains("certificate"));
        CHECK(out.report.at("certificate").at("valid").get<bool>());
        CHECK(out.report.at("certificate").at("beta").get<double>() > 0.0);
    }

    SECTION("schema problems exit 1 and carry an error message") {
        auto out = cli::run_problem(json{{"schema", 1}, {"task", "feasibility"}});
        CHECK(out.exit_code == 1);
        CHECK_THAT(out.report.at("error").get<std::string>(),
                   Catch::Matchers::ContainsSubstring("payload"));
    }

    SECTION("an exhausted iteration budget exits 3") {
        cli::RunOptions starved;
        starved.max_iter = 1;
        auto out = cli::run_problem(
            problem("feasibility", {{"dataset", {rec(pauli_x(), 0.9), rec(pauli_y(), 0.5)}}}),
            starved);
        CHECK(out.exit_code == 3);
        CHECK(out.report.contains("error"));
    }

    SECTION("a certificate request on reproducible data exits 1") {
        auto out =
            cli::run_problem(problem("certificate", {{"dataset", {rec(pauli_x(), 0.3)}}}));
        CHECK(out.exit_code == 1);
        CHECK_THAT(out.report.at("error").get<std::string>(),
                   Catch::Matchers::ContainsSubstring("reproducible"));
    }
}

TEST_CASE("every task produces a structured report") {
    cli::RunOptions opt;
    opt.recheck = true;
    const json infeasible_pair = {{"dataset", {rec(pauli_x(), 0.9), rec(pauli_y(), 0.5)}}};

    SECTION("intervals") {
        auto out = cli::run_problem(
            problem("intervals", {{"dataset", {rec(pauli_x(), 0.9, 0.2)}}}), opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("verdict") == "Feasible");
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("relax-linf reports the worst-deviation optimum") {
        auto out = cli::run_problem(problem("relax-linf", infeasible_pair), opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("delta_star").get<double>() > 1e-3);
        CHECK(out.report.contains("witness"));
        CHECK(out.report.at("certificate").at("valid").get<bool>());
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("relax-l1 reports the total-deviation optimum") {
        auto out = cli::run_problem(problem("relax-l1", infeasible_pair), opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("delta_star").get<double>() > 1e-3);
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("certificate and verify-certificate round trip") {
        auto made = cli::run_problem(problem("certificate", infeasible_pair), opt);
        REQUIRE(made.exit_code == 2);

        json verify_payload = infeasible_pair;
        verify_payload["certificate"] = {{"z", made.report.at("certificate").at("z")},
                                         {"t", made.report.at("certificate").at("t")}};
        auto verified = cli::run_problem(problem("verify-certificate", verify_payload), opt);
        CHECK(verified.exit_code == 2);
        CHECK(verified.report.at("certificate").at("valid").get<bool>());

        // wrecking the scalar offset invalidates the certificate: exit 0, nothing proven
        verify_payload["certificate"]["z"] = verify_payload["certificate"]["z"].get<double>() + 1.0;
        auto broken = cli::run_problem(problem("verify-certificate", verify_payload), opt);
        CHECK(broken.exit_code == 0);
        CHECK_FALSE(broken.report.at("certificate").at("valid").get<bool>());
    }

    SECTION("trace-distance") {
        json payload = {{"dataset", {rec(pauli_x(), 0.6)}},
                        {"target", {{1, 0}, {0, 0}}}};
        auto out = cli::run_problem(problem("trace-distance", payload), opt);
        CHECK(out.exit_code == 0);
        const double value = out.report.at("value").get<double>();
        CHECK(value > 0.0);
        CHECK(value < 1.0);
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("fidelity-pure pins the overlap range") {
        json payload = {{"dataset", {rec(pauli_z(), 0.0)}},
                        {"target", {{1, 0}, {0, 0}}}};
        auto out = cli::run_problem(problem("fidelity-pure", payload), opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("values").at("min").get<double>() == Catch::Approx(0.5).margin(1e-6));
        CHECK(out.report.at("values").at("max").get<double>() == Catch::Approx(0.5).margin(1e-6));
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("fidelity-mixed over a dataset") {
        json payload = {{"dataset", {rec(pauli_z(), 0.8)}},
                        {"target", {{0.5, 0}, {0, 0.5}}}};
        auto out = cli::run_problem(problem("fidelity-mixed", payload), opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("value").get<double>() > 0.5);
        CHECK(out.report.at("value").get<double>() <= 1.0 + 1e-9);
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("fidelity-mixed between two explicit states") {
        json payload = {{"rho", {{1, 0}, {0, 0}}}, {"sigma", {{0.5, 0}, {0, 0.5}}}};
        auto out = cli::run_problem(problem("fidelity-mixed", payload), opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("value").get<double>() ==
              Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("property-range") {
        json payload = {{"dataset", {rec(pauli_z(), 0.5)}}, {"observable", pauli_z()}};
        auto out = cli::run_problem(problem("property-range", payload), opt);
        CHECK(out.exit_code == 0);
        CHECK(out.report.at("values").at("min").get<double>() == Catch::Approx(0.5).margin(1e-6));
        CHECK(out.report.at("values").at("max").get<double>() == Catch::Approx(0.5).margin(1e-6));
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("marginal feasibility in both directions") {
        auto good = cli::run_problem(problem("marginal", ket000_spec_payload()), opt);
        CHECK(good.exit_code == 0);
        CHECK(good.report.at("verdict") == "Feasible");
        CHECK(good.report.at("recheck").at("passed").get<bool>());

        auto bad = cli::run_problem(problem("marginal", bell_bell_payload()), opt);
        CHECK(bad.exit_code == 2);
        CHECK(bad.report.at("verdict") == "Infeasible");
        // the refusal carries its certifying number: a floor on the deviation
        CHECK(bad.report.at("deviation_bound").get<double>() > 1e-3);
    }

    SECTION("marginal-eps follows the deviation budget") {
        json loose = bell_bell_payload();
        loose["eps"] = 2.0;
        auto ok = cli::run_problem(problem("marginal-eps", loose), opt);
        CHECK(ok.exit_code == 0);
        CHECK(ok.report.at("eps").get<double>() == 2.0);
        CHECK(ok.report.at("recheck").at("passed").get<bool>());

        json tight = bell_bell_payload();
        tight["eps"] = 0.3;
        auto no = cli::run_problem(problem("marginal-eps", tight), opt);
        CHECK(no.exit_code == 2);
    }

    SECTION("marginal-dual needs no solver run") {
        json payload = {{"shape", {2, 2, 2}},
                        {"psi_xy", bell_matrix()},
                        {"psi_yz", bell_matrix()}};
        auto out = cli::run_problem(problem("marginal-dual", payload), opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("mu_star").get<double>() == Catch::Approx(0.75).margin(1e-9));
    }

    SECTION("marginal-purefid rejects mixed inputs") {
        json payload = {{"shape", {2, 2, 2}},
                        {"psi_xy", {{0.5, 0, 0, 0}, {0, 0.5, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}},
                        {"psi_yz", bell_matrix()}};
        auto out = cli::run_problem(problem("marginal-purefid", payload), opt);
        CHECK(out.exit_code == 1);
        CHECK(out.report.contains("error"));
    }
}

TEST_CASE("reports are deterministic and echo the run label") {
    const json prob =
        problem("relax-linf", {{"dataset", {rec(pauli_x(), 0.9), rec(pauli_y(), 0.5)}}});
    cli::RunOptions opt;
    opt.seed = 7;
    auto a = cli::run_problem(prob, opt);
    auto b = cli::run_problem(prob, opt);
    CHECK(a.report.at("seed").get<uint64_t>() == 7);
    a.report.erase("wall_time_ms");
    b.report.erase("wall_time_ms");
    CHECK(a.report.dump() == b.report.dump());
    CHECK(a.exit_code == b.exit_code);
}

TEST_CASE("bundled problem files run to their documented outcomes") {
    cli::RunOptions opt;
    opt.recheck = true;

    SECTION("out-of-ball Pauli pair") {
        auto out = cli::run_problem(load_file("pauli-09-05.json"), opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("certificate").at("valid").get<bool>());
    }

    SECTION("origin of the Bloch ball") {
        auto out = cli::run_problem(load_file("mixed-origin.json"), opt);
        CHECK(out.exit_code == 0);
        const Matrix w = cli::parse_matrix(out.report.at("witness"), "witness");
        CHECK((w - 0.5 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(out.report.at("recheck").at("passed").get<bool>());
    }

    SECTION("doubly entangled chain") {
        auto out = cli::run_problem(load_file("bell-bell-marginal.json"), opt);
        CHECK(out.exit_code == 2);
        CHECK(out.report.at("mu_star").get<double>() == Catch::Approx(0.75).margin(1e-9));
        CHECK(out.report.at("value").get<double>() == Catch::Approx(0.75).margin(1e-6));
        CHECK(out.report.at("dual_gap").get<double>() < 1e-6);
        CHECK(out.report.at("recheck").at("passed").get<bool>());

        // the prose rendering surfaces the bound as its own line
        const std::string prose = cli::render_prose(out.report);
        bool found = false;
        std::istringstream lines(prose);
        for (std::string line; std::getline(lines, line);)
            if (line.rfind("mu_star", 0) == 0 &&
                line.find("0.75") != std::string::npos)
                found = true;
        CHECK(found);
    }

    SECTION("every bundled file passes validation") {
        for (const char* name :
             {"pauli-09-05.json", "mixed-origin.json", "bell-bell-marginal.json"})
            CHECK(cli::validate_problem(load_file(name)).empty());
    }
}
