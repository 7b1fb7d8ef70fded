#pragma once
//
// Command-line front end internals: parse JSON problem files, dispatch to the
// library, and assemble machine-readable result reports. Kept header-only and
// stream-free so tests can drive the full pipeline without spawning the binary.
//
// Exit-code convention (mirrors the physics outcome so shell pipelines can
// branch on it):
//   0  solved / feasible
//   2  certified infeasible (a separating certificate or dual bound is emitted)
//   1  input, schema, or usage errors
//   3  the solver failed to reach a certified answer
//
// File format: UTF-8 JSON with a mandatory "schema" version field; complex
// scalars as [re, im] (plain numbers allowed for reals), matrices row-major.

#include <qsdp/marginal.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qsdp::cli {

using nlohmann::json;

// Input problems that fail schema or semantic validation (exit 1).
class ProblemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline const std::set<std::string>& task_names() {
    static const std::set<std::string> names{
        "feasibility",    "intervals",      "relax-linf",      "relax-l1",
        "certificate",    "verify-certificate", "trace-distance", "fidelity-pure",
        "fidelity-mixed", "property-range", "marginal",        "marginal-eps",
        "marginal-purefid", "marginal-dual"};
    return names;
}

struct ProblemFile {
    int schema = 0;
    std::string task;
    json payload;
};

struct RunOptions {
    bool recheck = false;
    std::optional<double> tol;       // duality-gap tolerance override
    std::optional<int> max_iter;
    std::optional<uint64_t> seed;    // echoed into the report; solves are deterministic
};

struct RunReport {
    int exit_code = 1;
    json report;
};

// ---- JSON <-> matrix plumbing ----

inline Complex parse_scalar(const json& j, const std::string& where) {
    if (j.is_number()) return Complex(j.get<double>(), 0.0);
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return Complex(j[0].get<double>(), j[1].get<double>());
    throw ProblemError(where + ": expected a number or a [re, im] pair");
}

inline Matrix parse_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ProblemError(where + ": expected a non-empty array of rows");
    const auto rows = static_cast<int>(j.size());
    if (!j[0].is_array() || j[0].empty())
        throw ProblemError(where + "[0]: expected a non-empty row array");
    const auto cols = static_cast<int>(j[0].size());
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const json& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ProblemError(where + "[" + std::to_string(r) + "]: rows must have equal length");
        for (int c = 0; c < cols; ++c)
            m(r, c) = parse_scalar(row[static_cast<size_t>(c)],
                                   where + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
    return m;
}

// Hermiticity check that names the worst offending entry.
inline void require_hermitian(const Matrix& m, const std::string& where) {
    if (m.rows() != m.cols()) throw ProblemError(where + ": matrix must be square");
    double worst = 0.0;
    int wr = 0, wc = 0;
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) {
            const double dev = std::abs(m(r, c) - std::conj(m(c, r)));
            if (dev > worst) {
                worst = dev;
                wr = r;
                wc = c;
            }
        }
    if (worst > 1e-8)
        throw ProblemError(where + ": matrix is not Hermitian at entry (" + std::to_string(wr) +
                           ", " + std::to_string(wc) + "), |A - A^dag| = " + std::to_string(worst));
}

inline json scalar_json(const Complex& z) {
    if (z.imag() == 0.0) return json(z.real());
    return json::array({z.real(), z.imag()});
}

inline json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(scalar_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- Field helpers ----

inline const json& need_field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key))
        throw ProblemError(where + ": missing required field '" + key + "'");
    return obj.at(key);
}

inline double need_number(const json& obj, const std::string& key, const std::string& where) {
    const json& v = need_field(obj, key, where);
    if (!v.is_number()) throw ProblemError(where + "." + key + ": expected a number");
    return v.get<double>();
}

// ---- Payload parsing ----

inline Dataset parse_dataset(const json& payload, bool widths_required) {
    const json& arr = need_field(payload, "dataset", "payload");
    if (!arr.is_array() || arr.empty())
        throw ProblemError("payload.dataset: expected a non-empty array of records");
    Dataset data;
    int dim = -1;
    int first = 0;
    for (size_t i = 0; i < arr.size(); ++i) {
        const std::string where = "payload.dataset[" + std::to_string(i) + "]";
        const json& rec = arr[i];
        Matrix obs = parse_matrix(need_field(rec, "observable", where), where + ".observable");
        require_hermitian(obs, where + ".observable");
        if (dim < 0) {
            dim = static_cast<int>(obs.rows());
            first = static_cast<int>(i);
        } else if (obs.rows() != dim) {
            throw ProblemError("payload.dataset: records " + std::to_string(first) + " and " +
                               std::to_string(i) + " have different observable dimensions (" +
                               std::to_string(dim) + " vs " + std::to_string(obs.rows()) + ")");
        }
        const double mean = need_number(rec, "mean", where);
        if (rec.contains("half_width")) {
            if (!rec["half_width"].is_number() || rec["half_width"].get<double>() < 0.0)
                throw ProblemError(where + ".half_width: expected a nonnegative number");
            data.emplace_back(HermitianOperator(obs), mean, rec["half_width"].get<double>());
        } else if (widths_required) {
            throw ProblemError(where + ": missing required field 'half_width'");
        } else {
            data.emplace_back(HermitianOperator(obs), mean);
        }
    }
    return data;
}

inline DensityOperator parse_density(const json& payload, const std::string& key) {
    const std::string where = "payload." + key;
    Matrix m = parse_matrix(need_field(payload, key, "payload"), where);
    require_hermitian(m, where);
    try {
        return DensityOperator(m);
    } catch (const std::invalid_argument& e) {
        throw ProblemError(where + ": " + e.what());
    }
}

inline HermitianOperator parse_observable(const json& payload, const std::string& key) {
    const std::string where = "payload." + key;
    Matrix m = parse_matrix(need_field(payload, key, "payload"), where);
    require_hermitian(m, where);
    return HermitianOperator(m);
}

inline SubsystemShape parse_shape(const json& payload) {
    const json& s = need_field(payload, "shape", "payload");
    if (!s.is_array() || s.size() != 3)
        throw ProblemError("payload.shape: expected an array of three local dimensions");
    std::vector<int> dims;
    for (size_t i = 0; i < 3; ++i) {
        if (!s[i].is_number_integer() || s[i].get<int>() < 1)
            throw ProblemError("payload.shape[" + std::to_string(i) +
                               "]: expected a positive integer");
        dims.push_back(s[i].get<int>());
    }
    return SubsystemShape(dims);
}

inline MarginalSpec parse_marginal_spec(const json& payload) {
    MarginalSpec spec;
    spec.shape = parse_shape(payload);
    const json& targets = need_field(payload, "targets", "payload");
    if (!targets.is_object() || targets.empty())
        throw ProblemError("payload.targets: expected an object keyed by XY, XZ, or YZ");
    for (const auto& [key, value] : targets.items()) {
        SubsystemPair pair;
        if (key == "XY") pair = SubsystemPair::XY;
        else if (key == "XZ") pair = SubsystemPair::XZ;
        else if (key == "YZ") pair = SubsystemPair::YZ;
        else throw ProblemError("payload.targets." + key + ": unknown pair label");
        const std::string where = "payload.targets." + key;
        Matrix m = parse_matrix(value, where);
        require_hermitian(m, where);
        try {
            spec.targets.emplace(pair, DensityOperator(m));
        } catch (const std::invalid_argument& e) {
            throw ProblemError(where + ": " + e.what());
        }
        if (spec.targets.at(pair).dim() != pair_dim(spec.shape, pair))
            throw ProblemError(where + ": dimension does not match the subsystem pair");
    }
    return spec;
}

inline InfeasibilityCertificate parse_certificate(const json& payload, size_t records) {
    const json& c = need_field(payload, "certificate", "payload");
    InfeasibilityCertificate cert;
    cert.z = need_number(c, "z", "payload.certificate");
    const json& t = need_field(c, "t", "payload.certificate");
    if (!t.is_array() || t.size() != records)
        throw ProblemError("payload.certificate.t: expected one weight per dataset record");
    for (size_t i = 0; i < t.size(); ++i) {
        if (!t[i].is_number())
            throw ProblemError("payload.certificate.t[" + std::to_string(i) +
                               "]: expected a number");
        cert.t.push_back(t[i].get<double>());
    }
    return cert;
}

// ---- Report assembly ----

inline SolveOptions solver_options(const RunOptions& o) {
    SolveOptions s;
    if (o.tol) {
        s.gap_tol = *o.tol;
        s.feas_tol = *o.tol * 0.1;
    }
    if (o.max_iter) s.max_iter = *o.max_iter;
    return s;
}

inline EstimationOptions estimation_options(const RunOptions& o) {
    EstimationOptions e;
    e.solver = solver_options(o);
    return e;
}

inline MarginalOptions marginal_options(const RunOptions& o) {
    MarginalOptions m;
    m.solver = solver_options(o);
    return m;
}

inline json diagnostics_json(const SdpSolution& sol) {
    json d;
    d["status"] = to_string(sol.status);
    d["iterations"] = sol.iterations;
    d["gap"] = sol.gap;
    d["primal_residual"] = sol.primal_residual;
    d["dual_residual"] = sol.dual_residual;
    if (!sol.message.empty()) d["message"] = sol.message;
    return d;
}

inline json certificate_json(const InfeasibilityCertificate& cert, const Dataset& data) {
    const CertificateCheck check = verify_certificate(cert, data);
    json c;
    c["z"] = cert.z;
    c["t"] = cert.t;
    c["beta"] = check.beta;
    c["lambda_max_W"] = check.lambda_max_w;
    c["t_norm1"] = check.t_norm1;
    c["valid"] = check.valid;
    return c;
}

// ---- Solver-free arithmetic used by --recheck ----

namespace arith {

inline Matrix psd_sqrt(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

inline double trace_norm(const Matrix& hermitian) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitian, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline double sqrt_fidelity(const Matrix& rho, const Matrix& sigma) {
    const Matrix rs = psd_sqrt(sigma);
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(rs * rho * rs), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

inline double dataset_violation(const Dataset& data, const Matrix& rho, bool intervals) {
    double worst = 0.0;
    for (const auto& rec : data) {
        const double dev = std::abs(hs_inner(rec.observable.matrix(), rho) - rec.value);
        const double width = intervals && rec.half_width ? *rec.half_width : 0.0;
        worst = std::max(worst, dev - width);
    }
    return worst;
}

}  // namespace arith

// Attach a recheck block; a failed recheck downgrades the exit code to 1.
inline void attach_recheck(json& report, int& code, double violation, double allowance) {
    json r;
    r["max_violation"] = violation;
    r["allowance"] = allowance;
    r["passed"] = violation <= allowance;
    report["recheck"] = std::move(r);
    if (violation > allowance && code != 1) code = 1;
}

// ---- Task handlers ----

namespace handlers {

inline int estimation_outcome(const std::string& task, const EstimationOutcome& out,
                              const Dataset& data, const RunOptions& ropt, json& rep) {
    rep["verdict"] = to_string(out.verdict);
    if (out.delta_star) rep["delta_star"] = *out.delta_star;
    rep["diagnostics"] = diagnostics_json(out.diagnostics);
    if (out.state) rep["witness"] = matrix_json(out.state->matrix());
    if (out.certificate) rep["certificate"] = certificate_json(*out.certificate, data);
    int code = out.verdict == Verdict::Infeasible ? 2 : 0;
    if (ropt.recheck) {
        if (out.state) {
            const bool intervals = task == "intervals";
            double allowance = 1e-6;
            if (task == "relax-linf" && out.delta_star) allowance += *out.delta_star;
            double viol = arith::dataset_violation(data, out.state->matrix(), intervals);
            if (task == "relax-l1" && out.delta_star) {
                // the l1 objective halves the summed deviations
                double total = 0.0;
                for (const auto& rec : data)
                    total += std::abs(hs_inner(rec.observable.matrix(), out.state->matrix()) -
                                      rec.value);
                viol = 0.5 * total;
                allowance = *out.delta_star + 1e-6;
            }
            attach_recheck(rep, code, viol, allowance);
        } else if (out.certificate) {
            const auto check = verify_certificate(*out.certificate, data);
            attach_recheck(rep, code, check.valid ? 0.0 : 1.0, 0.5);
        }
    }
    return code;
}

inline int run_feasibility(const std::string& task, const json& payload, const RunOptions& ropt,
                           json& rep) {
    const bool intervals = task == "intervals";
    Dataset data = parse_dataset(payload, intervals);
    const auto out = intervals ? feasibility_intervals(data, estimation_options(ropt))
                               : feasibility(data, estimation_options(ropt));
    return estimation_outcome(task, out, data, ropt, rep);
}

inline int run_relax(const std::string& task, const json& payload, const RunOptions& ropt,
                     json& rep) {
    Dataset data = parse_dataset(payload, false);
    const auto out = task == "relax-linf" ? relax_linf(data, estimation_options(ropt))
                                          : relax_l1(data, estimation_options(ropt));
    return estimation_outcome(task, out, data, ropt, rep);
}

inline int run_certificate(const json& payload, const RunOptions& ropt, json& rep) {
    Dataset data = parse_dataset(payload, false);
    InfeasibilityCertificate cert;
    try {
        cert = extract_certificate(data, estimation_options(ropt));
    } catch (const CertificateUnavailable& e) {
        throw ProblemError(std::string("certificate: ") + e.what());
    }
    rep["verdict"] = to_string(Verdict::Infeasible);
    rep["certificate"] = certificate_json(cert, data);
    int code = 2;
    if (ropt.recheck) {
        const auto check = verify_certificate(cert, data);
        attach_recheck(rep, code, check.valid ? 0.0 : 1.0, 0.5);
    }
    return code;
}

inline int run_verify_certificate(const json& payload, const RunOptions& ropt, json& rep) {
    Dataset data = parse_dataset(payload, false);
    const auto cert = parse_certificate(payload, data.size());
    rep["certificate"] = certificate_json(cert, data);
    const bool valid = rep["certificate"]["valid"].get<bool>();
    rep["verdict"] = valid ? to_string(Verdict::Infeasible) : "Unproven";
    int code = valid ? 2 : 0;
    if (ropt.recheck) attach_recheck(rep, code, 0.0, 0.5);  // the run itself is the arithmetic
    return code;
}

inline int closeness_result(const std::string& task, const ClosenessResult& res,
                            const Dataset& data, const Matrix& target, const RunOptions& ropt,
                            json& rep) {
    rep["value"] = res.value;
    rep["witness"] = matrix_json(res.state.matrix());
    int code = 0;
    if (ropt.recheck) {
        double viol = arith::dataset_violation(data, res.state.matrix(), true);
        double value_check = 0.0;
        if (task == "trace-distance")
            value_check = std::abs(0.5 * arith::trace_norm(res.state.matrix() - target) -
                                   res.value);
        else if (task == "fidelity-mixed")
            value_check = std::abs(arith::sqrt_fidelity(res.state.matrix(), target) - res.value);
        attach_recheck(rep, code, std::max(viol, value_check), 1e-5);
    }
    return code;
}

inline int run_trace_distance(const json& payload, const RunOptions& ropt, json& rep) {
    Dataset data = parse_dataset(payload, false);
    const auto target = parse_density(payload, "target");
    auto res = min_trace_distance(data, target, estimation_options(ropt));
    rep["verdict"] = to_string(Verdict::Feasible);
    return closeness_result("trace-distance", res, data, target.matrix(), ropt, rep);
}

inline int run_fidelity_pure(const json& payload, const RunOptions& ropt, json& rep) {
    Dataset data = parse_dataset(payload, false);
    const auto target = parse_density(payload, "target");
    auto [lo, hi] = fidelity_pure_range(data, target, estimation_options(ropt));
    rep["values"] = json{{"min", lo.value}, {"max", hi.value}};
    rep["witness_min"] = matrix_json(lo.state.matrix());
    rep["witness_max"] = matrix_json(hi.state.matrix());
    int code = 0;
    if (ropt.recheck) {
        const double viol = std::max(
            {arith::dataset_violation(data, lo.state.matrix(), true),
             arith::dataset_violation(data, hi.state.matrix(), true),
             std::abs(hs_inner(target.matrix(), lo.state.matrix()) - lo.value),
             std::abs(hs_inner(target.matrix(), hi.state.matrix()) - hi.value)});
        attach_recheck(rep, code, viol, 1e-5);
    }
    return code;
}

inline int run_fidelity_mixed(const json& payload, const RunOptions& ropt, json& rep) {
    if (payload.contains("rho") && payload.contains("sigma")) {
        // direct two-state evaluation, no dataset
        const auto rho = parse_density(payload, "rho");
        const auto sigma = parse_density(payload, "sigma");
        const double value = sqrt_fidelity(rho, sigma, solver_options(ropt));
        rep["value"] = value;
        int code = 0;
        if (ropt.recheck)
            attach_recheck(rep, code,
                           std::abs(arith::sqrt_fidelity(rho.matrix(), sigma.matrix()) - value),
                           1e-5);
        return code;
    }
    Dataset data = parse_dataset(payload, false);
    const auto target = parse_density(payload, "target");
    auto res = max_sqrt_fidelity(data, target, estimation_options(ropt));
    rep["verdict"] = to_string(Verdict::Feasible);
    return closeness_result("fidelity-mixed", res, data, target.matrix(), ropt, rep);
}

inline int run_property_range(const json& payload, const RunOptions& ropt, json& rep) {
    Dataset data = parse_dataset(payload, false);
    const auto obs = parse_observable(payload, "observable");
    auto [lo, hi] = property_range(data, obs, estimation_options(ropt));
    rep["values"] = json{{"min", lo.value}, {"max", hi.value}};
    rep["witness_min"] = matrix_json(lo.state.matrix());
    rep["witness_max"] = matrix_json(hi.state.matrix());
    int code = 0;
    if (ropt.recheck) {
        const double viol = std::max(
            {arith::dataset_violation(data, lo.state.matrix(), true),
             arith::dataset_violation(data, hi.state.matrix(), true),
             std::abs(hs_inner(obs.matrix(), lo.state.matrix()) - lo.value),
             std::abs(hs_inner(obs.matrix(), hi.state.matrix()) - hi.value)});
        attach_recheck(rep, code, viol, 1e-5);
    }
    return code;
}

inline double worst_pair_deviation(const MarginalSpec& spec, const Matrix& witness) {
    double worst = 0.0;
    for (const auto& [pair, target] : spec.targets)
        worst = std::max(worst, arith::trace_norm(partial_trace(witness, spec.shape,
                                                                pair_positions(pair)) -
                                                  target.matrix()));
    return worst;
}

inline int run_marginal(const std::string& task, const json& payload, const RunOptions& ropt,
                        json& rep) {
    const auto spec = parse_marginal_spec(payload);
    std::optional<double> eps;
    if (task == "marginal-eps") {
        const double e = need_number(payload, "eps", "payload");
        if (e < 0) throw ProblemError("payload.eps: expected a nonnegative number");
        eps = e;
        rep["eps"] = e;
    }
    const auto out = eps ? marginal_feasibility_eps(spec, *eps, marginal_options(ropt))
                         : marginal_feasibility(spec, marginal_options(ropt));
    rep["verdict"] = to_string(out.verdict);
    if (out.global_state) rep["witness"] = matrix_json(out.global_state->matrix());
    if (out.dual_bound) rep["deviation_bound"] = *out.dual_bound;
    int code = out.verdict == Verdict::Infeasible ? 2 : 0;
    if (ropt.recheck && out.global_state)
        attach_recheck(rep, code, worst_pair_deviation(spec, out.global_state->matrix()),
                       eps.value_or(0.0) + 1e-6);
    return code;
}

inline int run_marginal_purefid(const std::string& task, const json& payload,
                                const RunOptions& ropt, json& rep) {
    const auto shape = parse_shape(payload);
    DensityOperator psi_xy = parse_density(payload, "psi_xy");
    DensityOperator psi_yz = parse_density(payload, "psi_yz");
    double mu = 0.0;
    try {
        mu = marginal_dual_bound(psi_xy, psi_yz, shape);
    } catch (const TargetNotPure& e) {
        throw ProblemError(std::string("payload: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ProblemError(std::string("payload: ") + e.what());
    }
    rep["mu_star"] = mu;
    // mu* < 1 proves (spectrally, no solver needed) that no joint state can
    // match both pure marginals exactly.
    int code = mu < 1.0 - 1e-6 ? 2 : 0;
    if (task == "marginal-purefid") {
        auto [value, state] = max_avg_fidelity_pure_marginals(psi_xy, psi_yz, shape,
                                                              marginal_options(ropt));
        rep["value"] = value;
        rep["dual_gap"] = std::abs(mu - value);
        rep["witness"] = matrix_json(state.matrix());
        if (ropt.recheck) {
            const double achieved =
                0.5 * (hs_inner(lift_to_shape(psi_xy.matrix(), shape, {0, 1}), state.matrix()) +
                       hs_inner(lift_to_shape(psi_yz.matrix(), shape, {1, 2}), state.matrix()));
            attach_recheck(rep, code, std::abs(achieved - value), 1e-5);
        }
    } else if (ropt.recheck) {
        attach_recheck(rep, code, 0.0, 0.5);  // spectral bound is its own arithmetic
    }
    return code;
}

}  // namespace handlers

// ---- Top-level entry points ----

inline ProblemFile load_problem(const json& root) {
    if (!root.is_object()) throw ProblemError("problem file: expected a JSON object");
    const json& schema = need_field(root, "schema", "problem file");
    if (!schema.is_number_integer() || schema.get<int>() != 1)
        throw ProblemError("schema: unsupported version (this build reads schema 1)");
    const json& task = need_field(root, "task", "problem file");
    if (!task.is_string() || task_names().count(task.get<std::string>()) == 0)
        throw ProblemError("task: expected one of the documented task names");
    ProblemFile pf;
    pf.schema = schema.get<int>();
    pf.task = task.get<std::string>();
    pf.payload = need_field(root, "payload", "problem file");
    if (!pf.payload.is_object()) throw ProblemError("payload: expected a JSON object");
    return pf;
}

// Schema/payload validation without ever invoking the solver.
inline std::vector<std::string> validate_problem(const json& root) {
    try {
        const ProblemFile pf = load_problem(root);
        const std::string& t = pf.task;
        if (t == "feasibility" || t == "relax-linf" || t == "relax-l1" || t == "certificate")
            parse_dataset(pf.payload, false);
        else if (t == "intervals")
            parse_dataset(pf.payload, true);
        else if (t == "verify-certificate")
            parse_certificate(pf.payload, parse_dataset(pf.payload, false).size());
        else if (t == "trace-distance" || t == "fidelity-pure")
            (void)(parse_dataset(pf.payload, false), parse_density(pf.payload, "target"));
        else if (t == "fidelity-mixed") {
            if (pf.payload.contains("rho") && pf.payload.contains("sigma"))
                (void)(parse_density(pf.payload, "rho"), parse_density(pf.payload, "sigma"));
            else
                (void)(parse_dataset(pf.payload, false), parse_density(pf.payload, "target"));
        } else if (t == "property-range")
            (void)(parse_dataset(pf.payload, false), parse_observable(pf.payload, "observable"));
        else if (t == "marginal")
            parse_marginal_spec(pf.payload);
        else if (t == "marginal-eps") {
            parse_marginal_spec(pf.payload);
            if (need_number(pf.payload, "eps", "payload") < 0)
                throw ProblemError("payload.eps: expected a nonnegative number");
        } else if (t == "marginal-purefid" || t == "marginal-dual") {
            parse_shape(pf.payload);
            parse_density(pf.payload, "psi_xy");
            parse_density(pf.payload, "psi_yz");
        }
        return {};
    } catch (const ProblemError& e) {
        return {e.what()};
    } catch (const json::exception& e) {
        return {std::string("problem file: ") + e.what()};
    }
}

inline RunReport run_problem(const json& root, const RunOptions& ropt = {}) {
    RunReport out;
    json& rep = out.report;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const ProblemFile pf = load_problem(root);
        rep["task"] = pf.task;
        rep["schema"] = pf.schema;
        const std::string& t = pf.task;
        if (t == "feasibility" || t == "intervals")
            out.exit_code = handlers::run_feasibility(t, pf.payload, ropt, rep);
        else if (t == "relax-linf" || t == "relax-l1")
            out.exit_code = handlers::run_relax(t, pf.payload, ropt, rep);
        else if (t == "certificate")
            out.exit_code = handlers::run_certificate(pf.payload, ropt, rep);
        else if (t == "verify-certificate")
            out.exit_code = handlers::run_verify_certificate(pf.payload, ropt, rep);
        else if (t == "trace-distance")
            out.exit_code = handlers::run_trace_distance(pf.payload, ropt, rep);
        else if (t == "fidelity-pure")
            out.exit_code = handlers::run_fidelity_pure(pf.payload, ropt, rep);
        else if (t == "fidelity-mixed")
            out.exit_code = handlers::run_fidelity_mixed(pf.payload, ropt, rep);
        else if (t == "property-range")
            out.exit_code = handlers::run_property_range(pf.payload, ropt, rep);
        else if (t == "marginal" || t == "marginal-eps")
            out.exit_code = handlers::run_marginal(t, pf.payload, ropt, rep);
        else
            out.exit_code = handlers::run_marginal_purefid(t, pf.payload, ropt, rep);
    } catch (const ProblemError& e) {
        rep["error"] = e.what();
        out.exit_code = 1;
    } catch (const json::exception& e) {
        rep["error"] = std::string("problem file: ") + e.what();
        out.exit_code = 1;
    } catch (const InfeasibleData& e) {
        // refinement over an empty feasible set: certified infeasible
        rep["verdict"] = to_string(Verdict::Infeasible);
        rep["error"] = e.what();
        rep["certificate"]["z"] = e.certificate.z;
        rep["certificate"]["t"] = e.certificate.t;
        out.exit_code = 2;
    } catch (const TargetNotPure& e) {
        rep["error"] = e.what();
        out.exit_code = 1;
    } catch (const std::invalid_argument& e) {
        rep["error"] = e.what();
        out.exit_code = 1;
    } catch (const std::runtime_error& e) {
        rep["error"] = e.what();  // solver gave up before certifying anything
        out.exit_code = 3;
    }
    const auto t1 = std::chrono::steady_clock::now();
    rep["wall_time_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (ropt.seed) rep["seed"] = *ropt.seed;
    rep["exit_code"] = out.exit_code;
    return out;
}

// ---- Prose rendering ----

inline void flatten_json(const json& j, const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten_json(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out.emplace_back(prefix, j.dump());
    }
}

inline std::string render_prose(const json& rep) {
    // stable ordering: headline fields first, matrices last
    static const std::vector<std::string> front{
        "task",  "verdict", "value", "values.min", "values.max", "delta_star",
        "eps",   "mu_star", "dual_gap"};
    std::vector<std::pair<std::string, std::string>> fields;
    flatten_json(rep, "", fields);
    std::stable_sort(fields.begin(), fields.end(), [&](const auto& a, const auto& b) {
        auto rank = [&](const std::string& key) {
            for (size_t i = 0; i < front.size(); ++i)
                if (key == front[i]) return static_cast<int>(i);
            if (key.rfind("witness", 0) == 0) return 1000;  // matrices at the end
            return 100;
        };
        return rank(a.first) < rank(b.first);
    });
    size_t width = 0;
    for (const auto& [k, v] : fields) width = std::max(width, k.size());
    std::ostringstream os;
    for (const auto& [k, v] : fields)
        os << k << std::string(width - k.size() + 2, ' ') << v << "\n";
    return os.str();
}

}  // namespace qsdp::cli
