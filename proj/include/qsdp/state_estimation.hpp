#pragma once
//
// Feasibility analysis of expectation-value datasets. A dataset is a list of
// Hermitian observables M_x with reported means m_x (optionally interval
// half-widths). The central questions: does any density operator reproduce the
// data, how far away is the closest one (in the l-infinity or l1 sense over
// the expectation vector), and - when no state exists - what separating
// hyperplane (z, t) proves it. A certificate (z, t) with ||t||_1 <= 1 and
// z I + sum_x t_x M_x <= 0 gives, for every state rho,
//     z + sum_x t_x tr(M_x rho) = tr((zI + sum t_x M_x) rho) <= 0,
// so beta = z + t.m > 0 shows the data point m is unreachable. Verification is
// a spectral bound plus a dot product; no optimization involved.

#include <qsdp/operator_core.hpp>
#include <qsdp/sdp_engine.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsdp {

// ---- Dataset ----

struct MeasurementRecord {
    HermitianOperator observable;
    double value = 0.0;
    std::optional<double> half_width;  // interval data: value +/- half_width

    MeasurementRecord(HermitianOperator obs, double val) : observable(std::move(obs)), value(val) {}
    MeasurementRecord(HermitianOperator obs, double val, double width)
        : observable(std::move(obs)), value(val), half_width(width) {
        if (width < 0)
            throw std::invalid_argument("MeasurementRecord: half_width must be nonnegative");
    }
};

using Dataset = std::vector<MeasurementRecord>;

namespace detail {

inline int dataset_dim(const Dataset& data, const char* who) {
    if (data.empty()) throw std::invalid_argument(std::string(who) + ": dataset is empty");
    const int d = data.front().observable.dim();
    for (const auto& r : data)
        if (r.observable.dim() != d)
            throw std::invalid_argument(std::string(who) +
                                        ": observables have inconsistent dimensions");
    return d;
}

// Clamp negative eigenvalues and renormalize the trace so the returned state
// is an exact density operator (distance to the raw solver output stays within
// a small multiple of the solver residuals).
inline DensityOperator project_to_density(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const double tr = ev.sum();
    if (tr <= 0) throw std::runtime_error("project_to_density: solution has no positive part");
    ev /= tr;
    Matrix out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    return DensityOperator(Matrix(0.5 * (out + out.adjoint())));
}

}  // namespace detail

// ---- Verdicts, certificates, outcomes ----

enum class Verdict { Feasible, Infeasible, Marginal };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Feasible: return "Feasible";
        case Verdict::Infeasible: return "Infeasible";
        case Verdict::Marginal: return "Marginal";
    }
    return "?";
}

struct InfeasibilityCertificate {
    double z = 0.0;
    std::vector<double> t;
};

struct CertificateCheck {
    double beta = 0.0;          // z + t.m; positive proves infeasibility
    double lambda_max_w = 0.0;  // largest eigenvalue of z I + sum_x t_x M_x
    double t_norm1 = 0.0;
    bool valid = false;
};

class CertificateUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EstimationOptions {
    double infeasibility_threshold = 1e-6;  // delta* above this means Infeasible
    SolveOptions solver{};
};

struct EstimationOutcome {
    Verdict verdict = Verdict::Marginal;
    std::optional<DensityOperator> state;
    std::optional<double> delta_star;
    std::optional<InfeasibilityCertificate> certificate;
    SdpSolution diagnostics;
};

// ---- Certificate arithmetic (solver-free) ----

inline Matrix certificate_witness(const InfeasibilityCertificate& cert, const Dataset& data) {
    const int d = detail::dataset_dim(data, "certificate_witness");
    if (cert.t.size() != data.size())
        throw std::invalid_argument("certificate_witness: t length does not match dataset");
    Matrix w = cert.z * Matrix::Identity(d, d);
    for (size_t x = 0; x < data.size(); ++x) w += cert.t[x] * data[x].observable.matrix();
    return w;
}

inline CertificateCheck verify_certificate(const InfeasibilityCertificate& cert,
                                           const Dataset& data) {
    CertificateCheck chk;
    chk.beta = cert.z;
    chk.t_norm1 = 0.0;
    for (size_t x = 0; x < data.size(); ++x) {
        chk.beta += cert.t[x] * data[x].value;
        chk.t_norm1 += std::abs(cert.t[x]);
    }
    chk.lambda_max_w = eig_bounds(certificate_witness(cert, data)).second;
    chk.valid = chk.beta > 0 && chk.lambda_max_w <= 1e-9 && chk.t_norm1 <= 1.0 + 1e-9;
    return chk;
}

namespace detail {

// Largest z keeping z I + sum t_x M_x negative semidefinite.
inline double tighten_z(const std::vector<double>& t, const Dataset& data) {
    const int d = data.front().observable.dim();
    Matrix acc = Matrix::Zero(d, d);
    for (size_t x = 0; x < data.size(); ++x) acc += t[x] * data[x].observable.matrix();
    return -eig_bounds(Matrix(acc)).second;
}

// Normalize a raw dual vector into a certificate: scale onto the l1 ball, then
// recompute z as the tightest spectral shift (this can only increase beta).
inline InfeasibilityCertificate polish_certificate(std::vector<double> t, const Dataset& data) {
    double n1 = 0.0;
    for (double v : t) n1 += std::abs(v);
    if (n1 > 1.0) {
        for (double& v : t) v /= n1;
    }
    InfeasibilityCertificate cert;
    cert.z = tighten_z(t, data);
    cert.t = std::move(t);
    return cert;
}

// The closed-form data-direction witness t = m / ||m||_1 (tightened z). Not
// always separating, but when it is, it is the canonical certificate reported.
inline std::optional<InfeasibilityCertificate> canonical_certificate(const Dataset& data) {
    double n1 = 0.0;
    for (const auto& r : data) n1 += std::abs(r.value);
    if (n1 < 1e-12) return std::nullopt;
    std::vector<double> t(data.size());
    for (size_t x = 0; x < data.size(); ++x) t[x] = data[x].value / n1;
    InfeasibilityCertificate cert;
    cert.z = tighten_z(t, data);
    cert.t = std::move(t);
    return cert;
}

// Prefer the canonical construction when it separates; otherwise fall back to
// the polished dual vector of the relaxation solve.
inline InfeasibilityCertificate best_certificate(const Dataset& data,
                                                 const InfeasibilityCertificate& from_dual) {
    if (auto canon = canonical_certificate(data); canon && verify_certificate(*canon, data).valid)
        return *canon;
    return from_dual;
}

inline Verdict classify(double delta, const EstimationOptions& opt) {
    if (std::abs(delta - opt.infeasibility_threshold) <= 10.0 * opt.solver.gap_tol)
        return Verdict::Marginal;
    return delta > opt.infeasibility_threshold ? Verdict::Infeasible : Verdict::Feasible;
}

// Shared l-infinity relaxation core:
//   min delta  s.t.  tr(M_x rho) + delta - p_x = lo_x
//                   -tr(M_x rho) + delta - q_x = -hi_x
//                    tr(rho) = 1,   rho, delta, p_x, q_x >= 0
// With lo = hi = m this is the worst-deviation relaxation; with an interval
// dataset it measures the worst violation of the boxes, so delta* = 0 exactly
// when some state meets every interval. Row multipliers (u_x, v_x, z) give the
// separating data t = u - v.
struct LinfCore {
    SdpSolution sol;
    double delta = 0.0;
    DensityOperator state;
    InfeasibilityCertificate dual_certificate;
};

inline LinfCore solve_linf_core(const Dataset& data, bool use_intervals,
                                const EstimationOptions& opt, const char* who) {
    const int d = dataset_dim(data, who);
    const int n = static_cast<int>(data.size());
    if (use_intervals)
        for (const auto& r : data)
            if (!r.half_width)
                throw std::invalid_argument(std::string(who) + ": every record needs a half_width");

    SdpProblem p;
    const int brho = p.add_block("state", d);
    const int bdelta = p.add_block("deviation", 1);
    p.add_objective(bdelta, Matrix::Identity(1, 1));
    std::vector<int> bp(static_cast<size_t>(n)), bq(static_cast<size_t>(n));
    for (int x = 0; x < n; ++x) {
        bp[static_cast<size_t>(x)] = p.add_block("lo-slack" + std::to_string(x), 1);
        bq[static_cast<size_t>(x)] = p.add_block("hi-slack" + std::to_string(x), 1);
    }
    const Matrix one = Matrix::Identity(1, 1);
    for (int x = 0; x < n; ++x) {
        const auto& r = data[static_cast<size_t>(x)];
        const double w = use_intervals ? *r.half_width : 0.0;
        p.add_equality({{brho, r.observable.matrix()},
                        {bdelta, one},
                        {bp[static_cast<size_t>(x)], Matrix(-one)}},
                       r.value - w, "lo" + std::to_string(x));
        p.add_equality({{brho, Matrix(-r.observable.matrix())},
                        {bdelta, one},
                        {bq[static_cast<size_t>(x)], Matrix(-one)}},
                       -(r.value + w), "hi" + std::to_string(x));
    }
    p.add_equality({{brho, Matrix::Identity(d, d)}}, 1.0, "unit-trace");

    LinfCore core{.sol = solve(p, opt.solver),
                  .delta = 0.0,
                  .state = DensityOperator(Matrix::Identity(d, d) / static_cast<double>(d)),
                  .dual_certificate = {}};
    if (core.sol.status != SolveStatus::Optimal)
        throw std::runtime_error(std::string(who) + ": solver failed with status " +
                                 to_string(core.sol.status));
    core.delta = std::max(0.0, core.sol.objective_value);
    core.state = project_to_density(core.sol.primal[static_cast<size_t>(brho)]);
    std::vector<double> t(static_cast<size_t>(n));
    for (int x = 0; x < n; ++x)
        t[static_cast<size_t>(x)] =
            core.sol.equality_duals[static_cast<size_t>(2 * x)] -
            core.sol.equality_duals[static_cast<size_t>(2 * x + 1)];
    core.dual_certificate = polish_certificate(std::move(t), data);
    return core;
}

}  // namespace detail

// ---- Operations ----

// Worst single-expectation deviation: minimize max_x |tr(M_x rho) - m_x|.
inline EstimationOutcome relax_linf(const Dataset& data, const EstimationOptions& opt = {}) {
    auto core = detail::solve_linf_core(data, false, opt, "relax_linf");
    EstimationOutcome out;
    out.verdict = detail::classify(core.delta, opt);
    out.state = core.state;
    out.delta_star = core.delta;
    out.diagnostics = core.sol;
    if (out.verdict == Verdict::Infeasible)
        out.certificate = detail::best_certificate(data, core.dual_certificate);
    return out;
}

// Existence of a state reproducing the data exactly; binary verdict.
inline EstimationOutcome feasibility(const Dataset& data, const EstimationOptions& opt = {}) {
    auto core = detail::solve_linf_core(data, false, opt, "feasibility");
    EstimationOutcome out;
    out.delta_star = core.delta;
    out.diagnostics = core.sol;
    if (core.delta > opt.infeasibility_threshold) {
        out.verdict = Verdict::Infeasible;
        out.certificate = detail::best_certificate(data, core.dual_certificate);
    } else {
        out.verdict = Verdict::Feasible;
        out.state = core.state;
    }
    return out;
}

// Existence of a state meeting every interval m_x +/- half_width_x. The
// certificate (when infeasible) separates the center point m, which the box
// margin implies.
inline EstimationOutcome feasibility_intervals(const Dataset& data,
                                               const EstimationOptions& opt = {}) {
    auto core = detail::solve_linf_core(data, true, opt, "feasibility_intervals");
    EstimationOutcome out;
    out.delta_star = core.delta;
    out.diagnostics = core.sol;
    if (core.delta > opt.infeasibility_threshold) {
        out.verdict = Verdict::Infeasible;
        out.certificate = core.dual_certificate;
    } else {
        out.verdict = Verdict::Feasible;
        out.state = core.state;
    }
    return out;
}

// Total-deviation relaxation: minimize (1/2) sum_x |tr(M_x rho) - m_x|.
inline EstimationOutcome relax_l1(const Dataset& data, const EstimationOptions& opt = {}) {
    const int d = detail::dataset_dim(data, "relax_l1");
    const int n = static_cast<int>(data.size());
    SdpProblem p;
    const int brho = p.add_block("state", d);
    std::vector<int> bp(static_cast<size_t>(n)), bq(static_cast<size_t>(n));
    const Matrix one = Matrix::Identity(1, 1);
    for (int x = 0; x < n; ++x) {
        bp[static_cast<size_t>(x)] = p.add_block("pos-residual" + std::to_string(x), 1);
        bq[static_cast<size_t>(x)] = p.add_block("neg-residual" + std::to_string(x), 1);
        p.add_objective(bp[static_cast<size_t>(x)], one);
        p.add_objective(bq[static_cast<size_t>(x)], one);
    }
    for (int x = 0; x < n; ++x)
        p.add_equality({{brho, data[static_cast<size_t>(x)].observable.matrix()},
                        {bp[static_cast<size_t>(x)], Matrix(-one)},
                        {bq[static_cast<size_t>(x)], one}},
                       data[static_cast<size_t>(x)].value, "residual" + std::to_string(x));
    p.add_equality({{brho, Matrix::Identity(d, d)}}, 1.0, "unit-trace");

    EstimationOutcome out;
    out.diagnostics = solve(p, opt.solver);
    if (out.diagnostics.status != SolveStatus::Optimal)
        throw std::runtime_error(std::string("relax_l1: solver failed with status ") +
                                 to_string(out.diagnostics.status));
    const double delta = std::max(0.0, 0.5 * out.diagnostics.objective_value);
    out.delta_star = delta;
    out.state = detail::project_to_density(out.diagnostics.primal[static_cast<size_t>(brho)]);
    out.verdict = detail::classify(delta, opt);
    if (out.verdict == Verdict::Infeasible) {
        std::vector<double> t(out.diagnostics.equality_duals.begin(),
                              out.diagnostics.equality_duals.begin() + n);
        out.certificate =
            detail::best_certificate(data, detail::polish_certificate(std::move(t), data));
    }
    return out;
}

// Standalone certificate extraction; throws CertificateUnavailable on feasible
// (or borderline) data.
inline InfeasibilityCertificate extract_certificate(const Dataset& data,
                                                    const EstimationOptions& opt = {}) {
    auto core = detail::solve_linf_core(data, false, opt, "extract_certificate");
    if (core.delta <= opt.infeasibility_threshold)
        throw CertificateUnavailable(
            "extract_certificate: data is reproducible within the infeasibility threshold "
            "(delta* = " +
            std::to_string(core.delta) + ")");
    InfeasibilityCertificate cert = detail::best_certificate(data, core.dual_certificate);
    if (!verify_certificate(cert, data).valid)
        throw std::runtime_error("extract_certificate: harvested certificate failed verification");
    return cert;
}

}  // namespace qsdp
