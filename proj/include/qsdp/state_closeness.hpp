#pragma once
//
// Distance and fidelity refinements over the set of states compatible with a
// dataset: closest state in trace distance to a target, the range of overlaps
// with a pure target, best root-fidelity with a mixed target, standalone
// root-fidelity evaluation, and the reachable range of an unmeasured
// observable. Every quantity is computed by a semidefinite program over the
// data-feasible set; infeasible data raises InfeasibleData carrying the
// separating certificate instead of returning a vacuous optimum.
//
// Root fidelity uses the coupling-block program
//     max (1/2) tr(B + B')  over  [[rho, B], [B', sigma]] >= 0,
// whose optimum is tr sqrt(sqrt(sigma) rho sqrt(sigma)); trace distance uses
// the absolute-value envelope  -X <= rho - sigma <= X  with minimized tr(X)/2.

#include <qsdp/operator_core.hpp>
#include <qsdp/sdp_engine.hpp>
#include <qsdp/state_estimation.hpp>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsdp {

enum class QuantityKind { TraceDistance, FidelityPure, SqrtFidelityMixed, PropertyMin, PropertyMax };

struct ClosenessResult {
    double value;
    DensityOperator state;
    QuantityKind quantity_kind;
};

class InfeasibleData : public std::runtime_error {
public:
    InfeasibleData(const std::string& what, InfeasibilityCertificate cert)
        : std::runtime_error(what), certificate(std::move(cert)) {}
    InfeasibilityCertificate certificate;
};

class TargetNotPure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline DensityOperator require_feasible(const Dataset& data, const EstimationOptions& opt,
                                        const char* who) {
    auto out = feasibility(data, opt);
    if (out.verdict != Verdict::Feasible)
        throw InfeasibleData(std::string(who) + ": no quantum state reproduces the dataset",
                             out.certificate.value_or(InfeasibilityCertificate{}));
    return *out.state;
}

inline void expect_optimal(const SdpSolution& sol, const char* who) {
    if (sol.status != SolveStatus::Optimal)
        throw std::runtime_error(std::string(who) + ": solver failed with status " +
                                 to_string(sol.status));
}

// Snap tiny numerical overshoot onto the unit interval; leave real violations
// visible.
inline double snap_unit(double v) {
    if (v < 0.0 && v >= -1e-8) return 0.0;
    if (v > 1.0 && v <= 1.0 + 1e-8) return 1.0;
    return v;
}

// Equality rows pinning a d x d sub-block of `block` (at diagonal offset
// `cell`) to the matrix `target`, expanded over an orthonormal Hermitian basis.
inline void pin_cell(SdpProblem& p, int block, int block_dim, int cell, const Matrix& target,
                     const std::string& label) {
    const int d = static_cast<int>(target.rows());
    for (const auto& e : hermitian_basis(d)) {
        Matrix coeff = Matrix::Zero(block_dim, block_dim);
        coeff.block(cell, cell, d, d) = e;
        p.add_equality({{block, coeff}}, (e.adjoint() * target).trace().real(), label);
    }
}

// Data rows tr(M_x rho) = m_x plus unit trace, applied to the top-left d x d
// cell of `block` (cell 0; block may be larger than d).
inline void data_rows_on_cell(SdpProblem& p, int block, int block_dim, const Dataset& data, int d) {
    for (size_t x = 0; x < data.size(); ++x) {
        Matrix coeff = Matrix::Zero(block_dim, block_dim);
        coeff.topLeftCorner(d, d) = data[x].observable.matrix();
        p.add_equality({{block, coeff}}, data[x].value, "mean" + std::to_string(x));
    }
    Matrix tr = Matrix::Zero(block_dim, block_dim);
    tr.topLeftCorner(d, d) = Matrix::Identity(d, d);
    p.add_equality({{block, tr}}, 1.0, "unit-trace");
}

// Root-fidelity coupling program. The top-left cell carries rho (pinned to a
// fixed state, or constrained by data rows); the bottom-right cell is pinned to
// sigma. Returns (problem, coupling block index).
inline std::pair<SdpProblem, int> coupling_program(const Matrix& sigma, int d) {
    SdpProblem p;
    p.sense = Sense::Maximize;
    const int bw = p.add_block("coupling", 2 * d);
    Matrix g = Matrix::Zero(2 * d, 2 * d);
    g.topRightCorner(d, d) = 0.5 * Matrix::Identity(d, d);
    g.bottomLeftCorner(d, d) = 0.5 * Matrix::Identity(d, d);
    p.add_objective(bw, g);
    pin_cell(p, bw, 2 * d, d, sigma, "pin-target");
    return {std::move(p), bw};
}

inline Matrix top_left_cell(const Matrix& m, int d) { return m.topLeftCorner(d, d); }

}  // namespace detail

// ---- Standalone root fidelity ----

inline double sqrt_fidelity(const DensityOperator& rho, const DensityOperator& sigma,
                            const SolveOptions& solver = {}) {
    if (rho.dim() != sigma.dim())
        throw std::invalid_argument("sqrt_fidelity: states have different dimensions");
    const int d = rho.dim();
    auto [p, bw] = detail::coupling_program(sigma.matrix(), d);
    detail::pin_cell(p, bw, 2 * d, 0, rho.matrix(), "pin-state");
    auto sol = solve(p, solver);
    detail::expect_optimal(sol, "sqrt_fidelity");
    return detail::snap_unit(sol.objective_value);
}

// ---- Closest compatible state in trace distance ----

inline ClosenessResult min_trace_distance(const Dataset& data, const DensityOperator& target,
                                          const EstimationOptions& opt = {}) {
    detail::require_feasible(data, opt, "min_trace_distance");
    const int d = detail::dataset_dim(data, "min_trace_distance");
    if (target.dim() != d)
        throw std::invalid_argument("min_trace_distance: target dimension mismatch");

    SdpProblem p;
    const int brho = p.add_block("state", d);
    const int bx = p.add_block("envelope", d);
    p.add_objective(bx, Matrix(0.5 * Matrix::Identity(d, d)));
    detail::data_rows_on_cell(p, brho, d, data, d);
    // X - rho + sigma >= 0  and  X + rho - sigma >= 0
    const int upper = p.add_lmi(d, target.matrix(), "above-difference");
    p.add_lmi_placement(upper, bx, 0, 0, Complex(1, 0));
    p.add_lmi_placement(upper, brho, 0, 0, Complex(-1, 0));
    const int lower = p.add_lmi(d, Matrix(-target.matrix()), "below-difference");
    p.add_lmi_placement(lower, bx, 0, 0, Complex(1, 0));
    p.add_lmi_placement(lower, brho, 0, 0, Complex(1, 0));

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "min_trace_distance");
    return ClosenessResult{detail::snap_unit(sol.objective_value),
                           detail::project_to_density(sol.primal[static_cast<size_t>(brho)]),
                           QuantityKind::TraceDistance};
}

// ---- Overlap range with a pure target ----

inline std::pair<ClosenessResult, ClosenessResult> fidelity_pure_range(
    const Dataset& data, const DensityOperator& target_pure, const EstimationOptions& opt = {}) {
    const int d = detail::dataset_dim(data, "fidelity_pure_range");
    if (target_pure.dim() != d)
        throw std::invalid_argument("fidelity_pure_range: target dimension mismatch");
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(target_pure.matrix(), Eigen::EigenvaluesOnly);
        Eigen::VectorXd ev = es.eigenvalues();
        std::sort(ev.data(), ev.data() + ev.size());
        if (ev(ev.size() - 2) > 1e-8)
            throw TargetNotPure("fidelity_pure_range: target has rank greater than one");
    }
    detail::require_feasible(data, opt, "fidelity_pure_range");

    auto solve_dir = [&](Sense sense) {
        SdpProblem p;
        p.sense = sense;
        const int brho = p.add_block("state", d);
        p.add_objective(brho, target_pure.matrix());
        detail::data_rows_on_cell(p, brho, d, data, d);
        auto sol = solve(p, opt.solver);
        detail::expect_optimal(sol, "fidelity_pure_range");
        return ClosenessResult{detail::snap_unit(sol.objective_value),
                               detail::project_to_density(sol.primal[static_cast<size_t>(brho)]),
                               QuantityKind::FidelityPure};
    };
    auto lo = solve_dir(Sense::Minimize);
    auto hi = solve_dir(Sense::Maximize);
    return {lo, hi};
}

// ---- Best root fidelity with a mixed target over the feasible set ----

inline ClosenessResult max_sqrt_fidelity(const Dataset& data, const DensityOperator& target,
                                         const EstimationOptions& opt = {}) {
    detail::require_feasible(data, opt, "max_sqrt_fidelity");
    const int d = detail::dataset_dim(data, "max_sqrt_fidelity");
    if (target.dim() != d)
        throw std::invalid_argument("max_sqrt_fidelity: target dimension mismatch");

    auto [p, bw] = detail::coupling_program(target.matrix(), d);
    detail::data_rows_on_cell(p, bw, 2 * d, data, d);
    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "max_sqrt_fidelity");
    return ClosenessResult{
        detail::snap_unit(sol.objective_value),
        detail::project_to_density(detail::top_left_cell(sol.primal[static_cast<size_t>(bw)], d)),
        QuantityKind::SqrtFidelityMixed};
}

// ---- Reachable range of an unmeasured observable ----

inline std::pair<ClosenessResult, ClosenessResult> property_range(
    const Dataset& data, const HermitianOperator& observable, const EstimationOptions& opt = {}) {
    const int d = observable.dim();
    if (!data.empty()) {
        if (detail::dataset_dim(data, "property_range") != d)
            throw std::invalid_argument("property_range: observable dimension mismatch");
        detail::require_feasible(data, opt, "property_range");
    }
    auto solve_dir = [&](Sense sense) {
        SdpProblem p;
        p.sense = sense;
        const int brho = p.add_block("state", d);
        p.add_objective(brho, observable.matrix());
        detail::data_rows_on_cell(p, brho, d, data, d);
        auto sol = solve(p, opt.solver);
        detail::expect_optimal(sol, "property_range");
        return ClosenessResult{sol.objective_value,
                               detail::project_to_density(sol.primal[static_cast<size_t>(brho)]),
                               sense == Sense::Minimize ? QuantityKind::PropertyMin
                                                        : QuantityKind::PropertyMax};
    };
    auto lo = solve_dir(Sense::Minimize);
    auto hi = solve_dir(Sense::Maximize);
    return {lo, hi};
}

}  // namespace qsdp
