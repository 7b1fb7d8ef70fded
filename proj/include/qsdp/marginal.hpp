#pragma once
//
// Tripartite marginal problems: does a joint state of subsystems X, Y, Z exist
// whose pairwise reduced states match prescribed targets, either exactly or up
// to a trace-norm budget; and refinements over the compatible set (closest
// state to a target, best root fidelity, reachable energy range, and the
// largest average overlap with two pure target marginals together with its
// spectral dual bound).
//
// Exact compatibility is decided by minimizing the total trace-norm deviation
//     min sum_P tr(omega_P + zeta_P)  s.t.  tr_rest(sigma) - rho_P = omega_P - zeta_P,
// which is zero precisely when a compatible joint state exists and is strictly
// feasible on both sides regardless of the targets, so the solver always
// converges to full accuracy. The budgeted variant minimizes the worst-pair
// deviation and compares it with the allowance.

#include <qsdp/operator_core.hpp>
#include <qsdp/sdp_engine.hpp>
#include <qsdp/state_closeness.hpp>
#include <qsdp/state_estimation.hpp>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsdp {

// ---- Domain types ----

enum class SubsystemPair { XY, XZ, YZ };

inline std::string to_string(SubsystemPair p) {
    switch (p) {
        case SubsystemPair::XY: return "XY";
        case SubsystemPair::XZ: return "XZ";
        case SubsystemPair::YZ: return "YZ";
    }
    return "?";
}

inline std::vector<int> pair_positions(SubsystemPair p) {
    switch (p) {
        case SubsystemPair::XY: return {0, 1};
        case SubsystemPair::XZ: return {0, 2};
        case SubsystemPair::YZ: return {1, 2};
    }
    return {};
}

struct MarginalSpec {
    SubsystemShape shape{std::vector<int>{2, 2, 2}};
    std::map<SubsystemPair, DensityOperator> targets;  // any subset of the three pairs
};

struct MarginalOutcome {
    Verdict verdict = Verdict::Infeasible;
    std::optional<DensityOperator> global_state;  // witness when Feasible
    std::optional<double> dual_bound;  // certified deviation floor when infeasible
};

struct MarginalOptions {
    double feasibility_threshold = 1e-7;  // largest deviation still read as "compatible"
    SolveOptions solver;
};

class InfeasibleSpec : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- Small helpers ----

inline int pair_dim(const SubsystemShape& shape, SubsystemPair p) {
    int d = 1;
    for (int k : pair_positions(p)) d *= shape.dim(k);
    return d;
}

inline DensityOperator marginal_of(const DensityOperator& state, const SubsystemShape& shape,
                                   SubsystemPair p) {
    return DensityOperator(partial_trace(state.matrix(), shape, pair_positions(p)));
}

// All three pairwise marginals of a joint state, packaged as a spec.
inline MarginalSpec spec_from_state(const DensityOperator& state, const SubsystemShape& shape) {
    if (state.dim() != shape.total())
        throw std::invalid_argument("spec_from_state: state dimension does not match shape");
    MarginalSpec spec;
    spec.shape = shape;
    for (auto p : {SubsystemPair::XY, SubsystemPair::XZ, SubsystemPair::YZ})
        spec.targets.emplace(p, marginal_of(state, shape, p));
    return spec;
}

inline MarginalOutcome marginal_feasibility(const MarginalSpec& spec,
                                            const MarginalOptions& opt = {});

namespace detail {

inline void check_spec(const MarginalSpec& spec, const char* who) {
    if (spec.shape.subsystems() != 3)
        throw std::invalid_argument(std::string(who) + ": shape must have exactly three subsystems");
    for (const auto& [pair, target] : spec.targets)
        if (target.dim() != pair_dim(spec.shape, pair))
            throw std::invalid_argument(std::string(who) + ": target dimension mismatch for pair " +
                                        to_string(pair));
}

inline void require_targets(const MarginalSpec& spec, const char* who) {
    if (spec.targets.empty())
        throw std::invalid_argument(std::string(who) + ": at least one target marginal required");
}

inline void require_pure(const DensityOperator& state, const char* who) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(state.matrix(), Eigen::EigenvaluesOnly);
    Eigen::VectorXd ev = es.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size());
    if (ev(ev.size() - 2) > 1e-8)
        throw TargetNotPure(std::string(who) + ": marginal target has rank greater than one");
}

// Global state block with exact marginal-matching rows and unit trace.
inline int marginal_rows(SdpProblem& p, const MarginalSpec& spec) {
    const int dim = spec.shape.total();
    const int bg = p.add_block("global", dim);
    for (const auto& [pair, target] : spec.targets) {
        const auto pos = pair_positions(pair);
        int row = 0;
        for (const auto& e : hermitian_basis(target.dim()))
            p.add_equality({{bg, lift_to_shape(e, spec.shape, pos)}},
                           hs_inner(e, target.matrix()),
                           to_string(pair) + "-" + std::to_string(row++));
    }
    p.add_equality({{bg, identity_op(dim)}}, 1.0, "unit-trace");
    return bg;
}

// Deviation blocks (omega, zeta >= 0) tying the global block's pair marginal to
// its target:  tr_rest(sigma) - rho_P = omega - zeta, expanded over a basis.
struct DeviationPair {
    int excess, deficit;
};

inline DeviationPair deviation_rows(SdpProblem& p, int bg, const MarginalSpec& spec,
                                    SubsystemPair pair, const DensityOperator& target) {
    const int d = target.dim();
    const auto pos = pair_positions(pair);
    const std::string tag = to_string(pair);
    DeviationPair dev{p.add_block("excess-" + tag, d), p.add_block("deficit-" + tag, d)};
    int row = 0;
    for (const auto& e : hermitian_basis(d))
        p.add_equality({{bg, lift_to_shape(e, spec.shape, pos)},
                        {dev.excess, -e},
                        {dev.deficit, e}},
                       hs_inner(e, target.matrix()), tag + "-dev-" + std::to_string(row++));
    return dev;
}

inline DensityOperator require_feasible_spec(const MarginalSpec& spec, const MarginalOptions& opt,
                                             const char* who) {
    auto out = marginal_feasibility(spec, opt);
    if (out.verdict != Verdict::Feasible)
        throw InfeasibleSpec(std::string(who) + ": no joint state reproduces the marginal targets");
    return *out.global_state;
}

}  // namespace detail

// ---- Exact compatibility ----

inline MarginalOutcome marginal_feasibility(const MarginalSpec& spec, const MarginalOptions& opt) {
    detail::check_spec(spec, "marginal_feasibility");
    detail::require_targets(spec, "marginal_feasibility");

    const int dim = spec.shape.total();
    SdpProblem p;
    const int bg = p.add_block("global", dim);
    for (const auto& [pair, target] : spec.targets) {
        const auto dev = detail::deviation_rows(p, bg, spec, pair, target);
        p.add_objective(dev.excess, identity_op(target.dim()));
        p.add_objective(dev.deficit, identity_op(target.dim()));
    }
    p.add_equality({{bg, identity_op(dim)}}, 1.0, "unit-trace");

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "marginal_feasibility");

    MarginalOutcome out;
    if (sol.objective_value <= opt.feasibility_threshold) {
        out.verdict = Verdict::Feasible;
        out.global_state = detail::project_to_density(sol.primal[static_cast<size_t>(bg)]);
    } else {
        // dual value of the minimization: a certified lower bound on the total
        // deviation any joint state must incur
        out.dual_bound = sol.dual_objective;
    }
    return out;
}

// ---- Compatibility within a trace-norm budget ----
// Feasible iff some joint state keeps every specified pair within eps in trace
// norm; decided by minimizing the worst-pair deviation and comparing with eps.

inline MarginalOutcome marginal_feasibility_eps(const MarginalSpec& spec, double eps,
                                                const MarginalOptions& opt = {}) {
    detail::check_spec(spec, "marginal_feasibility_eps");
    detail::require_targets(spec, "marginal_feasibility_eps");
    if (eps < 0) throw std::invalid_argument("marginal_feasibility_eps: eps must be nonnegative");
    if (eps == 0.0) return marginal_feasibility(spec, opt);  // degenerate budget

    const int dim = spec.shape.total();
    SdpProblem p;
    const int bg = p.add_block("global", dim);
    const int bt = p.add_block("radius", 1);
    p.add_objective(bt, Matrix::Identity(1, 1));
    for (const auto& [pair, target] : spec.targets) {
        const int d = target.dim();
        const auto dev = detail::deviation_rows(p, bg, spec, pair, target);
        // tr(omega + zeta) <= t via a nonnegative scalar slack
        const int bu = p.add_block("slack-" + to_string(pair), 1);
        p.add_equality({{dev.excess, identity_op(d)},
                        {dev.deficit, identity_op(d)},
                        {bu, Matrix::Identity(1, 1)},
                        {bt, -Matrix::Identity(1, 1)}},
                       0.0, to_string(pair) + "-budget");
    }
    p.add_equality({{bg, identity_op(dim)}}, 1.0, "unit-trace");

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "marginal_feasibility_eps");

    MarginalOutcome out;
    if (sol.objective_value <= eps + 1e-9) {
        out.verdict = Verdict::Feasible;
        out.global_state = detail::project_to_density(sol.primal[static_cast<size_t>(bg)]);
    } else {
        out.dual_bound = sol.dual_objective;  // certified floor on the worst-pair deviation
    }
    return out;
}

// ---- Largest average overlap with two pure target marginals ----
// maximize (1/2)(<psi_XY|sigma_XY|psi_XY> + <psi_YZ|sigma_YZ|psi_YZ>) over all
// joint states sigma; always feasible, value in [1/2, 1].

inline std::pair<double, DensityOperator> max_avg_fidelity_pure_marginals(
    const DensityOperator& psi_xy, const DensityOperator& psi_yz, const SubsystemShape& shape,
    const MarginalOptions& opt = {}) {
    if (shape.subsystems() != 3)
        throw std::invalid_argument(
            "max_avg_fidelity_pure_marginals: shape must have exactly three subsystems");
    if (psi_xy.dim() != pair_dim(shape, SubsystemPair::XY) ||
        psi_yz.dim() != pair_dim(shape, SubsystemPair::YZ))
        throw std::invalid_argument("max_avg_fidelity_pure_marginals: target dimension mismatch");
    detail::require_pure(psi_xy, "max_avg_fidelity_pure_marginals");
    detail::require_pure(psi_yz, "max_avg_fidelity_pure_marginals");

    const int dim = shape.total();
    SdpProblem p;
    p.sense = Sense::Maximize;
    const int bg = p.add_block("global", dim);
    p.add_objective(bg, Matrix(0.5 * (lift_to_shape(psi_xy.matrix(), shape, {0, 1}) +
                                      lift_to_shape(psi_yz.matrix(), shape, {1, 2}))));
    p.add_equality({{bg, identity_op(dim)}}, 1.0, "unit-trace");

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "max_avg_fidelity_pure_marginals");
    return {detail::snap_unit(sol.objective_value),
            detail::project_to_density(sol.primal[static_cast<size_t>(bg)])};
}

// Spectral value of the dual program  min mu  s.t.  mu I >= (1/2)(P_XY (x) I + I (x) P_YZ),
// i.e. half the top eigenvalue of the lifted projector sum. No solver involved;
// upper-bounds (and at the optimum equals) the average-overlap maximum.

inline double marginal_dual_bound(const DensityOperator& psi_xy, const DensityOperator& psi_yz,
                                  const SubsystemShape& shape) {
    if (shape.subsystems() != 3)
        throw std::invalid_argument("marginal_dual_bound: shape must have exactly three subsystems");
    if (psi_xy.dim() != pair_dim(shape, SubsystemPair::XY) ||
        psi_yz.dim() != pair_dim(shape, SubsystemPair::YZ))
        throw std::invalid_argument("marginal_dual_bound: target dimension mismatch");
    detail::require_pure(psi_xy, "marginal_dual_bound");
    detail::require_pure(psi_yz, "marginal_dual_bound");

    const Matrix sum = lift_to_shape(psi_xy.matrix(), shape, {0, 1}) +
                       lift_to_shape(psi_yz.matrix(), shape, {1, 2});
    return 0.5 * eig_bounds(sum).second;
}

// ---- Closest compatible state in trace distance ----
// Global mode compares the joint state itself with the target; pair mode
// compares the named reduced state while the joint state still satisfies every
// specified marginal row.

inline ClosenessResult marginal_min_trace_distance(const MarginalSpec& spec,
                                                   const DensityOperator& target,
                                                   std::optional<SubsystemPair> on_pair = {},
                                                   const MarginalOptions& opt = {}) {
    detail::check_spec(spec, "marginal_min_trace_distance");
    const int d = on_pair ? pair_dim(spec.shape, *on_pair) : spec.shape.total();
    if (target.dim() != d)
        throw std::invalid_argument("marginal_min_trace_distance: target dimension mismatch");
    if (!spec.targets.empty())
        detail::require_feasible_spec(spec, opt, "marginal_min_trace_distance");

    SdpProblem p;
    const int bg = detail::marginal_rows(p, spec);
    int bmeas = bg;
    if (on_pair) {
        // Explicit reduced-state block tied to the joint state's pair marginal.
        bmeas = p.add_block("pair", d);
        const auto pos = pair_positions(*on_pair);
        int row = 0;
        for (const auto& e : hermitian_basis(d))
            p.add_equality({{bg, lift_to_shape(e, spec.shape, pos)}, {bmeas, -e}}, 0.0,
                           "tie-" + std::to_string(row++));
    }
    const int bx = p.add_block("envelope", d);
    p.add_objective(bx, Matrix(0.5 * Matrix::Identity(d, d)));
    // X - sigma + target >= 0  and  X + sigma - target >= 0
    const int upper = p.add_lmi(d, target.matrix(), "above-difference");
    p.add_lmi_placement(upper, bx, 0, 0, Complex(1, 0));
    p.add_lmi_placement(upper, bmeas, 0, 0, Complex(-1, 0));
    const int lower = p.add_lmi(d, Matrix(-target.matrix()), "below-difference");
    p.add_lmi_placement(lower, bx, 0, 0, Complex(1, 0));
    p.add_lmi_placement(lower, bmeas, 0, 0, Complex(1, 0));

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "marginal_min_trace_distance");
    return ClosenessResult{detail::snap_unit(sol.objective_value),
                           detail::project_to_density(sol.primal[static_cast<size_t>(bmeas)]),
                           QuantityKind::TraceDistance};
}

// ---- Best root fidelity with a target over the compatible set ----

inline ClosenessResult marginal_max_fidelity(const MarginalSpec& spec,
                                             const DensityOperator& target,
                                             std::optional<SubsystemPair> on_pair = {},
                                             const MarginalOptions& opt = {}) {
    detail::check_spec(spec, "marginal_max_fidelity");
    const int d = on_pair ? pair_dim(spec.shape, *on_pair) : spec.shape.total();
    if (target.dim() != d)
        throw std::invalid_argument("marginal_max_fidelity: target dimension mismatch");
    if (!spec.targets.empty())
        detail::require_feasible_spec(spec, opt, "marginal_max_fidelity");

    auto [p, bw] = detail::coupling_program(target.matrix(), d);
    if (on_pair) {
        // Joint state carries the marginal rows; its pair marginal fills the
        // coupling block's top-left cell.
        const int bg = detail::marginal_rows(p, spec);
        const auto pos = pair_positions(*on_pair);
        int row = 0;
        for (const auto& e : hermitian_basis(d)) {
            Matrix cell = Matrix::Zero(2 * d, 2 * d);
            cell.topLeftCorner(d, d) = e;
            p.add_equality({{bw, cell}, {bg, -lift_to_shape(e, spec.shape, pos)}}, 0.0,
                           "tie-" + std::to_string(row++));
        }
    } else {
        // The top-left cell is the joint state itself: marginal rows act on it.
        for (const auto& [pair, t] : spec.targets) {
            const auto pos = pair_positions(pair);
            int row = 0;
            for (const auto& e : hermitian_basis(t.dim())) {
                Matrix cell = Matrix::Zero(2 * d, 2 * d);
                cell.topLeftCorner(d, d) = lift_to_shape(e, spec.shape, pos);
                p.add_equality({{bw, cell}}, hs_inner(e, t.matrix()),
                               to_string(pair) + "-" + std::to_string(row++));
            }
        }
        Matrix tr = Matrix::Zero(2 * d, 2 * d);
        tr.topLeftCorner(d, d) = Matrix::Identity(d, d);
        p.add_equality({{bw, tr}}, 1.0, "unit-trace");
    }

    auto sol = solve(p, opt.solver);
    detail::expect_optimal(sol, "marginal_max_fidelity");
    return ClosenessResult{
        detail::snap_unit(sol.objective_value),
        detail::project_to_density(detail::top_left_cell(sol.primal[static_cast<size_t>(bw)], d)),
        QuantityKind::SqrtFidelityMixed};
}

// ---- Reachable average-energy range ----

inline std::pair<double, double> marginal_property_range(const MarginalSpec& spec,
                                                         const HermitianOperator& hamiltonian,
                                                         const MarginalOptions& opt = {}) {
    detail::check_spec(spec, "marginal_property_range");
    if (hamiltonian.dim() != spec.shape.total())
        throw std::invalid_argument("marginal_property_range: hamiltonian dimension mismatch");
    if (!spec.targets.empty())
        detail::require_feasible_spec(spec, opt, "marginal_property_range");

    auto solve_dir = [&](Sense sense) {
        SdpProblem p;
        p.sense = sense;
        const int bg = detail::marginal_rows(p, spec);
        p.add_objective(bg, hamiltonian.matrix());
        auto sol = solve(p, opt.solver);
        detail::expect_optimal(sol, "marginal_property_range");
        return sol.objective_value;
    };
    const double lo = solve_dir(Sense::Minimize);
    const double hi = solve_dir(Sense::Maximize);
    return {lo, hi};
}

}  // namespace qsdp
