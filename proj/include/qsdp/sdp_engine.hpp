#pragma once
//
// Dense conic solver for small semidefinite programs over Hermitian matrix
// blocks. Problems are stated as
//
//     min/max  sum_b tr(C_b X_b)
//     s.t.     sum_b tr(A_{i,b} X_b) = r_i            (equalities)
//              F0_j + sum_b L_{j,b}(X_b)  >= 0        (linear matrix inequalities)
//              X_b >= 0                               (every block PSD)
//
// Pipeline: LMIs are rewritten as slack blocks plus coupling equalities, complex
// Hermitian blocks are embedded as real symmetric blocks of twice the size, and
// the resulting real cone program is solved by a homogeneous-model primal-dual
// path-following method (Mehrotra predictor-corrector, Nesterov-Todd scaling,
// dense Cholesky on the Schur complement). The homogeneous model means an
// infeasible problem terminates with a certified improving ray instead of a
// timeout.
//
// Dual conventions: reported equality/LMI multipliers always refer to the
// minimization form (a Maximize objective is negated internally), so at an
// optimum   C_min - sum_i y_i A_i - sum_j L*_j(Lambda_j)  >= 0   blockwise.

#include <qsdp/operator_core.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace qsdp {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

// ---- Problem statement ----

enum class Sense { Minimize, Maximize };

enum class SolveStatus { Optimal, PrimalInfeasible, DualInfeasible, MaxIterations, NumericalFailure };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
        case SolveStatus::DualInfeasible: return "DualInfeasible";
        case SolveStatus::MaxIterations: return "MaxIterations";
        case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "?";
}

struct SolveOptions {
    double gap_tol = 1e-8;        // complementarity gap at the reported optimum
    double feas_tol = 1e-9;       // primal/dual residual norms (scaled problem)
    double infeas_tol = 1e-9;     // quality of an infeasibility ray before certifying
    int max_iter = 200;
    double step_fraction = 0.98;  // fraction of the distance to the cone boundary
    // Weakly feasible problems (no strictly positive feasible point) are
    // numerically ill-posed; when progress stops, the best iterate is still
    // accepted as Optimal if it meets these relaxed tolerances.
    double reduced_feas_tol = 1e-6;
    double reduced_gap_tol = 1e-6;
};

namespace detail {

inline Matrix hermitian_part_checked(const Matrix& m, const char* who) {
    if (m.rows() != m.cols() || m.rows() == 0)
        throw std::invalid_argument(std::string(who) + ": coefficient matrix must be square");
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianRejectTol)
        throw std::invalid_argument(std::string(who) + ": coefficient matrix is not Hermitian");
    return 0.5 * (m + m.adjoint());
}

}  // namespace detail

struct SdpProblem {
    struct Block {
        std::string name;
        int dim = 0;
    };

    struct EqualityTerm {
        int block = -1;
        Matrix coeff;  // Hermitian, block-sized
    };

    struct Equality {
        std::vector<EqualityTerm> terms;
        double rhs = 0.0;
        std::string label;
    };

    // One contribution to an LMI. Either a placement (block value scaled by
    // `coeff`, copied to the sub-block at (row0, col0); the conjugate mirror is
    // implied when off-diagonal) or, for 1x1 blocks, `scale` holds a full
    // Hermitian matrix multiplied by the scalar variable.
    struct LmiTerm {
        int block = -1;
        int row0 = 0, col0 = 0;
        Complex coeff{1.0, 0.0};
        Matrix scale;  // nonempty only for scalar-times-matrix terms
    };

    struct Lmi {
        std::string name;
        int dim = 0;
        Matrix constant;  // F0
        std::vector<LmiTerm> terms;
    };

    Sense sense = Sense::Minimize;
    std::vector<Block> blocks;
    std::vector<Matrix> objective;  // per block; zero matrix when absent
    std::vector<Equality> equalities;
    std::vector<Lmi> lmis;

    int add_block(std::string name, int dim) {
        if (dim < 1) throw std::invalid_argument("SdpProblem::add_block: dim must be positive");
        blocks.push_back({std::move(name), dim});
        objective.push_back(Matrix::Zero(dim, dim));
        return static_cast<int>(blocks.size()) - 1;
    }

    void check_block(int b, const char* who) const {
        if (b < 0 || b >= static_cast<int>(blocks.size()))
            throw std::invalid_argument(std::string(who) + ": block index out of range");
    }

    void add_objective(int block, const Matrix& coeff) {
        check_block(block, "SdpProblem::add_objective");
        if (coeff.rows() != blocks[static_cast<size_t>(block)].dim)
            throw std::invalid_argument("SdpProblem::add_objective: coefficient dimension mismatch");
        objective[static_cast<size_t>(block)] +=
            detail::hermitian_part_checked(coeff, "SdpProblem::add_objective");
    }

    int add_equality(std::vector<std::pair<int, Matrix>> terms, double rhs, std::string label = "") {
        Equality eq;
        eq.rhs = rhs;
        eq.label = std::move(label);
        for (auto& [b, m] : terms) {
            check_block(b, "SdpProblem::add_equality");
            if (m.rows() != blocks[static_cast<size_t>(b)].dim)
                throw std::invalid_argument("SdpProblem::add_equality: coefficient dimension mismatch");
            eq.terms.push_back({b, detail::hermitian_part_checked(m, "SdpProblem::add_equality")});
        }
        equalities.push_back(std::move(eq));
        return static_cast<int>(equalities.size()) - 1;
    }

    int add_lmi(int dim, const Matrix& constant, std::string name = "") {
        if (dim < 1) throw std::invalid_argument("SdpProblem::add_lmi: dim must be positive");
        if (constant.rows() != dim)
            throw std::invalid_argument("SdpProblem::add_lmi: constant dimension mismatch");
        Lmi lmi;
        lmi.name = std::move(name);
        lmi.dim = dim;
        lmi.constant = detail::hermitian_part_checked(constant, "SdpProblem::add_lmi");
        lmis.push_back(std::move(lmi));
        return static_cast<int>(lmis.size()) - 1;
    }

    void add_lmi_placement(int lmi, int block, int row0, int col0, Complex coeff) {
        if (lmi < 0 || lmi >= static_cast<int>(lmis.size()))
            throw std::invalid_argument("SdpProblem::add_lmi_placement: lmi index out of range");
        check_block(block, "SdpProblem::add_lmi_placement");
        auto& l = lmis[static_cast<size_t>(lmi)];
        const int d = blocks[static_cast<size_t>(block)].dim;
        if (row0 < 0 || col0 < 0 || row0 + d > l.dim || col0 + d > l.dim)
            throw std::invalid_argument("SdpProblem::add_lmi_placement: placement exceeds LMI bounds");
        if (row0 == col0 && std::abs(coeff.imag()) > 1e-14)
            throw std::invalid_argument(
                "SdpProblem::add_lmi_placement: diagonal placement needs a real coefficient");
        l.terms.push_back({block, row0, col0, coeff, Matrix()});
    }

    void add_lmi_scaled(int lmi, int block, const Matrix& coefficient) {
        if (lmi < 0 || lmi >= static_cast<int>(lmis.size()))
            throw std::invalid_argument("SdpProblem::add_lmi_scaled: lmi index out of range");
        check_block(block, "SdpProblem::add_lmi_scaled");
        if (blocks[static_cast<size_t>(block)].dim != 1)
            throw std::invalid_argument("SdpProblem::add_lmi_scaled: block must be 1x1");
        auto& l = lmis[static_cast<size_t>(lmi)];
        if (coefficient.rows() != l.dim)
            throw std::invalid_argument("SdpProblem::add_lmi_scaled: coefficient dimension mismatch");
        l.terms.push_back({block, 0, 0, Complex(1, 0),
                           detail::hermitian_part_checked(coefficient, "SdpProblem::add_lmi_scaled")});
    }
};

// ---- Solution ----

struct SdpSolution {
    SolveStatus status = SolveStatus::NumericalFailure;
    std::vector<Matrix> primal;          // per block; for DualInfeasible this is the improving ray
    std::vector<double> equality_duals;  // min-form multipliers; for PrimalInfeasible the Farkas ray
    std::vector<Matrix> lmi_duals;       // PSD multiplier per LMI (min-form)
    double objective_value = std::numeric_limits<double>::quiet_NaN();  // in the stated sense
    double dual_objective = std::numeric_limits<double>::quiet_NaN();   // min-form dual value
    double gap = std::numeric_limits<double>::quiet_NaN();              // complementarity gap, >= 0
    double primal_residual = std::numeric_limits<double>::quiet_NaN();
    double dual_residual = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    std::string message;
};

// ---- Hermitian basis ----
// Orthonormal basis of d x d Hermitian matrices under tr(E_a E_b) = delta_ab:
// diagonal units first, then (sym, antisym) pairs column by column.

inline std::vector<Matrix> hermitian_basis(int d) {
    std::vector<Matrix> basis;
    basis.reserve(static_cast<size_t>(d) * d);
    for (int k = 0; k < d; ++k) {
        Matrix e = Matrix::Zero(d, d);
        e(k, k) = 1.0;
        basis.push_back(e);
    }
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (int col = 1; col < d; ++col)
        for (int row = 0; row < col; ++row) {
            Matrix s = Matrix::Zero(d, d);
            s(row, col) = inv_sqrt2;
            s(col, row) = inv_sqrt2;
            basis.push_back(s);
            Matrix a = Matrix::Zero(d, d);
            a(row, col) = Complex(0, inv_sqrt2);
            a(col, row) = Complex(0, -inv_sqrt2);
            basis.push_back(a);
        }
    return basis;
}

// ---- LMI expansion ----
// Rewrite every LMI as a PSD slack block plus coupling equalities expanded over
// hermitian_basis(lmi.dim). Degenerate rows (all-zero coefficients) are left in
// place; the solver's presolve removes them.

namespace detail {

// Coefficient matrix on `block` contributed by one LMI term when paired with
// basis element E:  tr(E * contribution(X_b)) = tr(A * X_b).
inline Matrix lmi_term_row_coeff(const SdpProblem::LmiTerm& t, int block_dim, const Matrix& e) {
    if (t.scale.size() != 0)  // scalar block times fixed Hermitian matrix
        return Matrix::Constant(1, 1, Complex((e.adjoint() * t.scale).trace().real(), 0.0));
    const int d = block_dim;
    if (t.row0 == t.col0) return t.coeff.real() * e.block(t.row0, t.row0, d, d);
    return t.coeff * e.block(t.col0, t.row0, d, d) +
           std::conj(t.coeff) * e.block(t.row0, t.col0, d, d);
}

}  // namespace detail

struct ExpandedForm {
    SdpProblem flat;  // equality-only problem (no LMIs)
    int user_equalities = 0;
    struct LmiInfo {
        int slack_block = -1;
        int first_row = -1;  // row range [first_row, first_row + dim^2)
        int dim = 0;
    };
    std::vector<LmiInfo> lmis;
};

inline ExpandedForm expand_lmis(const SdpProblem& p) {
    ExpandedForm out;
    out.flat.sense = p.sense;
    out.flat.blocks = p.blocks;
    out.flat.objective = p.objective;
    out.flat.equalities = p.equalities;
    out.user_equalities = static_cast<int>(p.equalities.size());

    for (size_t j = 0; j < p.lmis.size(); ++j) {
        const auto& lmi = p.lmis[j];
        ExpandedForm::LmiInfo info;
        info.dim = lmi.dim;
        info.slack_block = out.flat.add_block(
            lmi.name.empty() ? "lmi" + std::to_string(j) + ".slack" : lmi.name + ".slack", lmi.dim);
        info.first_row = static_cast<int>(out.flat.equalities.size());
        const auto basis = hermitian_basis(lmi.dim);
        for (const auto& e : basis) {
            SdpProblem::Equality eq;
            eq.rhs = -(e.adjoint() * lmi.constant).trace().real();
            eq.label = lmi.name;
            // accumulate per-block coefficients (a block can appear in several terms)
            std::vector<Matrix> acc(out.flat.blocks.size());
            for (const auto& t : lmi.terms) {
                const int bd = p.blocks[static_cast<size_t>(t.block)].dim;
                Matrix a = detail::lmi_term_row_coeff(t, bd, e);
                if (acc[static_cast<size_t>(t.block)].size() == 0)
                    acc[static_cast<size_t>(t.block)] = a;
                else
                    acc[static_cast<size_t>(t.block)] += a;
            }
            acc[static_cast<size_t>(info.slack_block)] = -e;
            for (size_t b = 0; b < acc.size(); ++b)
                if (acc[b].size() != 0 && acc[b].cwiseAbs().maxCoeff() > 1e-15)
                    eq.terms.push_back({static_cast<int>(b), 0.5 * (acc[b] + acc[b].adjoint())});
            out.flat.equalities.push_back(std::move(eq));
        }
        out.lmis.push_back(info);
    }
    return out;
}

// Evaluate the matrix value of LMI j at a given primal point.
inline Matrix lmi_value(const SdpProblem& p, int j, const std::vector<Matrix>& primal) {
    const auto& lmi = p.lmis.at(static_cast<size_t>(j));
    Matrix v = lmi.constant;
    for (const auto& t : lmi.terms) {
        const Matrix& x = primal.at(static_cast<size_t>(t.block));
        if (t.scale.size() != 0) {
            v += x(0, 0).real() * t.scale;
            continue;
        }
        const int d = static_cast<int>(x.rows());
        if (t.row0 == t.col0) {
            v.block(t.row0, t.row0, d, d) += t.coeff.real() * x;
        } else {
            v.block(t.row0, t.col0, d, d) += t.coeff * x;
            v.block(t.col0, t.row0, d, d) += std::conj(t.coeff) * x.adjoint();
        }
    }
    return v;
}

// ---- Real embedding ----
// H -> [[Re H, -Im H], [Im H, Re H]] doubles the dimension and duplicates every
// eigenvalue. Coefficient matrices carry a factor 1/2 so inner products and the
// optimal value are unchanged. LMIs are expanded to slack form first.

namespace detail {

inline Matrix embed_herm(const Matrix& h) {
    const int d = static_cast<int>(h.rows());
    Matrix out = Matrix::Zero(2 * d, 2 * d);
    out.topLeftCorner(d, d) = h.real().cast<Complex>();
    out.bottomRightCorner(d, d) = h.real().cast<Complex>();
    out.topRightCorner(d, d) = (-h.imag()).cast<Complex>();
    out.bottomLeftCorner(d, d) = h.imag().cast<Complex>();
    return out;
}

// Average a real symmetric 2d x 2d matrix back to the d x d Hermitian matrix it
// represents (exact inverse of embed_herm on its image).
inline Matrix unembed_herm(const Matrix& s) {
    const int d = static_cast<int>(s.rows()) / 2;
    Matrix p = s.topLeftCorner(d, d), q = s.topRightCorner(d, d), r = s.bottomRightCorner(d, d);
    Matrix out = 0.5 * (p + r) + Complex(0, 0.5) * (q.transpose() - q);
    return 0.5 * (out + out.adjoint());
}

}  // namespace detail

inline SdpProblem real_embed(const SdpProblem& p) {
    SdpProblem flat = expand_lmis(p).flat;
    SdpProblem out;
    out.sense = flat.sense;
    for (const auto& b : flat.blocks) out.add_block(b.name, b.dim > 1 ? 2 * b.dim : 1);
    for (size_t b = 0; b < flat.blocks.size(); ++b) {
        if (flat.objective[b].cwiseAbs().maxCoeff() == 0.0) continue;
        out.add_objective(static_cast<int>(b), flat.blocks[b].dim > 1
                                                   ? Matrix(0.5 * detail::embed_herm(flat.objective[b]))
                                                   : flat.objective[b]);
    }
    for (const auto& eq : flat.equalities) {
        std::vector<std::pair<int, Matrix>> terms;
        for (const auto& t : eq.terms)
            terms.emplace_back(t.block, flat.blocks[static_cast<size_t>(t.block)].dim > 1
                                            ? Matrix(0.5 * detail::embed_herm(t.coeff))
                                            : t.coeff);
        out.add_equality(std::move(terms), eq.rhs, eq.label);
    }
    return out;
}

// ---- Feasibility check (pure arithmetic, no solving) ----

struct FeasibilityReport {
    double max_equality_violation = 0.0;
    int worst_equality = -1;
    double min_block_eigenvalue = 0.0;
    double min_lmi_eigenvalue = 0.0;
    bool feasible = false;
};

inline FeasibilityReport check_feasible(const SdpProblem& p, const std::vector<Matrix>& primal,
                                        double tol) {
    if (primal.size() != p.blocks.size())
        throw std::invalid_argument("check_feasible: one candidate matrix per block required");
    for (size_t b = 0; b < primal.size(); ++b)
        if (primal[b].rows() != p.blocks[b].dim || primal[b].cols() != p.blocks[b].dim)
            throw std::invalid_argument("check_feasible: candidate dimension mismatch on block " +
                                        p.blocks[b].name);
    FeasibilityReport rep;
    for (size_t i = 0; i < p.equalities.size(); ++i) {
        double v = -p.equalities[i].rhs;
        for (const auto& t : p.equalities[i].terms)
            v += (t.coeff * primal[static_cast<size_t>(t.block)]).trace().real();
        if (std::abs(v) > rep.max_equality_violation) {
            rep.max_equality_violation = std::abs(v);
            rep.worst_equality = static_cast<int>(i);
        }
    }
    double min_eig = std::numeric_limits<double>::infinity();
    for (const auto& x : primal) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (x + x.adjoint()), Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
    }
    rep.min_block_eigenvalue = min_eig;
    double min_lmi = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < p.lmis.size(); ++j) {
        Matrix v = lmi_value(p, static_cast<int>(j), primal);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (v + v.adjoint()), Eigen::EigenvaluesOnly);
        min_lmi = std::min(min_lmi, es.eigenvalues().minCoeff());
    }
    rep.min_lmi_eigenvalue = p.lmis.empty() ? 0.0 : min_lmi;
    rep.feasible = rep.max_equality_violation <= tol && rep.min_block_eigenvalue >= -tol &&
                   (p.lmis.empty() || rep.min_lmi_eigenvalue >= -tol);
    return rep;
}

// ---- Internal real cone program ----

namespace detail {

inline int svec_dim(int n) { return n * (n + 1) / 2; }

inline RealVector svec(const RealMatrix& m) {
    const int n = static_cast<int>(m.rows());
    RealVector v(svec_dim(n));
    const double s2 = std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < n; ++j) {
        v(k++) = m(j, j);
        for (int i = j + 1; i < n; ++i) v(k++) = s2 * m(i, j);
    }
    return v;
}

inline RealMatrix smat(const RealVector& v, int n) {
    RealMatrix m(n, n);
    const double inv_s2 = 1.0 / std::sqrt(2.0);
    int k = 0;
    for (int j = 0; j < n; ++j) {
        m(j, j) = v(k++);
        for (int i = j + 1; i < n; ++i) {
            m(i, j) = inv_s2 * v(k);
            m(j, i) = inv_s2 * v(k);
            ++k;
        }
    }
    return m;
}

struct RealConeProgram {
    std::vector<int> dims;  // PSD block sizes
    std::vector<int> offs;  // svec offsets
    int n = 0;
    RealMatrix A;  // m x n
    RealVector b;
    RealVector c;
};

struct CompiledProblem {
    RealConeProgram prog;           // after presolve
    std::vector<int> kept_rows;     // indices into the full row set
    int full_rows = 0;
    ExpandedForm expanded;
    std::vector<bool> embedded;     // per flat block
    double cscale = 1.0, bscale = 1.0, obj_sign = 1.0;
    // set when presolve already proves the equalities inconsistent:
    std::optional<std::vector<double>> presolve_farkas_ray;
};

// Real coefficient of a (possibly embedded) block: embed_herm carries factor 1/2
// so tr(A_emb X_emb) == tr(A X).
inline RealMatrix real_coeff(const Matrix& herm, bool embed) {
    if (embed) return (0.5 * embed_herm(herm)).real();
    return herm.real();
}

inline CompiledProblem compile(const SdpProblem& p) {
    if (p.blocks.empty()) throw std::invalid_argument("solve: problem has no blocks");
    CompiledProblem cp;
    cp.expanded = expand_lmis(p);
    const SdpProblem& flat = cp.expanded.flat;
    const size_t nb = flat.blocks.size();

    // A block is embedded when any matrix touching it has an imaginary part.
    cp.embedded.assign(nb, false);
    auto mark = [&](int b, const Matrix& m) {
        if (flat.blocks[static_cast<size_t>(b)].dim > 1 && m.imag().cwiseAbs().maxCoeff() > 1e-14)
            cp.embedded[static_cast<size_t>(b)] = true;
    };
    for (size_t b = 0; b < nb; ++b) mark(static_cast<int>(b), flat.objective[b]);
    for (const auto& eq : flat.equalities)
        for (const auto& t : eq.terms) mark(t.block, t.coeff);

    auto& prog = cp.prog;
    prog.dims.resize(nb);
    prog.offs.resize(nb);
    int n = 0;
    for (size_t b = 0; b < nb; ++b) {
        const int d = flat.blocks[b].dim;
        prog.dims[b] = cp.embedded[b] ? 2 * d : d;
        prog.offs[b] = n;
        n += svec_dim(prog.dims[b]);
    }
    prog.n = n;

    cp.obj_sign = flat.sense == Sense::Maximize ? -1.0 : 1.0;
    double cmax = 0.0;
    for (const auto& c : flat.objective) cmax = std::max(cmax, c.cwiseAbs().maxCoeff());
    cp.cscale = std::max(1.0, cmax);
    double bmax = 0.0;
    for (const auto& eq : flat.equalities) bmax = std::max(bmax, std::abs(eq.rhs));
    cp.bscale = std::max(1.0, bmax);

    prog.c = RealVector::Zero(n);
    for (size_t b = 0; b < nb; ++b)
        if (flat.objective[b].cwiseAbs().maxCoeff() > 0.0)
            prog.c.segment(prog.offs[b], svec_dim(prog.dims[b])) =
                svec(real_coeff(flat.objective[b], cp.embedded[b])) * (cp.obj_sign / cp.cscale);

    const int m_full = static_cast<int>(flat.equalities.size());
    cp.full_rows = m_full;
    RealMatrix A_full = RealMatrix::Zero(m_full, n);
    RealVector b_full(m_full);
    for (int i = 0; i < m_full; ++i) {
        const auto& eq = flat.equalities[static_cast<size_t>(i)];
        b_full(i) = eq.rhs / cp.bscale;
        for (const auto& t : eq.terms)
            A_full.row(i).segment(prog.offs[static_cast<size_t>(t.block)],
                                  svec_dim(prog.dims[static_cast<size_t>(t.block)])) +=
                svec(real_coeff(t.coeff, cp.embedded[static_cast<size_t>(t.block)])).transpose();
    }

    // Presolve: drop linearly dependent rows (QR with column pivoting on A^T);
    // inconsistent dependent rows yield an immediate Farkas ray.
    if (m_full > 0) {
        Eigen::ColPivHouseholderQR<RealMatrix> qr(A_full.transpose());
        qr.setThreshold(1e-11);
        const int rank = static_cast<int>(qr.rank());
        const auto& perm = qr.colsPermutation().indices();
        std::vector<int> kept(perm.data(), perm.data() + rank);
        std::sort(kept.begin(), kept.end());
        std::vector<bool> is_kept(static_cast<size_t>(m_full), false);
        for (int i : kept) is_kept[static_cast<size_t>(i)] = true;

        if (rank < m_full) {
            RealMatrix At_kept(n, rank);
            RealVector b_kept(rank);
            for (int i = 0; i < rank; ++i) {
                At_kept.col(i) = A_full.row(kept[static_cast<size_t>(i)]).transpose();
                b_kept(i) = b_full(kept[static_cast<size_t>(i)]);
            }
            Eigen::HouseholderQR<RealMatrix> kept_qr(At_kept);
            for (int i = 0; i < m_full; ++i) {
                if (is_kept[static_cast<size_t>(i)]) continue;
                RealVector w = kept_qr.solve(A_full.row(i).transpose());
                const double rhs_gap = b_full(i) - b_kept.dot(w);
                if (std::abs(rhs_gap) > 1e-9) {
                    // dependent but inconsistent: y with A^T y = 0, b.y != 0
                    std::vector<double> ray(static_cast<size_t>(m_full), 0.0);
                    const double sgn = rhs_gap > 0 ? 1.0 : -1.0;
                    ray[static_cast<size_t>(i)] = sgn / std::abs(rhs_gap);
                    for (int k = 0; k < rank; ++k)
                        ray[static_cast<size_t>(kept[static_cast<size_t>(k)])] =
                            -sgn * w(k) / std::abs(rhs_gap);
                    // scale back to original rhs units (b was divided by bscale)
                    for (auto& v : ray) v /= cp.bscale;
                    cp.presolve_farkas_ray = std::move(ray);
                    break;
                }
            }
        }

        cp.kept_rows = kept;
        prog.A = RealMatrix(rank, n);
        prog.b = RealVector(rank);
        for (int i = 0; i < rank; ++i) {
            prog.A.row(i) = A_full.row(kept[static_cast<size_t>(i)]);
            prog.b(i) = b_full(kept[static_cast<size_t>(i)]);
        }
    } else {
        prog.A = RealMatrix(0, n);
        prog.b = RealVector(0);
    }
    return cp;
}

// ---- Homogeneous-model interior point ----

struct NTScaling {
    std::vector<RealMatrix> R, Rinv;      // W = R R^T per block
    std::vector<RealVector> lambda;       // scaled spectrum (diagonal) per block
    std::vector<Eigen::LLT<RealMatrix>> lltX, lltS;
};

struct IpmState {
    RealVector x, s;
    RealVector y;
    double tau = 1.0, kappa = 1.0;
};

struct Direction {
    RealVector dx, dy, ds;
    double dtau = 0.0, dkappa = 0.0;
};

class HsdSolver {
public:
    HsdSolver(const RealConeProgram& prog, const SolveOptions& opt) : p_(prog), opt_(opt) {}

    struct Result {
        SolveStatus status = SolveStatus::MaxIterations;
        IpmState state;
        int iterations = 0;
        double gap = 0, pres = 0, dres = 0;
        std::string message;
    };

    Result run() {
        Result res = iterate();
        // Ill-posed (typically weakly feasible) problems stop making progress
        // before the strict tolerances are met; accept the best iterate when it
        // is close enough to call the solution reliable.
        if ((res.status == SolveStatus::NumericalFailure ||
             res.status == SolveStatus::MaxIterations) &&
            best_.score < std::numeric_limits<double>::infinity()) {
            res.state = best_.state;
            res.gap = best_.gap;
            res.pres = best_.pres;
            res.dres = best_.dres;
            if (best_.pres <= opt_.reduced_feas_tol && best_.dres <= opt_.reduced_feas_tol &&
                best_.gap <= opt_.reduced_gap_tol) {
                res.status = SolveStatus::Optimal;
                res.message = "optimum at reduced accuracy (weakly feasible problem)";
            }
        }
        return res;
    }

private:
    Result iterate() {
        const int m = static_cast<int>(p_.A.rows());
        const int n = p_.n;
        IpmState z;
        z.x = identity_point();
        z.s = z.x;
        z.y = RealVector::Zero(m);
        z.tau = 1.0;
        z.kappa = 1.0;
        const double nu = static_cast<double>(total_dim()) + 1.0;

        Result res;
        const double bnorm = m > 0 ? std::max(1.0, p_.b.cwiseAbs().maxCoeff()) : 1.0;
        const double cnorm = std::max(1.0, p_.c.cwiseAbs().maxCoeff());

        for (int iter = 0; iter <= opt_.max_iter; ++iter) {
            res.iterations = iter;
            const RealVector rp = p_.A * z.x - p_.b * z.tau;
            const RealVector rd = p_.A.transpose() * z.y + z.s - p_.c * z.tau;
            const double rg = p_.b.dot(z.y) - p_.c.dot(z.x) - z.kappa;
            const double mu = (z.x.dot(z.s) + z.tau * z.kappa) / nu;

            const double pres = (m > 0 ? rp.cwiseAbs().maxCoeff() : 0.0) / (z.tau * bnorm);
            const double dres = rd.cwiseAbs().maxCoeff() / (z.tau * cnorm);
            const double cgap = z.x.dot(z.s) / (z.tau * z.tau);
            res.state = z;
            res.gap = cgap;
            res.pres = pres;
            res.dres = dres;
            // Rank fallback iterates against the reduced tolerances so the
            // retained snapshot is the one most likely to clear them.
            const double score = std::max({pres / opt_.reduced_feas_tol,
                                           dres / opt_.reduced_feas_tol,
                                           cgap / opt_.reduced_gap_tol});
            if (score < best_.score) best_ = Snapshot{z, pres, dres, cgap, score};

            if (pres <= opt_.feas_tol && dres <= opt_.feas_tol && cgap <= opt_.gap_tol) {
                res.status = SolveStatus::Optimal;
                return res;
            }
            // Infeasibility rays: normalized quality tests.
            const double bty = p_.b.dot(z.y);
            if (bty > 0) {
                const RealVector viol = p_.A.transpose() * z.y + z.s;
                if (viol.cwiseAbs().maxCoeff() <= opt_.infeas_tol * bty * cnorm) {
                    res.status = SolveStatus::PrimalInfeasible;
                    return res;
                }
            }
            const double ctx = p_.c.dot(z.x);
            if (ctx < 0) {
                const double viol = m > 0 ? (p_.A * z.x).cwiseAbs().maxCoeff() : 0.0;
                if (viol <= opt_.infeas_tol * (-ctx) * bnorm) {
                    res.status = SolveStatus::DualInfeasible;
                    return res;
                }
            }
            if (iter == opt_.max_iter) break;

            NTScaling w;
            if (!compute_scaling(z, w)) {
                res.status = SolveStatus::NumericalFailure;
                res.message = "iterate left the cone (factorization failed)";
                return res;
            }

            // Schur complement from NT-scaled constraint rows.
            RealMatrix GA(m, n);
            for (int i = 0; i < m; ++i) GA.row(i) = scale_congruence(w, p_.A.row(i).transpose());
            const RealVector ctil = scale_congruence(w, p_.c);
            const RealVector rdtil = scale_congruence(w, rd);
            RealMatrix M = GA * GA.transpose();
            Eigen::LLT<RealMatrix> llt;
            double ridge = 0.0;
            for (int attempt = 0;; ++attempt) {
                RealMatrix Mr = M;
                if (ridge > 0) Mr.diagonal().array() += ridge;
                llt.compute(Mr);
                if (llt.info() == Eigen::Success || m == 0) break;
                ridge = ridge == 0.0 ? 1e-13 * std::max(1.0, M.diagonal().maxCoeff()) : ridge * 100;
                if (attempt >= 4) {
                    res.status = SolveStatus::NumericalFailure;
                    res.message = "Schur complement factorization failed";
                    return res;
                }
            }

            // Schur solves with one refinement pass (corrects both rounding in
            // the ill-conditioned factorization and any stabilizing ridge).
            auto schur_solve = [&](const RealVector& rhs) {
                RealVector v = llt.solve(rhs);
                v += llt.solve(RealVector(rhs - M * v));
                return v;
            };
            const RealVector u = m > 0 ? RealVector(p_.b + GA * ctil) : RealVector(0);
            const RealVector y2 = m > 0 ? schur_solve(u) : RealVector(0);

            auto solve_direction = [&](double eta, const RealVector& rvec, double r5) {
                Direction d;
                RealVector p_rhs = m > 0 ? RealVector(-eta * rp - p_.A * rvec - eta * (GA * rdtil))
                                         : RealVector(0);
                const RealVector y1 = m > 0 ? schur_solve(p_rhs) : RealVector(0);
                const double den = (m > 0 ? (p_.b - GA * ctil).dot(y2) : 0.0) + ctil.dot(ctil) +
                                   z.kappa / z.tau;
                double num = -eta * rg + p_.c.dot(rvec) + eta * ctil.dot(rdtil) +
                             (m > 0 ? (GA * ctil - p_.b).dot(y1) : 0.0) + r5 / z.tau;
                d.dtau = num / den;
                d.dy = m > 0 ? RealVector(y1 + d.dtau * y2) : RealVector(0);
                RealVector wvec = eta * rd - p_.c * d.dtau;
                if (m > 0) wvec += p_.A.transpose() * d.dy;
                d.dx = rvec + scale_congruence_full(w, wvec);
                d.ds = -eta * rd + p_.c * d.dtau;
                if (m > 0) d.ds -= p_.A.transpose() * d.dy;
                d.dkappa = (r5 - z.kappa * d.dtau) / z.tau;
                return d;
            };

            // Predictor (affine scaling).
            Direction aff = solve_direction(1.0, -z.x, -z.tau * z.kappa);
            const double alpha_aff = std::min(1.0, max_step(z, w, aff));
            const double mu_aff =
                ((z.x + alpha_aff * aff.dx).dot(z.s + alpha_aff * aff.ds) +
                 (z.tau + alpha_aff * aff.dtau) * (z.kappa + alpha_aff * aff.dkappa)) /
                nu;
            double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
            sigma = std::min(0.99999, std::max(1e-8, sigma));

            // Corrector right-hand side in the scaled frame (lambda is diagonal).
            RealVector rvec(n);
            for (size_t bidx = 0; bidx < p_.dims.size(); ++bidx) {
                const int bd = p_.dims[bidx];
                const int off = p_.offs[bidx];
                const int sd = svec_dim(bd);
                const RealMatrix dxa =
                    w.Rinv[bidx] * smat(aff.dx.segment(off, sd), bd) * w.Rinv[bidx].transpose();
                const RealMatrix dsa =
                    w.R[bidx].transpose() * smat(aff.ds.segment(off, sd), bd) * w.R[bidx];
                const RealMatrix m2 = 0.5 * (dxa * dsa + dsa * dxa);
                RealMatrix g(bd, bd);
                const auto& lam = w.lambda[bidx];
                for (int i = 0; i < bd; ++i)
                    for (int jj = 0; jj < bd; ++jj) {
                        double v = -m2(i, jj);
                        if (i == jj) v += sigma * mu - lam(i) * lam(i);
                        g(i, jj) = 2.0 * v / (lam(i) + lam(jj));
                    }
                const RealMatrix rmat = w.R[bidx] * 0.5 * (g + g.transpose()) * w.R[bidx].transpose();
                rvec.segment(off, sd) = svec(rmat);
            }
            const double r5 = sigma * mu - z.tau * z.kappa - aff.dtau * aff.dkappa;

            Direction dir = solve_direction(1.0 - sigma, rvec, r5);
            double alpha = std::min(1.0, opt_.step_fraction * max_step(z, w, dir));
            if (std::getenv("QSDP_TRACE"))
                std::fprintf(stderr,
                             "it=%3d mu=%9.3e sig=%5.3f a=%6.4f tau=%9.3e kap=%9.3e "
                             "pres=%9.3e dres=%9.3e gap=%9.3e\n",
                             iter, mu, sigma, alpha, z.tau, z.kappa, pres, dres, cgap);
            if (!std::isfinite(alpha)) alpha = 0.0;

            // Backtrack if rounding pushed the predicted step outside the cone.
            bool stepped = false;
            for (int bt = 0; bt < 25 && alpha > 1e-12; ++bt, alpha *= 0.8) {
                IpmState cand;
                cand.x = z.x + alpha * dir.dx;
                cand.s = z.s + alpha * dir.ds;
                cand.y = m > 0 ? RealVector(z.y + alpha * dir.dy) : z.y;
                cand.tau = z.tau + alpha * dir.dtau;
                cand.kappa = z.kappa + alpha * dir.dkappa;
                if (cand.tau > 0 && cand.kappa > 0 && cand.x.allFinite() && cand.s.allFinite() &&
                    in_cone(cand.x) && in_cone(cand.s)) {
                    z = std::move(cand);
                    stepped = true;
                    break;
                }
            }
            if (!stepped || alpha < 1e-9) {
                if (++stall_ >= 2) {
                    res.status = SolveStatus::NumericalFailure;
                    res.message = "step length collapsed";
                    return res;
                }
            } else {
                stall_ = 0;
            }
        }
        res.status = SolveStatus::MaxIterations;
        res.message = "iteration limit reached";
        return res;
    }
    struct Snapshot {
        IpmState state;
        double pres = 0, dres = 0, gap = 0;
        double score = std::numeric_limits<double>::infinity();
    };

    int total_dim() const {
        int t = 0;
        for (int d : p_.dims) t += d;
        return t;
    }

    bool in_cone(const RealVector& v) const {
        for (size_t b = 0; b < p_.dims.size(); ++b) {
            const int d = p_.dims[b];
            Eigen::LLT<RealMatrix> llt(smat(v.segment(p_.offs[b], svec_dim(d)), d));
            if (llt.info() != Eigen::Success) return false;
        }
        return true;
    }

    RealVector identity_point() const {
        RealVector v = RealVector::Zero(p_.n);
        for (size_t b = 0; b < p_.dims.size(); ++b)
            v.segment(p_.offs[b], svec_dim(p_.dims[b])) =
                svec(RealMatrix::Identity(p_.dims[b], p_.dims[b]));
        return v;
    }

    bool compute_scaling(const IpmState& z, NTScaling& w) const {
        const size_t nb = p_.dims.size();
        w.R.resize(nb);
        w.Rinv.resize(nb);
        w.lambda.resize(nb);
        w.lltX.resize(nb);
        w.lltS.resize(nb);
        for (size_t b = 0; b < nb; ++b) {
            const int d = p_.dims[b];
            const int sd = svec_dim(d);
            RealMatrix X = smat(z.x.segment(p_.offs[b], sd), d);
            RealMatrix S = smat(z.s.segment(p_.offs[b], sd), d);
            w.lltX[b].compute(X);
            w.lltS[b].compute(S);
            if (w.lltX[b].info() != Eigen::Success || w.lltS[b].info() != Eigen::Success) return false;
            const RealMatrix Lx = w.lltX[b].matrixL();
            const RealMatrix Ls = w.lltS[b].matrixL();
            Eigen::JacobiSVD<RealMatrix> svd(Ls.transpose() * Lx,
                                             Eigen::ComputeFullU | Eigen::ComputeFullV);
            const RealVector sig = svd.singularValues();
            if (sig.minCoeff() <= 0) return false;
            const RealVector isqrt = sig.cwiseSqrt().cwiseInverse();
            w.R[b] = Lx * svd.matrixV() * isqrt.asDiagonal();
            w.Rinv[b] = isqrt.asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
            w.lambda[b] = sig;
        }
        return true;
    }

    // Blockwise congruence R^T mat(v) R in svec coordinates (Gram-row scaling).
    RealVector scale_congruence(const NTScaling& w, const RealVector& v) const {
        RealVector out(p_.n);
        for (size_t b = 0; b < p_.dims.size(); ++b) {
            const int d = p_.dims[b];
            const int sd = svec_dim(d);
            const RealMatrix m = smat(v.segment(p_.offs[b], sd), d);
            out.segment(p_.offs[b], sd) = svec(w.R[b].transpose() * m * w.R[b]);
        }
        return out;
    }

    // Blockwise  W mat(v) W  =  R (R^T mat(v) R) R^T.
    RealVector scale_congruence_full(const NTScaling& w, const RealVector& v) const {
        RealVector out(p_.n);
        for (size_t b = 0; b < p_.dims.size(); ++b) {
            const int d = p_.dims[b];
            const int sd = svec_dim(d);
            const RealMatrix m = smat(v.segment(p_.offs[b], sd), d);
            out.segment(p_.offs[b], sd) = svec(w.R[b] * (w.R[b].transpose() * m * w.R[b]) * w.R[b].transpose());
        }
        return out;
    }

    // Largest step keeping every block (and tau, kappa) inside the cone.
    double max_step(const IpmState& z, const NTScaling& w, const Direction& d) const {
        double alpha = std::numeric_limits<double>::infinity();
        for (size_t b = 0; b < p_.dims.size(); ++b) {
            const int bd = p_.dims[b];
            const int sd = svec_dim(bd);
            alpha = std::min(alpha, boundary_step(w.lltX[b], smat(d.dx.segment(p_.offs[b], sd), bd)));
            alpha = std::min(alpha, boundary_step(w.lltS[b], smat(d.ds.segment(p_.offs[b], sd), bd)));
        }
        if (d.dtau < 0) alpha = std::min(alpha, -z.tau / d.dtau);
        if (d.dkappa < 0) alpha = std::min(alpha, -z.kappa / d.dkappa);
        return alpha;
    }

    static double boundary_step(const Eigen::LLT<RealMatrix>& llt, const RealMatrix& delta) {
        const RealMatrix L = llt.matrixL();
        RealMatrix t = L.triangularView<Eigen::Lower>().solve(delta);
        t = L.triangularView<Eigen::Lower>().solve(t.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(0.5 * (t + t.transpose()),
                                                     Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        if (lo >= 0) return std::numeric_limits<double>::infinity();
        return -1.0 / lo;
    }

    const RealConeProgram& p_;
    SolveOptions opt_;
    int stall_ = 0;
    Snapshot best_;
};

}  // namespace detail

// ---- solve ----

inline SdpSolution solve(const SdpProblem& p, const SolveOptions& opt = {}) {
    detail::CompiledProblem cp = detail::compile(p);
    const SdpProblem& flat = cp.expanded.flat;
    const size_t user_blocks = p.blocks.size();
    const size_t lmi_count = p.lmis.size();

    SdpSolution sol;
    sol.equality_duals.assign(p.equalities.size(), 0.0);
    sol.lmi_duals.assign(lmi_count, Matrix());

    // Helper: scatter reduced-row values (duals or rays) back to full rows.
    auto expand_rows = [&](const RealVector& vals) {
        std::vector<double> full(static_cast<size_t>(cp.full_rows), 0.0);
        for (int i = 0; i < vals.size(); ++i)
            full[static_cast<size_t>(cp.kept_rows[static_cast<size_t>(i)])] = vals(i);
        return full;
    };
    // Assemble the LMI multiplier from its coupling-row multipliers.
    auto lmi_multiplier = [&](const std::vector<double>& full_rows, size_t j, double scale) {
        const auto& info = cp.expanded.lmis[j];
        const auto basis = hermitian_basis(info.dim);
        Matrix lam = Matrix::Zero(info.dim, info.dim);
        for (size_t k = 0; k < basis.size(); ++k)
            lam += scale * full_rows[static_cast<size_t>(info.first_row) + k] * basis[k];
        return lam;
    };

    if (cp.presolve_farkas_ray) {
        sol.status = SolveStatus::PrimalInfeasible;
        const auto& ray = *cp.presolve_farkas_ray;
        for (size_t i = 0; i < p.equalities.size(); ++i) sol.equality_duals[i] = ray[i];
        for (size_t j = 0; j < lmi_count; ++j) sol.lmi_duals[j] = lmi_multiplier(ray, j, 1.0);
        sol.message = "equality rows are linearly inconsistent";
        return sol;
    }

    detail::HsdSolver solver(cp.prog, opt);
    auto res = solver.run();
    sol.iterations = res.iterations;
    sol.status = res.status;
    sol.message = res.message;
    sol.primal_residual = res.pres;
    sol.dual_residual = res.dres;

    const auto& z = res.state;
    auto block_matrix = [&](const RealVector& vec, size_t b, double scale) {
        const int d = cp.prog.dims[b];
        const RealMatrix m =
            scale * detail::smat(vec.segment(cp.prog.offs[b], detail::svec_dim(d)), d);
        if (cp.embedded[b]) return detail::unembed_herm(m.cast<Complex>());
        Matrix out = m.cast<Complex>();
        return Matrix(0.5 * (out + out.adjoint()));
    };

    if (res.status == SolveStatus::Optimal || res.status == SolveStatus::MaxIterations ||
        res.status == SolveStatus::NumericalFailure) {
        sol.primal.resize(user_blocks);
        for (size_t b = 0; b < user_blocks; ++b)
            sol.primal[b] = block_matrix(z.x, b, cp.bscale / z.tau);
        const std::vector<double> y_full =
            expand_rows(RealVector(z.y * (cp.cscale / z.tau)));
        for (size_t i = 0; i < p.equalities.size(); ++i) sol.equality_duals[i] = y_full[i];
        for (size_t j = 0; j < lmi_count; ++j) sol.lmi_duals[j] = lmi_multiplier(y_full, j, 1.0);

        // objective in the user's sense; gap/dual in original units
        double cx = cp.prog.c.dot(z.x) / z.tau;
        double by = cp.prog.b.dot(z.y) / z.tau;
        sol.objective_value = cp.obj_sign * cx * cp.cscale * cp.bscale;
        sol.dual_objective = by * cp.cscale * cp.bscale;  // min-form dual value
        sol.gap = z.x.dot(z.s) / (z.tau * z.tau) * cp.cscale * cp.bscale;
#ifndef NDEBUG
        if (res.status == SolveStatus::Optimal && res.message.empty()) {
            const double pmin = cx * cp.cscale * cp.bscale;  // min-form primal value
            assert(pmin - sol.dual_objective >= -1e-6 * std::max(1.0, std::abs(pmin)));
        }
#endif
    } else if (res.status == SolveStatus::PrimalInfeasible) {
        // Farkas ray: A^T y + s = 0 (s >= 0), b.y > 0, normalized to b.y = 1.
        RealVector y = z.y;
        const double bty = cp.prog.b.dot(y) * cp.bscale;  // original-units b.y
        const std::vector<double> y_full = expand_rows(RealVector(y / bty));
        for (size_t i = 0; i < p.equalities.size(); ++i) sol.equality_duals[i] = y_full[i];
        for (size_t j = 0; j < lmi_count; ++j) sol.lmi_duals[j] = lmi_multiplier(y_full, j, 1.0);
        sol.message = "primal infeasible: improving ray with b.y = 1 in equality_duals";
    } else if (res.status == SolveStatus::DualInfeasible) {
        // Improving ray: A x = 0, x >= 0, <c_min, x> = -1.
        const double ctx = cp.prog.c.dot(z.x) * cp.cscale * cp.bscale;
        sol.primal.resize(user_blocks);
        for (size_t b = 0; b < user_blocks; ++b)
            sol.primal[b] = block_matrix(z.x, b, cp.bscale / std::abs(ctx));
        sol.message = "dual infeasible / primal unbounded: improving ray in primal";
    }
    return sol;
}

// ---- Sparse text export ----
// Interchange format for cross-checks against external conic solvers: the
// classic block-diagonal sparse layout (m, #blocks, block sizes, rhs vector,
// then "matrix block row col value" entries, 1-based, upper triangle).
// Complex blocks are embedded first, LMIs become slack blocks, so the file
// describes   max tr(F0 Y) s.t. tr(F_k Y) = c_k, Y >= 0   with F0 = -C_min;
// the exported problem's optimal value is the negation of ours (min-form).

inline std::string to_sdpa_sparse(const SdpProblem& p) {
    detail::CompiledProblem cp = detail::compile(p);
    const auto& prog = cp.prog;
    std::ostringstream os;
    os.precision(17);
    const int m = cp.full_rows;
    os << "\"exported by qsdp (block-diagonal sparse interchange)\n";
    os << m << "\n" << prog.dims.size() << "\n";
    for (size_t b = 0; b < prog.dims.size(); ++b) os << prog.dims[b] << (b + 1 < prog.dims.size() ? " " : "\n");
    // rhs in original units
    const SdpProblem flatless = cp.expanded.flat;
    for (int i = 0; i < m; ++i)
        os << flatless.equalities[static_cast<size_t>(i)].rhs << (i + 1 < m ? " " : "");
    os << "\n";

    auto emit_block = [&os](int mat_index, int block_index, const RealMatrix& mm) {
        for (int j = 0; j < mm.cols(); ++j)
            for (int i = 0; i <= j; ++i)
                if (std::abs(mm(i, j)) > 1e-14)
                    os << mat_index << " " << block_index + 1 << " " << i + 1 << " " << j + 1 << " "
                       << mm(i, j) << "\n";
    };

    // F0 = -C_min (original units)
    for (size_t b = 0; b < prog.dims.size(); ++b) {
        const int d = prog.dims[b];
        RealMatrix cb = -cp.cscale *
                        detail::smat(RealVector(prog.c.segment(prog.offs[b], detail::svec_dim(d))), d);
        emit_block(0, static_cast<int>(b), cb);
    }
    // Constraint matrices, re-expanded to full (pre-presolve) rows.
    for (int i = 0; i < m; ++i) {
        const auto& eq = flatless.equalities[static_cast<size_t>(i)];
        std::vector<RealMatrix> per_block(prog.dims.size());
        for (const auto& t : eq.terms) {
            const size_t b = static_cast<size_t>(t.block);
            RealMatrix a = detail::real_coeff(t.coeff, cp.embedded[b]);
            if (per_block[b].size() == 0) per_block[b] = a; else per_block[b] += a;
        }
        for (size_t b = 0; b < per_block.size(); ++b)
            if (per_block[b].size() != 0) emit_block(i + 1, static_cast<int>(b), per_block[b]);
    }
    return os.str();
}

}  // namespace qsdp
