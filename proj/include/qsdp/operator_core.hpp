#pragma once
//
// Validated operator/state types for finite-dimensional quantum systems plus
// the tensor / partial-trace / Bloch toolkit the rest of the library builds on.
//
// Conventions:
//   * dense complex matrices (Eigen::MatrixXcd) throughout,
//   * subsystem 0 is the slowest-varying tensor index (kron order),
//   * dimensions stay small (products of qubits/qutrits, tens at most).

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsdp {

using Complex = std::complex<double>;
using Matrix  = Eigen::MatrixXcd;
using Vector  = Eigen::VectorXcd;

// Construction tolerances: clearly non-Hermitian input is rejected, roundoff-level
// asymmetry is symmetrized away so stored matrices are Hermitian to machine precision.
inline constexpr double kHermitianRejectTol = 1e-8;
inline constexpr double kEigenFloorTol      = 1e-9;  // how far below 0 a state eigenvalue may dip
inline constexpr double kTraceOneTol        = 1e-9;

// ---- Matrix literals ----

inline Matrix identity_op(int dim) {
    if (dim < 1) throw std::invalid_argument("identity_op: dim must be positive");
    return Matrix::Identity(dim, dim);
}

inline Matrix sigma_x() {
    Matrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}

inline Matrix sigma_y() {
    Matrix m(2, 2);
    m << Complex(0, 0), Complex(0, -1), Complex(0, 1), Complex(0, 0);
    return m;
}

inline Matrix sigma_z() {
    Matrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}

// ---- Validated types ----

class HermitianOperator {
public:
    explicit HermitianOperator(Matrix m) {
        if (m.rows() != m.cols() || m.rows() == 0)
            throw std::invalid_argument("HermitianOperator: matrix must be square and nonempty");
        const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
        if (asym > kHermitianRejectTol)
            throw std::invalid_argument("HermitianOperator: matrix is not Hermitian (max |A - A^dag| = " +
                                        std::to_string(asym) + ")");
        mat_ = 0.5 * (m + m.adjoint());  // exact Hermitian part
    }

    int dim() const { return static_cast<int>(mat_.rows()); }
    const Matrix& matrix() const { return mat_; }

private:
    Matrix mat_;
};

class DensityOperator {
public:
    explicit DensityOperator(const Matrix& m) : DensityOperator(HermitianOperator(m)) {}

    explicit DensityOperator(HermitianOperator op) : op_(std::move(op)) {
        const double tr = op_.matrix().trace().real();
        if (std::abs(tr - 1.0) > kTraceOneTol)
            throw std::invalid_argument("DensityOperator: trace must be 1 (got " + std::to_string(tr) + ")");
        Eigen::SelfAdjointEigenSolver<Matrix> es(op_.matrix(), Eigen::EigenvaluesOnly);
        const double lo = es.eigenvalues().minCoeff();
        if (lo < -kEigenFloorTol)
            throw std::invalid_argument("DensityOperator: not positive semidefinite (min eigenvalue " +
                                        std::to_string(lo) + ")");
    }

    int dim() const { return op_.dim(); }
    const Matrix& matrix() const { return op_.matrix(); }
    const HermitianOperator& op() const { return op_; }

private:
    HermitianOperator op_;
};

class SubsystemShape {
public:
    explicit SubsystemShape(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.empty()) throw std::invalid_argument("SubsystemShape: need at least one subsystem");
        for (int d : dims_)
            if (d < 1) throw std::invalid_argument("SubsystemShape: dimensions must be positive");
    }

    const std::vector<int>& dims() const { return dims_; }
    int subsystems() const { return static_cast<int>(dims_.size()); }
    int dim(int k) const { return dims_.at(static_cast<size_t>(k)); }
    int total() const {
        return std::accumulate(dims_.begin(), dims_.end(), 1, std::multiplies<int>());
    }

private:
    std::vector<int> dims_;
};

struct BlochVector {
    double x = 0.0, y = 0.0, z = 0.0;
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// ---- Tensor product ----
// tensor(a, b): the index of `a` varies slowest, matching kron(a, b).

inline Matrix tensor(const Matrix& a, const Matrix& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

inline HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(tensor(a.matrix(), b.matrix()));
}

namespace detail {

// Row/column strides of each subsystem in the flattened index (subsystem 0 slowest).
inline std::vector<int> subsystem_strides(const SubsystemShape& shape) {
    const int n = shape.subsystems();
    std::vector<int> stride(static_cast<size_t>(n), 1);
    for (int k = n - 2; k >= 0; --k)
        stride[static_cast<size_t>(k)] = stride[static_cast<size_t>(k + 1)] * shape.dim(k + 1);
    return stride;
}

inline void check_subsystem_subset(const SubsystemShape& shape, const std::vector<int>& subset,
                                   const char* who) {
    for (size_t i = 0; i < subset.size(); ++i) {
        if (subset[i] < 0 || subset[i] >= shape.subsystems())
            throw std::invalid_argument(std::string(who) + ": subsystem index out of range");
        if (i > 0 && subset[i] <= subset[i - 1])
            throw std::invalid_argument(std::string(who) + ": subsystem indices must be strictly increasing");
    }
}

}  // namespace detail

// ---- Partial trace ----
// Traces out every subsystem not listed in `keep`; kept subsystems preserve their
// relative order. `keep` may be empty, in which case the result is the 1x1 [tr m].

inline Matrix partial_trace(const Matrix& m, const SubsystemShape& shape,
                            const std::vector<int>& keep) {
    const int total = shape.total();
    if (m.rows() != m.cols() || m.rows() != total)
        throw std::invalid_argument("partial_trace: operator dimension does not match shape");
    detail::check_subsystem_subset(shape, keep, "partial_trace");

    std::vector<int> traced;
    for (int k = 0; k < shape.subsystems(); ++k)
        if (std::find(keep.begin(), keep.end(), k) == keep.end()) traced.push_back(k);

    const auto stride = detail::subsystem_strides(shape);
    int keep_dim = 1, traced_dim = 1;
    for (int k : keep) keep_dim *= shape.dim(k);
    for (int k : traced) traced_dim *= shape.dim(k);

    // Flattened index offsets for every kept-tuple and every traced-tuple.
    auto offsets = [&](const std::vector<int>& subs) {
        int count = 1;
        for (int k : subs) count *= shape.dim(k);
        std::vector<int> off(static_cast<size_t>(count), 0);
        for (int idx = 0; idx < count; ++idx) {
            int rem = idx, o = 0;
            for (auto it = subs.rbegin(); it != subs.rend(); ++it) {
                o += (rem % shape.dim(*it)) * stride[static_cast<size_t>(*it)];
                rem /= shape.dim(*it);
            }
            off[static_cast<size_t>(idx)] = o;
        }
        return off;
    };
    const auto keep_off = offsets(keep);
    const auto traced_off = offsets(traced);

    Matrix out = Matrix::Zero(keep_dim, keep_dim);
    for (int r = 0; r < keep_dim; ++r)
        for (int c = 0; c < keep_dim; ++c)
            for (int t = 0; t < traced_dim; ++t)
                out(r, c) += m(keep_off[static_cast<size_t>(r)] + traced_off[static_cast<size_t>(t)],
                               keep_off[static_cast<size_t>(c)] + traced_off[static_cast<size_t>(t)]);
    return out;
}

inline HermitianOperator partial_trace(const HermitianOperator& op, const SubsystemShape& shape,
                                       const std::vector<int>& keep) {
    return HermitianOperator(partial_trace(op.matrix(), shape, keep));
}

// ---- Lift ----
// Adjoint of partial_trace: extend an operator acting on the subsystems listed in
// `positions` to the full shape by tensoring identity everywhere else, i.e.
//   tr(lift(E)^dag M) == tr(E^dag partial_trace(M, positions))  for all M.

inline Matrix lift_to_shape(const Matrix& op, const SubsystemShape& shape,
                            const std::vector<int>& positions) {
    detail::check_subsystem_subset(shape, positions, "lift_to_shape");
    int pos_dim = 1;
    for (int k : positions) pos_dim *= shape.dim(k);
    if (op.rows() != op.cols() || op.rows() != pos_dim)
        throw std::invalid_argument("lift_to_shape: operator dimension does not match listed subsystems");

    std::vector<int> rest;
    for (int k = 0; k < shape.subsystems(); ++k)
        if (std::find(positions.begin(), positions.end(), k) == positions.end()) rest.push_back(k);

    const auto stride = detail::subsystem_strides(shape);
    auto offsets = [&](const std::vector<int>& subs) {
        int count = 1;
        for (int k : subs) count *= shape.dim(k);
        std::vector<int> off(static_cast<size_t>(count), 0);
        for (int idx = 0; idx < count; ++idx) {
            int rem = idx, o = 0;
            for (auto it = subs.rbegin(); it != subs.rend(); ++it) {
                o += (rem % shape.dim(*it)) * stride[static_cast<size_t>(*it)];
                rem /= shape.dim(*it);
            }
            off[static_cast<size_t>(idx)] = o;
        }
        return off;
    };
    const auto pos_off = offsets(positions);
    const auto rest_off = offsets(rest);

    Matrix out = Matrix::Zero(shape.total(), shape.total());
    for (size_t r = 0; r < pos_off.size(); ++r)
        for (size_t c = 0; c < pos_off.size(); ++c) {
            const Complex v = op(static_cast<int>(r), static_cast<int>(c));
            if (v == Complex(0, 0)) continue;
            for (int t : rest_off) out(pos_off[r] + t, pos_off[c] + t) = v;
        }
    return out;
}

// ---- Bloch sphere ----
// rho = (I + x sx + y sy + z sz) / 2; a valid state iff |r|_2 <= 1.

inline DensityOperator bloch_to_state(const BlochVector& r) {
    Matrix m = 0.5 * (identity_op(2) + r.x * sigma_x() + r.y * sigma_y() + r.z * sigma_z());
    return DensityOperator(m);  // rejects |r| > 1 via the eigenvalue floor
}

inline BlochVector state_to_bloch(const DensityOperator& rho) {
    if (rho.dim() != 2)
        throw std::invalid_argument("state_to_bloch: defined for qubits only (dim 2)");
    const Matrix& m = rho.matrix();
    BlochVector r;
    r.x = (m * sigma_x()).trace().real();
    r.y = (m * sigma_y()).trace().real();
    r.z = (m * sigma_z()).trace().real();
    return r;
}

// ---- Spectral bounds ----

inline std::pair<double, double> eig_bounds(const HermitianOperator& op) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(op.matrix(), Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

// Convenience overload for matrices that are Hermitian by construction.
inline std::pair<double, double> eig_bounds(const Matrix& m) {
    return eig_bounds(HermitianOperator(m));
}

// ---- 2x2 block embedding ----
// Assemble [[tl, tr], [tr^dag, br]]; Hermitian whenever tl and br are.

inline Matrix block_embed_2x2(const Matrix& tl, const Matrix& tr, const Matrix& br) {
    const auto d = tl.rows();
    if (tl.cols() != d || tr.rows() != d || tr.cols() != d || br.rows() != d || br.cols() != d)
        throw std::invalid_argument("block_embed_2x2: all blocks must be square with equal dimension");
    Matrix out(2 * d, 2 * d);
    out.topLeftCorner(d, d) = tl;
    out.topRightCorner(d, d) = tr;
    out.bottomLeftCorner(d, d) = tr.adjoint();
    out.bottomRightCorner(d, d) = br;
    return out;
}

inline HermitianOperator block_embed_2x2(const HermitianOperator& tl, const Matrix& tr,
                                         const HermitianOperator& br) {
    return HermitianOperator(block_embed_2x2(tl.matrix(), tr, br.matrix()));
}

// ---- Small helpers shared across modules ----

// Real Hilbert-Schmidt inner product tr(A B) for Hermitian A, B.
inline double hs_inner(const Matrix& a, const Matrix& b) {
    return (a * b).trace().real();
}

}  // namespace qsdp
