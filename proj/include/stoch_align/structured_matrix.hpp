#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stoch_align/errors.hpp"

namespace stoch_align {

/// The n x n matrix with every diagonal entry equal to `diag` and every
/// off-diagonal entry equal to `off`, i.e. off * ones + (diag - off) * I.
///
/// Only (n, diag, off) are stored. Products and inverses stay in the family
/// and cost O(1); application to a vector costs O(n).
struct StructuredMatrix {
    int n = 0;
    double diag = 0.0;
    double off = 0.0;

    static StructuredMatrix identity(int n) { return {n, 1.0, 0.0}; }
    static StructuredMatrix ones(int n) { return {n, 1.0, 1.0}; }

    double at(int row, int col) const { return row == col ? diag : off; }

    friend StructuredMatrix operator*(double s, const StructuredMatrix& m) {
        return {m.n, s * m.diag, s * m.off};
    }
    friend StructuredMatrix operator*(const StructuredMatrix& m, double s) { return s * m; }
    friend StructuredMatrix operator/(const StructuredMatrix& m, double s) {
        return {m.n, m.diag / s, m.off / s};
    }
    friend StructuredMatrix operator+(const StructuredMatrix& a, const StructuredMatrix& b) {
        check_dims(a, b, "operator+");
        return {a.n, a.diag + b.diag, a.off + b.off};
    }
    friend StructuredMatrix operator-(const StructuredMatrix& a, const StructuredMatrix& b) {
        check_dims(a, b, "operator-");
        return {a.n, a.diag - b.diag, a.off - b.off};
    }

    static void check_dims(const StructuredMatrix& a, const StructuredMatrix& b, const char* op) {
        if (a.n != b.n) {
            throw std::invalid_argument(std::string(op) + ": dimension mismatch (" +
                                        std::to_string(a.n) + " vs " + std::to_string(b.n) + ")");
        }
    }
};

/// The stretch-mixing matrix: diagonal -1, off-diagonal 1/(n-1). Applied to
/// positions it yields stretches; its kernel is spanned by the all-ones vector.
inline StructuredMatrix mn(int n) {
    if (n < 2) {
        throw std::invalid_argument("mn: n must be >= 2 (got " + std::to_string(n) + ")");
    }
    return {n, -1.0, 1.0 / static_cast<double>(n - 1)};
}

/// Closed-form product. The family is commutative, so mul(a, b) == mul(b, a).
inline StructuredMatrix mul(const StructuredMatrix& a, const StructuredMatrix& b) {
    StructuredMatrix::check_dims(a, b, "mul");
    const double n = static_cast<double>(a.n);
    // Grouped so that swapping the operands gives bit-identical results.
    const double bb = a.off * b.off;
    return {a.n, a.diag * b.diag + (n - 1.0) * bb, (a.diag * b.off + b.diag * a.off) + (n - 2.0) * bb};
}

inline StructuredMatrix operator*(const StructuredMatrix& a, const StructuredMatrix& b) {
    return mul(a, b);
}

/// Closed-form inverse. Invertibility is tested exactly: the eigenvalues are
/// diag - off (multiplicity n - 1) and diag + (n - 1) * off.
inline StructuredMatrix inverse(const StructuredMatrix& m) {
    const double n = static_cast<double>(m.n);
    const double a = m.diag;
    const double b = m.off;
    if (a == b) {
        throw SingularMatrixError("inverse: singular structured matrix, diag == off (" +
                                  std::to_string(a) + ")");
    }
    if (a == -(n - 1.0) * b) {
        throw SingularMatrixError("inverse: singular structured matrix, diag == -(n-1)*off");
    }
    const double det_factor = (a - b) * (a + (n - 1.0) * b);
    return {m.n, (a + (n - 2.0) * b) / det_factor, -b / det_factor};
}

/// y = M v in one pass over v plus one combination pass.
inline void apply_into(const StructuredMatrix& m, std::span<const double> v, std::span<double> out) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    const double scale = m.diag - m.off;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = m.off * total + scale * v[i];
    }
}

inline std::vector<double> apply(const StructuredMatrix& m, std::span<const double> v) {
    if (static_cast<std::size_t>(m.n) != v.size()) {
        throw std::invalid_argument("apply: matrix is " + std::to_string(m.n) +
                                    "x" + std::to_string(m.n) + " but vector has length " +
                                    std::to_string(v.size()));
    }
    std::vector<double> out(v.size());
    apply_into(m, v, out);
    return out;
}

}  // namespace stoch_align
