#pragma once

#include "transim/common.hpp"

#include <span>
#include <vector>

namespace transim {

template <typename T>
struct Triplet {
    Index row = 0;
    Index col = 0;
    T value{};

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Square compressed-by-row matrix. Column indices within a row are sorted and
/// unique; construction helpers can force a structurally symmetric pattern and
/// a structurally present diagonal.
template <typename T>
class SparseMatrix {
public:
    SparseMatrix() = default;

    /// Duplicate coordinates are summed. With `symmetric_pattern`, (j,i) is
    /// inserted as an explicit zero wherever only (i,j) was given.
    static SparseMatrix from_triplets(Index dimension, std::span<const Triplet<T>> entries,
                                      bool ensure_diagonal = true, bool symmetric_pattern = true);

    [[nodiscard]] Index dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return values_.size(); }
    [[nodiscard]] std::span<const Index> row_ptr() const noexcept { return row_ptr_; }
    [[nodiscard]] std::span<const Index> col_idx() const noexcept { return col_idx_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return values_; }

    /// Returns zero for structurally absent entries.
    [[nodiscard]] T at(Index row, Index col) const;
    [[nodiscard]] bool contains(Index row, Index col) const;

    [[nodiscard]] std::vector<T> multiply(std::span<const T> x) const;

    /// Row-major sorted coordinate list, explicit zeros included.
    [[nodiscard]] std::vector<Triplet<T>> triplets() const;

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    Index dimension_ = 0;
    std::vector<Index> row_ptr_{0};
    std::vector<Index> col_idx_;
    std::vector<T> values_;
};

enum class Ordering { Natural, MinimumDegree };

/// Result of simulating Gaussian elimination on the symmetrized pattern.
struct SymbolicFactor {
    std::vector<Index> permutation;   // permutation[new] = old
    std::vector<Index> inverse;       // inverse[old] = new
    std::vector<std::vector<Index>> upper_pattern;  // per new row, sorted cols >= row
    std::size_t fill_in_count = 0;    // new off-diagonal pairs (i,j), i<j
};

/// Minimum-degree elimination order of the symmetrized pattern of `a`; ties go
/// to the lowest index.
template <typename T>
[[nodiscard]] std::vector<Index> minimum_degree_order(const SparseMatrix<T>& a);

template <typename T>
[[nodiscard]] SymbolicFactor symbolic_factorize(const SparseMatrix<T>& a, std::span<const Index> permutation);

template <typename T>
class LuFactors;

inline constexpr double kPivotTolerance = 1e-12;

/// Orders, then factorizes without further pivoting. Throws SingularMatrix when
/// a pivot magnitude falls below kPivotTolerance.
template <typename T>
[[nodiscard]] LuFactors<T> order_and_factorize(const SparseMatrix<T>& a,
                                               Ordering ordering = Ordering::MinimumDegree);

template <typename T>
class LuFactors {
public:
    [[nodiscard]] Index dimension() const noexcept { return dimension_; }
    [[nodiscard]] std::size_t fill_in_count() const noexcept { return fill_in_count_; }
    [[nodiscard]] std::span<const Index> permutation() const noexcept { return permutation_; }

    /// Unit lower factor and upper factor, both in the permuted numbering.
    [[nodiscard]] SparseMatrix<T> lower() const;
    [[nodiscard]] SparseMatrix<T> upper() const;

    [[nodiscard]] std::vector<T> solve(std::span<const T> rhs) const;
    /// Allocation-free variant; `work` is resized as needed.
    void solve_into(std::span<const T> rhs, std::span<T> x, std::vector<T>& work) const;

    template <typename U>
    friend LuFactors<U> order_and_factorize(const SparseMatrix<U>& a, Ordering ordering);

private:
    Index dimension_ = 0;
    std::vector<Index> permutation_;
    std::size_t fill_in_count_ = 0;
    // strictly lower, unit diagonal implied
    std::vector<Index> l_ptr_{0};
    std::vector<Index> l_idx_;
    std::vector<T> l_val_;
    // strictly upper plus separate diagonal
    std::vector<Index> u_ptr_{0};
    std::vector<Index> u_idx_;
    std::vector<T> u_val_;
    std::vector<T> u_diag_;
};

using ComplexMatrix = SparseMatrix<Complex>;
using RealMatrix = SparseMatrix<Real>;
using ComplexLu = LuFactors<Complex>;
using RealLu = LuFactors<Real>;

}  // namespace transim
